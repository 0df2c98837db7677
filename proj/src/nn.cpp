#include "syntaxnav/nn.hpp"

#include <algorithm>
#include <cmath>

namespace syntaxnav {

LstmParams add_lstm_parameters(ParameterSet& params, const std::string& prefix, Eigen::Index input,
                               Eigen::Index hidden, std::mt19937_64& rng) {
  LstmParams p;
  p.W = params.add(prefix + ".W", uniform_init(4 * hidden, input, rng));
  p.U = params.add(prefix + ".U", uniform_init(4 * hidden, hidden, rng));
  p.b = params.add(prefix + ".b", Tensor::Zero(4 * hidden, 1));
  p.input = input;
  p.hidden = hidden;
  return p;
}

LstmParams lookup_lstm_parameters(const ParameterSet& params, const std::string& prefix) {
  LstmParams p;
  p.W = params.id(prefix + ".W");
  p.U = params.id(prefix + ".U");
  p.b = params.id(prefix + ".b");
  p.input = params.value(p.W).cols();
  p.hidden = params.value(p.U).cols();
  return p;
}

LstmState lstm_cell(Tape& tape, Var x, Var h, Var c, const LstmParams& p) {
  const Eigen::Index H = p.hidden;
  if (x.rows() != p.input || x.cols() != 1 || h.rows() != H || c.rows() != H) {
    throw Error(Errc::ShapeMismatch, "lstm_cell: expected input " + std::to_string(p.input) + " and hidden " +
                                         std::to_string(H));
  }
  Var z = matmul(tape.param(p.W), x) + matmul(tape.param(p.U), h) + tape.param(p.b);
  Var i = sigmoid(slice(z, 0, H));
  Var f = sigmoid(slice(z, H, H));
  Var o = sigmoid(slice(z, 2 * H, H));
  Var g = tanh(slice(z, 3 * H, H));
  Var c_next = hadamard(f, c) + hadamard(i, g);
  Var h_next = hadamard(o, tanh(c_next));
  return {h_next, c_next};
}

GradCheckReport grad_check(ParameterSet& params, const std::function<Var(Tape&)>& build_loss, double eps,
                           std::string_view prefix) {
  if (!(eps > 0)) throw Error(Errc::ConfigInvalid, "grad_check step must be positive");

  auto evaluate = [&]() {
    Tape tape(params);
    return build_loss(tape).scalar();
  };

  Gradients analytic;
  double base = 0;
  {
    Tape tape(params);
    Var loss = build_loss(tape);
    base = loss.scalar();
    analytic = tape.backward(loss);
  }
  if (evaluate() != base) throw Error(Errc::NonDeterministicFunction, "two evaluations at the same point disagree");

  GradCheckReport report;
  for (ParamId p : params.ids()) {
    if (params.name(p).compare(0, prefix.size(), prefix) != 0) continue;
    Tensor& theta = params.value(p);
    for (Eigen::Index r = 0; r < theta.rows(); ++r) {
      for (Eigen::Index c = 0; c < theta.cols(); ++c) {
        const double saved = theta(r, c);
        theta(r, c) = saved + eps;
        const double up = evaluate();
        theta(r, c) = saved - eps;
        const double down = evaluate();
        theta(r, c) = saved;

        const double numeric = (up - down) / (2 * eps);
        const double a = analytic[p](r, c);
        const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        ++report.coordinates;
        if (err > report.max_relative_error || report.worst_parameter.empty()) {
          report.max_relative_error = err;
          report.worst_parameter = params.name(p);
          report.worst_row = r;
          report.worst_col = c;
        }
      }
    }
  }
  return report;
}

}  // namespace syntaxnav
