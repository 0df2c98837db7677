#include "syntaxnav/tape.hpp"

#include <string>

namespace syntaxnav {

const Tensor& Var::value() const {
  if (!tape_) throw Error(Errc::EmptyInput, "use of an unbound Var");
  return tape_->value_of(id_);
}

double Var::scalar() const {
  const Tensor& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw Error(Errc::NotScalar, "value is not 1x1");
  return v(0, 0);
}

Tape::Tape(const ParameterSet& params) : params_(&params), param_leaf_(params.size(), -1) {}

void Tape::check_owner(Var v) const {
  if (v.tape() != this) throw Error(Errc::ShapeMismatch, "Var belongs to a different tape");
}

Var Tape::constant(Tensor value) {
  require_finite(value, "constant");
  nodes_.push_back(Node{std::move(value), Tensor(), false, -1, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(ParamId id) {
  if (id.index >= param_leaf_.size()) throw Error(Errc::UnknownParameter, "parameter id out of range");
  int& leaf = param_leaf_[id.index];
  if (leaf < 0) {
    nodes_.push_back(Node{params_->value(id), Tensor(), true, static_cast<std::ptrdiff_t>(id.index), nullptr});
    leaf = static_cast<int>(nodes_.size()) - 1;
  }
  return Var(this, leaf);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (Var v : inputs) {
    check_owner(v);
    needs = needs || nodes_[static_cast<std::size_t>(v.id())].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), Tensor(), needs, -1, needs ? std::move(backward) : nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Gradients Tape::backward(Var loss) {
  check_owner(loss);
  Node& top = nodes_[static_cast<std::size_t>(loss.id())];
  if (top.value.rows() != 1 || top.value.cols() != 1) {
    throw Error(Errc::NotScalar, "loss has shape " + std::to_string(top.value.rows()) + "x" +
                                     std::to_string(top.value.cols()));
  }
  if (!top.needs_grad) throw Error(Errc::DetachedLoss, "loss does not depend on any parameter");

  for (auto& n : nodes_) n.grad.resize(0, 0);
  top.grad = Tensor::Ones(1, 1);
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward && n.grad.size() != 0) n.backward(*this, id);
  }

  Gradients grads(*params_);
  for (std::size_t p = 0; p < param_leaf_.size(); ++p) {
    const int leaf = param_leaf_[p];
    if (leaf >= 0 && nodes_[static_cast<std::size_t>(leaf)].grad.size() != 0) {
      grads[ParamId{p}] += nodes_[static_cast<std::size_t>(leaf)].grad;
    }
  }
  return grads;
}

void Tape::accumulate_product(int id, const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
  if (!transpose_a && transpose_b && a.cols() == 1) {
    n.grad.noalias() += a.col(0) * b.col(0).transpose();
  } else if (transpose_a && !transpose_b && b.cols() == 1) {
    n.grad.col(0).noalias() += a.transpose() * b.col(0);
  } else if (transpose_a && transpose_b) {
    n.grad.noalias() += a.transpose() * b.transpose();
  } else if (transpose_a) {
    n.grad.noalias() += a.transpose() * b;
  } else if (transpose_b) {
    n.grad.noalias() += a * b.transpose();
  } else {
    n.grad.noalias() += a * b;
  }
}

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw Error(Errc::EmptyInput, "use of an unbound Var");
  return *a.tape();
}

void same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(Errc::ShapeMismatch, std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                         std::to_string(b.cols()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw Error(Errc::ShapeMismatch, "matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const int ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (t.needs_grad(ia)) t.accumulate_product(ia, g, t.value_of(ib), false, true);
    if (t.needs_grad(ib)) t.accumulate_product(ib, t.value_of(ia), g, true, false);
  });
}

Var operator+(Var a, Var b) {
  same_shape(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad_of(self));
    t.accumulate(ib, t.grad_of(self));
  });
}

Var operator-(Var a, Var b) {
  same_shape(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad_of(self));
    t.accumulate(ib, -t.grad_of(self));
  });
}

Var hadamard(Var a, Var b) {
  same_shape(a, b, "hadamard");
  const int ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    t.accumulate(ia, g.cwiseProduct(t.value_of(ib)));
    t.accumulate(ib, g.cwiseProduct(t.value_of(ia)));
  });
}

Var scale(Var a, double s) {
  const int ia = a.id();
  return tape_of(a).record(s * a.value(), {a}, [ia, s](Tape& t, int self) { t.accumulate(ia, s * t.grad_of(self)); });
}

Var operator*(double s, Var a) { return scale(a, s); }

Var sigmoid(Var a) {
  const int ia = a.id();
  Tensor y = syntaxnav::sigmoid(a.value());
  return tape_of(a).record(std::move(y), {a}, [ia](Tape& t, int self) {
    const Tensor& y = t.value_of(self);
    t.accumulate(ia, t.grad_of(self).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var tanh(Var a) {
  const int ia = a.id();
  Tensor y = a.value().array().tanh().matrix();
  return tape_of(a).record(std::move(y), {a}, [ia](Tape& t, int self) {
    const Tensor& y = t.value_of(self);
    t.accumulate(ia, t.grad_of(self).cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var relu(Var a) {
  const int ia = a.id();
  return tape_of(a).record(a.value().cwiseMax(0.0), {a}, [ia](Tape& t, int self) {
    const Tensor& x = t.value_of(ia);
    t.accumulate(ia, (x.array() > 0.0).select(t.grad_of(self), 0.0));
  });
}

Var exp(Var a) {
  const int ia = a.id();
  return tape_of(a).record(a.value().array().exp().matrix(), {a}, [ia](Tape& t, int self) {
    t.accumulate(ia, t.grad_of(self).cwiseProduct(t.value_of(self)));
  });
}

Var transpose(Var a) {
  const int ia = a.id();
  return tape_of(a).record(a.value().transpose(), {a},
                           [ia](Tape& t, int self) { t.accumulate(ia, t.grad_of(self).transpose()); });
}

Var sum(Var a) {
  const int ia = a.id();
  Tensor s(1, 1);
  s(0, 0) = a.value().sum();
  return tape_of(a).record(std::move(s), {a}, [ia](Tape& t, int self) {
    const Tensor& x = t.value_of(ia);
    t.accumulate(ia, Tensor::Constant(x.rows(), x.cols(), t.grad_of(self)(0, 0)));
  });
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) throw Error(Errc::EmptyInput, "add_n of no terms");
  Tensor total = terms[0].value();
  for (std::size_t i = 1; i < terms.size(); ++i) {
    if (terms[i].rows() != total.rows() || terms[i].cols() != total.cols()) {
      throw Error(Errc::ShapeMismatch, "add_n: terms differ in shape");
    }
    total += terms[i].value();
  }
  std::vector<int> ids;
  ids.reserve(terms.size());
  for (Var v : terms) ids.push_back(v.id());
  return tape_of(terms[0]).record(std::move(total), terms, [ids = std::move(ids)](Tape& t, int self) {
    for (int id : ids) t.accumulate(id, t.grad_of(self));
  });
}

Var mean_n(std::span<const Var> terms) {
  return scale(add_n(terms), 1.0 / static_cast<double>(terms.size()));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw Error(Errc::EmptyInput, "concat of no parts");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (Var v : parts) {
    if (v.cols() != cols) throw Error(Errc::ShapeMismatch, "concat: column counts differ");
    rows += v.rows();
  }
  Tensor out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index at = 0;
  for (Var v : parts) {
    out.middleRows(at, v.rows()) = v.value();
    spans.emplace_back(v.id(), at);
    at += v.rows();
  }
  return tape_of(parts[0]).record(std::move(out), parts, [spans = std::move(spans)](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    for (auto [id, offset] : spans) {
      if (t.needs_grad(id)) t.accumulate(id, g.middleRows(offset, t.value_of(id).rows()));
    }
  });
}

Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

Var hstack(std::span<const Var> columns) {
  if (columns.empty()) throw Error(Errc::EmptyInput, "hstack of no columns");
  const Eigen::Index rows = columns[0].rows();
  Tensor out(rows, static_cast<Eigen::Index>(columns.size()));
  std::vector<int> ids;
  ids.reserve(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].rows() != rows || columns[c].cols() != 1) {
      throw Error(Errc::ShapeMismatch, "hstack expects equal-height column vectors");
    }
    out.col(static_cast<Eigen::Index>(c)) = columns[c].value();
    ids.push_back(columns[c].id());
  }
  return tape_of(columns[0]).record(std::move(out), columns, [ids = std::move(ids)](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    for (std::size_t c = 0; c < ids.size(); ++c) t.accumulate(ids[c], g.col(static_cast<Eigen::Index>(c)));
  });
}

Var slice(Var a, Eigen::Index start, Eigen::Index length) {
  if (start < 0 || length < 0 || start + length > a.rows()) throw Error(Errc::ShapeMismatch, "slice out of range");
  const int ia = a.id();
  return tape_of(a).record(a.value().middleRows(start, length), {a}, [ia, start](Tape& t, int self) {
    t.accumulate_block(ia, start, 0, t.grad_of(self));
  });
}

Var row_of(Var matrix, Eigen::Index row) {
  if (row < 0 || row >= matrix.rows()) throw Error(Errc::ShapeMismatch, "row index out of range");
  const int im = matrix.id();
  return tape_of(matrix).record(matrix.value().row(row).transpose(), {matrix}, [im, row](Tape& t, int self) {
    t.accumulate_block(im, row, 0, t.grad_of(self).transpose());
  });
}

Var pick(Var a, Eigen::Index row) {
  if (a.cols() != 1 || row < 0 || row >= a.rows()) throw Error(Errc::ShapeMismatch, "pick out of range");
  const int ia = a.id();
  Tensor s(1, 1);
  s(0, 0) = a.value()(row, 0);
  return tape_of(a).record(std::move(s), {a}, [ia, row](Tape& t, int self) {
    t.accumulate_block(ia, row, 0, t.grad_of(self));
  });
}

Var softmax(Var logits) {
  if (logits.cols() != 1) throw Error(Errc::ShapeMismatch, "softmax expects a column vector");
  const int ia = logits.id();
  Tensor p = syntaxnav::softmax(logits.value().col(0));
  return tape_of(logits).record(std::move(p), {logits}, [ia](Tape& t, int self) {
    const Tensor& p = t.value_of(self);
    const Tensor& g = t.grad_of(self);
    const double dot = p.cwiseProduct(g).sum();
    t.accumulate(ia, p.cwiseProduct((g.array() - dot).matrix()));
  });
}

Var log_softmax(Var logits) {
  if (logits.cols() != 1) throw Error(Errc::ShapeMismatch, "log_softmax expects a column vector");
  const int ia = logits.id();
  Tensor y = syntaxnav::log_softmax(logits.value().col(0));
  return tape_of(logits).record(std::move(y), {logits}, [ia](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    const Tensor p = t.value_of(self).array().exp().matrix();
    t.accumulate(ia, g - p * g.sum());
  });
}

Var detach(Var a) { return tape_of(a).constant(a.value()); }

}  // namespace syntaxnav
