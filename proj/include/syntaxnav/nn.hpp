#pragma once

#include <functional>
#include <random>
#include <string>
#include <string_view>

#include "syntaxnav/params.hpp"
#include "syntaxnav/tape.hpp"

namespace syntaxnav {

// Gate blocks are stacked in the order input, forget, output, candidate.
struct LstmParams {
  ParamId W;  // 4H x in
  ParamId U;  // 4H x H
  ParamId b;  // 4H x 1
  Eigen::Index input = 0;
  Eigen::Index hidden = 0;
};

LstmParams add_lstm_parameters(ParameterSet& params, const std::string& prefix, Eigen::Index input,
                               Eigen::Index hidden, std::mt19937_64& rng);
LstmParams lookup_lstm_parameters(const ParameterSet& params, const std::string& prefix);

struct LstmState {
  Var h;
  Var c;
};

// c' = f * c + i * g;  h' = o * tanh(c')
LstmState lstm_cell(Tape& tape, Var x, Var h, Var c, const LstmParams& p);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_row = 0;
  Eigen::Index worst_col = 0;
  std::size_t coordinates = 0;
};

// Compares backward() against central differences for every coordinate of
// every parameter whose name starts with `prefix`. `build_loss` must record a
// scalar loss on the tape it is given and be deterministic.
GradCheckReport grad_check(ParameterSet& params, const std::function<Var(Tape&)>& build_loss, double eps = 1e-5,
                           std::string_view prefix = "");

}  // namespace syntaxnav
