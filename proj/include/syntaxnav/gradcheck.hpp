#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "syntaxnav/nn.hpp"

namespace syntaxnav {

inline constexpr double kGradTolerance = 1e-4;

struct GradCheckRow {
  std::string name;
  GradCheckReport report;  // worst coordinate over every parameter of the submodule

  bool passed() const noexcept { return report.max_relative_error <= kGradTolerance; }
};

// Finite-difference check of every parameterized submodule on a small
// random world and model: embedding, Bi-LSTM (both layers), Tree-LSTM,
// mean-pool, attention, decoder and value head. The loss runs a teacher
// rollout and combines imitation, policy, entropy and value terms.
std::vector<GradCheckRow> gradient_suite(std::uint64_t seed, double eps = 1e-5);

}  // namespace syntaxnav
