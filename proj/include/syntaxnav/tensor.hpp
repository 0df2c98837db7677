#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "syntaxnav/error.hpp"

namespace syntaxnav {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// All model state is double precision; vectors are n x 1 matrices.
using Tensor = MatrixX<double>;
using Vector = VectorX<double>;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!all_finite(m)) throw Error(Errc::NonFinite, std::string(what) + " contains NaN or Inf");
}

// Numerically stable softmax over a column vector.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  if (logits.size() == 0) throw Error(Errc::EmptyInput, "softmax of an empty vector");
  const Scalar shift = logits.maxCoeff();
  VectorX<Scalar> e = (logits.array() - shift).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
VectorX<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  if (logits.size() == 0) throw Error(Errc::EmptyInput, "log_softmax of an empty vector");
  const Scalar shift = logits.maxCoeff();
  const Scalar lse = shift + std::log((logits.array() - shift).exp().sum());
  return (logits.array() - lse).matrix();
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) / (Scalar(1) + (-x.array()).exp())).matrix();
}

// Shannon entropy (nats) of a probability vector; 0 log 0 = 0.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Scalar h = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > Scalar(0)) h -= p(i) * std::log(p(i));
  }
  return h;
}

}  // namespace syntaxnav
