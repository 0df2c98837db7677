#pragma once

#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "syntaxnav/params.hpp"
#include "syntaxnav/tensor.hpp"

namespace syntaxnav {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning Tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

  Tape* tape() const noexcept { return tape_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode record. Nodes are appended in evaluation order and the
// backward pass visits them in exactly the reverse order.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  explicit Tape(const ParameterSet& params);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var param(ParamId id);
  Var param(std::string_view name) { return param(params_->id(name)); }

  const ParameterSet& parameters() const noexcept { return *params_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradient of a 1x1 loss with respect to every parameter (zero when the
  // parameter is off the path). Throws NotScalar or DetachedLoss.
  Gradients backward(Var loss);

  // Valid after backward(); zero-sized when the node received no gradient.
  const Tensor& grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id())).grad; }

  // Primitive authoring interface.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  const Tensor& value_of(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor& grad_of(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  template <typename Expr>
  void accumulate(int id, const Expr& contribution) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = contribution;
    } else {
      n.grad += contribution;
    }
  }

  // grad += a * b without a temporary; rank-1 updates skip the GEMM kernel.
  void accumulate_product(int id, const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b);

  template <typename Expr>
  void accumulate_block(int id, Eigen::Index row, Eigen::Index col, const Expr& contribution) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
    n.grad.block(row, col, contribution.rows(), contribution.cols()) += contribution;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::ptrdiff_t param = -1;
    BackwardFn backward;
  };

  void check_owner(Var v) const;

  const ParameterSet* params_;
  std::vector<Node> nodes_;
  std::vector<int> param_leaf_;
};

// Differentiable primitives. Column vectors are n x 1 tensors.
Var matmul(Var a, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var operator*(double s, Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var transpose(Var a);
Var sum(Var a);
Var add_n(std::span<const Var> terms);
Var mean_n(std::span<const Var> terms);
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var hstack(std::span<const Var> columns);
Var slice(Var a, Eigen::Index start, Eigen::Index length);
Var row_of(Var matrix, Eigen::Index row);
Var pick(Var a, Eigen::Index row);
Var softmax(Var logits);
Var log_softmax(Var logits);
Var detach(Var a);

}  // namespace syntaxnav
