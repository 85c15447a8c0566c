#pragma once

#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "svlab/numcore/tensor.hpp"

namespace svlab {

enum class Op {
  leaf,
  add,
  sub,
  mul,
  scale,
  affine,
  tanh,
  sigmoid,
  exp,
  log,
  square,
  clamp,
  matmul,
  transpose,
  add_bias,
  broadcast_rows,
  sum,
  mean,
  sum_rows,
  slice_cols,
  concat_cols,
  reshape,
  conv2d,
  conv_transpose2d,
  add_channel_bias,
};

std::string_view op_name(Op op);

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the reverse-mode graph. `grad` is empty (rank 0, size 1)
/// until the first backward pass reaches the node.
struct Node {
  Tensor value;
  Tensor grad;
  bool has_grad = false;
  bool requires_grad = false;
  Op op = Op::leaf;
  std::vector<NodePtr> parents;
  /// Pushes this node's grad into its parents' grads.
  std::function<void(Node&)> backward_fn;

  Tensor& grad_buffer();
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  /// A leaf. Parameters pass requires_grad = true.
  explicit Var(Tensor value, bool requires_grad = false);
  static Var parameter(Tensor value) { return Var(std::move(value), true); }
  static Var constant(Tensor value) { return Var(std::move(value), false); }

  const Tensor& value() const { return node_->value; }
  /// Mutable access to a leaf's value (optimizer updates, finite differences).
  Tensor& mutable_value();
  /// Gradient accumulated so far; zeros if backward never reached the node.
  Tensor grad() const;
  void zero_grad();

  const Shape& shape() const { return node_->value.shape(); }
  Op op() const { return node_->op; }
  bool requires_grad() const { return node_->requires_grad; }
  bool valid() const { return static_cast<bool>(node_); }
  const NodePtr& node() const { return node_; }

  static Var from_node(NodePtr node);

 private:
  NodePtr node_;
};

/// Reverse pass from a one-element root. Interior gradients are recomputed
/// on every call; leaf gradients accumulate, so calling backward twice on the
/// same graph without zero_grad() doubles them.
void backward(const Var& root);

/// When enabled (the default), every graph op checks its output for NaN/Inf
/// and throws NumericalError.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// Elementwise. Binary ops require equal shapes, or one side with a single
// element (scalar broadcast).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// s * a + c
Var affine(const Var& a, double s, double c);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
/// Throws DomainError on non-positive input.
Var log(const Var& a);
Var square(const Var& a);
/// Gradient flows only where lo < a < hi.
Var clamp(const Var& a, double lo, double hi);

// Linear algebra on rank-2 values.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
/// x [B x n] + bias [n] broadcast over rows.
Var add_bias(const Var& x, const Var& bias);
/// Repeat a [n] or [1 x n] row to [rows x n].
Var broadcast_rows(const Var& row, std::size_t rows);

// Reductions.
Var sum(const Var& a);
Var mean(const Var& a);
/// [B x n] -> [B]
Var sum_rows(const Var& a);

// Structural.
Var slice_cols(const Var& a, std::size_t start, std::size_t count);
Var concat_cols(const Var& a, const Var& b);
Var reshape(const Var& a, Shape shape);

// Convolutions. Inputs are [C x H x W] or batched [B x C x H x W];
// conv2d kernels are [C_out x C_in x kH x kW] (cross-correlation);
// conv_transpose2d kernels are [C_in x C_out x kH x kW] and compute the
// adjoint of conv2d with the same stride/padding.
Var conv2d(const Var& input, const Var& kernels, std::size_t stride, std::size_t padding);
Var conv_transpose2d(const Var& input, const Var& kernels, std::size_t stride, std::size_t padding);
/// x [B x C x H x W] (or [C x H x W]) + bias [C]
Var add_channel_bias(const Var& x, const Var& bias);

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);
std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                       std::size_t padding);

}  // namespace svlab
