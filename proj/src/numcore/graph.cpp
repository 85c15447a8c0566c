#include "svlab/numcore/graph.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <unordered_set>

#include "conv_kernels.hpp"
#include "svlab/error.hpp"

namespace svlab {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

bool g_finite_checks = true;

Var make(Tensor value, Op op, std::vector<NodePtr> parents, std::function<void(Node&)> fn) {
  if (g_finite_checks && !value.all_finite()) {
    throw NumericalError(std::string(op_name(op)) + " produced a non-finite value");
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  for (const auto& p : parents) node->requires_grad = node->requires_grad || p->requires_grad;
  node->parents = std::move(parents);
  if (node->requires_grad) node->backward_fn = std::move(fn);
  return Var::from_node(std::move(node));
}

void accumulate(const NodePtr& target, const Tensor& g) {
  if (!target->requires_grad) return;
  tensor::axpy(1.0, g, target->grad_buffer());
}

void require_rank(const Var& a, std::size_t rank, const char* what) {
  if (a.value().rank() != rank) {
    throw DimensionError(std::string(what) + " expects rank " + std::to_string(rank) + ", got " +
                         shape_str(a.shape()));
  }
}

enum class Broadcast { none, left, right };

Broadcast binary_broadcast(const Var& a, const Var& b, const char* what) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (a.value().numel() == 1) return Broadcast::left;
  if (b.value().numel() == 1) return Broadcast::right;
  throw DimensionError(std::string(what) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Applies f(x, y) elementwise with scalar broadcast; `out_shape` follows the
// non-scalar side.
template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, Broadcast bc, F f) {
  if (bc == Broadcast::left) {
    Tensor out(b.shape());
    const double x = a[0];
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(x, b[i]);
    return out;
  }
  Tensor out(a.shape());
  if (bc == Broadcast::right) {
    const double y = b[0];
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(a[i], y);
  } else {
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(a[i], b[i]);
  }
  return out;
}

// Adds `g` (shaped like the output) into a parent that may have been a
// broadcast scalar.
void accumulate_broadcast(const NodePtr& target, const Tensor& g) {
  if (!target->requires_grad) return;
  if (target->value.numel() == 1 && g.numel() != 1) {
    target->grad_buffer()[0] += tensor::sum(g);
  } else {
    tensor::axpy(1.0, g, target->grad_buffer());
  }
}

template <typename F, typename D>
Var unary(const Var& a, Op op, F f, D dfdx_from_x_y) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = f(x[i]);
  return make(std::move(y), op, {a.node()}, [dfdx_from_x_y](Node& self) {
    const NodePtr& p = self.parents[0];
    if (!p->requires_grad) return;
    Tensor& pg = p->grad_buffer();
    for (std::size_t i = 0; i < pg.numel(); ++i) {
      pg[i] += self.grad[i] * dfdx_from_x_y(p->value[i], self.value[i]);
    }
  });
}

struct ConvDims {
  std::size_t batch;
  bool batched;
  std::size_t channels, height, width;
};

ConvDims conv_input_dims(const Tensor& x, const char* what) {
  if (x.rank() == 4) return {x.dim(0), true, x.dim(1), x.dim(2), x.dim(3)};
  if (x.rank() == 3) return {1, false, x.dim(0), x.dim(1), x.dim(2)};
  throw DimensionError(std::string(what) + " expects [C x H x W] or [B x C x H x W], got " + shape_str(x.shape()));
}

// [O x B*P] (column-major over batch) <-> [B x O x P]
void columns_to_batch(const RowMatrix& r, std::size_t batch, std::size_t channels, std::size_t plane,
                      std::span<double> out) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double* src = r.data() + c * batch * plane + b * plane;
      double* dst = out.data() + (b * channels + c) * plane;
      std::copy(src, src + plane, dst);
    }
  }
}

RowMatrix batch_to_columns(std::span<const double> in, std::size_t batch, std::size_t channels, std::size_t plane) {
  RowMatrix r(channels, batch * plane);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double* src = in.data() + (b * channels + c) * plane;
      std::copy(src, src + plane, r.data() + c * batch * plane + b * plane);
    }
  }
  return r;
}

Shape conv_output_shape(const ConvDims& d, std::size_t channels, std::size_t h, std::size_t w) {
  if (d.batched) return Shape{d.batch, channels, h, w};
  return Shape{channels, h, w};
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::scale: return "scale";
    case Op::affine: return "affine";
    case Op::tanh: return "tanh";
    case Op::sigmoid: return "sigmoid";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::square: return "square";
    case Op::clamp: return "clamp";
    case Op::matmul: return "matmul";
    case Op::transpose: return "transpose";
    case Op::add_bias: return "add_bias";
    case Op::broadcast_rows: return "broadcast_rows";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::sum_rows: return "sum_rows";
    case Op::slice_cols: return "slice_cols";
    case Op::concat_cols: return "concat_cols";
    case Op::reshape: return "reshape";
    case Op::conv2d: return "conv2d";
    case Op::conv_transpose2d: return "conv_transpose2d";
    case Op::add_channel_bias: return "add_channel_bias";
  }
  return "unknown";
}

Tensor& Node::grad_buffer() {
  if (!has_grad) {
    grad = Tensor(value.shape(), 0.0);
    has_grad = true;
  }
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::from_node(NodePtr node) {
  Var v;
  v.node_ = std::move(node);
  return v;
}

Tensor& Var::mutable_value() {
  if (node_->op != Op::leaf) throw ContractError("only leaf values may be modified in place");
  return node_->value;
}

Tensor Var::grad() const {
  if (node_->has_grad) return node_->grad;
  return Tensor(node_->value.shape(), 0.0);
}

void Var::zero_grad() {
  if (node_->has_grad) {
    for (auto& g : node_->grad.data()) g = 0.0;
  }
}

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks_enabled() { return g_finite_checks; }

void backward(const Var& root) {
  if (!root.valid() || root.value().numel() != 1) {
    throw ContractError("backward() needs a one-element root, got " +
                        (root.valid() ? shape_str(root.shape()) : std::string("null")));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->op != Op::leaf) n->has_grad = false;
  }
  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->has_grad) n->backward_fn(*n);
  }
}

Var add(const Var& a, const Var& b) {
  const auto bc = binary_broadcast(a, b, "add");
  return make(zip(a.value(), b.value(), bc, [](double x, double y) { return x + y; }), Op::add,
              {a.node(), b.node()}, [](Node& self) {
                accumulate_broadcast(self.parents[0], self.grad);
                accumulate_broadcast(self.parents[1], self.grad);
              });
}

Var sub(const Var& a, const Var& b) {
  const auto bc = binary_broadcast(a, b, "sub");
  return make(zip(a.value(), b.value(), bc, [](double x, double y) { return x - y; }), Op::sub,
              {a.node(), b.node()}, [](Node& self) {
                accumulate_broadcast(self.parents[0], self.grad);
                accumulate_broadcast(self.parents[1], tensor::scale(self.grad, -1.0));
              });
}

Var mul(const Var& a, const Var& b) {
  const auto bc = binary_broadcast(a, b, "mul");
  return make(zip(a.value(), b.value(), bc, [](double x, double y) { return x * y; }), Op::mul,
              {a.node(), b.node()}, [](Node& self) {
                const NodePtr& pa = self.parents[0];
                const NodePtr& pb = self.parents[1];
                const auto other = [&](const NodePtr& p, std::size_t i) {
                  return p->value.numel() == 1 ? p->value[0] : p->value[i];
                };
                if (pa->requires_grad) {
                  Tensor g(self.grad.shape());
                  for (std::size_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * other(pb, i);
                  accumulate_broadcast(pa, g);
                }
                if (pb->requires_grad) {
                  Tensor g(self.grad.shape());
                  for (std::size_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * other(pa, i);
                  accumulate_broadcast(pb, g);
                }
              });
}

Var scale(const Var& a, double s) { return affine(a, s, 0.0); }

Var affine(const Var& a, double s, double c) {
  Tensor y = a.value();
  for (auto& v : y.data()) v = s * v + c;
  return make(std::move(y), c == 0.0 ? Op::scale : Op::affine, {a.node()},
              [s](Node& self) { tensor::axpy(s, self.grad, self.parents[0]->grad_buffer()); });
}

Var tanh(const Var& a) {
  return unary(
      a, Op::tanh, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, Op::sigmoid,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& a) {
  return unary(
      a, Op::exp, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return unary(
      a, Op::log, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(const Var& a) {
  return unary(
      a, Op::square, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(const Var& a, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp with lo > hi");
  return unary(
      a, Op::clamp, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  return make(tensor::matmul(a.value(), b.value()), Op::matmul, {a.node(), b.node()}, [](Node& self) {
    const NodePtr& pa = self.parents[0];
    const NodePtr& pb = self.parents[1];
    if (pa->requires_grad) accumulate(pa, tensor::matmul(self.grad, pb->value, false, true));
    if (pb->requires_grad) accumulate(pb, tensor::matmul(pa->value, self.grad, true, false));
  });
}

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose");
  return make(tensor::transpose(a.value()), Op::transpose, {a.node()},
              [](Node& self) { accumulate(self.parents[0], tensor::transpose(self.grad)); });
}

Var add_bias(const Var& x, const Var& bias) {
  require_rank(x, 2, "add_bias");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (bias.value().numel() != cols) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " for input " + shape_str(x.shape()));
  }
  Tensor y = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] += bias.value()[c];
  }
  return make(std::move(y), Op::add_bias, {x.node(), bias.node()}, [rows, cols](Node& self) {
    accumulate(self.parents[0], self.grad);
    const NodePtr& pb = self.parents[1];
    if (!pb->requires_grad) return;
    Tensor& bg = pb->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) bg[c] += self.grad[r * cols + c];
    }
  });
}

Var broadcast_rows(const Var& row, std::size_t rows) {
  const Tensor& v = row.value();
  const bool ok = v.rank() == 1 || (v.rank() == 2 && (v.dim(0) == 1 || v.dim(1) == 1));
  if (!ok || rows == 0) throw DimensionError("broadcast_rows expects a row vector, got " + shape_str(row.shape()));
  const std::size_t cols = v.numel();
  Tensor y(Shape{rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = v[c];
  }
  return make(std::move(y), Op::broadcast_rows, {row.node()}, [rows, cols](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) g[c] += self.grad[r * cols + c];
    }
  });
}

Var sum(const Var& a) {
  return make(Tensor::scalar(tensor::sum(a.value())), Op::sum, {a.node()}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const double s = self.grad[0];
    for (auto& v : g.data()) v += s;
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().numel());
  return make(Tensor::scalar(tensor::sum(a.value()) / n), Op::mean, {a.node()}, [n](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const double s = self.grad[0] / n;
    for (auto& v : g.data()) v += s;
  });
}

Var sum_rows(const Var& a) {
  require_rank(a, 2, "sum_rows");
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  Tensor y(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += a.value()[r * cols + c];
    y[r] = s;
  }
  return make(std::move(y), Op::sum_rows, {a.node()}, [rows, cols](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r];
    }
  });
}

Var slice_cols(const Var& a, std::size_t start, std::size_t count) {
  require_rank(a, 2, "slice_cols");
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  if (count == 0 || start + count > cols) {
    throw DimensionError("slice_cols [" + std::to_string(start) + ", +" + std::to_string(count) + ") of " +
                         shape_str(a.shape()));
  }
  Tensor y(Shape{rows, count});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < count; ++c) y[r * count + c] = a.value()[r * cols + start + c];
  }
  return make(std::move(y), Op::slice_cols, {a.node()}, [rows, cols, start, count](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < count; ++c) g[r * cols + start + c] += self.grad[r * count + c];
    }
  });
}

Var concat_cols(const Var& a, const Var& b) {
  require_rank(a, 2, "concat_cols");
  require_rank(b, 2, "concat_cols");
  const std::size_t rows = a.shape()[0];
  if (b.shape()[0] != rows) {
    throw DimensionError("concat_cols: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t ca = a.shape()[1], cb = b.shape()[1], cols = ca + cb;
  Tensor y(Shape{rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ca; ++c) y[r * cols + c] = a.value()[r * ca + c];
    for (std::size_t c = 0; c < cb; ++c) y[r * cols + ca + c] = b.value()[r * cb + c];
  }
  return make(std::move(y), Op::concat_cols, {a.node(), b.node()}, [rows, ca, cb, cols](Node& self) {
    const NodePtr& pa = self.parents[0];
    const NodePtr& pb = self.parents[1];
    if (pa->requires_grad) {
      Tensor& g = pa->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < ca; ++c) g[r * ca + c] += self.grad[r * cols + c];
      }
    }
    if (pb->requires_grad) {
      Tensor& g = pb->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cb; ++c) g[r * cb + c] += self.grad[r * cols + ca + c];
      }
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  return make(a.value().reshaped(std::move(shape)), Op::reshape, {a.node()}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
  });
}

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (stride == 0) throw ContractError("convolution stride must be positive");
  const auto span = static_cast<std::ptrdiff_t>(in + 2 * padding) - static_cast<std::ptrdiff_t>(kernel);
  if (span < 0) {
    throw DimensionError("convolution output size is non-positive (in=" + std::to_string(in) +
                         ", kernel=" + std::to_string(kernel) + ", padding=" + std::to_string(padding) + ")");
  }
  return static_cast<std::size_t>(span) / stride + 1;
}

std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                       std::size_t padding) {
  if (stride == 0) throw ContractError("convolution stride must be positive");
  const auto out = static_cast<std::ptrdiff_t>((in - 1) * stride + kernel) - static_cast<std::ptrdiff_t>(2 * padding);
  if (out < 1) throw DimensionError("transposed convolution output size is non-positive");
  return static_cast<std::size_t>(out);
}

Var conv2d(const Var& input, const Var& kernels, std::size_t stride, std::size_t padding) {
  const ConvDims d = conv_input_dims(input.value(), "conv2d");
  require_rank(kernels, 4, "conv2d kernels");
  const Tensor& k = kernels.value();
  if (k.dim(1) != d.channels) {
    throw DimensionError("conv2d: kernels " + shape_str(k.shape()) + " for input " + shape_str(input.shape()));
  }
  const std::size_t out_c = k.dim(0);
  detail::ConvGeometry g{d.channels, d.height, d.width, k.dim(2), k.dim(3), stride, padding,
                         conv_output_size(d.height, k.dim(2), stride, padding),
                         conv_output_size(d.width, k.dim(3), stride, padding)};
  const std::size_t plane = g.col_cols();
  RowMatrix cols(g.col_rows(), d.batch * plane);
  detail::im2col(input.value().data(), d.batch, g, std::span<double>(cols.data(), cols.size()));
  const RowMatrix r = ConstMap(k.data().data(), out_c, g.col_rows()) * cols;
  Tensor y(conv_output_shape(d, out_c, g.out_h, g.out_w));
  columns_to_batch(r, d.batch, out_c, plane, y.data());

  return make(std::move(y), Op::conv2d, {input.node(), kernels.node()}, [d, g, out_c](Node& self) {
    const NodePtr& px = self.parents[0];
    const NodePtr& pk = self.parents[1];
    const std::size_t plane = g.col_cols();
    const RowMatrix gr = batch_to_columns(self.grad.data(), d.batch, out_c, plane);
    ConstMap kmat(pk->value.data().data(), out_c, g.col_rows());
    if (pk->requires_grad) {
      RowMatrix cols(g.col_rows(), d.batch * plane);
      detail::im2col(px->value.data(), d.batch, g, std::span<double>(cols.data(), cols.size()));
      Map kg(pk->grad_buffer().data().data(), out_c, g.col_rows());
      kg.noalias() += gr * cols.transpose();
    }
    if (px->requires_grad) {
      const RowMatrix dcols = kmat.transpose() * gr;
      detail::col2im(std::span<const double>(dcols.data(), dcols.size()), d.batch, g, px->grad_buffer().data());
    }
  });
}

Var conv_transpose2d(const Var& input, const Var& kernels, std::size_t stride, std::size_t padding) {
  const ConvDims d = conv_input_dims(input.value(), "conv_transpose2d");
  require_rank(kernels, 4, "conv_transpose2d kernels");
  const Tensor& k = kernels.value();
  if (k.dim(0) != d.channels) {
    throw DimensionError("conv_transpose2d: kernels " + shape_str(k.shape()) + " for input " +
                         shape_str(input.shape()));
  }
  const std::size_t out_c = k.dim(1);
  const std::size_t out_h = conv_transpose_output_size(d.height, k.dim(2), stride, padding);
  const std::size_t out_w = conv_transpose_output_size(d.width, k.dim(3), stride, padding);
  // Geometry of the adjoint conv2d: output image is the "image" side,
  // the input grid is the "column" side.
  detail::ConvGeometry g{out_c, out_h, out_w, k.dim(2), k.dim(3), stride, padding, d.height, d.width};
  if (conv_output_size(out_h, k.dim(2), stride, padding) != d.height ||
      conv_output_size(out_w, k.dim(3), stride, padding) != d.width) {
    throw DimensionError("conv_transpose2d geometry is not invertible for this stride/padding");
  }
  const std::size_t plane = d.height * d.width;
  const RowMatrix xr = batch_to_columns(input.value().data(), d.batch, d.channels, plane);
  ConstMap kmat(k.data().data(), d.channels, g.col_rows());
  const RowMatrix cols = kmat.transpose() * xr;
  Tensor y(conv_output_shape(d, out_c, out_h, out_w));
  detail::col2im(std::span<const double>(cols.data(), cols.size()), d.batch, g, y.data());

  return make(std::move(y), Op::conv_transpose2d, {input.node(), kernels.node()}, [d, g](Node& self) {
    const NodePtr& px = self.parents[0];
    const NodePtr& pk = self.parents[1];
    const std::size_t plane = d.height * d.width;
    RowMatrix gcols(g.col_rows(), d.batch * plane);
    detail::im2col(self.grad.data(), d.batch, g, std::span<double>(gcols.data(), gcols.size()));
    if (px->requires_grad) {
      ConstMap kmat(pk->value.data().data(), d.channels, g.col_rows());
      const RowMatrix gx = kmat * gcols;
      Tensor tmp(px->value.shape());
      columns_to_batch(gx, d.batch, d.channels, plane, tmp.data());
      accumulate(px, tmp);
    }
    if (pk->requires_grad) {
      const RowMatrix xr = batch_to_columns(px->value.data(), d.batch, d.channels, plane);
      Map kg(pk->grad_buffer().data().data(), d.channels, g.col_rows());
      kg.noalias() += xr * gcols.transpose();
    }
  });
}

Var add_channel_bias(const Var& x, const Var& bias) {
  const ConvDims d = conv_input_dims(x.value(), "add_channel_bias");
  if (bias.value().numel() != d.channels) {
    throw DimensionError("add_channel_bias: bias " + shape_str(bias.shape()) + " for " + shape_str(x.shape()));
  }
  const std::size_t plane = d.height * d.width;
  Tensor y = x.value();
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t c = 0; c < d.channels; ++c) {
      double* p = y.data().data() + (b * d.channels + c) * plane;
      const double v = bias.value()[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] += v;
    }
  }
  return make(std::move(y), Op::add_channel_bias, {x.node(), bias.node()}, [d, plane](Node& self) {
    accumulate(self.parents[0], self.grad);
    const NodePtr& pb = self.parents[1];
    if (!pb->requires_grad) return;
    Tensor& bg = pb->grad_buffer();
    for (std::size_t b = 0; b < d.batch; ++b) {
      for (std::size_t c = 0; c < d.channels; ++c) {
        const double* p = self.grad.data().data() + (b * d.channels + c) * plane;
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
        bg[c] += s;
      }
    }
  });
}

}  // namespace svlab
