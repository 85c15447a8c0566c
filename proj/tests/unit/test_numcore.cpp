#include <cmath>
#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "support/gradcheck.hpp"
#include "svlab/error.hpp"
#include "svlab/numcore/adam.hpp"
#include "svlab/numcore/checkpoint.hpp"
#include "svlab/numcore/graph.hpp"
#include "svlab/numcore/mlp.hpp"
#include "svlab/numcore/rng.hpp"

using namespace svlab;
using svlab::testing::gradcheck;
using svlab::testing::random_tensor;

namespace {

// Direct nested-loop cross-correlation, [C x H x W] input.
Tensor naive_conv2d(const Tensor& x, const Tensor& k, std::size_t stride, std::size_t pad) {
  const std::size_t c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t c_out = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (w + 2 * pad - kw) / stride + 1;
  Tensor y(Shape{c_out, oh, ow});
  for (std::size_t o = 0; o < c_out; ++o)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < c_in; ++c)
          for (std::size_t a = 0; a < kh; ++a)
            for (std::size_t b = 0; b < kw; ++b) {
              const long ii = static_cast<long>(i * stride + a) - static_cast<long>(pad);
              const long jj = static_cast<long>(j * stride + b) - static_cast<long>(pad);
              if (ii < 0 || jj < 0 || ii >= static_cast<long>(h) || jj >= static_cast<long>(w)) continue;
              s += x[(c * h + ii) * w + jj] * k[((o * c_in + c) * kh + a) * kw + b];
            }
        y[(o * oh + i) * ow + j] = s;
      }
  return y;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("tensor construction enforces shape invariants") {
  CHECK_THROWS_AS(Tensor(Shape{2, 3}, std::vector<double>(5)), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{0, 3}), DimensionError);
  const Tensor t = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(t.at(1, 0) == 3.0);
  CHECK_THROWS_AS(t.reshaped(Shape{3}), DimensionError);
  CHECK(t.reshaped(Shape{4}).shape() == Shape{4});
}

TEST_CASE("matmul") {
  SUBCASE("identity leaves the matrix unchanged") {
    Rng rng(1);
    const Tensor m = random_tensor(Shape{3, 3}, rng);
    const Tensor eye = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    CHECK(matmul(Var(eye), Var(m)).value() == m);
  }
  SUBCASE("hand arithmetic") {
    const Var y = matmul(Var(Tensor::matrix(2, 2, {1, 2, 3, 4})), Var(Tensor::matrix(2, 1, {1, 1})));
    CHECK(y.value() == Tensor::matrix(2, 1, {3, 7}));
  }
  SUBCASE("inner dimension mismatch") {
    CHECK_THROWS_AS(matmul(Var(Tensor(Shape{2, 3})), Var(Tensor(Shape{2, 3}))), DimensionError);
  }
  SUBCASE("gradients match finite differences") {
    Rng rng(7);
    Var a = Var::parameter(random_tensor(Shape{5, 7}, rng));
    Var b = Var::parameter(random_tensor(Shape{7, 3}, rng));
    const Tensor weights = random_tensor(Shape{5, 3}, rng);
    const double err = gradcheck({a, b}, [&] { return sum(mul(matmul(a, b), Var(weights))); });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("conv2d") {
  SUBCASE("1x1 unit kernel is the identity") {
    Rng rng(2);
    const Tensor x = random_tensor(Shape{1, 5, 6}, rng);
    const Var y = conv2d(Var(x), Var(Tensor(Shape{1, 1, 1, 1}, 1.0)), 1, 0);
    CHECK(y.value() == x);
  }
  SUBCASE("output shape formula") {
    const Var y = conv2d(Var(Tensor(Shape{1, 8, 8})), Var(Tensor(Shape{4, 1, 3, 3})), 2, 1);
    CHECK(y.shape() == Shape{4, 4, 4});
  }
  SUBCASE("non-positive output size") {
    CHECK_THROWS_AS(conv2d(Var(Tensor(Shape{1, 2, 2})), Var(Tensor(Shape{1, 1, 5, 5})), 1, 0), DimensionError);
  }
  SUBCASE("matches the direct nested-loop sum") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
      const Tensor x = random_tensor(Shape{3, 9, 7}, rng);
      const Tensor k = random_tensor(Shape{4, 3, 3, 2}, rng);
      const std::size_t stride = 1 + trial % 2, pad = trial % 3;
      const Tensor fast = conv2d(Var(x), Var(k), stride, pad).value();
      CHECK(tensor::max_abs_diff(fast, naive_conv2d(x, k, stride, pad)) < 1e-12);
    }
  }
  SUBCASE("batched equals per-sample") {
    Rng rng(4);
    const Tensor x = random_tensor(Shape{2, 2, 6, 6}, rng);
    const Tensor k = random_tensor(Shape{3, 2, 4, 4}, rng);
    const Tensor y = conv2d(Var(x), Var(k), 2, 1).value();
    for (std::size_t b = 0; b < 2; ++b) {
      Tensor xb(Shape{2, 6, 6});
      std::copy_n(x.data().begin() + b * 72, 72, xb.data().begin());
      const Tensor yb = naive_conv2d(xb, k, 2, 1);
      for (std::size_t i = 0; i < yb.numel(); ++i) CHECK(std::abs(y[b * yb.numel() + i] - yb[i]) < 1e-12);
    }
  }
  SUBCASE("gradients match finite differences") {
    Rng rng(5);
    Var x = Var::parameter(random_tensor(Shape{2, 2, 6, 5}, rng));
    Var k = Var::parameter(random_tensor(Shape{3, 2, 3, 3}, rng));
    Var bias = Var::parameter(random_tensor(Shape{3}, rng));
    const Tensor w = random_tensor(Shape{2, 3, 3, 3}, rng);
    const double err =
        gradcheck({x, k, bias}, [&] { return sum(mul(tanh(add_channel_bias(conv2d(x, k, 2, 1), bias)), Var(w))); });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
  Rng rng(11);
  const Tensor k = random_tensor(Shape{3, 2, 4, 4}, rng);  // conv: 2 -> 3 channels
  const Tensor x = random_tensor(Shape{2, 8, 8}, rng);
  const Tensor y = random_tensor(Shape{3, 4, 4}, rng);
  const Tensor cx = conv2d(Var(x), Var(k), 2, 1).value();
  const Tensor ty = conv_transpose2d(Var(y), Var(k), 2, 1).value();
  CHECK(ty.shape() == x.shape());
  CHECK(std::abs(dot(cx, y) - dot(x, ty)) < 1e-10);

  Var yv = Var::parameter(random_tensor(Shape{2, 3, 4, 4}, rng));
  Var kv = Var::parameter(k);
  const Tensor w = random_tensor(Shape{2, 2, 8, 8}, rng);
  CHECK(gradcheck({yv, kv}, [&] { return sum(mul(sigmoid(conv_transpose2d(yv, kv, 2, 1)), Var(w))); }) < 1e-6);
}

TEST_CASE("elementwise ops") {
  CHECK(tanh(Var(Tensor::vector({0.0}))).value()[0] == 0.0);
  CHECK(square(Var(Tensor::vector({-2, 3}))).value() == Tensor::vector({4, 9}));
  CHECK_THROWS_AS(log(Var(Tensor::vector({1.0, 0.0}))), DomainError);
  CHECK_THROWS_AS(log(Var(Tensor::vector({-1.0}))), DomainError);

  SUBCASE("tanh derivative at 0.5") {
    Var x = Var::parameter(Tensor::vector({0.5}));
    backward(sum(tanh(x)));
    const double numeric = (std::tanh(0.5 + 1e-5) - std::tanh(0.5 - 1e-5)) / 2e-5;
    CHECK(std::abs(x.grad()[0] - numeric) / std::abs(numeric) < 1e-8);
  }
  SUBCASE("all registered derivatives") {
    Rng rng(9);
    Var a = Var::parameter(random_tensor(Shape{3, 4}, rng, 0.2, 1.5));
    Var b = Var::parameter(random_tensor(Shape{3, 4}, rng));
    Var s = Var::parameter(Tensor::scalar(0.7));
    const double err = gradcheck({a, b, s}, [&] {
      Var t = add(mul(exp(b), log(a)), sub(sigmoid(b), square(a)));
      t = add(t, mul(s, affine(tanh(a), 2.0, -0.5)));
      t = add(t, clamp(b, -0.5, 0.5));
      return mean(t);
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("non-finite output is detected") {
    CHECK_THROWS_AS(exp(Var(Tensor::vector({1000.0}))), NumericalError);
  }
}

TEST_CASE("structural ops keep gradients") {
  Rng rng(10);
  Var a = Var::parameter(random_tensor(Shape{4, 5}, rng));
  Var b = Var::parameter(random_tensor(Shape{4, 2}, rng));
  Var bias = Var::parameter(random_tensor(Shape{5}, rng));
  Var row = Var::parameter(random_tensor(Shape{5}, rng));
  const double err = gradcheck({a, b, bias, row}, [&] {
    Var c = add_bias(concat_cols(slice_cols(a, 1, 3), tanh(b)), bias);
    c = add(c, broadcast_rows(row, 4));
    c = transpose(reshape(c, Shape{5, 4}));
    return sum(square(sum_rows(c)));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("backward") {
  SUBCASE("x^2 at 3") {
    Var x = Var::parameter(Tensor::scalar(3.0));
    backward(square(x));
    CHECK(x.grad()[0] == doctest::Approx(6.0));
  }
  SUBCASE("sum tanh(Wx) matches finite differences") {
    Rng rng(12);
    Var w = Var::parameter(random_tensor(Shape{6, 4}, rng));
    Var x = Var::parameter(random_tensor(Shape{4, 1}, rng));
    CHECK(gradcheck({w, x}, [&] { return sum(tanh(matmul(w, x))); }) < 1e-6);
  }
  SUBCASE("constant node receives zero gradient") {
    Var c = Var::constant(Tensor::vector({1, 2}));
    Var x = Var::parameter(Tensor::vector({3, 4}));
    backward(sum(mul(c, x)));
    CHECK(c.grad() == Tensor(Shape{2}, 0.0));
    CHECK(x.grad() == Tensor::vector({1, 2}));
  }
  SUBCASE("non-scalar root is a contract error") {
    Var x = Var::parameter(Tensor::vector({1, 2}));
    CHECK_THROWS_AS(backward(square(x)), ContractError);
  }
  SUBCASE("two backward calls accumulate") {
    Var x = Var::parameter(Tensor::scalar(2.0));
    const Var y = square(x);
    backward(y);
    backward(y);
    CHECK(x.grad()[0] == doctest::Approx(8.0));
    x.zero_grad();
    backward(y);
    CHECK(x.grad()[0] == doctest::Approx(4.0));
  }
  SUBCASE("shared subexpression") {
    Var x = Var::parameter(Tensor::scalar(1.5));
    const Var t = tanh(x);
    backward(mul(t, t));
    const double th = std::tanh(1.5);
    CHECK(x.grad()[0] == doctest::Approx(2 * th * (1 - th * th)));
  }
}

TEST_CASE("input_gradient") {
  SUBCASE("linear network returns its weights") {
    Rng rng(13);
    Mlp net({3, 1}, {Activation::identity}, rng);
    const Var g = input_gradient(net, Var(random_tensor(Shape{2, 3}, rng)));
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t i = 0; i < 3; ++i) CHECK(g.value()[b * 3 + i] == net.layers()[0].weight.value()[i]);
    }
  }
  SUBCASE("matches finite differences of the network") {
    Rng rng(14);
    Mlp net({4, 8, 8, 1}, {Activation::tanh, Activation::tanh, Activation::identity}, rng);
    for (auto& p : net.parameters()) {
      for (auto& v : p.mutable_value().data()) v += rng.uniform(-0.3, 0.3);
    }
    Var x = Var::parameter(random_tensor(Shape{3, 4}, rng));
    const Tensor g = input_gradient(net, x).value();
    const Tensor numeric = testing::numeric_gradient(x, [&] { return sum(net.forward(x)).value().item(); });
    CHECK(testing::relative_error(g, numeric) < 1e-6);
  }
  SUBCASE("differentiable with respect to parameters") {
    Rng rng(15);
    Mlp net({4, 8, 8, 1}, {Activation::tanh, Activation::tanh, Activation::identity}, rng);
    const Var x(random_tensor(Shape{3, 4}, rng));
    const Tensor w = random_tensor(Shape{3, 4}, rng);
    const double err = gradcheck(net.parameters(), [&] { return sum(mul(input_gradient(net, x), Var(w))); });
    CHECK(err < 1e-5);
  }
  SUBCASE("rejects non-tanh hidden layers") {
    Rng rng(16);
    Mlp net({2, 4, 1}, {Activation::sigmoid, Activation::identity}, rng);
    CHECK_THROWS_AS(input_gradient(net, Var(Tensor(Shape{1, 2}))), ContractError);
    Mlp vec_out({2, 4, 2}, {Activation::tanh, Activation::identity}, rng);
    CHECK_THROWS_AS(input_gradient(vec_out, Var(Tensor(Shape{1, 2}))), ContractError);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Var w = Var::parameter(Tensor::vector({1.0, -2.0}));
    Adam opt({w});
    w.grad();
    opt.step();
    CHECK(w.value() == Tensor::vector({1.0, -2.0}));
    CHECK(opt.state().step == 1);
  }
  SUBCASE("bias-corrected first step") {
    Var w = Var::parameter(Tensor::scalar(0.0));
    Adam opt({w}, AdamOptions{.lr = 0.01});
    backward(w);  // d w / d w = 1
    opt.step();
    CHECK(std::abs(w.value()[0] + 0.01) < 1e-6);
  }
  SUBCASE("converges on a convex quadratic") {
    Var w = Var::parameter(Tensor::scalar(0.0));
    Adam opt({w}, AdamOptions{.lr = 0.1});
    for (int i = 0; i < 200; ++i) {
      opt.zero_grad();
      backward(square(affine(w, 1.0, -2.0)));
      opt.step();
    }
    CHECK(std::abs(w.value()[0] - 2.0) < 1e-2);
  }
  SUBCASE("NaN gradient surfaces as a training error") {
    AdamState state;
    Tensor p = Tensor::vector({1.0});
    Tensor g = Tensor::vector({std::nan("")});
    CHECK_THROWS_AS(adam_step(state, {&p}, {&g}), TrainingError);
    CHECK(p[0] == 1.0);
  }
}

TEST_CASE("rng") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng(1).next_u64() != Rng(2).next_u64());
  // Reference outputs of xoshiro256** seeded through splitmix64(0).
  Rng ref(0);
  CHECK(ref.next_u64() == 0x99EC5F36CB75F2B4ULL);
  CHECK(ref.next_u64() == 0xBF6E1F784956452AULL);

  Rng parent(5);
  const Rng c1 = parent.split(1);
  parent.next_u64();
  CHECK(parent.split(1) == c1);
  CHECK(Rng(parent.split(1)).next_u64() != Rng(parent.split(2)).next_u64());

  double s = 0, s2 = 0;
  Rng n(3);
  for (int i = 0; i < 20000; ++i) {
    const double z = n.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / 20000) < 0.03);
  CHECK(std::abs(s2 / 20000 - 1.0) < 0.03);
}

TEST_CASE("checkpoint container") {
  Rng rng(17);
  std::vector<NamedTensor> ts{{"enc.0.weight", random_tensor(Shape{3, 4}, rng)},
                              {"scalar", Tensor::scalar(-0.0)},
                              {"cube", random_tensor(Shape{2, 1, 3}, rng)}};
  const auto bytes = encode_tensors(ts);
  CHECK(bytes[0] == 'S');
  CHECK(bytes[4] == 1);  // version, little-endian
  CHECK(bytes[8] == 3);  // count
  CHECK(decode_tensors(bytes) == ts);

  const auto path = std::filesystem::temp_directory_path() / "svlab_test_ckpt.bin";
  save_tensors(path, ts);
  const auto back = load_tensors(path);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    CHECK(back[i].name == ts[i].name);
    CHECK(std::memcmp(back[i].tensor.data().data(), ts[i].tensor.data().data(), ts[i].tensor.numel() * 8) == 0);
  }
  std::filesystem::remove(path);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_tensors(bad), ParseError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_tensors(bad), ParseError);
}
