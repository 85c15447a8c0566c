#include "svlab/numcore/mlp.hpp"

#include <cmath>

#include "svlab/error.hpp"

namespace svlab {

DenseLayer make_dense(std::size_t in, std::size_t out, Activation activation, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Tensor w(Shape{in, out});
  for (auto& v : w.data()) v = rng.uniform(-limit, limit);
  return DenseLayer{Var::parameter(std::move(w)), Var::parameter(Tensor(Shape{out}, 0.0)), activation};
}

Var apply_activation(const Var& x, Activation activation) {
  switch (activation) {
    case Activation::identity: return x;
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
  }
  return x;
}

Var dense_forward(const DenseLayer& layer, const Var& x) {
  return apply_activation(add_bias(matmul(x, layer.weight), layer.bias), layer.activation);
}

Mlp::Mlp(const std::vector<std::size_t>& widths, const std::vector<Activation>& activations, Rng& rng) {
  if (widths.size() < 2 || activations.size() + 1 != widths.size()) {
    throw ContractError("Mlp needs widths.size() == activations.size() + 1 >= 2");
  }
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers_.push_back(make_dense(widths[i], widths[i + 1], activations[i], rng));
  }
}

Var Mlp::forward(const Var& x) const {
  Var h = x;
  for (const auto& layer : layers_) h = dense_forward(layer, h);
  return h;
}

std::vector<Var> Mlp::parameters() const {
  std::vector<Var> out;
  for (const auto& layer : layers_) {
    out.push_back(layer.weight);
    out.push_back(layer.bias);
  }
  return out;
}

std::vector<std::pair<std::string, Var>> Mlp::named_parameters(const std::string& prefix) const {
  std::vector<std::pair<std::string, Var>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    out.emplace_back(base + ".weight", layers_[i].weight);
    out.emplace_back(base + ".bias", layers_[i].bias);
  }
  return out;
}

Var input_gradient(const Mlp& net, const Var& x) {
  const auto& layers = net.layers();
  if (layers.empty()) throw ContractError("input_gradient on an empty network");
  if (layers.back().out_features() != 1 || layers.back().activation != Activation::identity) {
    throw ContractError("input_gradient needs a scalar network with a linear output layer");
  }
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i].activation != Activation::tanh) {
      throw ContractError("input_gradient supports tanh hidden layers only (layer " + std::to_string(i) + ")");
    }
  }
  if (x.value().rank() != 2 || x.shape()[1] != net.in_features()) {
    throw DimensionError("input_gradient: input " + shape_str(x.shape()) + " for network of width " +
                         std::to_string(net.in_features()));
  }
  const std::size_t batch = x.shape()[0];

  // Forward pass keeping hidden activations.
  std::vector<Var> hidden;
  Var h = x;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    h = dense_forward(layers[i], h);
    hidden.push_back(h);
  }

  // delta starts as d out / d h_last = W_last^T per row, then walks back.
  Var delta = broadcast_rows(transpose(layers.back().weight), batch);
  for (std::size_t i = hidden.size(); i-- > 0;) {
    const Var slope = affine(square(hidden[i]), -1.0, 1.0);
    delta = matmul(mul(delta, slope), transpose(layers[i].weight));
  }
  return delta;
}

}  // namespace svlab
