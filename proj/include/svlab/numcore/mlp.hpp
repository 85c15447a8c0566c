#pragma once

#include <string>
#include <utility>
#include <vector>

#include "svlab/numcore/graph.hpp"
#include "svlab/numcore/rng.hpp"

namespace svlab {

enum class Activation { identity, tanh, sigmoid };

/// y = act(x W + b) with W stored [in x out].
struct DenseLayer {
  Var weight;
  Var bias;
  Activation activation = Activation::identity;

  std::size_t in_features() const { return weight.shape()[0]; }
  std::size_t out_features() const { return weight.shape()[1]; }
};

/// Glorot-uniform weights, U(-sqrt(6/(fan_in+fan_out)), +...), zero bias.
DenseLayer make_dense(std::size_t in, std::size_t out, Activation activation, Rng& rng);

Var apply_activation(const Var& x, Activation activation);
Var dense_forward(const DenseLayer& layer, const Var& x);

/// Feed-forward stack of dense layers operating on row batches [B x in].
class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, h1, ..., out}; activations has widths.size()-1 entries.
  Mlp(const std::vector<std::size_t>& widths, const std::vector<Activation>& activations, Rng& rng);

  Var forward(const Var& x) const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  std::size_t in_features() const { return layers_.front().in_features(); }
  std::size_t out_features() const { return layers_.back().out_features(); }

  std::vector<Var> parameters() const;
  /// Names are "<prefix>.<layer>.weight" / "<prefix>.<layer>.bias".
  std::vector<std::pair<std::string, Var>> named_parameters(const std::string& prefix) const;

 private:
  std::vector<DenseLayer> layers_;
};

/// Gradient of a scalar tanh network with respect to its input rows.
///
/// `net` must have tanh hidden layers, an identity output layer and one
/// output unit. For x [B x d] the result is [B x d], row b being
/// d net(x_b) / d x_b. It is assembled from ordinary graph ops (transposed
/// weights times the 1 - tanh^2 factors), so backward() through it yields
/// gradients with respect to the network parameters.
Var input_gradient(const Mlp& net, const Var& x);

}  // namespace svlab
