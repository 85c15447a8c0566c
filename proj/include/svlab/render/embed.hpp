#pragma once

#include <cstdint>
#include <vector>

#include "svlab/dynsys/system.hpp"
#include "svlab/numcore/tensor.hpp"

namespace svlab {

inline constexpr std::size_t kEmbedWidth = 64;

/// Fixed random stand-in for the outer autoencoder's latent:
/// y = tanh(A g(x) + b), with g mapping every angle to (sin, cos) and
/// passing other coordinates and all momenta through. A and b are drawn
/// from Rng(seed), A row-major first, entries uniform in [-1, 1].
class StateEmbedding {
 public:
  StateEmbedding(const SystemSpec& spec, std::uint64_t seed);

  std::vector<double> features(const StateVector& state) const;
  std::vector<double> operator()(const StateVector& state) const;

  const Tensor& weight() const { return a_; }
  const Tensor& bias() const { return b_; }

 private:
  SystemSpec spec_;
  Tensor a_;  // [64 x len(g)]
  Tensor b_;  // [64]
};

std::vector<double> embed_state(const SystemSpec& spec, const StateVector& state, std::uint64_t seed);

}  // namespace svlab
