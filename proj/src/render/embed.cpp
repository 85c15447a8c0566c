#include "svlab/render/embed.hpp"

#include <algorithm>
#include <cmath>

#include "svlab/error.hpp"
#include "svlab/numcore/rng.hpp"

namespace svlab {

namespace {

std::size_t feature_width(const SystemSpec& spec) {
  return spec.state_size() + spec.angle_indices().size();
}

}  // namespace

StateEmbedding::StateEmbedding(const SystemSpec& spec, std::uint64_t seed) : spec_(spec) {
  if (!spec.mechanical()) throw UnsupportedSystemError("vectors mode embeds mechanical states only");
  const std::size_t width = feature_width(spec);
  Rng rng(seed);
  a_ = Tensor(Shape{kEmbedWidth, width});
  for (auto& v : a_.data()) v = rng.uniform(-1.0, 1.0);
  b_ = Tensor(Shape{kEmbedWidth});
  for (auto& v : b_.data()) v = rng.uniform(-1.0, 1.0);
}

std::vector<double> StateEmbedding::features(const StateVector& state) const {
  if (state.size() != spec_.state_size()) throw ContractError("embed_state: state layout mismatch");
  const auto angles = spec_.angle_indices();
  std::vector<double> g;
  g.reserve(feature_width(spec_));
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (std::find(angles.begin(), angles.end(), i) != angles.end()) {
      g.push_back(std::sin(state[i]));
      g.push_back(std::cos(state[i]));
    } else {
      g.push_back(state[i]);
    }
  }
  return g;
}

std::vector<double> StateEmbedding::operator()(const StateVector& state) const {
  const auto g = features(state);
  std::vector<double> y(kEmbedWidth);
  for (std::size_t r = 0; r < kEmbedWidth; ++r) {
    double s = b_[r];
    for (std::size_t c = 0; c < g.size(); ++c) s += a_.at(r, c) * g[c];
    y[r] = std::tanh(s);
  }
  return y;
}

std::vector<double> embed_state(const SystemSpec& spec, const StateVector& state, std::uint64_t seed) {
  return StateEmbedding(spec, seed)(state);
}

}  // namespace svlab
