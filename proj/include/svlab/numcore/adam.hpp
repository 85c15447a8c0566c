#pragma once

#include <cstdint>
#include <vector>

#include "svlab/numcore/graph.hpp"

namespace svlab {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One bias-corrected Adam update of `params` in place. Moment buffers are
/// created on the first call. Throws TrainingError if any gradient is not
/// finite (parameters are left untouched in that case).
void adam_step(AdamState& state, const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

/// Adam over a fixed list of graph parameters.
class Adam {
 public:
  explicit Adam(std::vector<Var> params, AdamOptions options = {});

  /// Applies the accumulated gradients.
  void step();
  void zero_grad();

  const AdamState& state() const { return state_; }
  const std::vector<Var>& parameters() const { return params_; }

 private:
  std::vector<Var> params_;
  AdamState state_;
};

}  // namespace svlab
