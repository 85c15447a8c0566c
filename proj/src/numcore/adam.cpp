#include "svlab/numcore/adam.hpp"

#include <cmath>

#include "svlab/error.hpp"

namespace svlab {

void adam_step(AdamState& state, const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size()) throw ContractError("adam_step: params and grads differ in count");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape(), 0.0);
      state.v.emplace_back(p->shape(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || state.m[i].shape() != params[i]->shape()) {
      throw DimensionError("adam_step: shape mismatch for parameter " + std::to_string(i));
    }
    if (!grads[i]->all_finite()) {
      throw TrainingError("non-finite gradient for parameter " + std::to_string(i) + " at step " +
                          std::to_string(state.step + 1));
    }
  }

  const auto& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i]->data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      p[j] -= o.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + o.eps);
    }
  }
}

Adam::Adam(std::vector<Var> params, AdamOptions options) : params_(std::move(params)) {
  state_.options = options;
}

void Adam::step() {
  std::vector<Tensor*> values;
  std::vector<Tensor> grads;
  grads.reserve(params_.size());
  for (auto& p : params_) {
    values.push_back(&p.mutable_value());
    grads.push_back(p.grad());
  }
  std::vector<const Tensor*> grad_ptrs;
  for (const auto& g : grads) grad_ptrs.push_back(&g);
  adam_step(state_, values, grad_ptrs);
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace svlab
