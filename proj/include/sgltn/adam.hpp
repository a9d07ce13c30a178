#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sgltn/tensor.hpp"

namespace sgltn {

// Adam with L2 regularization folded into the gradient (weight_decay * w is
// added to the raw gradient before the moment updates), bias-corrected.
struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;  // first moments, one per parameter
  std::vector<std::vector<double>> v;  // second moments

  static AdamState init(const std::vector<Tensor*>& params, double learning_rate,
                        double weight_decay) {
    check(learning_rate > 0.0, "adam: learning_rate must be positive");
    check(weight_decay >= 0.0, "adam: weight_decay must be nonnegative");
    AdamState s;
    s.learning_rate = learning_rate;
    s.weight_decay = weight_decay;
    for (Tensor* p : params) {
      s.m.emplace_back(p->numel(), 0.0);
      s.v.emplace_back(p->numel(), 0.0);
    }
    return s;
  }
};

inline void adam_step(AdamState& state, const std::vector<Tensor*>& params,
                      const std::vector<Tensor>& grads) {
  check(params.size() == grads.size(), "adam: params/grads count mismatch");
  check(params.size() == state.m.size(), "adam: state does not match parameter set");
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& w = *params[k];
    const Tensor& g = grads[k];
    check(w.shape == g.shape, "adam: gradient shape mismatch for parameter " + std::to_string(k));
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < w.numel(); ++i) {
      double gi = g.data[i] + state.weight_decay * w.data[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      w.data[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace sgltn
