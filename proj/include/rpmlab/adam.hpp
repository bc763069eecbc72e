#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rpmlab/network.hpp"

namespace rpmlab {

// Raised when training produces a non-finite value; maps to CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;  // one moment pair per parameter
  int64_t t = 0;
  AdamConfig cfg;

  template <typename P>
  void init_like(const std::vector<P>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.tensor.numel(), T(0));
      v.emplace_back(p.tensor.numel(), T(0));
    }
    t = 0;
  }
};

// Standard bias-corrected Adam update, in place. Gradients are read from the
// tensors' accumulators filled by the preceding backward pass.
template <typename T>
void adam_step(std::vector<NamedParam<T>>& params, AdamState<T>& state, double lr) {
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state holds " + std::to_string(state.m.size()) +
                                " moment pairs for " + std::to_string(params.size()) +
                                " parameters");
  state.t += 1;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2, eps = state.cfg.eps;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& values = params[pi].tensor.value();
    const auto& grads = params[pi].tensor.grad();
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    for (size_t i = 0; i < values.size(); ++i) {
      double g = static_cast<double>(grads[i]);
      if (!std::isfinite(g))
        throw NumericError("adam_step: non-finite gradient in parameter '" + params[pi].name +
                           "' at element " + std::to_string(i));
      double mi = b1 * m[i] + (1.0 - b1) * g;
      double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      double m_hat = mi / bc1;
      double v_hat = vi / bc2;
      values[i] = static_cast<T>(values[i] - lr * m_hat / (std::sqrt(v_hat) + eps));
    }
  }
}

// lr(k) = base_lr * 0.5^floor(k / halving_period). The paper's phrasing reads
// most naturally as epochs; the trainer exposes a unit knob for the other
// reading.
struct LrSchedule {
  double base_lr = 2e-4;
  int halving_period = 10;

  double at(int64_t k) const {
    return base_lr * std::exp2(-static_cast<double>(k / halving_period));
  }
};

}  // namespace rpmlab
