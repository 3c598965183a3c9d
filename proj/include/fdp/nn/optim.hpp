#pragma once

#include "fdp/nn/parameter_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace fdp::nn {

struct AdamWConfig {
  double lr = 1.05e-4;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename S>
struct OptimizerState {
  ParameterStore<S> m;
  ParameterStore<S> v;
  std::int64_t step = 0;
  AdamWConfig cfg;

  static OptimizerState for_params(const ParameterStore<S>& params, AdamWConfig cfg = {}) {
    return {params.zeros_like(), params.zeros_like(), 0, cfg};
  }
};

/// Decoupled weight decay (theta *= 1 - lr * wd) followed by the bias-corrected Adam step.
template <typename S>
void adamw_step(ParameterStore<S>& params, const ParameterStore<S>& grads, OptimizerState<S>& opt, double lr) {
  if (!params.same_layout(grads) || !params.same_layout(opt.m)) {
    throw InvalidArgument("adamw_step: parameter, gradient and moment stores are not aligned");
  }
  opt.step += 1;
  const auto& c = opt.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step));
  const double decay = 1.0 - lr * c.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = params[i].data;
    const auto& g = grads[i].data;
    auto& m = opt.m[i].data;
    auto& v = opt.v[i].data;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double gj = g[j];
      const double mj = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
      const double vj = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
      m[j] = static_cast<S>(mj);
      v[j] = static_cast<S>(vj);
      const double update = (mj / bc1) / (std::sqrt(vj / bc2) + c.eps);
      theta[j] = static_cast<S>(theta[j] * decay - lr * update);
    }
  }
}

/// Linear warmup from 0 to base_lr, then cosine decay to 0 at total_steps.
inline double lr_at_step(std::int64_t step, std::int64_t total_steps, double base_lr, std::int64_t warmup = 1000) {
  if (total_steps <= warmup) throw InvalidArgument("lr schedule needs total_steps > warmup");
  if (step < warmup) return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  const double progress = std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup));
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename S>
struct EmaState {
  ParameterStore<S> shadow;
  std::int64_t updates = 0;
  double power = 0.75;
  double max_decay = 0.9999;

  static EmaState for_params(const ParameterStore<S>& params, double power = 0.75) {
    return {params, 0, power, 0.9999};
  }

  double decay() const {
    return std::min(max_decay, 1.0 - std::pow(1.0 + static_cast<double>(updates), -power));
  }
};

/// shadow <- d shadow + (1 - d) params with d = min(0.9999, 1 - (1 + t)^-power).
template <typename S>
void ema_update(EmaState<S>& ema, const ParameterStore<S>& params) {
  if (!ema.shadow.same_layout(params)) throw InvalidArgument("ema_update: stores are not aligned");
  const double d = ema.decay();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& s = ema.shadow[i].data;
    const auto& p = params[i].data;
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = static_cast<S>(d * s[j] + (1.0 - d) * p[j]);
  }
  ema.updates += 1;
}

}  // namespace fdp::nn
