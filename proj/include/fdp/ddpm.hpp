#pragma once

#include "fdp/common.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace fdp::diffusion {

/// T_p x d_a action sequence, normalized to [-1, 1] while diffusing.
using ActionSequence = Eigen::MatrixXd;

/// Discrete variance schedule beta_k, alpha_k = 1 - beta_k, alpha_bar_k = prod alpha.
class NoiseSchedule {
 public:
  /// squaredcos_cap_v2: alpha_bar(t) = f(t)/f(0), f(t) = cos^2(((t/K + s)/(1 + s)) pi/2),
  /// s = 0.008, beta_k = min(1 - alpha_bar(k+1)/alpha_bar(k), max_beta).
  static NoiseSchedule cosine(int steps, bool clip_sample = true, double max_beta = 0.999);

  /// Builds a schedule from explicit betas.
  NoiseSchedule(std::vector<double> betas, bool clip_sample);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int k) const { return betas_.at(static_cast<std::size_t>(k)); }
  double alpha(int k) const { return alphas_.at(static_cast<std::size_t>(k)); }
  double alpha_bar(int k) const { return alpha_bars_.at(static_cast<std::size_t>(k)); }
  double sigma(int k) const;
  bool clip_sample() const { return clip_sample_; }

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

 private:
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
  bool clip_sample_;
};

/// Closed-form alpha_bar(t) of the cosine schedule, t in [0, K].
double cosine_alpha_bar(double t, int steps);

/// sqrt(alpha_bar_k) clean + sqrt(1 - alpha_bar_k) noise.
ActionSequence add_noise(const ActionSequence& clean, const ActionSequence& noise, int k, const NoiseSchedule& sched);

struct DenoiseOptions {
  /// When false, the sigma_k z term is dropped at every step.
  bool stochastic = true;
};

/// One reverse step:
///   A^{k-1} = (A^k - beta_k / sqrt(1 - alpha_bar_k) eps_hat) / sqrt(alpha_k) + sigma_k z,
/// z ~ N(0, I) for k > 0 and z = 0 at k = 0; clamped to [-1, 1] when the
/// schedule clips samples.
ActionSequence denoise_step(const ActionSequence& noisy, const ActionSequence& eps_hat, int k,
                            const NoiseSchedule& sched, Rng& rng, DenoiseOptions opts = {});

/// Mean squared error over every element of every batch entry.
double epsilon_loss(std::span<const ActionSequence> eps_true, std::span<const ActionSequence> eps_pred);

ActionSequence standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

}  // namespace fdp::diffusion
