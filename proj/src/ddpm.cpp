#include "fdp/ddpm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace fdp::diffusion {

double cosine_alpha_bar(double t, int steps) {
  constexpr double s = 0.008;
  auto f = [&](double x) {
    const double c = std::cos((x / steps + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  return f(t) / f(0.0);
}

NoiseSchedule NoiseSchedule::cosine(int steps, bool clip_sample, double max_beta) {
  if (steps < 2) throw InvalidArgument("cosine schedule needs at least 2 steps");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double b = 1.0 - cosine_alpha_bar(k + 1, steps) / cosine_alpha_bar(k, steps);
    betas[static_cast<std::size_t>(k)] = std::min(b, max_beta);
  }
  return NoiseSchedule(std::move(betas), clip_sample);
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas, bool clip_sample)
    : betas_(std::move(betas)), clip_sample_(clip_sample) {
  if (betas_.empty()) throw InvalidArgument("empty noise schedule");
  double prod = 1.0;
  for (double b : betas_) {
    if (!(b > 0.0 && b < 1.0)) throw InvalidArgument("betas must lie in (0, 1)");
    alphas_.push_back(1.0 - b);
    prod *= 1.0 - b;
    alpha_bars_.push_back(prod);
  }
}

double NoiseSchedule::sigma(int k) const { return std::sqrt(beta(k)); }

namespace {

void check_step(int k, const NoiseSchedule& sched) {
  if (k < 0 || k >= sched.steps()) {
    throw InvalidArgument("diffusion step " + std::to_string(k) + " outside [0, " + std::to_string(sched.steps()) + ")");
  }
}

}  // namespace

ActionSequence add_noise(const ActionSequence& clean, const ActionSequence& noise, int k, const NoiseSchedule& sched) {
  check_step(k, sched);
  if (clean.rows() != noise.rows() || clean.cols() != noise.cols()) {
    throw InvalidArgument("add_noise shape mismatch");
  }
  const double ab = sched.alpha_bar(k);
  return std::sqrt(ab) * clean + std::sqrt(1.0 - ab) * noise;
}

ActionSequence denoise_step(const ActionSequence& noisy, const ActionSequence& eps_hat, int k,
                            const NoiseSchedule& sched, Rng& rng, DenoiseOptions opts) {
  check_step(k, sched);
  if (noisy.rows() != eps_hat.rows() || noisy.cols() != eps_hat.cols()) {
    throw InvalidArgument("denoise_step shape mismatch");
  }
  const double coef = sched.beta(k) / std::sqrt(1.0 - sched.alpha_bar(k));
  ActionSequence prev = (noisy - coef * eps_hat) / std::sqrt(sched.alpha(k));
  if (k > 0 && opts.stochastic) {
    prev += sched.sigma(k) * standard_normal(noisy.rows(), noisy.cols(), rng);
  }
  if (sched.clip_sample()) prev = prev.cwiseMax(-1.0).cwiseMin(1.0);
  return prev;
}

double epsilon_loss(std::span<const ActionSequence> eps_true, std::span<const ActionSequence> eps_pred) {
  if (eps_true.empty()) throw InvalidArgument("epsilon_loss on an empty batch");
  if (eps_true.size() != eps_pred.size()) throw InvalidArgument("epsilon_loss batch size mismatch");
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < eps_true.size(); ++i) {
    if (eps_true[i].rows() != eps_pred[i].rows() || eps_true[i].cols() != eps_pred[i].cols()) {
      throw InvalidArgument("epsilon_loss shape mismatch");
    }
    sum += (eps_true[i] - eps_pred[i]).squaredNorm();
    count += static_cast<double>(eps_true[i].size());
  }
  return sum / count;
}

ActionSequence standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ActionSequence out(rows, cols);
  // Row-major draw order so the stream does not depend on storage order.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = normal(rng);
  }
  return out;
}

}  // namespace fdp::diffusion
