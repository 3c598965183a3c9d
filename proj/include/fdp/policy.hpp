#pragma once

// Observation construction, normalization and receding-horizon diffusion
// sampling of midpoint action plans.

#include "fdp/ddpm.hpp"
#include "fdp/nn/checkpoint.hpp"
#include "fdp/nn/unet.hpp"
#include "fdp/world.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <array>
#include <span>
#include <vector>

namespace fdp::policy {

inline constexpr int kStateDim = 6;
inline constexpr int kActionDim = 2;

using StateVec = std::array<double, kStateDim>;

/// Min/max scaling of states and actions onto [-1, 1]. Obstacle radii are
/// divided by 0.8 and goal coordinates by the workspace extent 7.
struct Normalizer {
  static constexpr double kRangeEps = 1e-6;
  static constexpr double kGridScale = 0.8;
  static constexpr double kGoalScale = 7.0;

  StateVec state_min{};
  StateVec state_max{};
  std::array<double, kActionDim> action_min{};
  std::array<double, kActionDim> action_max{};

  StateVec normalize_state(const StateVec& s) const;
  StateVec denormalize_state(const StateVec& s) const;
  Eigen::Vector2d normalize_action(const world::Action& a) const;
  world::Action denormalize_action(const Eigen::Vector2d& a) const;

  nlohmann::json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);
};

/// Fits per-dimension ranges; zero-width dimensions get width kRangeEps.
Normalizer fit_normalizer(std::span<const StateVec> states, std::span<const world::Action> actions);

struct PolicyConfig {
  int horizon = 64;         ///< T_p
  int obs_steps = 2;        ///< T_o
  int action_steps = 10;    ///< T_a
  int diffusion_steps = 100;
  int adaptive_candidates = 1;

  void validate() const;
  int obs_dim() const { return obs_steps * kStateDim + world::kGridCells + 2; }
  nlohmann::json to_json() const;
  static PolicyConfig from_json(const nlohmann::json& j);
};

/// [normalized states t-T_o+1 .. t, grid / 0.8, goal / 7]. A short history is
/// front-padded with its first state. Entries are clipped to [-1.5, 1.5].
Eigen::VectorXd build_observation(std::span<const world::MidpointState> history, const world::Environment& env,
                                  const Normalizer& norm, const PolicyConfig& cfg);

/// Rows T_o-1 .. T_o-2+T_a of a T_p x 2 plan as actions.
std::vector<world::Action> extract_executable(const diffusion::ActionSequence& plan, const PolicyConfig& cfg);

/// Index of the candidate whose executable window, rolled out from `state`,
/// keeps the largest minimum clearance over midpoint and both leaders.
/// Ties go to the lower index.
std::size_t adaptive_select(std::span<const diffusion::ActionSequence> candidates, const world::MidpointState& state,
                            const world::Environment& env, const PolicyConfig& cfg,
                            const world::WorldConfig& world = {});

/// Frozen denoiser snapshot (EMA weights) with its normalizer.
class DiffusionPolicy {
 public:
  explicit DiffusionPolicy(const nn::Checkpoint& ckpt);
  DiffusionPolicy(nn::NetworkConfig net, nn::ParameterStore<float> params, Normalizer norm, PolicyConfig cfg);

  const PolicyConfig& config() const { return cfg_; }
  const Normalizer& normalizer() const { return norm_; }
  const diffusion::NoiseSchedule& schedule() const { return sched_; }
  const nn::ConditionalUnet1D<float>& network() const { return net_; }
  const nn::ParameterStore<float>& parameters() const { return params_; }

  /// Runs the K-step reverse chain for `count` plans in one batch and returns
  /// normalized sequences. Initial noise is drawn candidate by candidate, then
  /// one noise draw per candidate per step.
  std::vector<diffusion::ActionSequence> sample_normalized(const Eigen::VectorXd& obs, int count, Rng& rng) const;

  /// Physical-unit plans (T_p x [v, omega]).
  std::vector<diffusion::ActionSequence> sample_plans(const Eigen::VectorXd& obs, int count, Rng& rng) const;
  diffusion::ActionSequence sample_plan(const Eigen::VectorXd& obs, Rng& rng) const;

 private:
  nn::ConditionalUnet1D<float> net_;
  nn::ParameterStore<float> params_;
  Normalizer norm_;
  PolicyConfig cfg_;
  diffusion::NoiseSchedule sched_;
};

}  // namespace fdp::policy
