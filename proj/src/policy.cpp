#include "fdp/policy.hpp"

#include "fdp/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fdp::policy {

namespace {

double to_unit(double x, double lo, double hi) {
  const double range = std::max(hi - lo, Normalizer::kRangeEps);
  return 2.0 * (x - lo) / range - 1.0;
}

double from_unit(double x, double lo, double hi) {
  const double range = std::max(hi - lo, Normalizer::kRangeEps);
  return (x + 1.0) * 0.5 * range + lo;
}

template <std::size_t N>
nlohmann::json array_json(const std::array<double, N>& a) {
  return nlohmann::json(std::vector<double>(a.begin(), a.end()));
}

template <std::size_t N>
std::array<double, N> array_from_json(const nlohmann::json& j, const char* key) {
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != N) throw ConfigError(std::string("normalizer field '") + key + "' has the wrong length");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace

StateVec Normalizer::normalize_state(const StateVec& s) const {
  StateVec out{};
  for (int i = 0; i < kStateDim; ++i) out[i] = to_unit(s[i], state_min[i], state_max[i]);
  return out;
}

StateVec Normalizer::denormalize_state(const StateVec& s) const {
  StateVec out{};
  for (int i = 0; i < kStateDim; ++i) out[i] = from_unit(s[i], state_min[i], state_max[i]);
  return out;
}

Eigen::Vector2d Normalizer::normalize_action(const world::Action& a) const {
  return {to_unit(a.v, action_min[0], action_max[0]), to_unit(a.omega, action_min[1], action_max[1])};
}

world::Action Normalizer::denormalize_action(const Eigen::Vector2d& a) const {
  return {from_unit(a[0], action_min[0], action_max[0]), from_unit(a[1], action_min[1], action_max[1])};
}

nlohmann::json Normalizer::to_json() const {
  return {{"state_min", array_json(state_min)},
          {"state_max", array_json(state_max)},
          {"action_min", array_json(action_min)},
          {"action_max", array_json(action_max)},
          {"grid_scale", kGridScale},
          {"goal_scale", kGoalScale}};
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  try {
    Normalizer n;
    n.state_min = array_from_json<kStateDim>(j, "state_min");
    n.state_max = array_from_json<kStateDim>(j, "state_max");
    n.action_min = array_from_json<kActionDim>(j, "action_min");
    n.action_max = array_from_json<kActionDim>(j, "action_max");
    return n;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid normalizer: ") + e.what());
  }
}

Normalizer fit_normalizer(std::span<const StateVec> states, std::span<const world::Action> actions) {
  if (states.empty() || actions.empty()) throw DataError("cannot fit a normalizer to an empty dataset");
  Normalizer n;
  n.state_min.fill(std::numeric_limits<double>::infinity());
  n.state_max.fill(-std::numeric_limits<double>::infinity());
  for (const auto& s : states) {
    for (int i = 0; i < kStateDim; ++i) {
      n.state_min[i] = std::min(n.state_min[i], s[i]);
      n.state_max[i] = std::max(n.state_max[i], s[i]);
    }
  }
  n.action_min = {actions[0].v, actions[0].omega};
  n.action_max = n.action_min;
  for (const auto& a : actions) {
    n.action_min[0] = std::min(n.action_min[0], a.v);
    n.action_max[0] = std::max(n.action_max[0], a.v);
    n.action_min[1] = std::min(n.action_min[1], a.omega);
    n.action_max[1] = std::max(n.action_max[1], a.omega);
  }
  return n;
}

void PolicyConfig::validate() const {
  if (horizon < 1 || obs_steps < 1 || diffusion_steps < 1) throw ConfigError("policy sizes must be positive");
  if (action_steps < 1 || action_steps > horizon - obs_steps + 1) {
    throw ConfigError("action_steps must lie in [1, horizon - obs_steps + 1]");
  }
  if (adaptive_candidates < 1) throw ConfigError("adaptive_candidates must be at least 1");
}

nlohmann::json PolicyConfig::to_json() const {
  return {{"horizon", horizon},
          {"obs_steps", obs_steps},
          {"action_steps", action_steps},
          {"diffusion_steps", diffusion_steps},
          {"adaptive_candidates", adaptive_candidates}};
}

PolicyConfig PolicyConfig::from_json(const nlohmann::json& j) {
  PolicyConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "horizon") c.horizon = value.get<int>();
    else if (key == "obs_steps") c.obs_steps = value.get<int>();
    else if (key == "action_steps") c.action_steps = value.get<int>();
    else if (key == "diffusion_steps") c.diffusion_steps = value.get<int>();
    else if (key == "adaptive_candidates") c.adaptive_candidates = value.get<int>();
    else throw ConfigError("unknown policy key '" + key + "'");
  }
  c.validate();
  return c;
}

Eigen::VectorXd build_observation(std::span<const world::MidpointState> history, const world::Environment& env,
                                  const Normalizer& norm, const PolicyConfig& cfg) {
  if (history.empty()) throw InvalidArgument("observation needs at least one state");
  Eigen::VectorXd obs(cfg.obs_dim());
  int pos = 0;
  const int have = static_cast<int>(history.size());
  for (int i = 0; i < cfg.obs_steps; ++i) {
    const int src = std::max(0, have - cfg.obs_steps + i);
    const StateVec s = norm.normalize_state(history[static_cast<std::size_t>(src)].to_vector());
    for (double v : s) obs[pos++] = v;
  }
  for (double r : world::encode_obstacle_grid(env)) obs[pos++] = r / Normalizer::kGridScale;
  obs[pos++] = env.goal.x() / Normalizer::kGoalScale;
  obs[pos++] = env.goal.y() / Normalizer::kGoalScale;
  return obs.cwiseMax(-1.5).cwiseMin(1.5);
}

std::vector<world::Action> extract_executable(const diffusion::ActionSequence& plan, const PolicyConfig& cfg) {
  const int first = cfg.obs_steps - 1;
  if (cfg.action_steps < 1 || first < 0 || first + cfg.action_steps > plan.rows() || plan.cols() != kActionDim) {
    throw ConfigError("executable window [" + std::to_string(first) + ", " +
                      std::to_string(first + cfg.action_steps) + ") does not fit a plan of " +
                      std::to_string(plan.rows()) + " rows");
  }
  std::vector<world::Action> out;
  out.reserve(static_cast<std::size_t>(cfg.action_steps));
  for (int r = first; r < first + cfg.action_steps; ++r) out.push_back({plan(r, 0), plan(r, 1)});
  return out;
}

std::size_t adaptive_select(std::span<const diffusion::ActionSequence> candidates, const world::MidpointState& state,
                            const world::Environment& env, const PolicyConfig& cfg, const world::WorldConfig& world) {
  if (candidates.empty()) throw InvalidArgument("adaptive_select needs at least one candidate");
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    world::MidpointState s = state;
    double score = std::numeric_limits<double>::infinity();
    for (const auto& a : extract_executable(candidates[i], cfg)) {
      s = world::step_midpoint(s, a, world.dt, world.limits);
      const auto [l1, l2] = world::leaders_from_midpoint(s, world.bar_length);
      score = std::min({score, world::clearance(s.position, env), world::clearance(l1, env),
                        world::clearance(l2, env)});
    }
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

DiffusionPolicy::DiffusionPolicy(const nn::Checkpoint& ckpt)
    : DiffusionPolicy(ckpt.network, ckpt.ema, Normalizer::from_json(ckpt.normalizer),
                      PolicyConfig::from_json(ckpt.policy)) {}

DiffusionPolicy::DiffusionPolicy(nn::NetworkConfig net, nn::ParameterStore<float> params, Normalizer norm,
                                 PolicyConfig cfg)
    : net_(std::move(net)),
      params_(std::move(params)),
      norm_(norm),
      cfg_(cfg),
      sched_(diffusion::NoiseSchedule::cosine(cfg.diffusion_steps)) {
  cfg_.validate();
  if (net_.config().horizon != cfg_.horizon) throw ConfigError("network horizon differs from the policy horizon");
  if (net_.config().cond_dim != cfg_.obs_dim()) throw ConfigError("network cond_dim differs from the observation size");
  if (net_.config().input_channels != kActionDim) throw ConfigError("network must have 2 input channels");
  if (!params_.same_layout(net_.layout())) throw ConfigError("parameters do not match the network layout");
}

std::vector<diffusion::ActionSequence> DiffusionPolicy::sample_normalized(const Eigen::VectorXd& obs, int count,
                                                                          Rng& rng) const {
  if (count < 1) throw InvalidArgument("sample count must be positive");
  if (obs.size() != cfg_.obs_dim()) throw InvalidArgument("observation has the wrong length");
  std::vector<diffusion::ActionSequence> seqs;
  seqs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) seqs.push_back(diffusion::standard_normal(cfg_.horizon, kActionDim, rng));
  const std::vector<Eigen::VectorXd> obs_batch(static_cast<std::size_t>(count), obs);
  std::vector<int> steps(static_cast<std::size_t>(count));
  for (int k = sched_.steps() - 1; k >= 0; --k) {
    std::fill(steps.begin(), steps.end(), k);
    const auto eps = nn::predict_noise<float>(net_, params_, seqs, steps, obs_batch);
    for (int i = 0; i < count; ++i) {
      auto& a = seqs[static_cast<std::size_t>(i)];
      a = diffusion::denoise_step(a, eps[static_cast<std::size_t>(i)], k, sched_, rng);
      if (!a.allFinite()) throw SamplingError("non-finite sample at diffusion step " + std::to_string(k));
    }
  }
  return seqs;
}

std::vector<diffusion::ActionSequence> DiffusionPolicy::sample_plans(const Eigen::VectorXd& obs, int count,
                                                                     Rng& rng) const {
  auto seqs = sample_normalized(obs, count, rng);
  for (auto& a : seqs) {
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const world::Action phys = norm_.denormalize_action(a.row(r).transpose());
      a(r, 0) = phys.v;
      a(r, 1) = phys.omega;
    }
  }
  return seqs;
}

diffusion::ActionSequence DiffusionPolicy::sample_plan(const Eigen::VectorXd& obs, Rng& rng) const {
  return sample_plans(obs, 1, rng).front();
}

}  // namespace fdp::policy
