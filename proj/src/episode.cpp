#include "fdp/episode.hpp"

#include <deque>
#include <memory>

namespace fdp::episode {

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Diffusion: return "diffusion";
    case PolicyKind::Pac: return "pac";
    case PolicyKind::Mppi: return "mppi";
  }
  throw InvalidArgument("unknown policy kind");
}

PolicyKind policy_from_string(const std::string& s) {
  if (s == "diffusion") return PolicyKind::Diffusion;
  if (s == "pac") return PolicyKind::Pac;
  if (s == "mppi") return PolicyKind::Mppi;
  throw InvalidArgument("unknown policy '" + s + "' (expected diffusion, pac or mppi)");
}

void EpisodeRecord::validate() const {
  const std::size_t n = states.size();
  if (n == 0) throw DataError("episode record has no states");
  if (actions.size() != n || leaders.size() != n || followers.size() != n || clearance.size() != n) {
    throw DataError("episode record arrays differ in length");
  }
  if (outcome == world::Outcome::Running) throw DataError("episode record has no terminal outcome");
}

namespace {

nlohmann::json point(const Vec2& p) { return nlohmann::json::array({p.x(), p.y()}); }

Vec2 point_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw DataError("expected an [x, y] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

nlohmann::json to_json(const EpisodeRecord& r) {
  nlohmann::json states = nlohmann::json::array();
  for (const auto& s : r.states) states.push_back(s);
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : r.actions) actions.push_back({a.v, a.omega});
  nlohmann::json leaders = nlohmann::json::array();
  for (const auto& l : r.leaders) leaders.push_back({point(l[0]), point(l[1])});
  nlohmann::json followers = nlohmann::json::array();
  for (const auto& fs : r.followers) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& p : fs) row.push_back(point(p));
    followers.push_back(std::move(row));
  }
  return {{"env", world::to_json(r.env)},
          {"policy", r.policy},
          {"seed", r.seed},
          {"outcome", world::to_string(r.outcome)},
          {"states", std::move(states)},
          {"actions", std::move(actions)},
          {"leaders", std::move(leaders)},
          {"followers", std::move(followers)},
          {"clearance", r.clearance}};
}

EpisodeRecord record_from_json(const nlohmann::json& j) {
  EpisodeRecord r;
  try {
    r.env = world::environment_from_json(j.at("env"));
    r.policy = j.at("policy").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.outcome = world::outcome_from_string(j.at("outcome").get<std::string>());
    for (const auto& s : j.at("states")) r.states.push_back(s.get<policy::StateVec>());
    for (const auto& a : j.at("actions")) {
      if (!a.is_array() || a.size() != 2) throw DataError("expected a [v, omega] pair");
      r.actions.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    for (const auto& l : j.at("leaders")) {
      if (!l.is_array() || l.size() != 2) throw DataError("expected two leader positions");
      r.leaders.push_back({point_from(l[0]), point_from(l[1])});
    }
    for (const auto& row : j.at("followers")) {
      std::vector<Vec2> fs;
      for (const auto& p : row) fs.push_back(point_from(p));
      r.followers.push_back(std::move(fs));
    }
    r.clearance = j.at("clearance").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed episode record: ") + e.what());
  }
  r.validate();
  return r;
}

namespace {

void push_entry(EpisodeRecord& rec, const world::FormationState& fs, const world::Environment& env) {
  rec.states.push_back(fs.midpoint.to_vector());
  rec.leaders.push_back(fs.leaders);
  std::vector<Vec2> fp;
  fp.reserve(fs.followers.size());
  for (const auto& f : fs.followers) fp.push_back(f.position);
  rec.followers.push_back(std::move(fp));
  rec.clearance.push_back(world::formation_clearance(fs, env));
}

/// Produces one midpoint command per call.
class Planner {
 public:
  virtual ~Planner() = default;
  virtual world::Action next(std::span<const world::MidpointState> history, const world::Environment& env) = 0;
};

class PacPlanner final : public Planner {
 public:
  explicit PacPlanner(const control::PacConfig& cfg) : cfg_(cfg) {}
  world::Action next(std::span<const world::MidpointState> history, const world::Environment& env) override {
    return control::pac_command(history.back(), env, cfg_);
  }

 private:
  control::PacConfig cfg_;
};

class MppiPlanner final : public Planner {
 public:
  MppiPlanner(const control::MppiConfig& cfg, const world::WorldConfig& world, std::uint64_t seed)
      : mppi_(cfg, world, seed) {}
  world::Action next(std::span<const world::MidpointState> history, const world::Environment& env) override {
    return mppi_.command(history.back(), env);
  }

 private:
  control::MppiController mppi_;
};

class DiffusionPlanner final : public Planner {
 public:
  DiffusionPlanner(const policy::DiffusionPolicy& model, int candidates, const world::WorldConfig& world,
                   std::uint64_t seed)
      : model_(model), candidates_(candidates), world_(world), rng_(seed) {
    if (candidates_ < 1) throw ConfigError("adaptive candidate count must be at least 1");
  }

  world::Action next(std::span<const world::MidpointState> history, const world::Environment& env) override {
    if (pending_.empty()) {
      const auto& cfg = model_.config();
      const auto obs = policy::build_observation(history, env, model_.normalizer(), cfg);
      const auto plans = model_.sample_plans(obs, candidates_, rng_);
      const std::size_t pick = candidates_ > 1 ? policy::adaptive_select(plans, history.back(), env, cfg, world_) : 0;
      const auto exec = policy::extract_executable(plans[pick], cfg);
      pending_.assign(exec.begin(), exec.end());
    }
    const world::Action a = pending_.front();
    pending_.pop_front();
    return a;
  }

 private:
  const policy::DiffusionPolicy& model_;
  int candidates_;
  world::WorldConfig world_;
  Rng rng_;
  std::deque<world::Action> pending_;
};

}  // namespace

EpisodeRecord run_episode(PolicyKind kind, const world::Environment& env, const EpisodeSetup& setup,
                          std::uint64_t seed, const RunOptions& opts) {
  const auto& wc = setup.world;
  std::unique_ptr<Planner> planner;
  std::size_t history_len = 1;
  switch (kind) {
    case PolicyKind::Pac: planner = std::make_unique<PacPlanner>(setup.pac); break;
    case PolicyKind::Mppi: planner = std::make_unique<MppiPlanner>(setup.mppi, wc, seed); break;
    case PolicyKind::Diffusion: {
      if (opts.model == nullptr) throw ConfigError("the diffusion policy needs a trained model");
      const int n = opts.adaptive_candidates.value_or(opts.model->config().adaptive_candidates);
      planner = std::make_unique<DiffusionPlanner>(*opts.model, n, wc, seed);
      history_len = static_cast<std::size_t>(opts.model->config().obs_steps);
      break;
    }
  }

  const control::FormationTracker tracker(setup.formation.graph, setup.formation.desired_sq, setup.formation.gains,
                                          setup.formation.follower_dt);
  world::FormationState fs;
  fs.midpoint.position = wc.start;
  fs.midpoint.heading = wrap_angle(wc.start_heading);
  {
    const auto [l1, l2] = world::leaders_from_midpoint(fs.midpoint, wc.bar_length);
    fs.leaders = {l1, l2};
  }
  fs.followers = setup.formation.followers;

  EpisodeRecord rec;
  rec.env = env;
  rec.policy = to_string(kind);
  rec.seed = seed;
  push_entry(rec, fs, env);

  std::deque<world::MidpointState> history{fs.midpoint};
  std::vector<world::MidpointState> window;
  for (;;) {
    rec.outcome = world::check_termination(fs, env, wc);
    if (rec.outcome != world::Outcome::Running) break;
    window.assign(history.begin(), history.end());
    const world::Action raw = planner->next(window, env);
    const world::MidpointState next = world::step_midpoint(fs.midpoint, raw, wc.dt, wc.limits);
    const world::Action applied{next.lin_vel, next.ang_vel};
    tracker.advance(fs.followers, control::bar_path(fs.midpoint, applied, wc.bar_length), wc.dt);
    fs.midpoint = next;
    const auto [l1, l2] = world::leaders_from_midpoint(fs.midpoint, wc.bar_length);
    fs.leaders = {l1, l2};
    fs.time_step += 1;
    rec.actions.push_back(applied);
    push_entry(rec, fs, env);
    history.push_back(fs.midpoint);
    while (history.size() > history_len) history.pop_front();
  }
  rec.actions.push_back(rec.actions.empty() ? world::Action{} : rec.actions.back());
  return rec;
}

}  // namespace fdp::episode
