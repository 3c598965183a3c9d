#include "fdp/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fdp::world {

Action ActionLimits::clamp(const Action& a) const {
  return {std::clamp(a.v, v_min, v_max), std::clamp(a.omega, -omega_max, omega_max)};
}

std::array<double, 6> MidpointState::to_vector() const {
  return {position.x(), position.y(), heading, lin_vel * std::cos(heading), lin_vel * std::sin(heading),
          ang_vel};
}

MidpointState MidpointState::from_vector(const std::array<double, 6>& s) {
  MidpointState m;
  m.position = {s[0], s[1]};
  m.heading = wrap_angle(s[2]);
  // Signed speed along the heading.
  m.lin_vel = s[3] * std::cos(m.heading) + s[4] * std::sin(m.heading);
  m.ang_vel = s[5];
  return m;
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Running: return "running";
    case Outcome::Success: return "success";
    case Outcome::Collision: return "collision";
    case Outcome::Timeout: return "timeout";
  }
  return "running";
}

Outcome outcome_from_string(const std::string& s) {
  if (s == "running") return Outcome::Running;
  if (s == "success") return Outcome::Success;
  if (s == "collision") return Outcome::Collision;
  if (s == "timeout") return Outcome::Timeout;
  throw DataError("unknown outcome '" + s + "'");
}

MidpointState step_midpoint(const MidpointState& state, Action action, double dt, const ActionLimits& limits) {
  if (!std::isfinite(action.v) || !std::isfinite(action.omega)) {
    throw InvalidAction("non-finite midpoint action");
  }
  if (!(dt > 0.0)) throw InvalidArgument("step_midpoint needs dt > 0");
  const Action a = limits.clamp(action);
  MidpointState next;
  next.position = state.position + dt * a.v * Vec2{std::cos(state.heading), std::sin(state.heading)};
  next.heading = wrap_angle(state.heading + a.omega * dt);
  next.lin_vel = a.v;
  next.ang_vel = a.omega;
  return next;
}

std::pair<Vec2, Vec2> leaders_from_midpoint(const MidpointState& state, double bar_length) {
  if (!(bar_length > 0.0)) throw InvalidArgument("bar length must be positive");
  const Vec2 half = 0.5 * bar_length * Vec2{std::sin(state.heading), -std::cos(state.heading)};
  return {state.position - half, state.position + half};
}

UnicycleState step_unicycle(const UnicycleState& state, double u, double omega, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("step_unicycle needs dt > 0");
  UnicycleState next;
  next.position = state.position + state.heading * (u * dt);
  next.heading = (state.heading + (dt * omega) * perp(state.heading)).normalized();
  return next;
}

std::array<double, kGridCells> encode_obstacle_grid(const Environment& env) {
  std::array<double, kGridCells> grid{};
  for (const auto& ob : env.obstacles) {
    const int i = std::clamp(static_cast<int>(std::floor(ob.center.x())) - 1, 0, kGridSize - 1);
    const int j = std::clamp(static_cast<int>(std::floor(ob.center.y())) - 1, 0, kGridSize - 1);
    double& cell = grid[static_cast<std::size_t>(i * kGridSize + j)];
    cell = std::max(cell, ob.radius);
  }
  return grid;
}

double clearance(const Vec2& point, const Environment& env) {
  double best = kNoObstacleClearance;
  for (const auto& ob : env.obstacles) best = std::min(best, (point - ob.center).norm() - ob.radius);
  return best;
}

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

bool acceptable(const Obstacle& cand, const std::vector<Obstacle>& placed, const Vec2& start, const Vec2& goal,
                const WorldConfig& cfg) {
  if ((start - cand.center).norm() - cand.radius <= cfg.keepout) return false;
  if ((goal - cand.center).norm() - cand.radius <= cfg.keepout) return false;
  for (const auto& other : placed) {
    const double overlap = cand.radius + other.radius - (cand.center - other.center).norm();
    if (overlap > cfg.max_overlap * std::min(cand.radius, other.radius)) return false;
  }
  return true;
}

}  // namespace

Environment sample_environment(std::uint64_t seed, const WorldConfig& cfg) {
  Rng rng(seed);
  Environment env;
  env.seed = seed;
  env.obstacle_region = cfg.obstacle_region;
  env.goal = {uniform(rng, cfg.goal_region.lo.x(), cfg.goal_region.hi.x()),
              uniform(rng, cfg.goal_region.lo.y(), cfg.goal_region.hi.y())};
  const int count = std::uniform_int_distribution<int>(cfg.min_obstacles, cfg.max_obstacles)(rng);
  int rejections = 0;
  while (static_cast<int>(env.obstacles.size()) < count) {
    Obstacle cand;
    cand.radius = uniform(rng, cfg.min_radius, cfg.max_radius);
    cand.center = {uniform(rng, cfg.obstacle_region.lo.x(), cfg.obstacle_region.hi.x()),
                   uniform(rng, cfg.obstacle_region.lo.y(), cfg.obstacle_region.hi.y())};
    if (acceptable(cand, env.obstacles, cfg.start, env.goal, cfg)) {
      env.obstacles.push_back(cand);
    } else if (++rejections > cfg.max_rejections) {
      throw EnvironmentGenerationError("environment generation exceeded " + std::to_string(cfg.max_rejections) +
                                       " rejections (seed " + std::to_string(seed) + ")");
    }
  }
  return env;
}

double formation_clearance(const FormationState& fs, const Environment& env) {
  double c = clearance(fs.midpoint.position, env);
  for (const auto& l : fs.leaders) c = std::min(c, clearance(l, env));
  for (const auto& f : fs.followers) c = std::min(c, clearance(f.position, env));
  return c;
}

Outcome check_termination(const FormationState& fs, const Environment& env, const WorldConfig& cfg) {
  if (formation_clearance(fs, env) < 0.0) return Outcome::Collision;
  if ((fs.midpoint.position - env.goal).norm() < cfg.success_radius) return Outcome::Success;
  if (fs.time_step >= cfg.max_steps) return Outcome::Timeout;
  return Outcome::Running;
}

nlohmann::json to_json(const Environment& env) {
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& o : env.obstacles) {
    obs.push_back({{"c", {o.center.x(), o.center.y()}}, {"r", o.radius}});
  }
  return {{"seed", env.seed}, {"goal", {env.goal.x(), env.goal.y()}}, {"obstacles", obs}};
}

Environment environment_from_json(const nlohmann::json& j, const WorldConfig& cfg) {
  try {
    Environment env;
    env.seed = j.at("seed").get<std::uint64_t>();
    const auto& g = j.at("goal");
    env.goal = {g.at(0).get<double>(), g.at(1).get<double>()};
    env.obstacle_region = cfg.obstacle_region;
    for (const auto& o : j.at("obstacles")) {
      Obstacle ob;
      ob.center = {o.at("c").at(0).get<double>(), o.at("c").at(1).get<double>()};
      ob.radius = o.at("r").get<double>();
      if (!(ob.radius > 0.0)) throw DataError("obstacle radius must be positive");
      env.obstacles.push_back(ob);
    }
    return env;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed environment JSON: ") + e.what());
  }
}

}  // namespace fdp::world
