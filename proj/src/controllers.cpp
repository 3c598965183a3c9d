#include "fdp/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace fdp::control {

Vec2 chi(int vertex, const graph::Framework& fw) {
  if (fw.graph.is_leader(vertex)) throw InvalidArgument("chi is defined for followers only");
  const Vec2& pi = fw.position(vertex);
  Vec2 acc = Vec2::Zero();
  bool any = false;
  for (int k = 0; k < fw.graph.num_edges(); ++k) {
    const auto& e = fw.graph.edges()[static_cast<std::size_t>(k)];
    int other = 0;
    if (e.tail == vertex) other = e.head;
    else if (e.head == vertex) other = e.tail;
    else continue;
    any = true;
    const Vec2 rel = pi - fw.position(other);
    acc += (rel.squaredNorm() - fw.desired_sq[static_cast<std::size_t>(k)]) * rel;
  }
  if (!any) throw InvalidArgument("follower " + std::to_string(vertex) + " has no neighbours");
  return acc;
}

namespace {

UnicycleCommand command_from_chi(const Vec2& c, const Vec2& h, const FormationGains& g) {
  const Vec2 s{sign0(c.x()), sign0(c.y())};
  const Vec2 lin = g.k1 * c + g.beta * s;
  const Vec2 ang = g.k2 * c + g.beta * s;
  return {-h.dot(lin), -cross2(h, ang)};
}

}  // namespace

UnicycleCommand formation_command(int vertex, const graph::Framework& fw, const Vec2& heading,
                                  const FormationGains& gains) {
  return command_from_chi(chi(vertex, fw), heading, gains);
}

FormationTracker::FormationTracker(graph::DirectedGraph g, std::vector<double> desired_sq, FormationGains gains,
                                   double dt)
    : graph_(std::move(g)), desired_sq_(std::move(desired_sq)), gains_(gains), dt_(dt) {
  if (!(dt_ > 0.0)) throw InvalidArgument("follower dt must be positive");
  if (static_cast<int>(desired_sq_.size()) != graph_.num_edges()) {
    throw InvalidArgument("one desired squared length per edge required");
  }
  for (int v : graph_.followers()) {
    std::vector<Link> links;
    for (int k = 0; k < graph_.num_edges(); ++k) {
      const auto& e = graph_.edges()[static_cast<std::size_t>(k)];
      if (e.tail == v) links.push_back({e.head - 1, desired_sq_[static_cast<std::size_t>(k)]});
      if (e.head == v) links.push_back({e.tail - 1, desired_sq_[static_cast<std::size_t>(k)]});
    }
    if (links.empty()) throw InvalidArgument("follower " + std::to_string(v) + " has no neighbours");
    links_.push_back(std::move(links));
  }
}

void FormationTracker::advance(std::vector<world::UnicycleState>& followers, const LeaderPath& leaders,
                               double duration) const {
  const int nl = graph_.num_leaders();
  const std::size_t nf = links_.size();
  if (followers.size() != nf) throw InvalidArgument("follower count does not match the graph");
  const long substeps = std::max(1L, std::lround(duration / dt_));
  const double h = duration / static_cast<double>(substeps);

  std::vector<Vec2> pos(static_cast<std::size_t>(graph_.num_vertices()));
  std::vector<UnicycleCommand> cmd(nf);
  for (long s = 0; s < substeps; ++s) {
    leaders(static_cast<double>(s) * h, std::span<Vec2>(pos.data(), static_cast<std::size_t>(nl)));
    for (std::size_t f = 0; f < nf; ++f) pos[static_cast<std::size_t>(nl) + f] = followers[f].position;
    for (std::size_t f = 0; f < nf; ++f) {
      const Vec2& pi = pos[static_cast<std::size_t>(nl) + f];
      Vec2 c = Vec2::Zero();
      for (const auto& link : links_[f]) {
        const Vec2 rel = pi - pos[static_cast<std::size_t>(link.other)];
        c += (rel.squaredNorm() - link.desired_sq) * rel;
      }
      cmd[f] = command_from_chi(c, followers[f].heading, gains_);
    }
    for (std::size_t f = 0; f < nf; ++f) followers[f] = world::step_unicycle(followers[f], cmd[f].u, cmd[f].omega, h);
  }
}

FormationTracker::LeaderPath bar_path(const world::MidpointState& start, const world::Action& action,
                                      double bar_length) {
  return [start, action, bar_length](double tau, std::span<Vec2> out) {
    world::MidpointState m;
    m.position = start.position + tau * action.v * Vec2{std::cos(start.heading), std::sin(start.heading)};
    m.heading = start.heading + action.omega * tau;
    const auto [l1, l2] = world::leaders_from_midpoint(m, bar_length);
    out[0] = l1;
    out[1] = l2;
  };
}

Vec2 pac_force(const world::MidpointState& state, const world::Environment& env, const PacConfig& cfg) {
  const Vec2 p = state.position;
  const Vec2 to_goal = env.goal - p;
  const double goal_dist = to_goal.norm();
  if (goal_dist < 1e-12) return Vec2::Zero();
  const Vec2 u_goal = to_goal / goal_dist;
  Vec2 force = cfg.attract_gain * u_goal;

  for (const auto& ob : env.obstacles) {
    const Vec2 away = p - ob.center;
    const double dist = away.norm();
    const double d = std::max(dist - ob.radius, 1e-3);
    if (d < cfg.influence_radius && dist > 1e-12) {
      force += cfg.repulse_gain * (1.0 / d - 1.0 / cfg.influence_radius) / (d * d) * (away / dist);
    }
  }

  // Nearest obstacle whose inflated disc cuts the straight segment to the goal.
  const world::Obstacle* blocking = nullptr;
  double blocking_s = std::numeric_limits<double>::infinity();
  for (const auto& ob : env.obstacles) {
    const Vec2 rel = ob.center - p;
    const double s = rel.dot(u_goal);
    if (s < 0.0 || s > goal_dist) continue;
    const double lateral = (rel - s * u_goal).norm();
    if (lateral < ob.radius + cfg.inflation && s < blocking_s) {
      blocking = &ob;
      blocking_s = s;
    }
  }
  if (blocking != nullptr) {
    const Vec2 away = p - blocking->center;
    if (away.norm() > 1e-12) {
      Vec2 side = perp(away.normalized());
      const Vec2 heading{std::cos(state.heading), std::sin(state.heading)};
      const double align = side.dot(heading);
      if (std::abs(align) > 1e-9) {
        if (align < 0.0) side = -side;
      } else {
        // Heading points at the obstacle: pass on the side away from its offset.
        const double offset = cross2(u_goal, blocking->center - p);
        if ((offset > 0.0 && cross2(u_goal, side) > 0.0) || (offset <= 0.0 && cross2(u_goal, side) < 0.0)) {
          side = -side;
        }
      }
      force += cfg.lateral_gain * side;
    }
  }
  return force;
}

world::Action pac_command(const world::MidpointState& state, const world::Environment& env, const PacConfig& cfg) {
  const Vec2 force = pac_force(state, env, cfg);
  if ((env.goal - state.position).norm() < cfg.goal_tolerance || force.norm() < 1e-12) return {0.0, 0.0};
  const double err = wrap_angle(std::atan2(force.y(), force.x()) - state.heading);
  const double v = std::clamp(force.norm() * std::cos(err), 0.0, cfg.v_max);
  const double omega = std::clamp(cfg.omega_max * err / std::numbers::pi * 3.0, -cfg.omega_max, cfg.omega_max);
  return {v, omega};
}

MppiController::MppiController(MppiConfig cfg, const world::WorldConfig& world, std::uint64_t seed)
    : cfg_(cfg), world_(world), rng_(seed), nominal_(static_cast<std::size_t>(std::max(cfg.horizon, 1))) {
  if (cfg_.horizon < 1 || cfg_.num_samples < 1 || !(cfg_.temperature > 0.0)) {
    throw InvalidArgument("MPPI needs horizon >= 1, samples >= 1, temperature > 0");
  }
}

void MppiController::set_nominal(std::vector<world::Action> nominal) {
  if (static_cast<int>(nominal.size()) != cfg_.horizon) throw InvalidArgument("nominal length must equal horizon");
  nominal_ = std::move(nominal);
}

double MppiController::rollout_cost(const world::MidpointState& state, const world::Environment& env,
                                    std::span<const world::Action> actions) const {
  world::MidpointState s = state;
  double cost = 0.0;
  for (const auto& a : actions) {
    s = world::step_midpoint(s, a, world_.dt, world_.limits);
    const auto [l1, l2] = world::leaders_from_midpoint(s, world_.bar_length);
    const double c = std::min({world::clearance(s.position, env), world::clearance(l1, env), world::clearance(l2, env)});
    if (c < cfg_.safety_margin) cost += cfg_.w_collision * (cfg_.safety_margin - c);
    cost += cfg_.w_control * (a.v * a.v + a.omega * a.omega);
  }
  cost += cfg_.w_goal * (s.position - env.goal).norm();
  return cost;
}

world::Action MppiController::command(const world::MidpointState& state, const world::Environment& env) {
  const auto h = static_cast<std::size_t>(cfg_.horizon);
  const auto n = static_cast<std::size_t>(cfg_.num_samples);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<world::Action> samples(n * h);
  std::vector<double> costs(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < h; ++t) {
      const world::Action noisy{nominal_[t].v + cfg_.noise_v * normal(rng_),
                                nominal_[t].omega + cfg_.noise_omega * normal(rng_)};
      samples[i * h + t] = world_.limits.clamp(noisy);
    }
    costs[i] = rollout_cost(state, env, std::span<const world::Action>(samples.data() + i * h, h));
  }
  const double best = *std::min_element(costs.begin(), costs.end());
  double total = 0.0;
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = std::exp(-(costs[i] - best) / cfg_.temperature);
    total += weights[i];
  }
  for (std::size_t t = 0; t < h; ++t) {
    double v = 0.0;
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v += weights[i] * samples[i * h + t].v;
      w += weights[i] * samples[i * h + t].omega;
    }
    nominal_[t] = world_.limits.clamp({v / total, w / total});
  }
  const world::Action out = nominal_.front();
  // Warm start: shift left and hold the tail.
  std::rotate(nominal_.begin(), nominal_.begin() + 1, nominal_.end());
  nominal_.back() = nominal_[h >= 2 ? h - 2 : 0];
  return out;
}

}  // namespace fdp::control
