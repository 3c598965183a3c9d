#pragma once

#include "fdp/common.hpp"
#include "fdp/formation_graph.hpp"
#include "fdp/world.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fdp::control {

struct FormationGains {
  double k1 = 35.0;
  double k2 = 30.0;
  double beta = 23.0;
};

struct UnicycleCommand {
  double u = 0.0;
  double omega = 0.0;
};

/// chi_i = sum over undirected neighbours j of (d_ij^2 - d*_ij^2) (p_i - p_j).
Vec2 chi(int vertex, const graph::Framework& fw);

/// Distance-based tracking law for follower `vertex`:
///   u     = -h^T (k1 chi + beta sign(chi))
///   omega = -h x (k2 chi + beta sign(chi))
/// sign is componentwise with sign(0) = 0. The negative feedback makes chi the
/// descent direction of the summed squared distance errors.
UnicycleCommand formation_command(int vertex, const graph::Framework& fw, const Vec2& heading,
                                  const FormationGains& gains);

/// Integrates the follower closed loop while the leaders move along a
/// prescribed path. Commands are recomputed every substep.
class FormationTracker {
 public:
  /// Fills `out` (size = num_leaders) with leader positions at time tau.
  using LeaderPath = std::function<void(double tau, std::span<Vec2> out)>;

  FormationTracker(graph::DirectedGraph graph, std::vector<double> desired_sq, FormationGains gains,
                   double dt = 1e-5);

  const graph::DirectedGraph& graph() const { return graph_; }
  const std::vector<double>& desired_sq() const { return desired_sq_; }
  const FormationGains& gains() const { return gains_; }
  double dt() const { return dt_; }

  /// Advances followers (vertices num_leaders+1..n, in order) by `duration` seconds.
  void advance(std::vector<world::UnicycleState>& followers, const LeaderPath& leaders, double duration) const;

 private:
  struct Link {
    int other;  // zero-based vertex index
    double desired_sq;
  };

  graph::DirectedGraph graph_;
  std::vector<double> desired_sq_;
  FormationGains gains_;
  double dt_;
  std::vector<std::vector<Link>> links_;  // per follower
};

/// Leader path for one planner step: the midpoint moves with the constant
/// twist `action` from `start`, matching step_midpoint at tau = dt.
FormationTracker::LeaderPath bar_path(const world::MidpointState& start, const world::Action& action,
                                      double bar_length);

struct PacConfig {
  double attract_gain = 1.0;
  double repulse_gain = 0.6;
  double influence_radius = 1.2;
  double lateral_gain = 0.8;
  double v_max = 0.5;
  double omega_max = 1.5;
  double goal_tolerance = 0.3;
  double inflation = 0.2;  ///< added to obstacle radii for the blocked-path test
};

/// Force sum used by pac_command; exposed for diagnostics.
Vec2 pac_force(const world::MidpointState& state, const world::Environment& env, const PacConfig& cfg);

/// Path-aware potential-field controller used to generate demonstrations.
world::Action pac_command(const world::MidpointState& state, const world::Environment& env, const PacConfig& cfg);

struct MppiConfig {
  int horizon = 30;
  int num_samples = 256;
  double temperature = 1.0;
  double noise_v = 0.3;
  double noise_omega = 0.5;
  double w_goal = 10.0;
  double w_collision = 100.0;
  double w_control = 0.1;
  double safety_margin = 0.15;
};

/// Sampling-based MPPI baseline over the midpoint kinematics. Owns the
/// warm-start nominal sequence and its noise stream, one instance per episode.
class MppiController {
 public:
  MppiController(MppiConfig cfg, const world::WorldConfig& world, std::uint64_t seed);

  world::Action command(const world::MidpointState& state, const world::Environment& env);

  const std::vector<world::Action>& nominal() const { return nominal_; }
  void set_nominal(std::vector<world::Action> nominal);

 private:
  double rollout_cost(const world::MidpointState& state, const world::Environment& env,
                      std::span<const world::Action> actions) const;

  MppiConfig cfg_;
  world::WorldConfig world_;
  Rng rng_;
  std::vector<world::Action> nominal_;
};

}  // namespace fdp::control
