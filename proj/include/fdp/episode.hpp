#pragma once

// Closed-loop episodes: a planner drives the leader-bar midpoint, the leaders
// ride the bar and followers run the formation law between planner steps.

#include "fdp/controllers.hpp"
#include "fdp/formation_graph.hpp"
#include "fdp/policy.hpp"
#include "fdp/world.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fdp::episode {

enum class PolicyKind { Diffusion, Pac, Mppi };

std::string to_string(PolicyKind k);
PolicyKind policy_from_string(const std::string& s);

/// Formation graph, gains and the follower start poses.
struct FormationSetup {
  graph::DirectedGraph graph = graph::square_formation_graph();
  std::vector<double> desired_sq = graph::square_formation_desired_sq();
  control::FormationGains gains;
  std::vector<world::UnicycleState> followers{{{-0.2, -0.9}, {-1.0, 0.0}}, {{0.4, -1.0}, {0.0, 1.0}}};
  double follower_dt = 1e-5;
};

struct EpisodeSetup {
  world::WorldConfig world;
  FormationSetup formation;
  control::PacConfig pac;
  control::MppiConfig mppi;
};

/// Per-step trace of one episode. Entry i is the state after i planner steps;
/// actions[i] is the command applied from entry i (the terminal entry repeats
/// the last applied command so every array has the same length).
struct EpisodeRecord {
  world::Environment env;
  std::string policy;
  std::uint64_t seed = 0;
  world::Outcome outcome = world::Outcome::Running;
  std::vector<policy::StateVec> states;
  std::vector<world::Action> actions;
  std::vector<std::array<Vec2, 2>> leaders;
  std::vector<std::vector<Vec2>> followers;
  std::vector<double> clearance;

  std::size_t length() const { return states.size(); }
  /// Number of planner steps executed.
  std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
  void validate() const;
};

nlohmann::json to_json(const EpisodeRecord& r);
EpisodeRecord record_from_json(const nlohmann::json& j);

struct RunOptions {
  const policy::DiffusionPolicy* model = nullptr;
  /// Overrides the model's candidate count when set.
  std::optional<int> adaptive_candidates;
};

/// Runs until collision, success or timeout. `seed` drives every stochastic
/// component (diffusion noise, MPPI sampling).
EpisodeRecord run_episode(PolicyKind kind, const world::Environment& env, const EpisodeSetup& setup,
                          std::uint64_t seed, const RunOptions& opts = {});

}  // namespace fdp::episode
