#pragma once

#include "fdp/episode.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fdp::metrics {

/// Quality metrics of one episode, all on the midpoint path.
struct EpisodeMetrics {
  double path_length = 0.0;
  double path_optimality = 0.0;
  double tracking_deviation = 0.0;
  double min_clearance = 0.0;
  double mean_clearance = 0.0;
  double mean_control = 0.0;
  double control_smoothness = 0.0;
  double energy = 0.0;
  double time = 0.0;
  double mean_velocity = 0.0;
  double mean_curvature = 0.0;
  double peak_curvature = 0.0;
  double jerk = 0.0;
  double orientation_stability = 0.0;

  static const std::vector<std::string>& names();
  std::vector<double> values() const;
  nlohmann::json to_json() const;
};

/// The straight-line reference runs from the first to the last recorded
/// midpoint. Control metrics use the executed actions only.
EpisodeMetrics compute_metrics(const episode::EpisodeRecord& record, double dt = 0.1);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;
};

struct EpisodeRow {
  std::size_t episode = 0;
  std::uint64_t seed = 0;
  world::Outcome outcome = world::Outcome::Running;
  int steps = 0;
  EpisodeMetrics metrics;
};

struct PolicyReport {
  std::string policy;
  int episodes = 0;
  int successes = 0;
  int collisions = 0;
  int timeouts = 0;
  double success_rate = 0.0;
  /// Mean and population std of each metric over successful episodes, in
  /// EpisodeMetrics::names() order. Empty when nothing succeeded.
  std::vector<Aggregate> quality;
  std::vector<EpisodeRow> rows;

  nlohmann::json to_json() const;
};

PolicyReport summarize(const std::string& policy, const std::vector<episode::EpisodeRecord>& records,
                       double dt = 0.1);

struct EvaluationPlan {
  std::uint64_t seed = 0;  ///< episode i uses environment and policy seed seed + i
  int episodes = 20;
  int jobs = 1;
};

/// Runs one episode per environment seed, ordered by episode id.
std::vector<episode::EpisodeRecord> run_episodes(episode::PolicyKind kind, const EvaluationPlan& plan,
                                                 const episode::EpisodeSetup& setup,
                                                 const episode::RunOptions& opts = {});

/// Several policies evaluated on the same environments.
struct MetricsReport {
  std::vector<PolicyReport> policies;

  nlohmann::json to_json() const;
  /// One row per metric, one column per policy; cells are "mean ± std".
  std::string to_csv() const;
};

inline constexpr const char* kSuccessOnlyNote =
    "quality metrics are aggregated over successful episodes only; success_rate covers all episodes";

}  // namespace fdp::metrics
