#pragma once

// PAC demonstration datasets: generation, NDJSON storage and the sliding
// windows that feed training.

#include "fdp/episode.hpp"
#include "fdp/policy.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

namespace fdp::data {

/// Receives one machine-readable progress event at a time.
using Progress = std::function<void(const nlohmann::json&)>;

struct DatasetConfig {
  int episodes = 200;        ///< successful demonstrations to keep
  std::uint64_t seed = 0;    ///< attempt i uses environment seed seed + i
  int jobs = 1;
  int yield_check_attempts = 1000;
  double min_yield = 0.1;
};

/// Runs PAC on freshly sampled environments and keeps successful episodes, in
/// attempt order, until `episodes` are collected. Throws ConfigError when
/// fewer than min_yield of the first yield_check_attempts attempts succeed.
std::vector<episode::EpisodeRecord> generate_dataset(const DatasetConfig& cfg, const episode::EpisodeSetup& setup,
                                                     const Progress& progress = {});

void write_dataset(const std::filesystem::path& path, const std::vector<episode::EpisodeRecord>& records);
std::vector<episode::EpisodeRecord> read_dataset(const std::filesystem::path& path);

policy::Normalizer fit_normalizer(const std::vector<episode::EpisodeRecord>& records);

struct TrainingSample {
  Eigen::VectorXd obs;
  Eigen::MatrixXd actions;  ///< T_p x 2, normalized
};

/// One sample per recorded step t: observation from states t-T_o+1..t and
/// actions t-T_o+1..t-T_o+T_p, with out-of-range indices clamped to the
/// first or last entry.
std::vector<TrainingSample> window_samples(const episode::EpisodeRecord& record, const policy::PolicyConfig& cfg,
                                           const policy::Normalizer& norm);

std::vector<TrainingSample> window_dataset(const std::vector<episode::EpisodeRecord>& records,
                                           const policy::PolicyConfig& cfg, const policy::Normalizer& norm);

}  // namespace fdp::data
