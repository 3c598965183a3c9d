#pragma once

// JSON run configuration shared by every CLI subcommand. Every section and
// key is optional; unknown ones are rejected.

#include "fdp/dataset.hpp"
#include "fdp/episode.hpp"
#include "fdp/nn/unet.hpp"
#include "fdp/policy.hpp"
#include "fdp/training.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>

namespace fdp {

struct Seeds {
  std::uint64_t data = 0;
  std::uint64_t train = 0;
  std::uint64_t eval = 1000000;
};

struct RunConfig {
  episode::EpisodeSetup setup;
  nn::NetworkConfig network;
  policy::PolicyConfig policy;
  train::TrainConfig train;
  data::DatasetConfig dataset;
  Seeds seeds;

  /// Network config with horizon and cond_dim derived from the policy.
  nn::NetworkConfig network_for_policy() const;

  nlohmann::json to_json() const;
  /// Applies `j` on top of the defaults.
  static RunConfig from_json(const nlohmann::json& j);
};

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace fdp
