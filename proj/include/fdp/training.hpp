#pragma once

#include "fdp/dataset.hpp"
#include "fdp/denoiser.hpp"
#include "fdp/policy.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace fdp::train {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  /// Stops early after this many optimizer steps when positive; the LR
  /// schedule then spans exactly this many steps.
  std::int64_t max_steps = 0;
  std::uint64_t seed = 0;
  nn::AdamWConfig optimizer;
  /// Warmup is capped at half of the run so short runs still decay.
  std::int64_t warmup = 1000;
  double ema_power = 0.75;
  int validation_size = 64;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  std::vector<double> step_losses;
  /// Fixed-batch loss of the raw parameters before training and after each epoch.
  std::vector<double> validation_losses;
};

/// Training loop: shuffled minibatches, uniform k and Gaussian noise per
/// sample, AdamW with warmup-cosine LR and an EMA shadow. Fully determined by
/// the inputs and cfg.seed.
TrainResult train(const std::vector<data::TrainingSample>& samples, const nn::NetworkConfig& net_cfg,
                  const policy::PolicyConfig& policy_cfg, const policy::Normalizer& norm, const TrainConfig& cfg,
                  const data::Progress& progress = {});

}  // namespace fdp::train
