#include "fdp/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fdp::train {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
  if (warmup < 0) throw ConfigError("warmup must be non-negative");
  if (!(optimizer.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (validation_size < 1) throw ConfigError("validation size must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"max_steps", max_steps},
          {"lr", optimizer.lr},
          {"weight_decay", optimizer.weight_decay},
          {"warmup", warmup},
          {"ema_power", ema_power},
          {"validation_size", validation_size}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "epochs") c.epochs = value.get<int>();
    else if (key == "batch_size") c.batch_size = value.get<int>();
    else if (key == "max_steps") c.max_steps = value.get<std::int64_t>();
    else if (key == "lr") c.optimizer.lr = value.get<double>();
    else if (key == "weight_decay") c.optimizer.weight_decay = value.get<double>();
    else if (key == "warmup") c.warmup = value.get<std::int64_t>();
    else if (key == "ema_power") c.ema_power = value.get<double>();
    else if (key == "validation_size") c.validation_size = value.get<int>();
    else throw ConfigError("unknown train key '" + key + "'");
  }
  c.validate();
  return c;
}

namespace {

nn::DenoisingBatch make_batch(const std::vector<data::TrainingSample>& samples, std::span<const std::size_t> idx,
                              int diffusion_steps, Rng& rng) {
  nn::DenoisingBatch b;
  std::uniform_int_distribution<int> step_dist(0, diffusion_steps - 1);
  for (std::size_t i : idx) {
    const auto& s = samples[i];
    b.clean.push_back(s.actions);
    b.obs.push_back(s.obs);
    b.steps.push_back(step_dist(rng));
    b.noise.push_back(diffusion::standard_normal(s.actions.rows(), s.actions.cols(), rng));
  }
  return b;
}

}  // namespace

TrainResult train(const std::vector<data::TrainingSample>& samples, const nn::NetworkConfig& net_cfg,
                  const policy::PolicyConfig& policy_cfg, const policy::Normalizer& norm, const TrainConfig& cfg,
                  const data::Progress& progress) {
  cfg.validate();
  policy_cfg.validate();
  net_cfg.validate();
  if (samples.empty()) throw DataError("cannot train on an empty dataset");
  if (net_cfg.horizon != policy_cfg.horizon || net_cfg.cond_dim != policy_cfg.obs_dim()) {
    throw ConfigError("network horizon/cond_dim do not match the policy config");
  }

  Rng rng(cfg.seed);
  const nn::ConditionalUnet1D<float> net(net_cfg);
  auto params = net.init_parameters(rng);
  auto opt = nn::OptimizerState<float>::for_params(params, cfg.optimizer);
  auto ema = nn::EmaState<float>::for_params(params, cfg.ema_power);
  const auto sched = diffusion::NoiseSchedule::cosine(policy_cfg.diffusion_steps);

  const std::size_t n = samples.size();
  const std::int64_t per_epoch = static_cast<std::int64_t>((n + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                                           static_cast<std::size_t>(cfg.batch_size));
  std::int64_t total = per_epoch * cfg.epochs;
  if (cfg.max_steps > 0) total = std::min(total, cfg.max_steps);
  const std::int64_t warmup = std::min(cfg.warmup, total / 2);

  // Fixed validation batch: evenly spaced samples with their own noise stream.
  Rng val_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> val_idx;
  const std::size_t val_n = std::min<std::size_t>(n, static_cast<std::size_t>(cfg.validation_size));
  for (std::size_t i = 0; i < val_n; ++i) val_idx.push_back(i * n / val_n);
  const auto val_batch = make_batch(samples, val_idx, policy_cfg.diffusion_steps, val_rng);

  TrainResult result;
  result.validation_losses.push_back(nn::denoising_loss(net, params, sched, val_batch));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs && step < total; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < n && step < total; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      const auto batch = make_batch(samples, std::span(order).subspan(start, stop - start),
                                    policy_cfg.diffusion_steps, rng);
      nn::LossAndGradients<float> lg;
      try {
        lg = nn::loss_gradients(net, params, sched, batch);
      } catch (const TrainingError& e) {
        throw TrainingError("step " + std::to_string(step) + " (epoch " + std::to_string(epoch) + "): " + e.what());
      }
      const double lr = nn::lr_at_step(step, total, cfg.optimizer.lr, warmup);
      nn::adamw_step(params, lg.grads, opt, lr);
      nn::ema_update(ema, params);
      result.step_losses.push_back(lg.loss);
      epoch_loss += lg.loss;
      ++batches;
      ++step;
      if (progress && (step % 50 == 0 || step == total)) {
        progress({{"event", "train_step"}, {"step", step}, {"total", total}, {"loss", lg.loss}, {"lr", lr}});
      }
    }
    const double val = nn::denoising_loss(net, params, sched, val_batch);
    result.validation_losses.push_back(val);
    if (progress) {
      progress({{"event", "epoch"},
                {"epoch", epoch + 1},
                {"train_loss", epoch_loss / std::max(1, batches)},
                {"validation_loss", val}});
    }
  }

  result.checkpoint.network = net_cfg;
  result.checkpoint.normalizer = norm.to_json();
  result.checkpoint.policy = policy_cfg.to_json();
  result.checkpoint.step = step;
  result.checkpoint.params = std::move(params);
  result.checkpoint.ema = std::move(ema.shadow);
  return result;
}

}  // namespace fdp::train
