#include "fdp/dataset.hpp"

#include "fdp/parallel.hpp"

#include <algorithm>
#include <fstream>

namespace fdp::data {

std::vector<episode::EpisodeRecord> generate_dataset(const DatasetConfig& cfg, const episode::EpisodeSetup& setup,
                                                     const Progress& progress) {
  if (cfg.episodes < 0) throw ConfigError("episode count must be non-negative");
  std::vector<episode::EpisodeRecord> kept;
  int attempts = 0;
  int successes = 0;
  const int chunk = std::max(1, cfg.jobs) * 4;
  while (static_cast<int>(kept.size()) < cfg.episodes) {
    std::vector<episode::EpisodeRecord> batch(static_cast<std::size_t>(chunk));
    parallel_for(batch.size(), cfg.jobs, [&](std::size_t i) {
      const std::uint64_t seed = episode_seed(cfg.seed, static_cast<std::uint64_t>(attempts) + i);
      const auto env = world::sample_environment(seed, setup.world);
      batch[i] = episode::run_episode(episode::PolicyKind::Pac, env, setup, seed);
    });
    for (auto& rec : batch) {
      if (static_cast<int>(kept.size()) >= cfg.episodes) break;
      ++attempts;
      const bool ok = rec.outcome == world::Outcome::Success;
      if (ok) ++successes;
      if (progress) {
        progress({{"event", "episode"},
                  {"attempt", attempts},
                  {"seed", rec.seed},
                  {"outcome", world::to_string(rec.outcome)},
                  {"kept", kept.size() + (ok ? 1 : 0)}});
      }
      if (ok) kept.push_back(std::move(rec));
      if (attempts == cfg.yield_check_attempts &&
          static_cast<double>(successes) < cfg.min_yield * static_cast<double>(attempts)) {
        throw ConfigError("PAC succeeded in only " + std::to_string(successes) + " of " + std::to_string(attempts) +
                          " attempts; the environment distribution is too hard");
      }
    }
  }
  return kept;
}

void write_dataset(const std::filesystem::path& path, const std::vector<episode::EpisodeRecord>& records) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  for (const auto& r : records) f << episode::to_json(r).dump() << '\n';
  if (!f) throw DataError("failed writing " + path.string());
}

std::vector<episode::EpisodeRecord> read_dataset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open dataset " + path.string());
  std::vector<episode::EpisodeRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(episode::record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

policy::Normalizer fit_normalizer(const std::vector<episode::EpisodeRecord>& records) {
  std::vector<policy::StateVec> states;
  std::vector<world::Action> actions;
  for (const auto& r : records) {
    states.insert(states.end(), r.states.begin(), r.states.end());
    actions.insert(actions.end(), r.actions.begin(), r.actions.end());
  }
  return policy::fit_normalizer(states, actions);
}

std::vector<TrainingSample> window_samples(const episode::EpisodeRecord& record, const policy::PolicyConfig& cfg,
                                           const policy::Normalizer& norm) {
  record.validate();
  const int len = static_cast<int>(record.length());
  auto clamp_idx = [len](int i) { return static_cast<std::size_t>(std::clamp(i, 0, len - 1)); };
  std::vector<world::MidpointState> states;
  states.reserve(record.states.size());
  for (const auto& s : record.states) states.push_back(world::MidpointState::from_vector(s));
  std::vector<Eigen::Vector2d> actions;
  actions.reserve(record.actions.size());
  for (const auto& a : record.actions) actions.push_back(norm.normalize_action(a));

  std::vector<TrainingSample> out;
  out.reserve(static_cast<std::size_t>(len));
  std::vector<world::MidpointState> hist(static_cast<std::size_t>(cfg.obs_steps));
  for (int t = 0; t < len; ++t) {
    for (int i = 0; i < cfg.obs_steps; ++i) hist[static_cast<std::size_t>(i)] = states[clamp_idx(t - cfg.obs_steps + 1 + i)];
    TrainingSample s;
    s.obs = policy::build_observation(hist, record.env, norm, cfg);
    s.actions.resize(cfg.horizon, policy::kActionDim);
    for (int r = 0; r < cfg.horizon; ++r) s.actions.row(r) = actions[clamp_idx(t - cfg.obs_steps + 1 + r)].transpose();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TrainingSample> window_dataset(const std::vector<episode::EpisodeRecord>& records,
                                           const policy::PolicyConfig& cfg, const policy::Normalizer& norm) {
  std::vector<TrainingSample> out;
  for (const auto& r : records) {
    auto w = window_samples(r, cfg, norm);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

}  // namespace fdp::data
