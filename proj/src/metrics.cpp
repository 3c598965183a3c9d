#include "fdp/metrics.hpp"

#include "fdp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace fdp::metrics {

const std::vector<std::string>& EpisodeMetrics::names() {
  static const std::vector<std::string> kNames{
      "path_length",    "path_optimality", "tracking_deviation", "min_clearance", "mean_clearance",
      "mean_control",   "control_smoothness", "energy",          "time",          "mean_velocity",
      "mean_curvature", "peak_curvature",  "jerk",               "orientation_stability"};
  return kNames;
}

std::vector<double> EpisodeMetrics::values() const {
  return {path_length,    path_optimality,    tracking_deviation, min_clearance, mean_clearance,
          mean_control,   control_smoothness, energy,             time,          mean_velocity,
          mean_curvature, peak_curvature,     jerk,               orientation_stability};
}

nlohmann::json EpisodeMetrics::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  const auto v = values();
  for (std::size_t i = 0; i < v.size(); ++i) j[names()[i]] = v[i];
  return j;
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

EpisodeMetrics compute_metrics(const episode::EpisodeRecord& record, double dt) {
  record.validate();
  const std::size_t n = record.length();
  if (n < 2) throw DataError("metrics need at least one executed step");
  EpisodeMetrics m;

  std::vector<Vec2> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = {record.states[i][0], record.states[i][1]};

  std::vector<double> curv;
  for (std::size_t i = 1; i < n; ++i) {
    const double ds = (p[i] - p[i - 1]).norm();
    m.path_length += ds;
    const double dphi = std::abs(wrap_angle(record.states[i][2] - record.states[i - 1][2]));
    curv.push_back(dphi / std::max(ds, 1e-6));
  }
  m.mean_curvature = mean_of(curv);
  m.peak_curvature = *std::max_element(curv.begin(), curv.end());

  const Vec2 line = p.back() - p.front();
  m.path_optimality = m.path_length > 0.0 ? line.norm() / m.path_length : 1.0;
  const double line_len = line.norm();
  double dev = 0.0;
  for (const auto& q : p) {
    const Vec2 rel = q - p.front();
    dev += line_len > 0.0 ? std::abs(cross2(line, rel)) / line_len : rel.norm();
  }
  m.tracking_deviation = dev / static_cast<double>(n);

  m.min_clearance = *std::min_element(record.clearance.begin(), record.clearance.end());
  m.mean_clearance = mean_of(record.clearance);

  const std::size_t na = n - 1;  // executed actions
  std::vector<double> mag, omega, diffs;
  for (std::size_t i = 0; i < na; ++i) {
    const auto& a = record.actions[i];
    const double norm = std::hypot(a.v, a.omega);
    mag.push_back(norm);
    omega.push_back(a.omega);
    m.energy += norm * norm * dt;
    if (i + 1 < na) {
      const auto& b = record.actions[i + 1];
      diffs.push_back(std::hypot(b.v - a.v, b.omega - a.omega) / dt);
    }
  }
  m.mean_control = mean_of(mag);
  m.control_smoothness = mean_of(diffs);
  m.orientation_stability = std_of(omega);

  m.time = static_cast<double>(na) * dt;
  m.mean_velocity = m.path_length / m.time;

  // Velocities after each executed step; the initial rest state is excluded.
  std::vector<double> jerks;
  for (std::size_t i = 3; i < n; ++i) {
    const auto& s0 = record.states[i - 2];
    const auto& s1 = record.states[i - 1];
    const auto& s2 = record.states[i];
    jerks.push_back(std::hypot(s2[3] - 2.0 * s1[3] + s0[3], s2[4] - 2.0 * s1[4] + s0[4]) / (dt * dt));
  }
  m.jerk = mean_of(jerks);
  return m;
}

nlohmann::json PolicyReport::to_json() const {
  nlohmann::json quality_json = nlohmann::json::object();
  for (std::size_t i = 0; i < quality.size(); ++i) {
    quality_json[EpisodeMetrics::names()[i]] = {{"mean", quality[i].mean}, {"std", quality[i].std}};
  }
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"episode", r.episode},
                         {"seed", r.seed},
                         {"outcome", world::to_string(r.outcome)},
                         {"steps", r.steps},
                         {"metrics", r.metrics.to_json()}});
  }
  return {{"policy", policy},
          {"episodes", episodes},
          {"successes", successes},
          {"failures", {{"collision", collisions}, {"timeout", timeouts}}},
          {"success_rate", success_rate},
          {"quality", quality_json},
          {"episode_rows", rows_json}};
}

PolicyReport summarize(const std::string& policy, const std::vector<episode::EpisodeRecord>& records, double dt) {
  if (records.empty()) throw InvalidArgument("no episodes to summarize");
  PolicyReport rep;
  rep.policy = policy;
  rep.episodes = static_cast<int>(records.size());
  const std::size_t nm = EpisodeMetrics::names().size();
  std::vector<std::vector<double>> cols(nm);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    EpisodeRow row;
    row.episode = i;
    row.seed = r.seed;
    row.outcome = r.outcome;
    row.steps = static_cast<int>(r.steps());
    if (r.length() >= 2) row.metrics = compute_metrics(r, dt);
    switch (r.outcome) {
      case world::Outcome::Success: {
        ++rep.successes;
        const auto v = row.metrics.values();
        for (std::size_t k = 0; k < nm; ++k) cols[k].push_back(v[k]);
        break;
      }
      case world::Outcome::Collision: ++rep.collisions; break;
      case world::Outcome::Timeout: ++rep.timeouts; break;
      case world::Outcome::Running: throw DataError("episode without a terminal outcome");
    }
    rep.rows.push_back(row);
  }
  rep.success_rate = 100.0 * rep.successes / rep.episodes;
  if (rep.successes > 0) {
    for (const auto& c : cols) rep.quality.push_back({mean_of(c), std_of(c)});
  }
  return rep;
}

std::vector<episode::EpisodeRecord> run_episodes(episode::PolicyKind kind, const EvaluationPlan& plan,
                                                 const episode::EpisodeSetup& setup,
                                                 const episode::RunOptions& opts) {
  if (plan.episodes < 1) throw ConfigError("evaluation needs at least one episode");
  std::vector<episode::EpisodeRecord> out(static_cast<std::size_t>(plan.episodes));
  parallel_for(out.size(), plan.jobs, [&](std::size_t i) {
    const std::uint64_t seed = episode_seed(plan.seed, i);
    out[i] = episode::run_episode(kind, world::sample_environment(seed, setup.world), setup, seed, opts);
  });
  return out;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json pols = nlohmann::json::array();
  for (const auto& p : policies) pols.push_back(p.to_json());
  return {{"note", kSuccessOnlyNote}, {"policies", pols}};
}

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string MetricsReport::to_csv() const {
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"metric"};
  for (const auto& p : policies) header.push_back(p.policy);
  table.push_back(header);
  std::vector<std::string> rate{"success_rate"};
  for (const auto& p : policies) rate.push_back(fmt(p.success_rate));
  table.push_back(rate);
  for (const char* key : {"collisions", "timeouts"}) {
    std::vector<std::string> row{key};
    for (const auto& p : policies) row.push_back(std::to_string(key[0] == 'c' ? p.collisions : p.timeouts));
    table.push_back(row);
  }
  const auto& names = EpisodeMetrics::names();
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<std::string> row{names[k]};
    for (const auto& p : policies) {
      row.push_back(p.quality.empty() ? "n/a" : fmt(p.quality[k].mean) + " ± " + fmt(p.quality[k].std));
    }
    table.push_back(row);
  }

  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  out << "# " << kSuccessOnlyNote << '\n';
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const bool last = c + 1 == row.size();
      out << (last ? row[c] : pad(row[c] + ",", widths[c] + 2));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace fdp::metrics
