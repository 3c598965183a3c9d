#include "fdp/dataset.hpp"
#include "fdp/episode.hpp"
#include "fdp/metrics.hpp"
#include "fdp/render.hpp"
#include "fdp/training.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <regex>

using namespace fdp;

namespace {

constexpr double kPi = std::numbers::pi;

/// Record following the given midpoints with headings along each segment and
/// velocities derived from the displacement.
episode::EpisodeRecord path_record(const std::vector<Vec2>& pts, const std::vector<world::Action>& actions,
                                   double dt = 0.1) {
  episode::EpisodeRecord r;
  r.env.goal = pts.back();
  r.policy = "pac";
  r.outcome = world::Outcome::Success;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2 d = i == 0 ? Vec2::Zero() : Vec2((pts[i] - pts[i - 1]) / dt);
    const double phi = i == 0 ? (pts.size() > 1 ? std::atan2(pts[1].y() - pts[0].y(), pts[1].x() - pts[0].x()) : 0.0)
                              : std::atan2(pts[i].y() - pts[i - 1].y(), pts[i].x() - pts[i - 1].x());
    r.states.push_back({pts[i].x(), pts[i].y(), phi, d.x(), d.y(), 0.0});
    r.actions.push_back(actions[std::min(i, actions.size() - 1)]);
    r.leaders.push_back({pts[i] + Vec2(-0.5, 0), pts[i] + Vec2(0.5, 0)});
    r.followers.push_back({pts[i] + Vec2(-0.5, -1), pts[i] + Vec2(0.5, -1)});
    r.clearance.push_back(1.0 + 0.1 * static_cast<double>(i));
  }
  return r;
}

episode::EpisodeSetup easy_setup() {
  episode::EpisodeSetup s;
  s.world.min_obstacles = 3;
  s.world.max_obstacles = 3;
  return s;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("fdp_unit_" + name);
}

}  // namespace

TEST_CASE("metrics on a hand-built corner path") {
  const auto r = path_record({{0, 0}, {0, 1}, {1, 1}}, {{0.5, 0.0}, {0.5, 0.0}});
  const auto m = metrics::compute_metrics(r);
  CHECK(m.path_length == doctest::Approx(2.0));
  CHECK(m.path_optimality == doctest::Approx(std::sqrt(2.0) / 2.0));
  CHECK(m.time == doctest::Approx(0.2));
  CHECK(m.mean_velocity == doctest::Approx(10.0));
  CHECK(m.control_smoothness == 0.0);
  CHECK(m.min_clearance == doctest::Approx(1.0));
  CHECK(m.mean_clearance == doctest::Approx(1.1));
  CHECK(m.mean_control == doctest::Approx(0.5));
  CHECK(m.energy == doctest::Approx(2 * 0.25 * 0.1));
  // Only the 90 degree turn at the corner contributes.
  CHECK(m.peak_curvature == doctest::Approx(kPi / 2));
  CHECK(m.mean_curvature == doctest::Approx(kPi / 4));
  // Distances to the diagonal: 0, sqrt(2)/2, 0.
  CHECK(m.tracking_deviation == doctest::Approx(std::sqrt(2.0) / 6.0));
}

TEST_CASE("metrics on a straight constant-speed path") {
  std::vector<Vec2> pts;
  for (int i = 0; i < 12; ++i) pts.emplace_back(0.0, 0.05 * i);
  const auto m = metrics::compute_metrics(path_record(pts, {{0.5, 0.0}}));
  CHECK(m.path_optimality == doctest::Approx(1.0));
  CHECK(m.tracking_deviation == doctest::Approx(0.0));
  CHECK(m.mean_curvature == 0.0);
  CHECK(m.peak_curvature == 0.0);
  CHECK(m.jerk == doctest::Approx(0.0));
  CHECK(m.control_smoothness == 0.0);
  CHECK(m.orientation_stability == 0.0);
  CHECK(m.time == doctest::Approx(1.1));
}

TEST_CASE("metric control statistics use executed actions only") {
  // The terminal entry repeats the last command and must not count twice.
  const auto r = path_record({{0, 0}, {0, 0.1}, {0, 0.2}, {0, 0.3}}, {{0.1, 1.0}, {0.3, -1.0}, {0.1, 1.0}, {0.1, 1.0}});
  const auto m = metrics::compute_metrics(r);
  const double step = std::hypot(0.2, 2.0) / 0.1;
  CHECK(m.control_smoothness == doctest::Approx(step));
  CHECK(m.orientation_stability == doctest::Approx(std::sqrt(8.0 / 9.0)));
  CHECK(m.energy == doctest::Approx((1.01 + 1.09 + 1.01) * 0.1));

  auto shortr = path_record({{0, 0}}, {{0.1, 0.0}});
  CHECK_THROWS_AS(metrics::compute_metrics(shortr), DataError);
}

TEST_CASE("summary aggregates successes only") {
  auto a = path_record({{0, 0}, {0, 1}}, {{0.5, 0.0}});
  auto b = path_record({{0, 0}, {0, 1}, {0, 3}}, {{0.5, 0.0}});
  auto c = path_record({{0, 0}, {5, 0}}, {{0.5, 0.0}});
  c.outcome = world::Outcome::Collision;
  auto d = path_record({{0, 0}, {0, 1}}, {{0.5, 0.0}});
  d.outcome = world::Outcome::Timeout;
  const auto rep = metrics::summarize("pac", {a, b, c, d});
  CHECK(rep.episodes == 4);
  CHECK(rep.successes == 2);
  CHECK(rep.collisions == 1);
  CHECK(rep.timeouts == 1);
  CHECK(rep.success_rate == 50.0);
  REQUIRE(rep.quality.size() == metrics::EpisodeMetrics::names().size());
  CHECK(rep.quality[0].mean == doctest::Approx(2.0));
  CHECK(rep.quality[0].std == doctest::Approx(1.0));
  for (const auto& q : rep.quality) CHECK(q.std >= 0.0);
  REQUIRE(rep.rows.size() == 4);
  CHECK(rep.rows[2].outcome == world::Outcome::Collision);

  metrics::MetricsReport mr;
  mr.policies.push_back(rep);
  const auto csv = mr.to_csv();
  CHECK(csv.rfind(std::string("# ") + metrics::kSuccessOnlyNote, 0) == 0);
  CHECK(csv.find("success_rate") != std::string::npos);
  CHECK(csv.find("2.0000 ± 1.0000") != std::string::npos);
  CHECK(mr.to_json()["policies"][0]["failures"]["collision"] == 1);
}

TEST_CASE("episode record JSON round trip and validation") {
  const auto r = path_record({{0, 0}, {0, 1}, {1, 1}}, {{0.5, 0.25}});
  const auto j = episode::to_json(r);
  for (const char* key : {"env", "policy", "seed", "outcome", "states", "actions", "leaders", "followers", "clearance"}) {
    CHECK(j.contains(key));
  }
  CHECK(episode::to_json(episode::record_from_json(j)) == j);

  auto bad = r;
  bad.clearance.pop_back();
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = r;
  bad.outcome = world::Outcome::Running;
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("windowing") {
  const auto r = path_record({{0, 0}, {0, 0.1}, {0, 0.2}, {0, 0.3}, {0, 0.4}},
                             {{0.1, 0.0}, {0.2, 0.1}, {0.3, -0.1}, {0.4, 0.2}, {0.4, 0.2}});
  std::vector<episode::EpisodeRecord> recs{r};
  const auto norm = data::fit_normalizer(recs);
  policy::PolicyConfig cfg;
  cfg.horizon = 8;
  cfg.action_steps = 4;
  const auto samples = data::window_samples(r, cfg, norm);
  REQUIRE(samples.size() == r.length());
  for (const auto& s : samples) {
    CHECK(s.obs.size() == cfg.obs_dim());
    CHECK(s.actions.rows() == 8);
    CHECK(s.actions.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  }
  // Anchor 2 covers actions 1..8, clamped to the final entry past the end.
  const auto& mid = samples[2];
  for (int row = 0; row < 8; ++row) {
    const std::size_t src = std::min<std::size_t>(static_cast<std::size_t>(1 + row), r.length() - 1);
    const auto a = norm.denormalize_action(mid.actions.row(row).transpose());
    CHECK(std::abs(a.v - r.actions[src].v) < 1e-9);
    CHECK(std::abs(a.omega - r.actions[src].omega) < 1e-9);
  }
  const auto& last = samples.back();
  for (int row = 1; row < 8; ++row) CHECK(last.actions.row(row) == last.actions.row(1));
  // Anchor 0 pads the history with the first state.
  CHECK(samples[0].obs.segment(0, 6) == samples[0].obs.segment(6, 6));
}

TEST_CASE("dataset generation is deterministic and keeps only successes") {
  data::DatasetConfig cfg;
  cfg.episodes = 3;
  cfg.seed = 11;
  const auto setup = easy_setup();
  const auto a = data::generate_dataset(cfg, setup);
  cfg.jobs = 2;
  const auto b = data::generate_dataset(cfg, setup);
  REQUIRE(a.size() == 3);
  REQUIRE(b.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].outcome == world::Outcome::Success);
    const Vec2 end(a[i].states.back()[0], a[i].states.back()[1]);
    CHECK((end - a[i].env.goal).norm() < setup.world.success_radius);
    CHECK(episode::to_json(a[i]) == episode::to_json(b[i]));
  }

  const auto path = temp_path("demos.ndjson");
  data::write_dataset(path, a);
  const auto back = data::read_dataset(path);
  REQUIRE(back.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(episode::to_json(back[i]) == episode::to_json(a[i]));
  std::ifstream f(path);
  int lines = 0;
  for (std::string line; std::getline(f, line);) ++lines;
  CHECK(lines == 3);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(data::read_dataset(temp_path("no_such.ndjson")), DataError);
}

TEST_CASE("dataset generation rejects hopeless environments") {
  data::DatasetConfig cfg;
  cfg.episodes = 5;
  cfg.yield_check_attempts = 10;
  episode::EpisodeSetup setup;
  setup.world.max_steps = 5;
  CHECK_THROWS_AS(data::generate_dataset(cfg, setup), ConfigError);
}

TEST_CASE("episodes: pac in an empty world and the zero-step timeout") {
  episode::EpisodeSetup setup;
  setup.world.min_obstacles = 0;
  setup.world.max_obstacles = 0;
  const auto env = world::sample_environment(5, setup.world);
  const auto r = episode::run_episode(episode::PolicyKind::Pac, env, setup, 5);
  CHECK(r.outcome == world::Outcome::Success);
  CHECK_NOTHROW(r.validate());
  CHECK(r.followers.front().size() == 2);

  setup.world.max_steps = 0;
  const auto t = episode::run_episode(episode::PolicyKind::Pac, env, setup, 5);
  CHECK(t.outcome == world::Outcome::Timeout);
  CHECK(t.length() == 1);

  CHECK_THROWS(episode::run_episode(episode::PolicyKind::Diffusion, env, setup, 5));
}

TEST_CASE("paired evaluation rows align by episode id") {
  auto setup = easy_setup();
  metrics::EvaluationPlan plan{500, 3, 1};
  const auto pac = metrics::run_episodes(episode::PolicyKind::Pac, plan, setup);
  const auto again = metrics::run_episodes(episode::PolicyKind::Pac, {500, 3, 3}, setup);
  REQUIRE(pac.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(pac[i].seed == 500 + i);
    CHECK(episode::to_json(pac[i]) == episode::to_json(again[i]));
  }
}

TEST_CASE("svg rendering") {
  const auto r = path_record({{0, 0}, {0, 1}, {1, 1}}, {{0.5, 0.0}});
  const auto svg = render::render_svg(r);
  CHECK(svg == render::render_svg(r));
  CHECK(svg.rfind("<svg", 0) == 0);
  const std::regex circle("<circle");
  CHECK(std::distance(std::sregex_iterator(svg.begin(), svg.end(), circle), std::sregex_iterator()) == 1);
  CHECK(svg.find("class=\"goal\"") != std::string::npos);

  const std::regex mid("class=\"midpoint\"[^>]*points=\"([^\"]*)\"");
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, mid));
  const std::string pts = m[1];
  CHECK(std::count(pts.begin(), pts.end(), ',') == static_cast<long>(r.length()));

  auto withobs = r;
  withobs.env.obstacles = {{{2, 2}, 0.5}, {{3, 4}, 0.3}};
  const auto s2 = render::render_svg(withobs);
  CHECK(std::distance(std::sregex_iterator(s2.begin(), s2.end(), circle), std::sregex_iterator()) == 3);
}

TEST_CASE("training is deterministic and improves the validation loss") {
  episode::EpisodeSetup setup;
  setup.world.min_obstacles = 0;
  setup.world.max_obstacles = 0;
  data::DatasetConfig dc;
  dc.episodes = 2;
  const auto recs = data::generate_dataset(dc, setup);
  policy::PolicyConfig pc;
  pc.horizon = 16;
  pc.action_steps = 4;
  pc.diffusion_steps = 20;
  const auto norm = data::fit_normalizer(recs);
  const auto samples = data::window_dataset(recs, pc, norm);
  nn::NetworkConfig nc;
  nc.down_dims = {8, 16};
  nc.step_embed_dim = 16;
  nc.horizon = pc.horizon;
  nc.cond_dim = pc.obs_dim();
  train::TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  tc.warmup = 10;
  tc.validation_size = 16;
  tc.optimizer.lr = 1e-3;
  std::vector<nlohmann::json> events;
  const auto a = train::train(samples, nc, pc, norm, tc, [&](const nlohmann::json& j) { events.push_back(j); });
  const auto b = train::train(samples, nc, pc, norm, tc);
  CHECK(nn::serialize_checkpoint(a.checkpoint) == nn::serialize_checkpoint(b.checkpoint));
  REQUIRE(a.validation_losses.size() == 3);
  CHECK(a.validation_losses.back() < a.validation_losses.front());
  CHECK(!events.empty());
  CHECK(events.back()["event"] == "epoch");

  tc.seed = 1;
  const auto c = train::train(samples, nc, pc, norm, tc);
  CHECK(nn::serialize_checkpoint(c.checkpoint) != nn::serialize_checkpoint(a.checkpoint));

  CHECK_THROWS_AS(train::train({}, nc, pc, norm, tc), DataError);
}
