#include "fdp/policy.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace fdp;
using namespace fdp::policy;

namespace {

Normalizer sample_normalizer() {
  std::vector<StateVec> states{{0, 0, -3, -0.5, 0, -1.5}, {6, 7, 3, 0.5, 0.5, 1.5}};
  std::vector<world::Action> actions{{0.0, -1.5}, {0.5, 1.5}};
  return fit_normalizer(states, actions);
}

PolicyConfig small_policy() {
  PolicyConfig p;
  p.horizon = 16;
  p.obs_steps = 2;
  p.action_steps = 4;
  p.diffusion_steps = 10;
  return p;
}

DiffusionPolicy small_model(std::uint64_t seed) {
  const auto pc = small_policy();
  nn::NetworkConfig nc;
  nc.down_dims = {8, 16};
  nc.step_embed_dim = 16;
  nc.horizon = pc.horizon;
  nc.cond_dim = pc.obs_dim();
  nn::ConditionalUnet1D<float> net(nc);
  Rng rng(seed);
  return DiffusionPolicy(nc, net.init_parameters(rng), sample_normalizer(), pc);
}

diffusion::ActionSequence constant_plan(int rows, double v, double omega) {
  diffusion::ActionSequence a(rows, 2);
  a.col(0).setConstant(v);
  a.col(1).setConstant(omega);
  return a;
}

}  // namespace

TEST_CASE("normalizer fit and round trip") {
  const auto n = sample_normalizer();
  CHECK(n.normalize_action({0.25, 0.0})(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(n.normalize_action({0.5, 1.5})(0) == doctest::Approx(1.0));
  CHECK(n.normalize_action({0.0, -1.5})(1) == doctest::Approx(-1.0));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 8);
  for (int t = 0; t < 100; ++t) {
    StateVec s;
    for (auto& v : s) v = u(rng);
    const auto back = n.denormalize_state(n.normalize_state(s));
    for (int i = 0; i < kStateDim; ++i) CHECK(std::abs(back[i] - s[i]) < 1e-9);
    const world::Action a{u(rng), u(rng)};
    const auto ab = n.denormalize_action(n.normalize_action(a));
    CHECK(std::abs(ab.v - a.v) < 1e-9);
    CHECK(std::abs(ab.omega - a.omega) < 1e-9);
  }

  std::vector<StateVec> flat{{1, 1, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1}};
  std::vector<world::Action> acts{{0.2, 0.0}};
  const auto c = fit_normalizer(flat, acts);
  const auto z = c.normalize_state(flat[0]);
  for (double v : z) CHECK(std::isfinite(v));
  CHECK(std::isfinite(c.normalize_action({0.3, 0.1})(0)));

  const auto j = Normalizer::from_json(n.to_json());
  CHECK(j.state_min == n.state_min);
  CHECK(j.action_max == n.action_max);
  CHECK_THROWS_AS(fit_normalizer(std::span<const StateVec>{}, acts), DataError);
}

TEST_CASE("policy config") {
  PolicyConfig c;
  CHECK(c.obs_dim() == 63);
  CHECK_NOTHROW(c.validate());
  c.action_steps = 64;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.action_steps = 63;
  CHECK_NOTHROW(c.validate());
  c.action_steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(PolicyConfig::from_json(PolicyConfig{}.to_json()).to_json() == PolicyConfig{}.to_json());
  CHECK_THROWS_AS(PolicyConfig::from_json({{"horizn", 64}}), ConfigError);
}

TEST_CASE("build_observation layout") {
  const auto norm = sample_normalizer();
  const PolicyConfig cfg;
  world::Environment env;
  env.goal = {3.5, 7.0};
  world::MidpointState s;
  s.position = {3, 3.5};
  s.heading = 0.5;
  const std::vector<world::MidpointState> one{s};
  const auto obs = build_observation(one, env, norm, cfg);
  REQUIRE(obs.size() == 63);
  CHECK(obs.segment(0, 6) == obs.segment(6, 6));
  CHECK(obs.segment(12, 49).isZero());
  CHECK(obs(61) == doctest::Approx(0.5));
  CHECK(obs(62) == doctest::Approx(1.0));
  CHECK(obs(0) == doctest::Approx(0.0));

  world::MidpointState s2 = s;
  s2.position = {6, 7};
  const std::vector<world::MidpointState> two{s, s2};
  const auto obs2 = build_observation(two, env, norm, cfg);
  CHECK(obs2(0) == doctest::Approx(0.0));
  CHECK(obs2(6) == doctest::Approx(1.0));

  env.obstacles = {{{2.3, 4.7}, 0.4}};
  const auto obs3 = build_observation(one, env, norm, cfg);
  CHECK(obs3(12 + 1 * 7 + 3) == doctest::Approx(0.5));

  world::MidpointState far = s;
  far.position = {100, -100};
  const std::vector<world::MidpointState> out{far};
  const auto clipped = build_observation(out, env, norm, cfg);
  CHECK(clipped.cwiseAbs().maxCoeff() <= 1.5);
  CHECK_THROWS_AS(build_observation(std::span<const world::MidpointState>{}, env, norm, cfg), InvalidArgument);
}

TEST_CASE("extract_executable windows") {
  PolicyConfig cfg;
  diffusion::ActionSequence plan(64, 2);
  for (int r = 0; r < 64; ++r) plan.row(r) << r, -r;
  const auto a = extract_executable(plan, cfg);
  REQUIRE(a.size() == 10);
  CHECK(a.front().v == 1.0);
  CHECK(a.back().v == 10.0);
  CHECK(a.back().omega == -10.0);

  cfg.action_steps = 1;
  const auto b = extract_executable(plan, cfg);
  REQUIRE(b.size() == 1);
  CHECK(b[0].v == 1.0);

  cfg.action_steps = 10;
  CHECK_THROWS_AS(extract_executable(plan.topRows(8), cfg), ConfigError);
}

TEST_CASE("adaptive_select") {
  const PolicyConfig cfg;
  world::Environment env;
  env.goal = {0, 6};
  env.obstacles = {{{0, 1.0}, 0.4}};
  world::MidpointState s;
  s.heading = std::numbers::pi / 2;
  const auto straight = constant_plan(64, 0.8, 0.0);
  auto turning = constant_plan(64, 0.3, 1.5);

  const std::vector<diffusion::ActionSequence> one{straight};
  CHECK(adaptive_select(one, s, env, cfg) == 0);

  const std::vector<diffusion::ActionSequence> two{straight, turning};
  CHECK(adaptive_select(two, s, env, cfg) == 1);

  const std::vector<diffusion::ActionSequence> tie{turning, turning};
  CHECK(adaptive_select(tie, s, env, cfg) == 0);

  // Rows past the executable window never influence the score.
  auto tail = turning;
  tail.bottomRows(64 - 11).setConstant(-5.0);
  const std::vector<diffusion::ActionSequence> swapped{straight, tail};
  CHECK(adaptive_select(swapped, s, env, cfg) == 1);
  const std::vector<diffusion::ActionSequence> order{tail, turning};
  CHECK(adaptive_select(order, s, env, cfg) == 0);

  CHECK_THROWS_AS(adaptive_select(std::span<const diffusion::ActionSequence>{}, s, env, cfg), InvalidArgument);
}

TEST_CASE("diffusion sampling determinism and bounds") {
  const auto model = small_model(3);
  const auto norm = sample_normalizer();
  const auto env = world::sample_environment(2);
  const std::vector<world::MidpointState> hist{world::MidpointState{}};
  const auto obs = build_observation(hist, env, norm, model.config());

  Rng r1(10);
  Rng r2(10);
  const auto a = model.sample_plans(obs, 3, r1);
  const auto b = model.sample_plans(obs, 3, r2);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i].rows() == 16);
    CHECK(a[i].cols() == 2);
    CHECK(a[i].col(0).minCoeff() >= norm.action_min[0] - 1e-9);
    CHECK(a[i].col(0).maxCoeff() <= norm.action_max[0] + 1e-9);
    CHECK(a[i].col(1).minCoeff() >= norm.action_min[1] - 1e-9);
    CHECK(a[i].col(1).maxCoeff() <= norm.action_max[1] + 1e-9);
  }
  CHECK(a[0] != a[1]);

  Rng r3(10);
  const auto n = model.sample_normalized(obs, 1, r3);
  CHECK(n[0].cwiseAbs().maxCoeff() <= 1.0);

  Rng r4(11);
  CHECK_THROWS_AS(model.sample_plans(Eigen::VectorXd::Zero(5), 1, r4), InvalidArgument);
  CHECK_THROWS_AS(model.sample_plans(obs, 0, r4), InvalidArgument);
}

TEST_CASE("diffusion policy rejects mismatched parts") {
  const auto pc = small_policy();
  nn::NetworkConfig nc;
  nc.down_dims = {8, 16};
  nc.step_embed_dim = 16;
  nc.horizon = 32;
  nc.cond_dim = pc.obs_dim();
  nn::ConditionalUnet1D<float> net(nc);
  Rng rng(1);
  CHECK_THROWS_AS(DiffusionPolicy(nc, net.init_parameters(rng), sample_normalizer(), pc), ConfigError);
}
