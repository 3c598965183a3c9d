#include "fdp/world.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace fdp;
using namespace fdp::world;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("step_midpoint examples") {
  MidpointState s;
  s.heading = kPi / 2;
  const auto n = step_midpoint(s, {0.3, 0.1}, 0.1);
  CHECK(n.position.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(n.position.y() == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(n.heading == doctest::Approx(kPi / 2 + 0.01).epsilon(1e-12));
  CHECK(n.lin_vel == 0.3);
  CHECK(n.ang_vel == 0.1);

  MidpointState a;
  a.position = {1.2, -0.4};
  a.heading = 2.0;
  const auto z = step_midpoint(a, {0.0, 0.0}, 0.1);
  CHECK(z.position == a.position);
  CHECK(z.heading == a.heading);

  const auto x = step_midpoint(MidpointState{}, {1.0, 0.0}, 0.1, {0.0, 1.0, 1.5});
  CHECK(x.position.x() == doctest::Approx(0.1));
  CHECK(x.position.y() == 0.0);
  CHECK(x.heading == 0.0);
}

TEST_CASE("step_midpoint clamps, wraps and rejects non-finite actions") {
  MidpointState s;
  s.heading = kPi - 0.01;
  const auto n = step_midpoint(s, {5.0, 1.5}, 0.1);
  CHECK(n.lin_vel == 0.8);
  CHECK(n.heading <= kPi);
  CHECK(n.heading > -kPi);
  CHECK(n.heading == doctest::Approx(-kPi + 0.14));
  CHECK(step_midpoint(s, {-1.0, -9.0}, 0.1).lin_vel == 0.0);
  CHECK(step_midpoint(s, {-1.0, -9.0}, 0.1).ang_vel == -1.5);
  CHECK_THROWS_AS(step_midpoint(s, {std::nan(""), 0.0}, 0.1), InvalidAction);
  CHECK_THROWS_AS(step_midpoint(s, {0.1, INFINITY}, 0.1), InvalidAction);
}

TEST_CASE("step_midpoint is first-order consistent") {
  MidpointState s;
  s.position = {0.3, 0.2};
  s.heading = 0.7;
  const Action a{0.6, 1.1};
  double prev = 0.0;
  for (double dt : {0.1, 0.05, 0.025}) {
    const auto once = step_midpoint(s, a, dt);
    const auto twice = step_midpoint(step_midpoint(s, a, dt / 2), a, dt / 2);
    const double err = (once.position - twice.position).norm();
    if (prev > 0.0) CHECK(err == doctest::Approx(prev / 4).epsilon(0.05));
    prev = err;
  }
}

TEST_CASE("midpoint state vector") {
  MidpointState s;
  s.position = {1, 2};
  s.heading = kPi / 3;
  s.lin_vel = 0.5;
  s.ang_vel = -0.2;
  const auto v = s.to_vector();
  CHECK(v[3] == doctest::Approx(0.5 * std::cos(kPi / 3)));
  CHECK(v[4] == doctest::Approx(0.5 * std::sin(kPi / 3)));
  const auto back = MidpointState::from_vector(v);
  CHECK(back.lin_vel == doctest::Approx(0.5));
  CHECK(back.ang_vel == doctest::Approx(-0.2));
  CHECK(back.heading == doctest::Approx(kPi / 3));
}

TEST_CASE("leaders_from_midpoint") {
  MidpointState s;
  s.heading = kPi / 2;
  auto [l1, l2] = leaders_from_midpoint(s, 1.0);
  CHECK(l1.x() == doctest::Approx(-0.5));
  CHECK(l1.y() == doctest::Approx(0.0));
  CHECK(l2.x() == doctest::Approx(0.5));
  CHECK(l2.y() == doctest::Approx(0.0));

  s.heading = 0.0;
  std::tie(l1, l2) = leaders_from_midpoint(s, 1.0);
  CHECK(l1.x() == doctest::Approx(0.0));
  CHECK(l1.y() == doctest::Approx(0.5));
  CHECK(l2.y() == doctest::Approx(-0.5));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 100; ++i) {
    MidpointState r;
    r.position = {u(rng), u(rng)};
    r.heading = wrap_angle(u(rng));
    const double bar = 0.1 + std::abs(u(rng));
    const auto [a, b] = leaders_from_midpoint(r, bar);
    CHECK((a - b).norm() == doctest::Approx(bar).epsilon(1e-12));
    CHECK(((a + b) / 2 - r.position).norm() < 1e-12);
  }
}

TEST_CASE("step_unicycle") {
  UnicycleState s;
  const auto n = step_unicycle(s, 1.0, 0.0, 0.1);
  CHECK(n.position.x() == doctest::Approx(0.1));
  CHECK(n.position.y() == 0.0);
  CHECK(n.heading == Vec2(1, 0));

  UnicycleState r;
  for (int i = 0; i < 1000; ++i) {
    r = step_unicycle(r, 0.0, kPi / 2 * 10, 1e-4);
    CHECK(r.heading.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(r.heading.x() == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(r.heading.y() == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(std::abs(r.heading.x()) < 2e-3);
}

TEST_CASE("obstacle grid encoding") {
  Environment env;
  env.obstacles = {{{2.3, 4.7}, 0.5}};
  auto g = encode_obstacle_grid(env);
  CHECK(g[1 * kGridSize + 3] == 0.5);
  int nonzero = 0;
  for (double v : g) nonzero += v != 0.0;
  CHECK(nonzero == 1);

  env.obstacles.clear();
  g = encode_obstacle_grid(env);
  for (double v : g) CHECK(v == 0.0);

  env.obstacles = {{{3.1, 3.9}, 0.3}, {{3.8, 3.2}, 0.6}};
  g = encode_obstacle_grid(env);
  CHECK(g[2 * kGridSize + 2] == 0.6);

  env.obstacles = {{{0.2, 9.5}, 0.4}};
  g = encode_obstacle_grid(env);
  CHECK(g[0 * kGridSize + 6] == 0.4);
}

TEST_CASE("clearance") {
  Environment env;
  CHECK(clearance({0, 0}, env) >= kNoObstacleClearance);
  env.obstacles = {{{0, 2}, 0.5}};
  CHECK(clearance({0, 0}, env) == doctest::Approx(1.5));
  CHECK(clearance({0, 1.5}, env) == doctest::Approx(0.0));
  CHECK(clearance({0, 2}, env) == doctest::Approx(-0.5));
  env.obstacles = {{{1, 3}, 0.5}, {{4, 1}, 0.8}};
  CHECK(clearance({1, 1}, env) == doctest::Approx(1.5));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 8);
  const auto e = sample_environment(4);
  for (int i = 0; i < 200; ++i) {
    const Vec2 a(u(rng), u(rng));
    const Vec2 b(u(rng), u(rng));
    CHECK(std::abs(clearance(a, e) - clearance(b, e)) <= (a - b).norm() + 1e-12);
  }
}

TEST_CASE("environment sampling") {
  const WorldConfig cfg;
  const auto a = sample_environment(42, cfg);
  const auto b = sample_environment(42, cfg);
  CHECK(to_json(a) == to_json(b));
  CHECK(to_json(sample_environment(43, cfg)) != to_json(a));

  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto env = sample_environment(seed, cfg);
    REQUIRE(env.obstacles.size() >= 3);
    REQUIRE(env.obstacles.size() <= 5);
    for (const auto& ob : env.obstacles) {
      REQUIRE(ob.radius >= 0.3);
      REQUIRE(ob.radius <= 0.8);
      REQUIRE(ob.center.x() >= 1.5);
      REQUIRE(ob.center.x() <= 6.0);
      REQUIRE(ob.center.y() >= 1.5);
      REQUIRE(ob.center.y() <= 6.0);
    }
    REQUIRE(env.goal.x() >= 2.5);
    REQUIRE(env.goal.x() <= 4.5);
    REQUIRE(env.goal.y() >= 6.2);
    REQUIRE(env.goal.y() <= 6.8);
    REQUIRE(clearance(cfg.start, env) > 0.8);
    REQUIRE(clearance(env.goal, env) > 0.8);
    const auto g = encode_obstacle_grid(env);
    int nonzero = 0;
    for (double v : g) {
      if (v != 0.0) {
        ++nonzero;
        REQUIRE(v >= 0.3);
        REQUIRE(v <= 0.8);
      }
    }
    REQUIRE(nonzero <= static_cast<int>(env.obstacles.size()));
  }
}

TEST_CASE("environment generation fails when rejection sampling cannot succeed") {
  WorldConfig cfg;
  cfg.obstacle_region = {{-0.1, -0.1}, {0.1, 0.1}};
  CHECK_THROWS_AS(sample_environment(1, cfg), EnvironmentGenerationError);
}

TEST_CASE("environment JSON round trip") {
  const auto env = sample_environment(7);
  const auto back = environment_from_json(to_json(env));
  CHECK(to_json(back) == to_json(env));
  CHECK(back.obstacles.size() == env.obstacles.size());
}

TEST_CASE("termination priority") {
  Environment env;
  env.goal = {0, 5};
  env.obstacles = {{{3, 0}, 0.5}};
  FormationState fs;
  fs.midpoint.position = env.goal;
  fs.midpoint.heading = kPi / 2;
  auto [l1, l2] = leaders_from_midpoint(fs.midpoint, 1.0);
  fs.leaders = {l1, l2};
  fs.followers = {{{-0.5, 4}, {0, 1}}, {{0.5, 4}, {0, 1}}};
  CHECK(check_termination(fs, env) == Outcome::Success);

  fs.followers[1].position = {3, 0};
  CHECK(check_termination(fs, env) == Outcome::Collision);

  fs.followers[1].position = {0.5, 4};
  fs.midpoint.position = {0, 2};
  std::tie(l1, l2) = leaders_from_midpoint(fs.midpoint, 1.0);
  fs.leaders = {l1, l2};
  fs.time_step = 600;
  CHECK(check_termination(fs, env) == Outcome::Timeout);
  fs.time_step = 599;
  CHECK(check_termination(fs, env) == Outcome::Running);
}

TEST_CASE("outcome strings") {
  for (auto o : {Outcome::Running, Outcome::Success, Outcome::Collision, Outcome::Timeout}) {
    CHECK(outcome_from_string(to_string(o)) == o);
  }
  CHECK_THROWS(outcome_from_string("crashed"));
}
