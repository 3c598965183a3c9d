#pragma once

#include "fdp/common.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fdp::world {

struct Obstacle {
  Vec2 center;
  double radius;
};

struct Rect {
  Vec2 lo;
  Vec2 hi;
};

struct Environment {
  std::vector<Obstacle> obstacles;
  Vec2 goal{0.0, 0.0};
  Rect obstacle_region{{1.5, 1.5}, {6.0, 6.0}};
  std::uint64_t seed = 0;
};

/// Velocity command for the leader-bar midpoint.
struct Action {
  double v = 0.0;
  double omega = 0.0;
};

struct ActionLimits {
  double v_min = 0.0;
  double v_max = 0.8;
  double omega_max = 1.5;

  Action clamp(const Action& a) const;
};

/// Planar pose and twist of the midpoint between the two leaders.
struct MidpointState {
  Vec2 position{0.0, 0.0};
  double heading = 0.0;  ///< wrapped to (-pi, pi]
  double lin_vel = 0.0;
  double ang_vel = 0.0;

  /// [x, y, phi, xdot, ydot, omega]
  std::array<double, 6> to_vector() const;
  static MidpointState from_vector(const std::array<double, 6>& s);
};

/// Follower pose: position plus unit heading vector.
struct UnicycleState {
  Vec2 position{0.0, 0.0};
  Vec2 heading{1.0, 0.0};
};

struct FormationState {
  MidpointState midpoint;
  std::array<Vec2, 2> leaders;
  std::vector<UnicycleState> followers;
  int time_step = 0;
};

enum class Outcome { Running, Success, Collision, Timeout };

std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);

struct WorldConfig {
  double dt = 0.1;
  double bar_length = 1.0;
  double success_radius = 0.3;
  int max_steps = 600;
  ActionLimits limits;
  Rect obstacle_region{{1.5, 1.5}, {6.0, 6.0}};
  Rect goal_region{{2.5, 6.2}, {4.5, 6.8}};
  Vec2 start{0.0, 0.0};
  double start_heading = 1.5707963267948966;
  int min_obstacles = 3;
  int max_obstacles = 5;
  double min_radius = 0.3;
  double max_radius = 0.8;
  double keepout = 0.8;          ///< free disc around start and goal
  double max_overlap = 0.5;      ///< allowed pairwise overlap, fraction of the smaller radius
  int max_rejections = 1000;
};

/// Unicycle Euler update of the midpoint. The action is clamped to `limits`
/// and stored as the state's twist.
MidpointState step_midpoint(const MidpointState& state, Action action, double dt,
                            const ActionLimits& limits = {});

/// Left and right leader positions: midpoint -/+ (L/2)(sin phi, -cos phi).
std::pair<Vec2, Vec2> leaders_from_midpoint(const MidpointState& state, double bar_length);

/// Planar reduction of p' = h u, h' = omega x h, renormalizing h.
UnicycleState step_unicycle(const UnicycleState& state, double u, double omega, double dt);

inline constexpr int kGridSize = 7;
inline constexpr int kGridCells = kGridSize * kGridSize;

/// 7x7 row-major grid; obstacle k lands in cell floor(c_k) - (1,1), clipped
/// into [0, 6], and the cell keeps the largest radius mapped to it.
std::array<double, kGridCells> encode_obstacle_grid(const Environment& env);

/// Signed distance to the nearest obstacle surface (negative inside).
double clearance(const Vec2& point, const Environment& env);

inline constexpr double kNoObstacleClearance = 1e9;

Environment sample_environment(std::uint64_t seed, const WorldConfig& cfg = {});

/// Minimum clearance over midpoint, both leaders and all followers.
double formation_clearance(const FormationState& fs, const Environment& env);

/// Priority: collision > success > timeout > running.
Outcome check_termination(const FormationState& fs, const Environment& env, const WorldConfig& cfg = {});

nlohmann::json to_json(const Environment& env);
Environment environment_from_json(const nlohmann::json& j, const WorldConfig& cfg = {});

}  // namespace fdp::world
