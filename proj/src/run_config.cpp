#include "fdp/run_config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace fdp {

namespace {

using nlohmann::json;

json vec(const Vec2& v) { return json::array({v.x(), v.y()}); }
Vec2 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
json rect(const world::Rect& r) { return {{"lo", vec(r.lo)}, {"hi", vec(r.hi)}}; }
world::Rect rect_from(const json& j) { return {vec_from(j.at("lo")), vec_from(j.at("hi"))}; }

double snap(double x) { return std::abs(x) < 1e-12 ? 0.0 : x; }

double heading_deg(const Vec2& h) { return std::atan2(h.y(), h.x()) * 180.0 / std::numbers::pi; }
Vec2 heading_from_deg(double deg) {
  const double r = deg * std::numbers::pi / 180.0;
  return {snap(std::cos(r)), snap(std::sin(r))};
}

/// Overlays `user` onto `base`; objects merge key by key, anything else is
/// replaced. Keys absent from `base` are errors.
void merge_strict(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config section '" + path + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + here + "'");
    if (base[key].is_object()) {
      merge_strict(base[key], value, here);
    } else {
      base[key] = value;
    }
  }
}

}  // namespace

nn::NetworkConfig RunConfig::network_for_policy() const {
  nn::NetworkConfig n = network;
  n.input_channels = policy::kActionDim;
  n.horizon = policy.horizon;
  n.cond_dim = policy.obs_dim();
  n.validate();
  return n;
}

json RunConfig::to_json() const {
  const auto& w = setup.world;
  const auto& f = setup.formation;
  json edges = json::array();
  for (const auto& e : f.graph.edges()) edges.push_back({e.tail, e.head});
  json followers = json::array();
  for (const auto& s : f.followers) followers.push_back({{"position", vec(s.position)}, {"heading_deg", heading_deg(s.heading)}});
  const auto& p = setup.pac;
  const auto& m = setup.mppi;
  return {
      {"world",
       {{"dt", w.dt},
        {"bar_length", w.bar_length},
        {"success_radius", w.success_radius},
        {"max_steps", w.max_steps},
        {"v_min", w.limits.v_min},
        {"v_max", w.limits.v_max},
        {"omega_max", w.limits.omega_max},
        {"obstacle_region", rect(w.obstacle_region)},
        {"goal_region", rect(w.goal_region)},
        {"start", vec(w.start)},
        {"start_heading_deg", w.start_heading * 180.0 / std::numbers::pi},
        {"min_obstacles", w.min_obstacles},
        {"max_obstacles", w.max_obstacles},
        {"min_radius", w.min_radius},
        {"max_radius", w.max_radius},
        {"keepout", w.keepout},
        {"max_overlap", w.max_overlap},
        {"max_rejections", w.max_rejections}}},
      {"formation",
       {{"gains", {{"k1", f.gains.k1}, {"k2", f.gains.k2}, {"beta", f.gains.beta}}},
        {"num_vertices", f.graph.num_vertices()},
        {"num_leaders", f.graph.num_leaders()},
        {"edges", edges},
        {"desired_sq", f.desired_sq},
        {"followers", followers},
        {"follower_dt", f.follower_dt}}},
      {"pac",
       {{"attract_gain", p.attract_gain},
        {"repulse_gain", p.repulse_gain},
        {"influence_radius", p.influence_radius},
        {"lateral_gain", p.lateral_gain},
        {"v_max", p.v_max},
        {"omega_max", p.omega_max},
        {"goal_tolerance", p.goal_tolerance},
        {"inflation", p.inflation}}},
      {"mppi",
       {{"horizon", m.horizon},
        {"num_samples", m.num_samples},
        {"temperature", m.temperature},
        {"noise_v", m.noise_v},
        {"noise_omega", m.noise_omega},
        {"w_goal", m.w_goal},
        {"w_collision", m.w_collision},
        {"w_control", m.w_control},
        {"safety_margin", m.safety_margin}}},
      {"diffusion",
       {{"network",
         {{"down_dims", network.down_dims},
          {"kernel_size", network.kernel_size},
          {"groups", network.groups},
          {"step_embed_dim", network.step_embed_dim}}},
        {"policy", policy.to_json()},
        {"train", train.to_json()}}},
      {"dataset",
       {{"episodes", dataset.episodes},
        {"yield_check_attempts", dataset.yield_check_attempts},
        {"min_yield", dataset.min_yield}}},
      {"seeds", {{"data", seeds.data}, {"train", seeds.train}, {"eval", seeds.eval}}},
  };
}

RunConfig RunConfig::from_json(const json& user) {
  json j = RunConfig{}.to_json();
  merge_strict(j, user, "");
  RunConfig c;
  try {
    const auto& w = j.at("world");
    auto& wc = c.setup.world;
    wc.dt = w.at("dt").get<double>();
    wc.bar_length = w.at("bar_length").get<double>();
    wc.success_radius = w.at("success_radius").get<double>();
    wc.max_steps = w.at("max_steps").get<int>();
    wc.limits.v_min = w.at("v_min").get<double>();
    wc.limits.v_max = w.at("v_max").get<double>();
    wc.limits.omega_max = w.at("omega_max").get<double>();
    wc.obstacle_region = rect_from(w.at("obstacle_region"));
    wc.goal_region = rect_from(w.at("goal_region"));
    wc.start = vec_from(w.at("start"));
    wc.start_heading = w.at("start_heading_deg").get<double>() * std::numbers::pi / 180.0;
    wc.min_obstacles = w.at("min_obstacles").get<int>();
    wc.max_obstacles = w.at("max_obstacles").get<int>();
    wc.min_radius = w.at("min_radius").get<double>();
    wc.max_radius = w.at("max_radius").get<double>();
    wc.keepout = w.at("keepout").get<double>();
    wc.max_overlap = w.at("max_overlap").get<double>();
    wc.max_rejections = w.at("max_rejections").get<int>();
    if (!(wc.dt > 0.0) || !(wc.bar_length > 0.0) || wc.max_steps < 0) {
      throw ConfigError("world.dt and world.bar_length must be positive, max_steps non-negative");
    }

    const auto& f = j.at("formation");
    auto& fc = c.setup.formation;
    fc.gains = {f.at("gains").at("k1").get<double>(), f.at("gains").at("k2").get<double>(),
                f.at("gains").at("beta").get<double>()};
    std::vector<graph::Edge> edges;
    for (const auto& e : f.at("edges")) edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    fc.graph = graph::DirectedGraph(f.at("num_vertices").get<int>(), edges, f.at("num_leaders").get<int>());
    fc.desired_sq = f.at("desired_sq").get<std::vector<double>>();
    fc.followers.clear();
    for (const auto& s : f.at("followers")) {
      fc.followers.push_back({vec_from(s.at("position")), heading_from_deg(s.at("heading_deg").get<double>())});
    }
    fc.follower_dt = f.at("follower_dt").get<double>();
    if (static_cast<int>(fc.desired_sq.size()) != fc.graph.num_edges()) {
      throw ConfigError("formation.desired_sq needs one entry per edge");
    }
    if (static_cast<int>(fc.followers.size()) != fc.graph.num_vertices() - fc.graph.num_leaders()) {
      throw ConfigError("formation.followers needs one pose per follower vertex");
    }
    if (fc.graph.num_leaders() != 2) throw ConfigError("the leader bar needs exactly two leaders");

    const auto& p = j.at("pac");
    auto& pc = c.setup.pac;
    pc.attract_gain = p.at("attract_gain").get<double>();
    pc.repulse_gain = p.at("repulse_gain").get<double>();
    pc.influence_radius = p.at("influence_radius").get<double>();
    pc.lateral_gain = p.at("lateral_gain").get<double>();
    pc.v_max = p.at("v_max").get<double>();
    pc.omega_max = p.at("omega_max").get<double>();
    pc.goal_tolerance = p.at("goal_tolerance").get<double>();
    pc.inflation = p.at("inflation").get<double>();

    const auto& m = j.at("mppi");
    auto& mc = c.setup.mppi;
    mc.horizon = m.at("horizon").get<int>();
    mc.num_samples = m.at("num_samples").get<int>();
    mc.temperature = m.at("temperature").get<double>();
    mc.noise_v = m.at("noise_v").get<double>();
    mc.noise_omega = m.at("noise_omega").get<double>();
    mc.w_goal = m.at("w_goal").get<double>();
    mc.w_collision = m.at("w_collision").get<double>();
    mc.w_control = m.at("w_control").get<double>();
    mc.safety_margin = m.at("safety_margin").get<double>();

    const auto& d = j.at("diffusion");
    const auto& n = d.at("network");
    c.network.down_dims = n.at("down_dims").get<std::vector<int>>();
    c.network.kernel_size = n.at("kernel_size").get<int>();
    c.network.groups = n.at("groups").get<int>();
    c.network.step_embed_dim = n.at("step_embed_dim").get<int>();
    c.policy = policy::PolicyConfig::from_json(d.at("policy"));
    c.train = train::TrainConfig::from_json(d.at("train"));
    c.network_for_policy();

    const auto& ds = j.at("dataset");
    c.dataset.episodes = ds.at("episodes").get<int>();
    c.dataset.yield_check_attempts = ds.at("yield_check_attempts").get<int>();
    c.dataset.min_yield = ds.at("min_yield").get<double>();

    const auto& s = j.at("seeds");
    c.seeds = {s.at("data").get<std::uint64_t>(), s.at("train").get<std::uint64_t>(),
               s.at("eval").get<std::uint64_t>()};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
  c.dataset.seed = c.seeds.data;
  c.train.seed = c.seeds.train;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

}  // namespace fdp
