#include "fdp/controllers.hpp"
#include "fdp/dataset.hpp"
#include "fdp/ddpm.hpp"
#include "fdp/episode.hpp"
#include "fdp/formation_graph.hpp"
#include "fdp/metrics.hpp"
#include "fdp/nn/checkpoint.hpp"
#include "fdp/policy.hpp"
#include "fdp/render.hpp"
#include "fdp/run_config.hpp"
#include "fdp/training.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>

namespace py = pybind11;
using namespace fdp;

namespace {

RunConfig config_from(const std::string& text) {
  if (text.empty()) return RunConfig{};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return RunConfig::from_json(j);
}

std::unique_ptr<policy::DiffusionPolicy> load_policy(const std::optional<std::string>& ckpt) {
  if (!ckpt) return nullptr;
  return std::make_unique<policy::DiffusionPolicy>(nn::load_checkpoint(*ckpt));
}

episode::RunOptions run_options(const policy::DiffusionPolicy* model, std::optional<int> candidates) {
  episode::RunOptions o;
  o.model = model;
  o.adaptive_candidates = candidates;
  return o;
}

graph::Framework make_framework(int n, const std::vector<std::pair<int, int>>& edges, int num_leaders,
                                const Eigen::MatrixXd& positions, std::vector<double> desired_sq) {
  if (positions.rows() != n || positions.cols() != 2) throw InvalidArgument("positions must be n x 2");
  std::vector<graph::Edge> e;
  for (const auto& [a, b] : edges) e.push_back({a, b});
  std::vector<Vec2> p;
  for (int i = 0; i < n; ++i) p.emplace_back(positions(i, 0), positions(i, 1));
  if (desired_sq.empty()) desired_sq.assign(e.size(), 1.0);
  return graph::Framework(graph::DirectedGraph(n, e, num_leaders), p, desired_sq);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Formation diffusion policy core";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<InvalidAction>(m, "InvalidAction", base.ptr());
  py::register_exception<EnvironmentGenerationError>(m, "EnvironmentGenerationError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());
  py::register_exception<SamplingError>(m, "SamplingError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());

  m.def("default_config", [] { return RunConfig{}.to_json().dump(); });
  m.def("normalize_config", [](const std::string& cfg) { return config_from(cfg).to_json().dump(); },
        py::arg("config"));

  m.def(
      "sample_environment",
      [](std::uint64_t seed, const std::string& cfg) {
        return world::to_json(world::sample_environment(seed, config_from(cfg).setup.world)).dump();
      },
      py::arg("seed"), py::arg("config") = "");

  m.def(
      "rollout",
      [](const std::string& kind, std::uint64_t seed, const std::string& cfg, std::optional<std::string> ckpt,
         std::optional<int> candidates) {
        const auto rc = config_from(cfg);
        const auto model = load_policy(ckpt);
        episode::EpisodeRecord rec;
        {
          py::gil_scoped_release release;
          const auto env = world::sample_environment(seed, rc.setup.world);
          rec = episode::run_episode(episode::policy_from_string(kind), env, rc.setup, seed,
                                     run_options(model.get(), candidates));
        }
        return episode::to_json(rec).dump();
      },
      py::arg("policy"), py::arg("seed"), py::arg("config") = "", py::arg("checkpoint") = py::none(),
      py::arg("candidates") = py::none());

  m.def(
      "episode_metrics",
      [](const std::string& record) {
        return metrics::compute_metrics(episode::record_from_json(nlohmann::json::parse(record))).to_json().dump();
      },
      py::arg("record"));

  m.def(
      "evaluate",
      [](const std::string& kind, int episodes, std::uint64_t seed, int jobs, const std::string& cfg,
         std::optional<std::string> ckpt, std::optional<int> candidates) {
        const auto rc = config_from(cfg);
        const auto model = load_policy(ckpt);
        metrics::MetricsReport rep;
        {
          py::gil_scoped_release release;
          const auto recs = metrics::run_episodes(episode::policy_from_string(kind), {seed, episodes, jobs}, rc.setup,
                                                  run_options(model.get(), candidates));
          rep.policies.push_back(metrics::summarize(kind, recs, rc.setup.world.dt));
        }
        return py::make_tuple(rep.to_json().dump(), rep.to_csv());
      },
      py::arg("policy"), py::arg("episodes"), py::arg("seed"), py::arg("jobs") = 1, py::arg("config") = "",
      py::arg("checkpoint") = py::none(), py::arg("candidates") = py::none());

  m.def(
      "generate_dataset",
      [](int episodes, std::uint64_t seed, const std::string& out, int jobs, const std::string& cfg) {
        const auto rc = config_from(cfg);
        auto dc = rc.dataset;
        dc.episodes = episodes;
        dc.seed = seed;
        dc.jobs = jobs;
        py::gil_scoped_release release;
        const auto recs = data::generate_dataset(dc, rc.setup);
        data::write_dataset(out, recs);
        return recs.size();
      },
      py::arg("episodes"), py::arg("seed"), py::arg("out"), py::arg("jobs") = 1, py::arg("config") = "");

  m.def(
      "train",
      [](const std::string& data_path, const std::string& out, const std::string& cfg, std::int64_t steps) {
        const auto rc = config_from(cfg);
        auto tc = rc.train;
        if (steps > 0) tc.max_steps = steps;
        train::TrainResult res;
        {
          py::gil_scoped_release release;
          const auto recs = data::read_dataset(data_path);
          const auto norm = data::fit_normalizer(recs);
          const auto samples = data::window_dataset(recs, rc.policy, norm);
          res = train::train(samples, rc.network_for_policy(), rc.policy, norm, tc);
          nn::save_checkpoint(res.checkpoint, out);
        }
        return py::make_tuple(res.step_losses, res.validation_losses);
      },
      py::arg("data"), py::arg("out"), py::arg("config") = "", py::arg("steps") = 0);

  m.def(
      "render_svg", [](const std::string& record) {
        return render::render_svg(episode::record_from_json(nlohmann::json::parse(record)));
      },
      py::arg("record"));

  m.def(
      "rigidity_matrix",
      [](int n, const std::vector<std::pair<int, int>>& edges, int num_leaders, const Eigen::MatrixXd& positions) {
        return graph::rigidity_matrix(make_framework(n, edges, num_leaders, positions, {}));
      },
      py::arg("n"), py::arg("edges"), py::arg("num_leaders"), py::arg("positions"));

  m.def(
      "distance_errors",
      [](int n, const std::vector<std::pair<int, int>>& edges, int num_leaders, const Eigen::MatrixXd& positions,
         const std::vector<double>& desired_sq) {
        return graph::distance_errors(make_framework(n, edges, num_leaders, positions, desired_sq));
      },
      py::arg("n"), py::arg("edges"), py::arg("num_leaders"), py::arg("positions"), py::arg("desired_sq"));

  m.def(
      "formation_command",
      [](int vertex, int n, const std::vector<std::pair<int, int>>& edges, int num_leaders,
         const Eigen::MatrixXd& positions, const std::vector<double>& desired_sq, const Eigen::Vector2d& heading,
         double k1, double k2, double beta) {
        const auto cmd = control::formation_command(vertex, make_framework(n, edges, num_leaders, positions, desired_sq),
                                                    heading, {k1, k2, beta});
        return py::make_tuple(cmd.u, cmd.omega);
      },
      py::arg("vertex"), py::arg("n"), py::arg("edges"), py::arg("num_leaders"), py::arg("positions"),
      py::arg("desired_sq"), py::arg("heading"), py::arg("k1") = 35.0, py::arg("k2") = 30.0, py::arg("beta") = 23.0);

  m.def(
      "cosine_alpha_bars",
      [](int steps) {
        const auto s = diffusion::NoiseSchedule::cosine(steps);
        Eigen::VectorXd out(steps);
        for (int k = 0; k < steps; ++k) out(k) = s.alpha_bar(k);
        return out;
      },
      py::arg("steps"));
}
