// fdp: dataset generation, training, rollouts, evaluation and comparison of
// the diffusion, PAC and MPPI planners for the leader-follower formation.

#include "fdp/dataset.hpp"
#include "fdp/metrics.hpp"
#include "fdp/render.hpp"
#include "fdp/run_config.hpp"
#include "fdp/training.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void emit(const json& j) { std::cout << j.dump() << '\n' << std::flush; }

struct Options {
  std::string config;
  int jobs = 1;
  std::uint64_t seed = 0;
  int episodes = 20;
  int data_episodes = 0;
  int adaptive = 1;
  std::string out;
  std::string data;
  std::string ckpt;
  std::string policy;
  std::string render;
  std::string report;
  int epochs = 0;
  int batch = 0;
  std::vector<int> down_dims;
  std::int64_t steps = 0;
};

bool given(const CLI::App* app, const char* flag) { return app->count(flag) > 0; }

fdp::RunConfig load_config(const Options& o) {
  return o.config.empty() ? fdp::RunConfig{} : fdp::load_run_config(o.config);
}

std::unique_ptr<fdp::policy::DiffusionPolicy> load_model(const Options& o, fdp::episode::PolicyKind kind) {
  if (kind != fdp::episode::PolicyKind::Diffusion) return nullptr;
  if (o.ckpt.empty()) throw UsageError("--ckpt is required for the diffusion policy");
  return std::make_unique<fdp::policy::DiffusionPolicy>(fdp::nn::load_checkpoint(o.ckpt));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw fdp::Error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw fdp::Error("failed writing " + path);
}

void cmd_gen_data(const CLI::App* app, const Options& o) {
  auto cfg = load_config(o);
  if (given(app, "--episodes")) cfg.dataset.episodes = o.data_episodes;
  if (given(app, "--seed")) cfg.dataset.seed = o.seed;
  cfg.dataset.jobs = o.jobs;
  const auto records = fdp::data::generate_dataset(cfg.dataset, cfg.setup, emit);
  fdp::data::write_dataset(o.out, records);
  emit({{"event", "done"}, {"episodes", records.size()}, {"out", o.out}});
}

void cmd_train(const CLI::App* app, const Options& o) {
  auto cfg = load_config(o);
  if (given(app, "--epochs")) cfg.train.epochs = o.epochs;
  if (given(app, "--batch")) cfg.train.batch_size = o.batch;
  if (given(app, "--steps")) cfg.train.max_steps = o.steps;
  if (given(app, "--seed")) cfg.train.seed = o.seed;
  if (given(app, "--down-dims")) cfg.network.down_dims = o.down_dims;
  const auto records = fdp::data::read_dataset(o.data);
  if (records.empty()) throw fdp::DataError("dataset " + o.data + " is empty");
  const auto norm = fdp::data::fit_normalizer(records);
  const auto samples = fdp::data::window_dataset(records, cfg.policy, norm);
  emit({{"event", "dataset"}, {"episodes", records.size()}, {"samples", samples.size()}});
  const auto result = fdp::train::train(samples, cfg.network_for_policy(), cfg.policy, norm, cfg.train, emit);
  fdp::nn::save_checkpoint(result.checkpoint, o.out);
  emit({{"event", "done"}, {"steps", result.checkpoint.step}, {"out", o.out}});
}

fdp::episode::RunOptions run_options(const CLI::App* app, const Options& o,
                                     const fdp::policy::DiffusionPolicy* model) {
  fdp::episode::RunOptions ro;
  ro.model = model;
  if (given(app, "--adaptive")) ro.adaptive_candidates = o.adaptive;
  return ro;
}

void cmd_rollout(const CLI::App* app, const Options& o) {
  const auto cfg = load_config(o);
  const auto kind = fdp::episode::policy_from_string(o.policy);
  const auto model = load_model(o, kind);
  const auto env = fdp::world::sample_environment(o.seed, cfg.setup.world);
  const auto rec = fdp::episode::run_episode(kind, env, cfg.setup, o.seed, run_options(app, o, model.get()));
  json summary{{"event", "rollout"},
               {"policy", o.policy},
               {"seed", o.seed},
               {"outcome", fdp::world::to_string(rec.outcome)},
               {"steps", rec.steps()}};
  if (rec.length() >= 2) summary["metrics"] = fdp::metrics::compute_metrics(rec, cfg.setup.world.dt).to_json();
  emit(summary);
  if (!o.out.empty()) write_text(o.out, fdp::episode::to_json(rec).dump() + "\n");
  if (!o.render.empty()) {
    fdp::render::write_svg(rec, o.render, {60.0, cfg.setup.world.success_radius});
    emit({{"event", "render"}, {"out", o.render}});
  }
}

fdp::metrics::PolicyReport evaluate(const CLI::App* app, const Options& o, const fdp::RunConfig& cfg,
                                    fdp::episode::PolicyKind kind, const fdp::policy::DiffusionPolicy* model) {
  fdp::metrics::EvaluationPlan plan{given(app, "--seed") ? o.seed : cfg.seeds.eval, o.episodes, o.jobs};
  const auto name = fdp::episode::to_string(kind);
  emit({{"event", "evaluate"}, {"policy", name}, {"episodes", plan.episodes}, {"seed", plan.seed}});
  const auto records = fdp::metrics::run_episodes(kind, plan, cfg.setup, run_options(app, o, model));
  auto rep = fdp::metrics::summarize(name, records, cfg.setup.world.dt);
  for (const auto& row : rep.rows) {
    emit({{"event", "episode"},
          {"policy", name},
          {"episode", row.episode},
          {"seed", row.seed},
          {"outcome", fdp::world::to_string(row.outcome)},
          {"steps", row.steps}});
  }
  emit({{"event", "summary"}, {"policy", name}, {"success_rate", rep.success_rate}});
  return rep;
}

void cmd_eval(const CLI::App* app, const Options& o) {
  const auto cfg = load_config(o);
  const auto kind = fdp::episode::policy_from_string(o.policy);
  const auto model = load_model(o, kind);
  fdp::metrics::MetricsReport report;
  report.policies.push_back(evaluate(app, o, cfg, kind, model.get()));
  write_text(o.report, report.to_json().dump(2) + "\n");
  emit({{"event", "done"}, {"report", o.report}});
}

void cmd_compare(const CLI::App* app, const Options& o) {
  const auto cfg = load_config(o);
  std::unique_ptr<fdp::policy::DiffusionPolicy> model;
  if (!o.ckpt.empty()) model = load_model(o, fdp::episode::PolicyKind::Diffusion);
  fdp::metrics::MetricsReport report;
  for (auto kind : {fdp::episode::PolicyKind::Mppi, fdp::episode::PolicyKind::Diffusion,
                    fdp::episode::PolicyKind::Pac}) {
    if (kind == fdp::episode::PolicyKind::Diffusion && !model) {
      emit({{"event", "skip"}, {"policy", "diffusion"}, {"reason", "no --ckpt given"}});
      continue;
    }
    report.policies.push_back(evaluate(app, o, cfg, kind, model.get()));
  }
  write_text(o.out, report.to_csv());
  if (!o.report.empty()) write_text(o.report, report.to_json().dump(2) + "\n");
  emit({{"event", "done"}, {"out", o.out}});
}

}  // namespace

int main(int argc, char** argv) {
  const fdp::RunConfig defaults;
  Options o;

  CLI::App app{"Diffusion planning for leader-follower formations"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run configuration JSON (defaults: `fdp print-config`)")
        ->check(CLI::ExistingFile);
    sub->add_option("--jobs", o.jobs, "Worker threads for episode-level parallelism")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("gen-data", "Collect successful PAC demonstrations as NDJSON");
  add_common(gen);
  gen->add_option("--out", o.out, "Output dataset path")->required();
  o.data_episodes = defaults.dataset.episodes;
  gen->add_option("--episodes", o.data_episodes, "Successful episodes to keep")->capture_default_str();
  o.seed = defaults.seeds.data;
  gen->add_option("--seed", o.seed, "Base seed; attempt i uses seed + i")->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train the denoiser on a demonstration dataset");
  add_common(tr);
  tr->add_option("--data", o.data, "Dataset NDJSON from gen-data")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", o.out, "Checkpoint path")->required();
  o.epochs = defaults.train.epochs;
  tr->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
  o.batch = defaults.train.batch_size;
  tr->add_option("--batch", o.batch, "Minibatch size")->capture_default_str();
  o.down_dims = defaults.network.down_dims;
  tr->add_option("--down-dims", o.down_dims, "U-Net channel widths per level")
      ->delimiter(',')
      ->capture_default_str();
  tr->add_option("--steps", o.steps, "Cap on optimizer steps (0 = epochs only)")->capture_default_str();
  tr->add_option("--seed", o.seed, "Training seed")->capture_default_str();

  auto add_policy_opts = [&](CLI::App* sub, bool policy_required) {
    auto* p = sub->add_option("--policy", o.policy, "diffusion, pac or mppi")
                  ->check(CLI::IsMember({"diffusion", "pac", "mppi"}));
    if (policy_required) p->required();
    sub->add_option("--ckpt", o.ckpt, "Checkpoint for the diffusion policy")->check(CLI::ExistingFile);
    o.adaptive = defaults.policy.adaptive_candidates;
    sub->add_option("--adaptive", o.adaptive, "Candidate plans per replanning step (1 = standard)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  };

  auto* ro = app.add_subcommand("rollout", "Run one episode");
  add_common(ro);
  add_policy_opts(ro, true);
  ro->add_option("--seed", o.seed, "Environment and policy seed")->required();
  ro->add_option("--render", o.render, "Write an SVG of the episode");
  ro->add_option("--out", o.out, "Write the episode record as JSON");

  auto* ev = app.add_subcommand("eval", "Evaluate one policy over sampled environments");
  add_common(ev);
  add_policy_opts(ev, true);
  ev->add_option("--episodes", o.episodes, "Episodes (environment seeds seed..seed+N-1)")->capture_default_str();
  ev->add_option("--report", o.report, "JSON report path")->required();
  ev->add_option("--seed", o.seed, "Base evaluation seed (default from config)");

  auto* cmp = app.add_subcommand("compare", "MPPI, diffusion (with --ckpt) and PAC on paired environments");
  add_common(cmp);
  cmp->add_option("--ckpt", o.ckpt, "Checkpoint for the diffusion policy")->check(CLI::ExistingFile);
  cmp->add_option("--adaptive", o.adaptive, "Candidate plans per replanning step")->check(CLI::PositiveNumber);
  cmp->add_option("--episodes", o.episodes, "Episodes per policy")->capture_default_str();
  cmp->add_option("--out", o.out, "CSV table path")->required();
  cmp->add_option("--report", o.report, "Optional JSON report path");
  cmp->add_option("--seed", o.seed, "Base evaluation seed (default from config)");

  auto* pc = app.add_subcommand("print-config", "Print the default run configuration");
  pc->add_option("--config", o.config, "Show this configuration merged over the defaults")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen) cmd_gen_data(gen, o);
    else if (*tr) cmd_train(tr, o);
    else if (*ro) cmd_rollout(ro, o);
    else if (*ev) cmd_eval(ev, o);
    else if (*cmp) cmd_compare(cmp, o);
    else if (*pc) std::cout << load_config(o).to_json().dump(2) << '\n';
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help() << std::flush;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
