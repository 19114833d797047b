#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blastcast/app.hpp"
#include "blastcast/error.hpp"

namespace fs = std::filesystem;
using namespace blastcast;

namespace {

struct Options {
  std::optional<fs::path> config;
  fs::path out;
  std::vector<std::string> set;
  bool deterministic = false;
  bool force = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<int> horizon;
  std::optional<int> grid;
  std::optional<std::string> suite;
  std::optional<int> count;
  std::optional<long> iterations;
  std::optional<long> start;
  fs::path data;
  fs::path model;
  std::string case_id;
  std::vector<std::string> cases;
  std::optional<fs::path> frames;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON config file");
  cmd->add_option("--out", o.out, "Output directory")->required();
  cmd->add_option("--set", o.set, "Override section.key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "Root seed");
  cmd->add_option("--jobs", o.jobs, "Worker bound for case generation");
  cmd->add_option("--horizon", o.horizon, "Rollout steps");
  cmd->add_option("--grid", o.grid, "Cells per side");
  cmd->add_flag("--deterministic", o.deterministic, "Single thread, fixed seeds");
  cmd->add_flag("--force", o.force, "Overwrite a non-empty output directory");
}

app::RunConfig resolve(const Options& o) {
  std::vector<std::string> overrides = o.set;
  auto flag = [&](const std::string& key, const std::string& value) {
    overrides.push_back(key + "=" + value);
  };
  if (o.seed) flag("run.seed", std::to_string(*o.seed));
  if (o.jobs) flag("run.jobs", std::to_string(*o.jobs));
  if (o.deterministic) flag("run.deterministic", "true");
  if (o.horizon) flag("forecast.horizon", std::to_string(*o.horizon));
  if (o.grid) flag("grid.n", std::to_string(*o.grid));
  if (o.suite) flag("scenario.suite", "\"" + *o.suite + "\"");
  if (o.count) flag("scenario.count", std::to_string(*o.count));
  if (o.iterations) flag("train.iterations", std::to_string(*o.iterations));
  if (o.start) flag("forecast.start", std::to_string(*o.start));
  return app::run_config_from_json(
      app::layered_config(o.config, app::blastcast_environment(), overrides));
}

std::string quoted(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

int fail(std::string_view kind, int code, const std::string& message) {
  std::cerr << "error: code=" << kind << " message=\"" << quoted(message) << "\"\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Blast-wave surrogate pipeline"};
  cli.require_subcommand(1);
  Options o;

  auto* gen = cli.add_subcommand("gen", "Generate scenarios, run the solver, write a dataset");
  add_common(gen, o);
  gen->add_option("--suite", o.suite, "random_layout | variable_source | variable_charge");
  gen->add_option("--count", o.count, "Number of cases");

  auto* train = cli.add_subcommand("train", "Train the surrogate on a dataset");
  add_common(train, o);
  train->add_option("--data", o.data, "Dataset directory")->required();
  train->add_option("--iterations", o.iterations, "Optimizer steps");

  auto* forecast = cli.add_subcommand("forecast", "Autoregressive rollout of one case");
  add_common(forecast, o);
  forecast->add_option("--data", o.data, "Dataset directory")->required();
  forecast->add_option("--model", o.model, "Checkpoint")->required();
  forecast->add_option("--case", o.case_id, "Case id")->required();
  forecast->add_option("--start", o.start, "First seed frame");

  auto* eval = cli.add_subcommand("eval", "Per-step metrics and aggregates of rollouts");
  add_common(eval, o);
  eval->add_option("--data", o.data, "Dataset directory")->required();
  eval->add_option("--model", o.model, "Checkpoint")->required();
  eval->add_option("--cases", o.cases, "Case ids (default: test split)");
  eval->add_option("--start", o.start, "First seed frame");

  auto* dmg = cli.add_subcommand("damage", "Damage raster of one case");
  add_common(dmg, o);
  dmg->add_option("--data", o.data, "Dataset directory")->required();
  dmg->add_option("--case", o.case_id, "Case id")->required();
  dmg->add_option("--frames", o.frames, "Forecast directory to assess instead of ground truth");

  auto* bench = cli.add_subcommand("bench", "Solver versus rollout wall time on one case");
  add_common(bench, o);
  bench->add_option("--data", o.data, "Dataset directory")->required();
  bench->add_option("--model", o.model, "Checkpoint")->required();
  bench->add_option("--case", o.case_id, "Case id")->required();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", app::kUsageExitCode, e.what());
  }

  try {
    const app::RunConfig cfg = resolve(o);
    train::set_deterministic(cfg.deterministic);
    app::prepare_output(o.out, o.force);

    if (gen->parsed()) {
      const auto r = app::generate(cfg, o.out);
      std::printf("generated %zu cases in %s\n", r.case_ids.size(), o.out.c_str());
    } else if (train->parsed()) {
      const auto r = app::train_model(cfg, o.data, o.out);
      std::printf("trained %ld iterations; best iteration %ld\n", r.iterations_run,
                  r.best_iteration);
    } else if (forecast->parsed()) {
      const auto r = app::run_forecast(cfg, o.data, o.model, o.case_id, o.out);
      std::printf("predicted %zu frames in %.3f s\n", r.size(), r.total_seconds());
      if (r.diverged_at) std::printf("diverged at step %d\n", *r.diverged_at);
    } else if (eval->parsed()) {
      const auto r = app::evaluate(cfg, o.data, o.model, o.cases, o.out);
      std::fputs(metrics::format_table("overall", r.overall).c_str(), stdout);
    } else if (dmg->parsed()) {
      const auto map = app::damage_assessment(cfg, o.data, o.case_id, o.frames, o.out);
      std::fputs((damage::area_report(map).dump(2) + "\n").c_str(), stdout);
    } else if (bench->parsed()) {
      const auto b = app::bench(cfg, o.data, o.model, o.case_id, o.out);
      std::printf("solver %.3f s  rollout %.3f s  speedup %.3fx  (%d steps)\n",
                  b.solver_seconds, b.rollout_seconds, b.speedup(), b.horizon);
    }
  } catch (const Error& e) {
    return fail(to_string(e.kind()), app::exit_code(e.kind()), e.what());
  } catch (const std::exception& e) {
    return fail("internal", 1, e.what());
  }
  return 0;
}
