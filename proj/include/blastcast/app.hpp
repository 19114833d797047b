#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "blastcast/damage.hpp"
#include "blastcast/dataset.hpp"
#include "blastcast/error.hpp"
#include "blastcast/euler2d.hpp"
#include "blastcast/forecast.hpp"
#include "blastcast/metrics.hpp"
#include "blastcast/network.hpp"
#include "blastcast/scenario.hpp"
#include "blastcast/training.hpp"

namespace blastcast::app {

/// Every tunable knob, grouped by section. The JSON form is the config
/// file format and the snapshot written into each output directory.
struct RunConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  bool deterministic = false;

  SuiteKind suite = SuiteKind::kRandomLayout;
  int count = 5;
  double test_fraction = 0.2;
  LayoutParams layout;

  int grid_n = 64;
  euler2d::SolverConfig solver;
  dataset::WindowParams window;
  net::ModelConfig model;
  train::LossConfig loss;
  train::TrainConfig training;

  int horizon = 280;
  long start = 0;
  double mape_threshold = 0.01;
  damage::DamageConfig damage;

  GridSpec grid() const { return GridSpec::square(grid_n, layout.domain_x); }
  void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& c);
/// Throws ConfigError on unknown sections or keys and on bad values.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Layers, lowest precedence first: defaults, the config file, environment
/// variables BLASTCAST_<SECTION>_<KEY>, then `section.key=value` overrides.
/// Values from the environment and overrides are parsed as JSON when
/// possible, otherwise taken as strings.
nlohmann::ordered_json layered_config(
    const std::optional<std::filesystem::path>& file,
    const std::map<std::string, std::string>& environment,
    const std::vector<std::string>& overrides);

/// Process exit status for command-line parse failures.
inline constexpr int kUsageExitCode = 2;
/// Distinct nonzero exit status per failure kind.
int exit_code(ErrorKind kind);

/// Snapshot of the BLASTCAST_* variables of the current process.
std::map<std::string, std::string> blastcast_environment();

/// Refuses to reuse a non-empty directory unless `force`; with `force` the
/// directory is cleared first. Throws Error(kOutputExists).
void prepare_output(const std::filesystem::path& dir, bool force);

// Subcommands. Each writes config.json into its output directory.

struct GenResult {
  std::vector<std::string> case_ids;
  std::vector<double> solver_seconds;
};
GenResult generate(const RunConfig& cfg, const std::filesystem::path& out);

train::TrainResult train_model(const RunConfig& cfg, const std::filesystem::path& data,
                               const std::filesystem::path& out);

/// Rolls a trained model forward from frames start..start+T-1 of one case
/// and writes the prediction in the dataset frame format plus timing.json.
forecast::RolloutResult run_forecast(const RunConfig& cfg, const std::filesystem::path& data,
                                     const std::filesystem::path& model,
                                     const std::string& case_id,
                                     const std::filesystem::path& out);

struct CaseEvaluation {
  std::string case_id;
  std::vector<metrics::StepMetrics> steps;
  metrics::AggregateMetrics aggregate;
};
struct Evaluation {
  std::vector<CaseEvaluation> cases;
  metrics::AggregateMetrics overall;
};
/// Per-step metrics of rollouts over the given cases (the test split when
/// empty, or every case when there is no test split).
Evaluation evaluate(const RunConfig& cfg, const std::filesystem::path& data,
                    const std::filesystem::path& model,
                    const std::vector<std::string>& case_ids,
                    const std::filesystem::path& out);

/// Damage raster of one case from its ground truth, or from forecast frames
/// written by run_forecast when `frames` is set.
damage::DamageMap damage_assessment(const RunConfig& cfg, const std::filesystem::path& data,
                                    const std::string& case_id,
                                    const std::optional<std::filesystem::path>& frames,
                                    const std::filesystem::path& out);

struct BenchResult {
  double solver_seconds = 0.0;
  double rollout_seconds = 0.0;
  long solver_steps = 0;
  int horizon = 0;
  double speedup() const { return solver_seconds / rollout_seconds; }
};
/// Times the solver producing the full case and a `horizon`-step rollout
/// from its first T frames on the same grid.
BenchResult bench(const RunConfig& cfg, const std::filesystem::path& data,
                  const std::filesystem::path& model, const std::string& case_id,
                  const std::filesystem::path& out);

/// Line plot of mean +/- one deviation across cases for RMSE, MAPE and R2.
std::string metric_curves_svg(const Evaluation& eval);

}  // namespace blastcast::app
