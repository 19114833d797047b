#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "blastcast/app.hpp"
#include "blastcast/binary_io.hpp"
#include "doctest.h"

using namespace blastcast;
using namespace blastcast::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("blastcast_cli_" + name);
  fs::remove_all(p);
  return p;
}

struct Run {
  int status;
  std::string stderr_text;
};

Run run_cli(const std::string& args) {
  const fs::path err = scratch("stderr.txt");
  const std::string cmd =
      std::string(BLASTCAST_CLI) + " " + args + " > /dev/null 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  return {WEXITSTATUS(raw), io::read_file(err)};
}

}  // namespace

TEST_CASE("defaults round-trip through the JSON form") {
  const RunConfig d;
  const RunConfig back = run_config_from_json(to_json(d));
  CHECK(to_json(back) == to_json(d));
  CHECK(back.training.batch_size == 32);
  CHECK(back.training.learning_rate == 5e-4);
  CHECK(back.loss.lambda2 == 0.8);
  CHECK(back.window.window == 10);
}

TEST_CASE("config precedence: file < environment < override") {
  const fs::path file = scratch("cfg.json");
  io::write_file(file, R"({"train": {"iterations": 11, "batch_size": 4},
                           "grid": {"n": 48}})");
  std::map<std::string, std::string> env = {{"BLASTCAST_TRAIN_ITERATIONS", "22"},
                                            {"BLASTCAST_MODEL_WIDTHS", "[8,16]"}};
  auto merged = layered_config(file, env, {"train.iterations=33"});
  RunConfig c = run_config_from_json(merged);
  CHECK(c.training.iterations == 33);
  CHECK(c.training.batch_size == 4);
  CHECK(c.grid_n == 48);
  CHECK(c.model.c1 == 8);
  CHECK(c.model.c2 == 16);

  c = run_config_from_json(layered_config(file, env, {}));
  CHECK(c.training.iterations == 22);
  c = run_config_from_json(layered_config(file, {}, {}));
  CHECK(c.training.iterations == 11);
  c = run_config_from_json(layered_config(std::nullopt, {}, {"scenario.suite=variable_charge"}));
  CHECK(c.suite == SuiteKind::kVariableCharge);
  fs::remove(file);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(layered_config(std::nullopt, {}, {"train.nope=1"}), ConfigError);
  CHECK_THROWS_AS(layered_config(std::nullopt, {}, {"nosection.key=1"}), ConfigError);
  CHECK_THROWS_AS(layered_config(std::nullopt, {}, {"iterations=1"}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"train", {{"batch_size", "many"}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"solver", {{"edges", "open"}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"dataset", {{"window", 5}}}}), ConfigError);
  try {
    layered_config(fs::path("/nonexistent/cfg.json"), {}, {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMissingInput);
  }
}

TEST_CASE("exit codes are distinct and nonzero") {
  std::set<int> codes = {kUsageExitCode};
  for (ErrorKind k : {ErrorKind::kConfig, ErrorKind::kContract, ErrorKind::kLayoutInfeasible,
                      ErrorKind::kSourceOccluded, ErrorKind::kSolverFailure,
                      ErrorKind::kCorruptDataset, ErrorKind::kMissingInput,
                      ErrorKind::kDiverged, ErrorKind::kOutputExists}) {
    CHECK(exit_code(k) != 0);
    codes.insert(exit_code(k));
  }
  CHECK(codes.size() == 10);
}

TEST_CASE("output directories are not overwritten without force") {
  const fs::path dir = scratch("out");
  prepare_output(dir, false);
  io::write_file(dir / "keep.txt", "x");
  try {
    prepare_output(dir, false);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kOutputExists);
  }
  CHECK(fs::exists(dir / "keep.txt"));
  prepare_output(dir, true);
  CHECK(fs::is_empty(dir));
  fs::remove_all(dir);
}

TEST_CASE("command line reports one machine-parsable error line") {
  Run r = run_cli("gen --out /tmp/x --no-such-flag");
  CHECK(r.status == kUsageExitCode);
  CHECK(r.stderr_text.rfind("error: code=usage message=\"", 0) == 0);

  r = run_cli("train --data /nonexistent --out " + scratch("t").string());
  CHECK(r.status == exit_code(ErrorKind::kMissingInput));
  CHECK(r.stderr_text.rfind("error: code=missing_input message=\"", 0) == 0);
  CHECK(std::count(r.stderr_text.begin(), r.stderr_text.end(), '\n') == 1);

  const fs::path out = scratch("g");
  r = run_cli("gen --out " + out.string() + " --set train.batch_size=0");
  CHECK(r.status == exit_code(ErrorKind::kConfig));

  // A corrupt case surfaces as its own status.
  const fs::path data = scratch("data");
  r = run_cli("gen --out " + data.string() +
              " --count 2 --grid 32 --set solver.n_out=15 --set solver.t_end=0.01"
              " --set scenario.test_fraction=0.5 --deterministic");
  REQUIRE(r.status == 0);
  const fs::path frames = data / "cases" / "random_layout_000" / "frames.bin";
  const std::string bytes = io::read_file(frames);
  io::write_file(frames, bytes.substr(0, bytes.size() - 8));
  r = run_cli("train --data " + data.string() + " --out " + scratch("t2").string());
  CHECK(r.status == exit_code(ErrorKind::kCorruptDataset));

  r = run_cli("gen --out " + data.string() + " --count 1");
  CHECK(r.status == exit_code(ErrorKind::kOutputExists));
  fs::remove_all(data);
}

TEST_CASE("gen writes cases, index, snapshot and timing") {
  const fs::path data = scratch("gen");
  const Run r = run_cli("gen --out " + data.string() +
                        " --count 3 --seed 4 --grid 32 --set solver.n_out=15"
                        " --set solver.t_end=0.01 --jobs 2");
  REQUIRE(r.status == 0);
  for (const char* id : {"random_layout_000", "random_layout_001", "random_layout_002"}) {
    const dataset::CaseData c = dataset::read_case(data / "cases" / id);
    CHECK(c.frames.size() == 15);
    CHECK(c.frames.grid.nx == 32);
  }
  const dataset::DatasetIndex index = dataset::read_index(data);
  CHECK(index.train.size() + index.test.size() == 3);
  CHECK(index.stats.p_max > index.stats.p_min);
  const RunConfig snap = run_config_from_json(io::read_json(data / "config.json"));
  CHECK(snap.seed == 4);
  CHECK(snap.grid_n == 32);
  CHECK(fs::exists(data / "timing.json"));
  fs::remove_all(data);
}
