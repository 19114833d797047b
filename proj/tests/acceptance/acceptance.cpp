// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails. Pass criterion numbers as
// arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "../unit/damage_checks.hpp"
#include "../unit/nn_checks.hpp"
#include "../unit/solver_checks.hpp"
#include "blastcast/app.hpp"
#include "blastcast/binary_io.hpp"
#include "blastcast/forecast.hpp"
#include "blastcast/metrics.hpp"

namespace fs = std::filesystem;
using namespace blastcast;
using Clock = std::chrono::steady_clock;

#ifndef BLASTCAST_CLI
#error "BLASTCAST_CLI must name the command-line binary"
#endif

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records one sub-check; the criterion passes only if all of them do.
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (detail.tellp() > 0) detail << "; ";
    detail << what << (ok ? "" : " [failed]");
  }
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path work_dir() {
  const fs::path dir = fs::path(BLASTCAST_WORK_DIR);
  fs::create_directories(dir);
  return dir;
}

// ----------------------------------------------------------------- 1

void solver_physics(Outcome& o) {
  const auto t0 = Clock::now();
  const double e64 = checks::sod_l1_error(64);
  const double e128 = checks::sod_l1_error(128);
  const double e256 = checks::sod_l1_error(256);
  o.check(e128 < e64 && e256 < e128, "Sod L1 " + fmt("%.4g", e64) + " > " +
                                         fmt("%.4g", e128) + " > " + fmt("%.4g", e256));
  const checks::Drift d = checks::closed_box_drift(1000);
  o.check(d.mass <= 1e-6, "closed-box mass drift " + fmt("%.3g", d.mass));
  const double rot = checks::rotation_asymmetry(290, 0.15);
  o.check(rot <= 1e-6, "rotation asymmetry " + fmt("%.3g", rot));
  const double s = seconds_since(t0);
  o.check(s <= 300.0, "runtime " + fmt("%.1f s", s));
}

// ----------------------------------------------------------------- 2

void scharr_oracle(Outcome& o) {
  const double err = checks::scharr_oracle_error(100, 2);
  o.check(err <= 1e-12, "max |loop - conv| " + fmt("%.3g", err));
  o.check(checks::scharr_constant_and_ramp_exact(), "constant -> 0, ramp -> Gx = 32");
}

// ----------------------------------------------------------------- 3

void loss_gradients(Outcome& o) {
  const auto t0 = Clock::now();
  const torch::Tensor p = torch::rand({4, 1, 16, 16}, torch::kFloat64);
  o.check(train::composite_loss(p, p).total.item<double>() == 0.0,
          "composite_loss(pred = true) = 0");
  const checks::GradCheck g = checks::gradient_check(20, 7, 1e-3);
  o.check(g.checked == 20 && g.max_rel_error <= 1e-4,
          "step 1e-3 max rel err " + fmt("%.3g", g.max_rel_error));
  // Diagnostic only: the same draw with a step below the max-pool/ReLU kinks.
  const checks::GradCheck fine = checks::gradient_check(20, 7, 1e-5);
  o.detail << "; step 1e-5 max rel err " << fmt("%.3g", fine.max_rel_error)
           << " (diagnostic)";
  const double s = seconds_since(t0);
  o.check(s <= 120.0, "runtime " + fmt("%.1f s", s));
}

// ----------------------------------------------------------------- 4

void architecture(Outcome& o) {
  {
    torch::NoGradGuard ng;
    net::BlastNet model(net::ModelConfig{});
    model->eval();
    bool shapes = true;
    for (int b : {1, 2, 5}) {
      const torch::Tensor y = model->forward(torch::rand({b, 10, 4, 64, 64}));
      shapes = shapes && y.sizes() == torch::IntArrayRef({b, 1, 64, 64});
    }
    o.check(shapes, "(B,10,4,64,64) -> (B,1,64,64) for B in {1,2,5}");
  }
  const long bad = checks::gate_range_violations(1000, 4);
  o.check(bad == 0, "gate values outside (0,1): " + std::to_string(bad));
  o.check(checks::zero_weight_gru_halves_state(), "zero-weight step gives 0.5 h");

  const fs::path path = work_dir() / "roundtrip.ckpt";
  net::BlastNet m(net::ModelConfig{});
  {
    torch::NoGradGuard ng;
    for (auto& t : m->parameters()) t.uniform_(-1, 1);
    for (auto& t : m->buffers()) {
      if (t.is_floating_point()) t.uniform_(0.5, 1.5);
    }
  }
  net::save_checkpoint(path, m);
  net::BlastNet back = net::load_checkpoint(path);
  bool same = net::checkpoint_bytes(back) == io::read_file(path);
  for (const auto& [name, t] : net::named_state(*m)) {
    bool found = false;
    for (const auto& [name2, t2] : net::named_state(*back)) {
      if (name2 == name) found = torch::equal(t, t2);
    }
    same = same && found;
  }
  o.check(same, "checkpoint round trip bit-exact");

  int built = 0, total = 0;
  for (const auto& [name, ok] : checks::ablation_runs()) {
    ++total;
    built += ok ? 1 : 0;
  }
  o.check(built == total, std::to_string(built) + "/" + std::to_string(total) +
                              " ablation variants build and run");
}

// ----------------------------------------------------------------- 5

void windowing(Outcome& o) {
  std::vector<FieldF> frames(290, FieldF(16, 16, 0.0f));
  dataset::Statics st{FieldF(16, 16, 0.0f), FieldF(16, 16, 0.0f)};
  const dataset::CaseWindows w("c", frames, st, {});
  o.check(w.size() == 280, "290 frames -> " + std::to_string(w.size()) + " samples");

  net::BlastNet model(net::ModelConfig{});
  std::vector<FieldF> seed;
  for (int t = 0; t < 10; ++t) {
    FieldF f(64, 64);
    for (int j = 0; j < 64; ++j) {
      for (int i = 0; i < 64; ++i) f(i, j) = 0.01f * ((i * 7 + j * 3 + t * 5) % 17);
    }
    seed.push_back(std::move(f));
  }
  dataset::Statics statics{FieldF(64, 64, 0.3f), FieldF(64, 64, 0.0f)};
  const auto long_run = forecast::rollout(model, seed, statics, {}, 280);
  const auto short_run = forecast::rollout(model, seed, statics, {}, 50);
  bool prefix = long_run.size() == 280 && short_run.size() == 50;
  for (std::size_t k = 0; prefix && k < 50; ++k) {
    prefix = long_run.normalized[k] == short_run.normalized[k];
  }
  o.check(prefix, "rollout(50) is a bitwise prefix of rollout(280)");
}

// ----------------------------------------------------------------- 6

void overfit(Outcome& o) {
  const fs::path root = work_dir() / "overfit";
  app::RunConfig cfg;
  cfg.seed = 6;
  cfg.count = 3;
  cfg.test_fraction = 0.0;
  cfg.deterministic = true;
  cfg.model.c1 = 8;
  cfg.model.c2 = 16;
  cfg.model.gru_width = 16;
  cfg.training.seed = cfg.seed;
  cfg.training.iterations = 1000000;
  cfg.training.checkpoint_every = 50;
  cfg.training.heldout_samples = 1000000;
  cfg.training.stop_below_data = 2e-3;
  cfg.training.time_budget_seconds = 4 * 3600.0;
  cfg.validate();
  train::set_deterministic(true);

  app::prepare_output(root, true);
  const auto gen = app::generate(cfg, root / "data");
  const dataset::DatasetIndex index = dataset::read_index(root / "data");
  app::prepare_output(root / "run", true);
  const auto t0 = Clock::now();
  const train::TrainResult r = app::train_model(cfg, root / "data", root / "run");
  const double train_s = seconds_since(t0);
  const double l_data = r.train_data_loss.value_or(std::nan(""));
  o.check(l_data < 2e-3, "training-set one-step L_data " + fmt("%.4g", l_data) + " after " +
                             std::to_string(r.iterations_run) + " iterations, " +
                             fmt("%.0f s", train_s));

  const std::string id = index.train.front();
  const dataset::CaseData c = dataset::read_case(root / "data" / "cases" / id);
  std::vector<FieldF> truth;
  for (const FieldF& f : c.frames.frames) truth.push_back(dataset::normalize(f, index.stats));
  net::BlastNet model = r.model;
  const auto roll = forecast::rollout(
      model, {truth.begin(), truth.begin() + 10}, c.statics, index.window, 50);
  // Length of the leading run of steps with R2 > 0.9.
  int good_prefix = 0;
  bool run_intact = true;
  double worst = 1.0;
  for (std::size_t k = 0; k < roll.size(); ++k) {
    const double r2 = metrics::r2(roll.normalized[k].values(), truth[10 + k].values());
    if (k < 30) worst = std::min(worst, r2);
    run_intact = run_intact && r2 > 0.9;
    if (run_intact) ++good_prefix;
  }
  o.check(good_prefix >= 30, "50-step rollout on " + id + ": R2 > 0.9 for the first " +
                                 std::to_string(good_prefix) + " steps (min over 30: " +
                                 fmt("%.4f", worst) + ")");
}

// ----------------------------------------------------------------- 7

void speedup(Outcome& o) {
  const fs::path root = work_dir() / "speedup";
  app::RunConfig cfg;
  cfg.seed = 7;
  cfg.count = 1;
  cfg.test_fraction = 0.0;
  app::prepare_output(root, true);
  app::generate(cfg, root / "data");
  net::BlastNet model(net::ModelConfig{});
  net::save_checkpoint(root / "model.ckpt", model);
  app::prepare_output(root / "bench", true);
  const app::BenchResult b =
      app::bench(cfg, root / "data", root / "model.ckpt", "random_layout_000", root / "bench");
  o.check(b.speedup() >= 10.0, "solver " + fmt("%.3f s", b.solver_seconds) + " (" +
                                   std::to_string(b.solver_steps) + " steps), rollout " +
                                   fmt("%.3f s", b.rollout_seconds) + " for " +
                                   std::to_string(b.horizon) + " steps, ratio " +
                                   fmt("%.3f", b.speedup()));
}

// ----------------------------------------------------------------- 8

void damage_suite(Outcome& o) {
  const int mismatches = checks::classify_mismatches(10000, 8);
  o.check(mismatches == 0, "classify vs inequality oracle mismatches: " +
                               std::to_string(mismatches));
  const int violations = checks::monotonicity_violations(10000, 8);
  o.check(violations == 0, "monotonicity violations: " + std::to_string(violations));
  const double tri = checks::triangle_impulse_error(100);
  o.check(tri <= 0.01, "triangular pulse impulse rel err " + fmt("%.3g", tri));

  const GridSpec grid = GridSpec::square(32, 32.0);
  FrameSequence seq{"ambient", grid, 1e-3, {}};
  for (int t = 0; t < 20; ++t) seq.frames.emplace_back(32, 32, 102759.0f);
  const damage::DamageMap map = damage::damage_map(seq, FieldF(32, 32, 0.0f));
  o.check(map.area_percent[0] == 100.0,
          "all-ambient map None share " + fmt("%.1f%%", map.area_percent[0]));
}

// ----------------------------------------------------------------- 9

bool files_identical(const fs::path& a, const fs::path& b, int& compared,
                     std::string& first_diff) {
  bool same = true;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file() || entry.path().filename() == "timing.json") continue;
    const fs::path rel = fs::relative(entry.path(), a);
    ++compared;
    if (!fs::exists(b / rel) || io::read_file(entry.path()) != io::read_file(b / rel)) {
      if (same) first_diff = rel.string();
      same = false;
    }
  }
  return same;
}

void determinism(Outcome& o) {
  const fs::path root = work_dir() / "determinism";
  app::prepare_output(root, true);
  const std::string cli = BLASTCAST_CLI;
  auto pipeline = [&](const fs::path& dir) {
    const std::string d = dir.string();
    const std::string common = " --deterministic --force > " + d + ".log 2>&1";
    const std::string cmds[] = {
        cli + " gen --out " + d + "/data --count 3 --seed 9 --grid 32"
              " --set solver.n_out=80 --set solver.t_end=0.04" + common,
        cli + " train --data " + d + "/data --out " + d + "/run --iterations 50"
              " --set 'model.widths=[8,16]' --set model.gru_width=16"
              " --set train.batch_size=8 --set train.checkpoint_every=25" + common,
        cli + " forecast --data " + d + "/data --model " + d + "/run/final.ckpt"
              " --case random_layout_000 --out " + d + "/forecast --horizon 20" + common,
    };
    for (const auto& cmd : cmds) {
      if (std::system(cmd.c_str()) != 0) return false;
    }
    return true;
  };
  const bool ran = pipeline(root / "a") && pipeline(root / "b");
  o.check(ran, "gen -> train 50 iterations -> forecast 20 steps ran twice");
  if (!ran) return;
  int compared = 0;
  std::string diff;
  const bool same = files_identical(root / "a", root / "b", compared, diff);
  o.check(same && compared > 0, std::to_string(compared) + " artifacts compared" +
                                    (same ? ", all bit-identical" : ", first difference " + diff));
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria = {
      {"solver physics", solver_physics},
      {"Scharr oracle", scharr_oracle},
      {"loss and gradients", loss_gradients},
      {"architecture contracts", architecture},
      {"windowing and rollout prefix", windowing},
      {"overfit analog", overfit},
      {"speedup analog", speedup},
      {"damage suite", damage_suite},
      {"determinism", determinism},
  };
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::atoi(argv[k]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      criteria[k].second(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id,
                criteria[k].first, o.detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
