#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include "blastcast/app.hpp"
#include "blastcast/binary_io.hpp"
#include "blastcast/error.hpp"

namespace blastcast::app {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path case_dir(const fs::path& data, const std::string& id) {
  return data / "cases" / id;
}

void write_snapshot(const fs::path& out, const RunConfig& cfg) {
  io::write_file(out / "config.json", to_json(cfg).dump(2) + "\n");
}

std::vector<FieldF> normalized_frames(const dataset::CaseData& data,
                                      const dataset::NormalizationStats& stats) {
  std::vector<FieldF> out;
  out.reserve(data.frames.size());
  for (const FieldF& f : data.frames.frames) out.push_back(dataset::normalize(f, stats));
  return out;
}

net::BlastNet load_model(const fs::path& path, const dataset::WindowParams& window) {
  net::BlastNet model = net::load_checkpoint(path);
  if (model->config().window != window.window) {
    throw ConfigError("model window " + std::to_string(model->config().window) +
                      " differs from the dataset window " + std::to_string(window.window));
  }
  model->eval();
  return model;
}

std::vector<FieldF> seed_window(const std::vector<FieldF>& frames, long start, int window,
                                const std::string& case_id) {
  if (start + window > static_cast<long>(frames.size())) {
    throw ConfigError("case " + case_id + " has " + std::to_string(frames.size()) +
                      " frames; a seed window at " + std::to_string(start) + " needs " +
                      std::to_string(start + window));
  }
  return {frames.begin() + start, frames.begin() + start + window};
}

}  // namespace

GenResult generate(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  const std::vector<ScenarioCase> suite =
      make_scenario_suite(cfg.suite, cfg.count, cfg.seed, cfg.layout);
  const GridSpec grid = cfg.grid();

  GenResult result;
  result.solver_seconds.resize(suite.size());
  std::vector<FrameSequence> frames(suite.size());
  std::vector<std::exception_ptr> failures(suite.size());
  std::size_t next = 0;
  std::mutex lock;

  auto worker = [&]() {
    for (;;) {
      std::size_t k;
      {
        std::lock_guard<std::mutex> g(lock);
        if (next == suite.size()) return;
        k = next++;
      }
      try {
        const auto t0 = Clock::now();
        frames[k] = euler2d::simulate(suite[k], grid, cfg.solver);
        result.solver_seconds[k] = seconds_since(t0);
        dataset::write_case(case_dir(out, suite[k].case_id),
                            {suite[k], frames[k], dataset::make_statics(suite[k], grid)});
      } catch (...) {
        failures[k] = std::current_exception();
      }
    }
  };
  const int jobs = cfg.deterministic ? 1 : std::min<int>(cfg.jobs, suite.size());
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  for (const auto& c : suite) result.case_ids.push_back(c.case_id);
  dataset::DatasetIndex index;
  index.window = cfg.window;
  dataset::split_cases(result.case_ids, cfg.test_fraction, cfg.seed, index.train, index.test);
  std::vector<FrameSequence> train_frames;
  for (std::size_t k = 0; k < suite.size(); ++k) {
    if (std::find(index.train.begin(), index.train.end(), suite[k].case_id) !=
        index.train.end()) {
      train_frames.push_back(std::move(frames[k]));
    }
  }
  index.stats = dataset::compute_stats(train_frames);
  dataset::write_index(out, index);
  write_snapshot(out, cfg);

  ordered_json timing;
  for (std::size_t k = 0; k < suite.size(); ++k) {
    timing[result.case_ids[k]] = result.solver_seconds[k];
  }
  io::write_file(out / "timing.json", timing.dump(2) + "\n");
  return result;
}

train::TrainResult train_model(const RunConfig& cfg, const fs::path& data,
                               const fs::path& out) {
  fs::create_directories(out);
  const dataset::DatasetIndex index = dataset::read_index(data);
  if (cfg.model.window != index.window.window) {
    throw ConfigError("model.window must equal the dataset window " +
                      std::to_string(index.window.window));
  }
  auto load = [&](const std::vector<std::string>& ids) {
    std::vector<dataset::CaseWindows> cases;
    for (const auto& id : ids) {
      cases.push_back(dataset::make_windows(dataset::read_case(case_dir(data, id)),
                                            index.stats, index.window));
    }
    return cases.empty() ? train::SampleSet{} : train::SampleSet(std::move(cases));
  };
  const train::SampleSet train_set = load(index.train);
  const train::SampleSet heldout = load(index.test);
  write_snapshot(out, cfg);

  const auto t0 = Clock::now();
  const long every = cfg.training.checkpoint_every;
  auto progress = [&](const train::Progress& p) {
    if (p.iteration % every == 0 || p.iteration == 1) {
      std::fprintf(stderr, "iter %ld  L_data %.6g  L_grad %.6g  L_total %.6g  (%.1f s)\n",
                   p.iteration, p.record.data, p.record.grad, p.record.total,
                   seconds_since(t0));
    }
  };
  train::TrainResult r = train::train(net::BlastNet(cfg.model), train_set, heldout,
                                      cfg.training, cfg.loss, out, progress);
  ordered_json summary = {
      {"iterations_run", r.iterations_run},
      {"best_iteration", r.best_iteration},
      {"target_reached", r.target_reached},
  };
  summary["best_heldout_L_data"] = r.best_heldout ? json(*r.best_heldout) : json(nullptr);
  summary["train_L_data"] = r.train_data_loss ? json(*r.train_data_loss) : json(nullptr);
  io::write_file(out / "summary.json", summary.dump(2) + "\n");
  io::write_file(out / "timing.json",
                 ordered_json{{"train_seconds", seconds_since(t0)}}.dump(2) + "\n");
  return r;
}

forecast::RolloutResult run_forecast(const RunConfig& cfg, const fs::path& data,
                                     const fs::path& model_path, const std::string& case_id,
                                     const fs::path& out) {
  fs::create_directories(out);
  const dataset::DatasetIndex index = dataset::read_index(data);
  const dataset::CaseData c = dataset::read_case(case_dir(data, case_id));
  net::BlastNet model = load_model(model_path, index.window);
  const std::vector<FieldF> frames = normalized_frames(c, index.stats);
  const auto seed = seed_window(frames, cfg.start, index.window.window, case_id);

  const forecast::RolloutResult r =
      forecast::rollout(model, seed, c.statics, index.window, cfg.horizon, cfg.start);
  const FrameSequence seq =
      r.denormalized(index.stats, case_id, c.frames.grid, c.frames.dt_out);
  json manifest = {
      {"source_case", case_id},
      {"model", model_path.filename().string()},
      {"seed_frames", {cfg.start, cfg.start + index.window.window - 1}},
      {"first_predicted_frame", cfg.start + index.window.window},
      {"requested_steps", cfg.horizon},
      {"ground_truth_seeded", r.ground_truth_seeded},
  };
  manifest["diverged_at"] = r.diverged_at ? json(*r.diverged_at) : json(nullptr);
  dataset::write_frames(out, seq, manifest);
  write_snapshot(out, cfg);
  io::write_file(out / "timing.json",
                 ordered_json{{"total_seconds", r.total_seconds()},
                              {"step_seconds", r.step_seconds}}
                         .dump(2) +
                     "\n");
  return r;
}

Evaluation evaluate(const RunConfig& cfg, const fs::path& data, const fs::path& model_path,
                    const std::vector<std::string>& case_ids, const fs::path& out) {
  fs::create_directories(out);
  const dataset::DatasetIndex index = dataset::read_index(data);
  net::BlastNet model = load_model(model_path, index.window);
  std::vector<std::string> ids = case_ids;
  if (ids.empty()) ids = index.test.empty() ? index.train : index.test;
  if (ids.empty()) throw ConfigError("no cases to evaluate");

  const int T = index.window.window;
  Evaluation eval;
  std::vector<metrics::StepMetrics> all;
  ordered_json per_case;
  for (const std::string& id : ids) {
    const dataset::CaseData c = dataset::read_case(case_dir(data, id));
    const std::vector<FieldF> frames = normalized_frames(c, index.stats);
    const long available = static_cast<long>(frames.size()) - cfg.start - T;
    if (available < 1) {
      throw ConfigError("case " + id + " is too short for a rollout from frame " +
                        std::to_string(cfg.start));
    }
    const int horizon = static_cast<int>(std::min<long>(cfg.horizon, available));
    const forecast::RolloutResult r = forecast::rollout(
        model, seed_window(frames, cfg.start, T, id), c.statics, index.window, horizon,
        cfg.start);

    CaseEvaluation ce;
    ce.case_id = id;
    for (int k = 0; k < horizon; ++k) {
      if (k < static_cast<int>(r.size())) {
        ce.steps.push_back(metrics::evaluate_step(
            k + 1, r.normalized[k].values(), frames[cfg.start + T + k].values(),
            cfg.mape_threshold));
      } else {
        metrics::StepMetrics m;
        m.step = k + 1;
        m.rmse = std::nan("");
        m.diverged = true;
        ce.steps.push_back(m);
      }
    }
    ce.aggregate = metrics::aggregate(ce.steps, horizon);
    io::write_file(out / ("steps_" + id + ".csv"), metrics::to_csv(ce.steps));
    per_case[id] = metrics::to_json(ce.aggregate, horizon, cfg.mape_threshold);
    all.insert(all.end(), ce.steps.begin(), ce.steps.end());
    eval.cases.push_back(std::move(ce));
  }
  eval.overall = metrics::aggregate(all, static_cast<int>(all.size()));

  ordered_json report;
  report["overall"] = metrics::to_json(eval.overall, cfg.horizon, cfg.mape_threshold);
  report["cases"] = per_case;
  io::write_file(out / "aggregate.json", report.dump(2) + "\n");
  std::string table = metrics::format_table("overall", eval.overall);
  for (const auto& ce : eval.cases) table += metrics::format_table(ce.case_id, ce.aggregate);
  io::write_file(out / "aggregate.txt", table);
  io::write_file(out / "curves.svg", metric_curves_svg(eval));
  write_snapshot(out, cfg);
  return eval;
}

damage::DamageMap damage_assessment(const RunConfig& cfg, const fs::path& data,
                                    const std::string& case_id,
                                    const std::optional<fs::path>& frames_dir,
                                    const fs::path& out) {
  fs::create_directories(out);
  const dataset::CaseData c = dataset::read_case(case_dir(data, case_id));
  const FrameSequence frames = frames_dir ? dataset::read_frames(*frames_dir) : c.frames;
  if (!(frames.grid == c.frames.grid)) {
    throw ContractError("forecast grid does not match case " + case_id);
  }
  const damage::DamageMap map = damage::damage_map(frames, c.statics.layout, cfg.damage);
  io::write_u8(out / "damage.u8", map.levels.values());

  ordered_json report;
  report["case_id"] = case_id;
  report["source"] = frames_dir ? "forecast" : "ground_truth";
  report["grid"] = to_json(map.grid);
  report["raster"] = {{"file", "damage.u8"},
                      {"dtype", "uint8"},
                      {"layout", "row-major, ny rows x nx columns"},
                      {"excluded_value", damage::kExcludedCell}};
  report["legend"] = damage::legend();
  report["area"] = damage::area_report(map);
  io::write_file(out / "damage.json", report.dump(2) + "\n");

  // Binary PPM preview: green to dark red by level, grey obstacles.
  static constexpr std::uint8_t kColors[5][3] = {
      {46, 139, 87}, {255, 215, 0}, {255, 140, 0}, {220, 20, 60}, {110, 0, 0}};
  std::string ppm = "P6\n" + std::to_string(map.grid.nx) + " " +
                    std::to_string(map.grid.ny) + "\n255\n";
  for (int j = map.grid.ny - 1; j >= 0; --j) {
    for (int i = 0; i < map.grid.nx; ++i) {
      const std::uint8_t v = map.levels(i, j);
      const std::uint8_t grey[3] = {128, 128, 128};
      const std::uint8_t* rgb = v == damage::kExcludedCell ? grey : kColors[v];
      ppm.append(reinterpret_cast<const char*>(rgb), 3);
    }
  }
  io::write_file(out / "damage.ppm", ppm);
  write_snapshot(out, cfg);
  return map;
}

BenchResult bench(const RunConfig& cfg, const fs::path& data, const fs::path& model_path,
                  const std::string& case_id, const fs::path& out) {
  fs::create_directories(out);
  const dataset::DatasetIndex index = dataset::read_index(data);
  const dataset::CaseData c = dataset::read_case(case_dir(data, case_id));
  net::BlastNet model = load_model(model_path, index.window);
  const int T = index.window.window;

  BenchResult b;
  b.horizon = cfg.horizon;

  // The solver produces the same span of frames the rollout covers.
  euler2d::SolverConfig solver = cfg.solver;
  solver.n_out = T + cfg.horizon;
  solver.t_end = c.frames.dt_out * (solver.n_out - 1);
  auto t0 = Clock::now();
  const euler2d::ConservedState initial = euler2d::init_state(c.scenario, c.frames.grid, solver);
  const euler2d::SimulationOutput sim = euler2d::run(initial, solver, case_id);
  b.solver_seconds = seconds_since(t0);
  b.solver_steps = sim.steps;

  const std::vector<FieldF> frames = normalized_frames(c, index.stats);
  const auto seed = seed_window(frames, 0, T, case_id);
  t0 = Clock::now();
  const forecast::RolloutResult r =
      forecast::rollout(model, seed, c.statics, index.window, cfg.horizon, 0);
  b.rollout_seconds = seconds_since(t0);
  if (r.diverged_at) {
    std::fprintf(stderr, "warning: rollout diverged at step %d\n", *r.diverged_at);
  }

  ordered_json report = {
      {"case_id", case_id},
      {"grid", to_json(c.frames.grid)},
      {"horizon", cfg.horizon},
      {"solver_seconds", b.solver_seconds},
      {"solver_steps", b.solver_steps},
      {"rollout_seconds", b.rollout_seconds},
      {"speedup", b.speedup()},
  };
  io::write_file(out / "bench.json", report.dump(2) + "\n");
  write_snapshot(out, cfg);
  return b;
}

}  // namespace blastcast::app
