#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>

#include "blastcast/app.hpp"
#include "blastcast/binary_io.hpp"
#include "blastcast/error.hpp"

extern char** environ;

namespace blastcast::app {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string edges_name(euler2d::EdgeCondition e) {
  return e == euler2d::EdgeCondition::kReflective ? "reflective" : "transmissive";
}

euler2d::EdgeCondition parse_edges(const std::string& s) {
  if (s == "transmissive") return euler2d::EdgeCondition::kTransmissive;
  if (s == "reflective") return euler2d::EdgeCondition::kReflective;
  throw ConfigError("solver.edges must be 'transmissive' or 'reflective', got '" + s + "'");
}

// Reads `key` of `section` into `dst` when present.
template <typename T>
void read(const json& section, const char* name, const char* key, T& dst) {
  if (!section.contains(key)) return;
  try {
    dst = section.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(name) + "." + key + " has the wrong type: " +
                      section.at(key).dump());
  }
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

std::string upper(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

void merge_layer(ordered_json& base, const json& layer, const std::string& origin) {
  if (!layer.is_object()) throw ConfigError(origin + ": expected an object of sections");
  for (const auto& [section, values] : layer.items()) {
    if (!base.contains(section)) {
      throw ConfigError(origin + ": unknown section '" + section + "'");
    }
    if (!values.is_object()) {
      throw ConfigError(origin + ": section '" + section + "' must be an object");
    }
    for (const auto& [key, value] : values.items()) {
      if (!base[section].contains(key)) {
        throw ConfigError(origin + ": unknown key '" + section + "." + key + "'");
      }
      base[section][key] = value;
    }
  }
}

}  // namespace

void RunConfig::validate() const {
  if (jobs < 1) throw ConfigError("run.jobs must be >= 1");
  if (count < 1) throw ConfigError("scenario.count must be >= 1");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ConfigError("scenario.test_fraction must be in [0, 1)");
  }
  layout.validate();
  grid().validate();
  solver.validate();
  if (window.window < 1) throw ConfigError("dataset.window must be >= 1");
  if (window.nominal_frames < 2) throw ConfigError("dataset.nominal_frames must be >= 2");
  if (model.window != window.window) {
    throw ConfigError("model.window must equal dataset.window");
  }
  model.validate();
  loss.validate();
  training.validate();
  if (horizon < 1) throw ConfigError("forecast.horizon must be >= 1");
  if (start < 0) throw ConfigError("forecast.start must be >= 0");
  if (!(mape_threshold >= 0.0)) throw ConfigError("metrics.mape_threshold must be >= 0");
  damage.validate();
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["run"] = {{"seed", c.seed}, {"jobs", c.jobs}, {"deterministic", c.deterministic}};
  const LayoutParams& l = c.layout;
  j["scenario"] = {
      {"suite", std::string(to_string(c.suite))},
      {"count", c.count},
      {"test_fraction", c.test_fraction},
      {"domain", l.domain_x},
      {"min_buildings", l.min_buildings},
      {"max_buildings", l.max_buildings},
      {"min_side", l.min_side},
      {"max_side", l.max_side},
      {"min_height", l.min_height},
      {"max_height", l.max_height},
      {"clearance", l.clearance},
      {"boundary_margin", l.boundary_margin},
      {"attempt_budget", l.attempt_budget},
      {"source_x", l.source.x},
      {"source_y", l.source.y},
      {"source_z", l.source.z},
      {"charge_kg", l.source.charge_kg},
      {"source_keepout", l.source_keepout},
  };
  j["grid"] = {{"n", c.grid_n}};
  const euler2d::SolverConfig& s = c.solver;
  j["solver"] = {
      {"gamma", s.gamma},
      {"cfl", s.cfl},
      {"ambient_pressure", s.ambient_pressure},
      {"ambient_density", s.ambient_density},
      {"t_end", s.t_end},
      {"n_out", s.n_out},
      {"source_radius", s.source_radius},
      {"depth", s.depth},
      {"edges", edges_name(s.edges)},
  };
  j["dataset"] = {{"window", c.window.window}, {"nominal_frames", c.window.nominal_frames}};
  const json model_fields = net::to_json(c.model);
  ordered_json model;
  for (const auto& [k, v] : model_fields.items()) model[k] = v;
  j["model"] = model;
  j["loss"] = {{"lambda1", c.loss.lambda1}, {"lambda2", c.loss.lambda2}};
  const train::TrainConfig& t = c.training;
  j["train"] = {
      {"learning_rate", t.learning_rate},
      {"weight_decay", t.weight_decay},
      {"batch_size", t.batch_size},
      {"iterations", t.iterations},
      {"checkpoint_every", t.checkpoint_every},
      {"heldout_samples", t.heldout_samples},
      {"stop_below_data", t.stop_below_data},
      {"time_budget_seconds", t.time_budget_seconds},
  };
  j["forecast"] = {{"horizon", c.horizon}, {"start", c.start}};
  j["metrics"] = {{"mape_threshold", c.mape_threshold}};
  j["damage"] = {{"ambient_pressure", c.damage.ambient_pressure}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  ordered_json base = to_json(RunConfig{});
  merge_layer(base, j, "config");

  RunConfig c;
  const json& run = base["run"];
  read(run, "run", "seed", c.seed);
  read(run, "run", "jobs", c.jobs);
  read(run, "run", "deterministic", c.deterministic);

  const json& sc = base["scenario"];
  std::string suite;
  read(sc, "scenario", "suite", suite);
  c.suite = parse_suite_kind(suite);
  read(sc, "scenario", "count", c.count);
  read(sc, "scenario", "test_fraction", c.test_fraction);
  LayoutParams& l = c.layout;
  read(sc, "scenario", "domain", l.domain_x);
  l.domain_y = l.domain_x;
  read(sc, "scenario", "min_buildings", l.min_buildings);
  read(sc, "scenario", "max_buildings", l.max_buildings);
  read(sc, "scenario", "min_side", l.min_side);
  read(sc, "scenario", "max_side", l.max_side);
  read(sc, "scenario", "min_height", l.min_height);
  read(sc, "scenario", "max_height", l.max_height);
  read(sc, "scenario", "clearance", l.clearance);
  read(sc, "scenario", "boundary_margin", l.boundary_margin);
  read(sc, "scenario", "attempt_budget", l.attempt_budget);
  read(sc, "scenario", "source_x", l.source.x);
  read(sc, "scenario", "source_y", l.source.y);
  read(sc, "scenario", "source_z", l.source.z);
  read(sc, "scenario", "charge_kg", l.source.charge_kg);
  read(sc, "scenario", "source_keepout", l.source_keepout);

  read(base["grid"], "grid", "n", c.grid_n);

  const json& s = base["solver"];
  read(s, "solver", "gamma", c.solver.gamma);
  read(s, "solver", "cfl", c.solver.cfl);
  read(s, "solver", "ambient_pressure", c.solver.ambient_pressure);
  read(s, "solver", "ambient_density", c.solver.ambient_density);
  read(s, "solver", "t_end", c.solver.t_end);
  read(s, "solver", "n_out", c.solver.n_out);
  read(s, "solver", "source_radius", c.solver.source_radius);
  read(s, "solver", "depth", c.solver.depth);
  std::string edges;
  read(s, "solver", "edges", edges);
  c.solver.edges = parse_edges(edges);

  read(base["dataset"], "dataset", "window", c.window.window);
  read(base["dataset"], "dataset", "nominal_frames", c.window.nominal_frames);

  c.model = net::model_config_from_json(base["model"]);

  read(base["loss"], "loss", "lambda1", c.loss.lambda1);
  read(base["loss"], "loss", "lambda2", c.loss.lambda2);

  const json& t = base["train"];
  read(t, "train", "learning_rate", c.training.learning_rate);
  read(t, "train", "weight_decay", c.training.weight_decay);
  read(t, "train", "batch_size", c.training.batch_size);
  read(t, "train", "iterations", c.training.iterations);
  read(t, "train", "checkpoint_every", c.training.checkpoint_every);
  read(t, "train", "heldout_samples", c.training.heldout_samples);
  read(t, "train", "stop_below_data", c.training.stop_below_data);
  read(t, "train", "time_budget_seconds", c.training.time_budget_seconds);
  c.training.seed = c.seed;

  read(base["forecast"], "forecast", "horizon", c.horizon);
  read(base["forecast"], "forecast", "start", c.start);
  read(base["metrics"], "metrics", "mape_threshold", c.mape_threshold);
  read(base["damage"], "damage", "ambient_pressure", c.damage.ambient_pressure);

  c.validate();
  return c;
}

ordered_json layered_config(const std::optional<fs::path>& file,
                            const std::map<std::string, std::string>& environment,
                            const std::vector<std::string>& overrides) {
  ordered_json merged = to_json(RunConfig{});
  if (file) {
    if (!fs::exists(*file)) {
      throw Error(ErrorKind::kMissingInput, "config file not found: " + file->string());
    }
    json parsed;
    try {
      parsed = json::parse(io::read_file(*file));
    } catch (const json::parse_error& e) {
      throw ConfigError("cannot parse " + file->string() + ": " + e.what());
    }
    merge_layer(merged, parsed, file->string());
  }

  json env_layer = json::object();
  for (const auto& [section, values] : merged.items()) {
    for (const auto& [key, value] : values.items()) {
      const std::string name = "BLASTCAST_" + upper(section) + "_" + upper(key);
      const auto it = environment.find(name);
      if (it != environment.end()) env_layer[section][key] = parse_value(it->second);
    }
  }
  merge_layer(merged, env_layer, "environment");

  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    const auto dot = item.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("override must look like section.key=value: '" + item + "'");
    }
    json layer;
    layer[item.substr(0, dot)][item.substr(dot + 1, eq - dot - 1)] =
        parse_value(item.substr(eq + 1));
    merge_layer(merged, layer, "--set " + item);
  }
  return merged;
}

std::map<std::string, std::string> blastcast_environment() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    if (entry.rfind("BLASTCAST_", 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq != std::string::npos) out[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  return out;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 3;
    case ErrorKind::kContract: return 4;
    case ErrorKind::kLayoutInfeasible: return 5;
    case ErrorKind::kSourceOccluded: return 6;
    case ErrorKind::kSolverFailure: return 7;
    case ErrorKind::kCorruptDataset: return 8;
    case ErrorKind::kMissingInput: return 9;
    case ErrorKind::kDiverged: return 10;
    case ErrorKind::kOutputExists: return 11;
  }
  return 1;
}

void prepare_output(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) {
      throw Error(ErrorKind::kOutputExists,
                  dir.string() + " exists and is not empty; pass --force to overwrite");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

}  // namespace blastcast::app
