#include "blastcast/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blastcast/binary_io.hpp"
#include "blastcast/rng.hpp"

namespace blastcast::dataset {

namespace fs = std::filesystem;

NormalizationStats compute_stats(std::span<const FrameSequence> cases) {
  if (cases.empty()) throw ConfigError("normalization needs at least one case");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const FrameSequence& seq : cases) {
    for (const FieldF& f : seq.frames) {
      for (float v : f.values()) {
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
      }
    }
  }
  if (!(hi > lo)) {
    throw ConfigError("degenerate normalization: p_min == p_max");
  }
  return {lo, hi};
}

FieldF normalize(const FieldF& field, const NormalizationStats& stats) {
  FieldF out(field.nx(), field.ny());
  for (std::size_t k = 0; k < field.size(); ++k) {
    out[k] = static_cast<float>(stats.normalize(field[k]));
  }
  return out;
}

FieldF denormalize(const FieldF& field, const NormalizationStats& stats) {
  FieldF out(field.nx(), field.ny());
  for (std::size_t k = 0; k < field.size(); ++k) {
    out[k] = static_cast<float>(stats.denormalize(field[k]));
  }
  return out;
}

void fill_frame_channels(const FieldF& normalized_pressure, long frame_index,
                         const Statics& statics, const WindowParams& params,
                         std::span<float> dst) {
  const std::size_t plane = normalized_pressure.size();
  if (dst.size() != plane * kChannels) {
    throw ContractError("frame channel buffer has wrong size");
  }
  require_same_shape(normalized_pressure, statics.distance, "distance channel");
  require_same_shape(normalized_pressure, statics.layout, "layout channel");
  const auto time = static_cast<float>(params.time_value(frame_index));
  std::copy_n(normalized_pressure.values().begin(), plane,
              dst.begin() + kPressure * plane);
  std::fill_n(dst.begin() + kTime * plane, plane, time);
  std::copy_n(statics.distance.values().begin(), plane,
              dst.begin() + kDistance * plane);
  std::copy_n(statics.layout.values().begin(), plane,
              dst.begin() + kLayout * plane);
}

CaseWindows::CaseWindows(std::string case_id, std::vector<FieldF> normalized,
                         Statics statics, WindowParams params)
    : case_id_(std::move(case_id)),
      frames_(std::move(normalized)),
      statics_(std::move(statics)),
      params_(params) {
  if (params_.window < 1) throw ConfigError("window length must be >= 1");
  if (params_.nominal_frames < 2) throw ConfigError("nominal_frames must be >= 2");
  if (frames_.size() <= static_cast<std::size_t>(params_.window)) {
    throw ConfigError("sequence too short: case '" + case_id_ + "' has " +
                      std::to_string(frames_.size()) + " frames, window needs " +
                      std::to_string(params_.window + 1));
  }
}

void CaseWindows::fill_window(std::size_t k, std::span<float> dst) const {
  const std::size_t plane = frames_.front().size();
  const std::size_t per_frame = plane * kChannels;
  if (k >= size()) throw ContractError("window index out of range");
  if (dst.size() != per_frame * params_.window) {
    throw ContractError("window buffer has wrong size");
  }
  for (int t = 0; t < params_.window; ++t) {
    fill_frame_channels(frames_[k + t], static_cast<long>(k + t), statics_,
                        params_, dst.subspan(t * per_frame, per_frame));
  }
}

void CaseWindows::fill_target(std::size_t k, std::span<float> dst) const {
  if (k >= size()) throw ContractError("window index out of range");
  const FieldF& target = frames_[k + params_.window];
  if (dst.size() != target.size()) {
    throw ContractError("target buffer has wrong size");
  }
  std::copy(target.values().begin(), target.values().end(), dst.begin());
}

Sample CaseWindows::sample(std::size_t k) const {
  Sample s;
  s.case_id = case_id_;
  s.target_step_index = static_cast<int>(k) + params_.window;
  s.window.steps = params_.window;
  s.window.height = height();
  s.window.width = width();
  s.window.values.resize(static_cast<std::size_t>(params_.window) * kChannels *
                         height() * width());
  fill_window(k, s.window.values);
  s.target = frames_[k + params_.window];
  return s;
}

CaseWindows make_windows(const CaseData& data, const NormalizationStats& stats,
                         const WindowParams& params) {
  std::vector<FieldF> normalized;
  normalized.reserve(data.frames.size());
  for (const FieldF& f : data.frames.frames) {
    normalized.push_back(normalize(f, stats));
  }
  return CaseWindows(data.frames.case_id, std::move(normalized), data.statics,
                     params);
}

std::vector<Sample> window(const CaseData& data, const NormalizationStats& stats,
                           const WindowParams& params) {
  const CaseWindows windows = make_windows(data, stats, params);
  std::vector<Sample> out;
  out.reserve(windows.size());
  for (std::size_t k = 0; k < windows.size(); ++k) {
    out.push_back(windows.sample(k));
  }
  return out;
}

Statics make_statics(const ScenarioCase& c, const GridSpec& grid) {
  return {distance_field(c.source, grid), rasterize_layout(c, grid)};
}

void write_frames(const fs::path& dir, const FrameSequence& seq,
                  nlohmann::json extra) {
  fs::create_directories(dir);
  nlohmann::json manifest = {
      {"case_id", seq.case_id},
      {"grid", to_json(seq.grid)},
      {"dt_out", seq.dt_out},
      {"n_frames", seq.frames.size()},
      {"units", "Pa"},
      {"dtype", "float32"},
      {"byte_order", "little"},
      {"layout", "frame-major, row-major, ny rows x nx columns"},
  };
  manifest.update(extra);

  std::vector<float> payload;
  payload.reserve(seq.frames.size() * seq.grid.cells());
  for (const FieldF& f : seq.frames) {
    if (f.nx() != seq.grid.nx || f.ny() != seq.grid.ny) {
      throw ContractError("frame shape does not match sequence grid");
    }
    payload.insert(payload.end(), f.values().begin(), f.values().end());
  }
  io::write_f32(dir / "frames.bin", payload);
  io::write_json(dir / "manifest.json", manifest);
}

namespace {

nlohmann::json read_manifest(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) {
    throw Error(ErrorKind::kMissingInput,
                "no manifest.json in " + dir.string());
  }
  nlohmann::json m = io::read_json(dir / "manifest.json");
  try {
    if (m.at("dtype") != "float32" || m.at("byte_order") != "little") {
      throw CorruptDatasetError(dir.string() +
                                ": unsupported dtype or byte order marker");
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptDatasetError(dir.string() + "/manifest.json: " + e.what());
  }
  return m;
}

FieldF read_plane(const fs::path& path, const GridSpec& grid) {
  std::vector<float> v = io::read_f32(path, grid.cells());
  FieldF f(grid.nx, grid.ny);
  std::copy(v.begin(), v.end(), f.values().begin());
  return f;
}

}  // namespace

FrameSequence read_frames(const fs::path& dir) {
  const nlohmann::json m = read_manifest(dir);
  FrameSequence seq;
  std::size_t n = 0;
  try {
    seq.case_id = m.at("case_id").get<std::string>();
    seq.grid = grid_from_json(m.at("grid"));
    seq.dt_out = m.at("dt_out").get<double>();
    n = m.at("n_frames").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptDatasetError(dir.string() + "/manifest.json: " + e.what());
  }
  const std::size_t plane = seq.grid.cells();
  const std::vector<float> payload = io::read_f32(dir / "frames.bin", n * plane);
  seq.frames.reserve(n);
  for (std::size_t f = 0; f < n; ++f) {
    FieldF frame(seq.grid.nx, seq.grid.ny);
    std::copy_n(payload.begin() + f * plane, plane, frame.values().begin());
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

void write_case(const fs::path& dir, const CaseData& data) {
  write_frames(dir, data.frames,
               {{"scenario", to_json(data.scenario, data.frames.grid)}});
  io::write_f32(dir / "layout.bin", data.statics.layout.values());
  io::write_f32(dir / "distance.bin", data.statics.distance.values());
}

CaseData read_case(const fs::path& dir) {
  CaseData data;
  data.frames = read_frames(dir);
  const nlohmann::json m = read_manifest(dir);
  try {
    data.scenario = scenario_from_json(m.at("scenario"));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptDatasetError(dir.string() + "/manifest.json: " + e.what());
  }
  data.statics.layout = read_plane(dir / "layout.bin", data.frames.grid);
  data.statics.distance = read_plane(dir / "distance.bin", data.frames.grid);
  return data;
}

void split_cases(const std::vector<std::string>& ids, double test_fraction,
                 std::uint64_t seed, std::vector<std::string>& train,
                 std::vector<std::string>& test) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test fraction must lie in [0, 1)");
  }
  std::vector<std::string> order = ids;
  Rng rng(derive_seed(seed, 0x5711));
  shuffle(order, rng);
  const auto n_test =
      static_cast<std::size_t>(std::floor(ids.size() * test_fraction));
  train.assign(order.begin(), order.end() - n_test);
  test.assign(order.end() - n_test, order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

void write_index(const fs::path& root, const DatasetIndex& index) {
  fs::create_directories(root);
  io::write_json(root / "stats.json",
                 {{"p_min", index.stats.p_min},
                  {"p_max", index.stats.p_max},
                  {"window", index.window.window},
                  {"nominal_frames", index.window.nominal_frames},
                  {"train", index.train},
                  {"test", index.test}});
}

DatasetIndex read_index(const fs::path& root) {
  if (!fs::exists(root / "stats.json")) {
    throw Error(ErrorKind::kMissingInput, "no stats.json in " + root.string());
  }
  const nlohmann::json j = io::read_json(root / "stats.json");
  DatasetIndex index;
  try {
    index.stats.p_min = j.at("p_min").get<double>();
    index.stats.p_max = j.at("p_max").get<double>();
    index.window.window = j.at("window").get<int>();
    index.window.nominal_frames = j.at("nominal_frames").get<int>();
    index.train = j.at("train").get<std::vector<std::string>>();
    index.test = j.at("test").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptDatasetError(root.string() + "/stats.json: " + e.what());
  }
  if (!(index.stats.p_max > index.stats.p_min)) {
    throw CorruptDatasetError("stats.json holds a degenerate pressure range");
  }
  return index;
}

}  // namespace blastcast::dataset
