#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "blastcast/field.hpp"
#include "blastcast/frames.hpp"
#include "blastcast/scenario.hpp"

namespace blastcast::dataset {

/// Channel order of every input frame.
enum Channel : int { kPressure = 0, kTime = 1, kDistance = 2, kLayout = 3 };
inline constexpr int kChannels = 4;

/// Global min-max of training pressures, Pa.
struct NormalizationStats {
  double p_min = 0.0;
  double p_max = 1.0;

  double normalize(double p) const { return (p - p_min) / (p_max - p_min); }
  double denormalize(double x) const { return p_min + x * (p_max - p_min); }
};

/// Scans every pressure value. Throws ConfigError for an empty set or a
/// degenerate (constant) range.
NormalizationStats compute_stats(std::span<const FrameSequence> cases);

/// Out-of-range values are mapped linearly, never clipped.
FieldF normalize(const FieldF& field, const NormalizationStats& stats);
FieldF denormalize(const FieldF& field, const NormalizationStats& stats);

/// Static input channels of a case.
struct Statics {
  FieldF distance;
  FieldF layout;
};

/// One persisted simulation: scenario, pressure frames and statics.
struct CaseData {
  ScenarioCase scenario;
  FrameSequence frames;
  Statics statics;
};

struct WindowParams {
  int window = 10;
  /// Time channel of frame j holds j / (nominal_frames - 1).
  int nominal_frames = 290;

  double time_value(long frame_index) const {
    return static_cast<double>(frame_index) / (nominal_frames - 1);
  }
};

/// (T, C, H, W) stacked input channels, contiguous in that order.
struct InputWindow {
  int steps = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;

  float& at(int t, int c, int j, int i) {
    return values[((static_cast<std::size_t>(t) * kChannels + c) * height + j) *
                      width + i];
  }
  float at(int t, int c, int j, int i) const {
    return values[((static_cast<std::size_t>(t) * kChannels + c) * height + j) *
                      width + i];
  }
};

struct Sample {
  InputWindow window;
  FieldF target;
  std::string case_id;
  int target_step_index = 0;
};

/// Writes one frame's four channels into `dst` (C x H x W floats).
void fill_frame_channels(const FieldF& normalized_pressure, long frame_index,
                         const Statics& statics, const WindowParams& params,
                         std::span<float> dst);

/// Lazy sliding-window view over one normalized case: sample k covers
/// frames k..k+T-1 and targets frame k+T.
class CaseWindows {
 public:
  /// `normalized` holds normalized pressure frames. Throws ConfigError
  /// ("sequence too short") unless the case has more than T frames.
  CaseWindows(std::string case_id, std::vector<FieldF> normalized,
              Statics statics, WindowParams params);

  std::size_t size() const { return frames_.size() - params_.window; }
  const std::string& case_id() const { return case_id_; }
  const WindowParams& params() const { return params_; }
  const std::vector<FieldF>& frames() const { return frames_; }
  const Statics& statics() const { return statics_; }
  int height() const { return frames_.front().ny(); }
  int width() const { return frames_.front().nx(); }

  /// dst receives T*C*H*W floats.
  void fill_window(std::size_t k, std::span<float> dst) const;
  /// dst receives H*W floats.
  void fill_target(std::size_t k, std::span<float> dst) const;
  Sample sample(std::size_t k) const;

 private:
  std::string case_id_;
  std::vector<FieldF> frames_;
  Statics statics_;
  WindowParams params_;
};

/// Normalizes a case and slices it into windows.
CaseWindows make_windows(const CaseData& data, const NormalizationStats& stats,
                         const WindowParams& params = {});

/// Materialized list of all samples of a case.
std::vector<Sample> window(const CaseData& data, const NormalizationStats& stats,
                           const WindowParams& params = {});

Statics make_statics(const ScenarioCase& c, const GridSpec& grid);

// Case directory: manifest.json, frames.bin, layout.bin, distance.bin.
void write_frames(const std::filesystem::path& dir, const FrameSequence& seq,
                  nlohmann::json extra = nlohmann::json::object());
FrameSequence read_frames(const std::filesystem::path& dir);
void write_case(const std::filesystem::path& dir, const CaseData& data);
CaseData read_case(const std::filesystem::path& dir);

/// Dataset root index: stats.json with normalization and split lists.
struct DatasetIndex {
  NormalizationStats stats;
  std::vector<std::string> train;
  std::vector<std::string> test;
  WindowParams window;
};

/// Case-level split: floor(n * test_fraction) cases go to the test list,
/// chosen by a seeded shuffle.
void split_cases(const std::vector<std::string>& ids, double test_fraction,
                 std::uint64_t seed, std::vector<std::string>& train,
                 std::vector<std::string>& test);

void write_index(const std::filesystem::path& root, const DatasetIndex& index);
DatasetIndex read_index(const std::filesystem::path& root);

}  // namespace blastcast::dataset
