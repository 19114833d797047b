#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include <nlohmann/json.hpp>

#include "blastcast/field.hpp"
#include "blastcast/frames.hpp"

namespace blastcast::damage {

enum class Level : std::uint8_t {
  kNone = 0,
  kMinor = 1,
  kModerate = 2,
  kSevere = 3,
  kTotal = 4,
};

inline constexpr std::uint8_t kExcludedCell = 255;

std::string_view to_string(Level level);

/// One P-I hyperbola (dp - a)(i - b) = c with dp in kPa and i in kPa*s.
struct Criterion {
  Level level;
  double a;
  double b;
  double c;
};

struct DamageConfig {
  double ambient_pressure = 102759.0;  // Pa
  std::array<Criterion, 4> criteria{{
      {Level::kMinor, 6.205, 0.517, 3.185},
      {Level::kModerate, 11.721, 0.931, 10.934},
      {Level::kSevere, 24.821, 1.827, 45.161},
      {Level::kTotal, 48.263, 3.068, 147.367},
  }};

  /// Throws ConfigError unless a, b and c increase strictly from one level
  /// to the next, which makes each region contain the next.
  void validate() const;
};

struct PointLoadSummary {
  double delta_p_plus = 0.0;  // kPa
  double i_plus = 0.0;        // kPa*s
  std::optional<std::size_t> arrival_index;
};

/// max_t(P - P_i) floored at zero, kPa.
double peak_overpressure(std::span<const double> history,
                         const DamageConfig& cfg = {});

/// Trapezoidal integral of the clipped overpressure max(P - P_i, 0) over the
/// first positive phase, kPa*s. The phase runs from the first sample above
/// P_i to the next sample at or below it; the bracketing samples at or below
/// ambient contribute zero-valued trapezoid ends.
double positive_impulse(std::span<const double> history, double dt_out,
                        const DamageConfig& cfg = {},
                        std::optional<std::size_t>* arrival = nullptr);

PointLoadSummary summarize(std::span<const double> history, double dt_out,
                           const DamageConfig& cfg = {});

/// Highest level whose hyperbola is reached: dp > a, i > b and
/// (dp - a)(i - b) >= c. Points on a curve count as that level.
Level classify(double dp_kpa, double i_kpa_s, const DamageConfig& cfg = {});

struct DamageMap {
  GridSpec grid;
  /// Level per cell, kExcludedCell for obstacle cells.
  Field<std::uint8_t> levels;
  /// Percent of non-obstacle cells per level, indexed by Level.
  std::array<double, 5> area_percent{};
  std::size_t assessed_cells = 0;
};

/// `frames` must hold absolute pressures in Pa; `layout` is the obstacle
/// mask (nonzero = obstacle).
DamageMap damage_map(const FrameSequence& frames, const FieldF& layout,
                     const DamageConfig& cfg = {});

nlohmann::ordered_json legend();
nlohmann::ordered_json area_report(const DamageMap& map);

}  // namespace blastcast::damage
