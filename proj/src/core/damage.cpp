#include "blastcast/damage.hpp"

#include <algorithm>
#include <cmath>

#include "blastcast/error.hpp"

namespace blastcast::damage {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::kNone: return "none";
    case Level::kMinor: return "minor";
    case Level::kModerate: return "moderate";
    case Level::kSevere: return "severe";
    case Level::kTotal: return "total";
  }
  return "unknown";
}

void DamageConfig::validate() const {
  if (!(ambient_pressure > 0.0)) throw ConfigError("ambient pressure must be positive");
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const Criterion& cr = criteria[k];
    if (!(cr.a > 0 && cr.b > 0 && cr.c > 0)) {
      throw ConfigError("damage criteria constants must be positive");
    }
    if (static_cast<std::size_t>(cr.level) != k + 1) {
      throw ConfigError("damage criteria must be listed minor to total");
    }
    if (k > 0) {
      const Criterion& lo = criteria[k - 1];
      if (!(cr.a > lo.a && cr.b > lo.b && cr.c > lo.c)) {
        throw ConfigError("damage criteria are not nested: " +
                          std::string(to_string(cr.level)) + " must exceed " +
                          std::string(to_string(lo.level)) + " in a, b and c");
      }
    }
  }
}

double peak_overpressure(std::span<const double> history,
                         const DamageConfig& cfg) {
  if (history.empty()) throw ContractError("empty pressure history");
  const double peak = *std::max_element(history.begin(), history.end());
  return std::max(0.0, peak - cfg.ambient_pressure) / 1000.0;
}

double positive_impulse(std::span<const double> history, double dt_out,
                        const DamageConfig& cfg,
                        std::optional<std::size_t>* arrival) {
  if (arrival) arrival->reset();
  if (!(dt_out > 0.0)) throw ContractError("dt_out must be positive");
  const double p_i = cfg.ambient_pressure;
  const auto first = std::find_if(history.begin(), history.end(),
                                  [&](double p) { return p > p_i; });
  if (first == history.end()) return 0.0;
  const auto start = static_cast<std::size_t>(first - history.begin());
  if (arrival) *arrival = start;

  std::size_t end = start;
  while (end < history.size() && history[end] > p_i) ++end;
  // Trapezoids over [start-1, end], with the bracketing samples clipped to 0.
  const std::size_t lo = start > 0 ? start - 1 : 0;
  const std::size_t hi = std::min(end, history.size() - 1);
  auto over = [&](std::size_t k) { return std::max(0.0, history[k] - p_i); };
  double area = 0.0;
  for (std::size_t k = lo; k < hi; ++k) {
    area += 0.5 * (over(k) + over(k + 1)) * dt_out;
  }
  return area / 1000.0;
}

PointLoadSummary summarize(std::span<const double> history, double dt_out,
                           const DamageConfig& cfg) {
  PointLoadSummary s;
  s.delta_p_plus = peak_overpressure(history, cfg);
  s.i_plus = positive_impulse(history, dt_out, cfg, &s.arrival_index);
  return s;
}

Level classify(double dp_kpa, double i_kpa_s, const DamageConfig& cfg) {
  Level result = Level::kNone;
  for (const Criterion& cr : cfg.criteria) {
    if (dp_kpa > cr.a && i_kpa_s > cr.b &&
        (dp_kpa - cr.a) * (i_kpa_s - cr.b) >= cr.c) {
      result = cr.level;
    }
  }
  return result;
}

DamageMap damage_map(const FrameSequence& frames, const FieldF& layout,
                     const DamageConfig& cfg) {
  cfg.validate();
  if (frames.frames.empty()) throw ContractError("damage map needs frames");
  for (const FieldF& f : frames.frames) {
    require_same_shape(f, layout, "damage map frame vs layout mask");
  }
  DamageMap map;
  map.grid = frames.grid;
  map.levels = Field<std::uint8_t>(layout.nx(), layout.ny(), kExcludedCell);
  std::array<std::size_t, 5> counts{};
  for (int j = 0; j < layout.ny(); ++j) {
    for (int i = 0; i < layout.nx(); ++i) {
      if (layout(i, j) != 0.0f) continue;
      const std::vector<double> h = frames.history(i, j);
      const PointLoadSummary s = summarize(h, frames.dt_out, cfg);
      const Level level = classify(s.delta_p_plus, s.i_plus, cfg);
      map.levels(i, j) = static_cast<std::uint8_t>(level);
      ++counts[static_cast<std::size_t>(level)];
      ++map.assessed_cells;
    }
  }
  if (map.assessed_cells > 0) {
    for (std::size_t k = 0; k < counts.size(); ++k) {
      map.area_percent[k] = 100.0 * counts[k] / map.assessed_cells;
    }
  }
  return map;
}

nlohmann::ordered_json legend() {
  nlohmann::ordered_json j;
  j["dtype"] = "uint8";
  j["layout"] = "row-major, ny rows x nx columns";
  for (int k = 0; k <= 4; ++k) {
    j["levels"][std::to_string(k)] = to_string(static_cast<Level>(k));
  }
  j["levels"][std::to_string(kExcludedCell)] = "obstacle";
  return j;
}

nlohmann::ordered_json area_report(const DamageMap& map) {
  nlohmann::ordered_json j;
  j["assessed_cells"] = map.assessed_cells;
  for (int k = 0; k <= 4; ++k) {
    j["area_percent"][std::string(to_string(static_cast<Level>(k)))] =
        map.area_percent[k];
  }
  return j;
}

}  // namespace blastcast::damage
