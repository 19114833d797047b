#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "blastcast/field.hpp"

namespace blastcast {

/// Axis-aligned rectangular footprint, meters.
struct Building {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  double height = 0.0;

  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  bool operator==(const Building&) const = default;
};

/// Euclidean gap between two footprints; zero when they touch or overlap.
double clearance(const Building& a, const Building& b);

/// Distance from a point to a footprint; zero inside.
double distance_to(const Building& b, double x, double y);

struct BlastSource {
  double x = 0.0;
  double y = 0.0;
  double z = 3.0;
  double charge_kg = 200.0;

  bool operator==(const BlastSource&) const = default;
};

struct ScenarioCase {
  std::string case_id;
  double domain_x = 64.0;
  double domain_y = 64.0;
  std::vector<Building> buildings;
  BlastSource source;
  std::uint64_t seed = 0;

  bool operator==(const ScenarioCase&) const = default;
};

/// Random-layout generation bounds. Defaults are the urban suite's ranges.
struct LayoutParams {
  double domain_x = 64.0;
  double domain_y = 64.0;
  int min_buildings = 6;
  int max_buildings = 15;
  double min_side = 5.0;
  double max_side = 10.0;
  double min_height = 1.0;
  double max_height = 3.0;
  double clearance = 2.0;
  double boundary_margin = 2.0;
  int attempt_budget = 10000;
  BlastSource source{0.0, 0.0, 3.0, 200.0};
  /// Buildings also keep this clearance from the source position.
  double source_keepout = 2.0;

  void validate() const;
};

enum class SuiteKind { kRandomLayout, kVariableSource, kVariableCharge };

SuiteKind parse_suite_kind(std::string_view name);
std::string_view to_string(SuiteKind kind);

/// Rejection-samples a layout; the same seed always yields the same case.
/// Throws Error(kLayoutInfeasible) naming the seed when the budget runs out.
ScenarioCase generate_random_layout(std::uint64_t seed,
                                    const LayoutParams& params = {});

/// Builds `count` cases of the given kind rooted at `seed`.
std::vector<ScenarioCase> make_scenario_suite(SuiteKind kind, int count,
                                              std::uint64_t seed,
                                              const LayoutParams& params = {});

/// Brute-force validity check; returns an empty string when the case is
/// valid, otherwise a description of the first violated constraint.
std::string check_case(const ScenarioCase& c, const LayoutParams& params = {});

/// 1.0 where a cell center lies inside any footprint, else 0.0.
FieldF rasterize_layout(const ScenarioCase& c, const GridSpec& grid);

/// Distance from the source to each cell center over the domain diagonal.
FieldF distance_field(const BlastSource& source, const GridSpec& grid);

nlohmann::json to_json(const ScenarioCase& c, const GridSpec& grid);
ScenarioCase scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GridSpec& grid);
GridSpec grid_from_json(const nlohmann::json& j);

}  // namespace blastcast
