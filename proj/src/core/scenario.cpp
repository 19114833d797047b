#include "blastcast/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "blastcast/rng.hpp"

namespace blastcast {

GridSpec GridSpec::square(int n, double extent) {
  return GridSpec{n, n, extent / n, extent / n};
}

void GridSpec::validate() const {
  if (nx < 16 || ny < 16) {
    throw ConfigError("grid must have at least 16 cells per axis, got " +
                      std::to_string(nx) + "x" + std::to_string(ny));
  }
  if (!(dx > 0.0) || !(dy > 0.0)) {
    throw ConfigError("grid spacing must be positive");
  }
}

double clearance(const Building& a, const Building& b) {
  const double gx = std::max({0.0, a.x_min - b.x_max, b.x_min - a.x_max});
  const double gy = std::max({0.0, a.y_min - b.y_max, b.y_min - a.y_max});
  return std::hypot(gx, gy);
}

double distance_to(const Building& b, double x, double y) {
  const double gx = std::max({0.0, b.x_min - x, x - b.x_max});
  const double gy = std::max({0.0, b.y_min - y, y - b.y_max});
  return std::hypot(gx, gy);
}

void LayoutParams::validate() const {
  if (!(domain_x > 0.0 && domain_y > 0.0)) {
    throw ConfigError("layout domain must be positive");
  }
  if (min_buildings < 0 || max_buildings < min_buildings) {
    throw ConfigError("invalid building count range");
  }
  if (!(min_side > 0.0 && max_side >= min_side)) {
    throw ConfigError("invalid building side range");
  }
  if (!(min_height > 0.0 && max_height >= min_height)) {
    throw ConfigError("invalid building height range");
  }
  if (clearance < 0.0 || boundary_margin < 0.0 || attempt_budget <= 0) {
    throw ConfigError("invalid clearance, margin or attempt budget");
  }
  if (2.0 * boundary_margin + max_side > std::min(domain_x, domain_y)) {
    throw ConfigError("largest building does not fit inside the margins");
  }
  if (!(source.charge_kg > 0.0)) {
    throw ConfigError("charge must be positive");
  }
}

SuiteKind parse_suite_kind(std::string_view name) {
  if (name == "random_layout") return SuiteKind::kRandomLayout;
  if (name == "variable_source") return SuiteKind::kVariableSource;
  if (name == "variable_charge") return SuiteKind::kVariableCharge;
  throw ConfigError("unknown suite kind '" + std::string(name) + "'");
}

std::string_view to_string(SuiteKind kind) {
  switch (kind) {
    case SuiteKind::kRandomLayout: return "random_layout";
    case SuiteKind::kVariableSource: return "variable_source";
    case SuiteKind::kVariableCharge: return "variable_charge";
  }
  return "unknown";
}

ScenarioCase generate_random_layout(std::uint64_t seed,
                                    const LayoutParams& params) {
  params.validate();
  Rng rng(seed);

  ScenarioCase c;
  c.domain_x = params.domain_x;
  c.domain_y = params.domain_y;
  c.source = params.source;
  c.seed = seed;

  const auto count = static_cast<std::size_t>(
      uniform_int(rng, params.min_buildings, params.max_buildings));
  int attempts = 0;
  while (c.buildings.size() < count) {
    if (attempts++ >= params.attempt_budget) {
      throw Error(ErrorKind::kLayoutInfeasible,
                  "layout infeasible for seed " + std::to_string(seed) +
                      ": placed " + std::to_string(c.buildings.size()) +
                      " of " + std::to_string(count) + " buildings in " +
                      std::to_string(params.attempt_budget) + " attempts");
    }
    const double w = uniform(rng, params.min_side, params.max_side);
    const double h = uniform(rng, params.min_side, params.max_side);
    const double height = uniform(rng, params.min_height, params.max_height);
    const double m = params.boundary_margin;
    Building b;
    b.x_min = uniform(rng, m, params.domain_x - m - w);
    b.y_min = uniform(rng, m, params.domain_y - m - h);
    b.x_max = b.x_min + w;
    b.y_max = b.y_min + h;
    b.height = height;

    if (distance_to(b, params.source.x, params.source.y) <
        params.source_keepout) {
      continue;
    }
    const bool clear = std::all_of(
        c.buildings.begin(), c.buildings.end(), [&](const Building& other) {
          return clearance(b, other) >= params.clearance;
        });
    if (clear) c.buildings.push_back(b);
  }
  return c;
}

namespace {

std::string case_name(SuiteKind kind, int index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03d", to_string(kind).data(), index);
  return buf;
}

/// Lattice points at cell centers of a 1 m raster that keep the required
/// clearance from every footprint.
std::vector<std::pair<double, double>> free_positions(
    const std::vector<Building>& buildings, const LayoutParams& params) {
  std::vector<std::pair<double, double>> out;
  const int nx = static_cast<int>(std::floor(params.domain_x));
  const int ny = static_cast<int>(std::floor(params.domain_y));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = i + 0.5;
      const double y = j + 0.5;
      const bool ok = std::all_of(
          buildings.begin(), buildings.end(), [&](const Building& b) {
            return distance_to(b, x, y) >= params.clearance;
          });
      if (ok) out.emplace_back(x, y);
    }
  }
  return out;
}

}  // namespace

std::vector<ScenarioCase> make_scenario_suite(SuiteKind kind, int count,
                                              std::uint64_t seed,
                                              const LayoutParams& params) {
  if (count < 1) throw ConfigError("suite count must be >= 1");
  params.validate();
  std::vector<ScenarioCase> suite;
  suite.reserve(count);

  switch (kind) {
    case SuiteKind::kRandomLayout: {
      for (int i = 0; i < count; ++i) {
        ScenarioCase c = generate_random_layout(derive_seed(seed, i), params);
        c.case_id = case_name(kind, i);
        suite.push_back(std::move(c));
      }
      break;
    }
    case SuiteKind::kVariableSource: {
      LayoutParams layout_params = params;
      layout_params.source_keepout = 0.0;
      const ScenarioCase base =
          generate_random_layout(derive_seed(seed, 0), layout_params);
      const auto candidates = free_positions(base.buildings, params);
      if (candidates.empty()) {
        throw Error(ErrorKind::kLayoutInfeasible,
                    "no free source position for seed " +
                        std::to_string(seed));
      }
      for (int i = 0; i < count; ++i) {
        ScenarioCase c = base;
        c.case_id = case_name(kind, i);
        c.seed = derive_seed(seed, i + 1);
        Rng rng(c.seed);
        const auto pick = candidates[static_cast<std::size_t>(uniform_int(
            rng, 0, static_cast<std::int64_t>(candidates.size()) - 1))];
        c.source.x = pick.first;
        c.source.y = pick.second;
        c.source.charge_kg = params.source.charge_kg;
        suite.push_back(std::move(c));
      }
      break;
    }
    case SuiteKind::kVariableCharge: {
      LayoutParams layout_params = params;
      layout_params.source.x = params.domain_x / 2.0;
      layout_params.source.y = params.domain_y / 2.0;
      const ScenarioCase base =
          generate_random_layout(derive_seed(seed, 0), layout_params);
      for (int i = 0; i < count; ++i) {
        ScenarioCase c = base;
        c.case_id = case_name(kind, i);
        c.source.charge_kg = 50.0 + 10.0 * i;
        suite.push_back(std::move(c));
      }
      break;
    }
  }
  return suite;
}

std::string check_case(const ScenarioCase& c, const LayoutParams& params) {
  const auto n = static_cast<int>(c.buildings.size());
  if (n < params.min_buildings || n > params.max_buildings) {
    return "building count " + std::to_string(n) + " out of range";
  }
  constexpr double kTol = 1e-9;
  for (std::size_t k = 0; k < c.buildings.size(); ++k) {
    const Building& b = c.buildings[k];
    const double w = b.x_max - b.x_min;
    const double h = b.y_max - b.y_min;
    if (!(w > 0 && h > 0)) return "degenerate building " + std::to_string(k);
    if (w < params.min_side - kTol || w > params.max_side + kTol ||
        h < params.min_side - kTol || h > params.max_side + kTol) {
      return "building " + std::to_string(k) + " side out of range";
    }
    if (b.height < params.min_height || b.height > params.max_height) {
      return "building " + std::to_string(k) + " height out of range";
    }
    const double m = params.boundary_margin - kTol;
    if (b.x_min < m || b.y_min < m || c.domain_x - b.x_max < m ||
        c.domain_y - b.y_max < m) {
      return "building " + std::to_string(k) + " violates boundary margin";
    }
    for (std::size_t l = k + 1; l < c.buildings.size(); ++l) {
      if (clearance(b, c.buildings[l]) < params.clearance - kTol) {
        return "buildings " + std::to_string(k) + " and " + std::to_string(l) +
               " closer than clearance";
      }
    }
    if (b.contains(c.source.x, c.source.y)) {
      return "source inside building " + std::to_string(k);
    }
  }
  if (c.source.x < 0 || c.source.x > c.domain_x || c.source.y < 0 ||
      c.source.y > c.domain_y) {
    return "source outside domain";
  }
  if (!(c.source.charge_kg > 0)) return "non-positive charge";
  return {};
}

FieldF rasterize_layout(const ScenarioCase& c, const GridSpec& grid) {
  FieldF mask(grid.nx, grid.ny, 0.0f);
  for (int j = 0; j < grid.ny; ++j) {
    const double y = grid.center_y(j);
    for (int i = 0; i < grid.nx; ++i) {
      const double x = grid.center_x(i);
      for (const Building& b : c.buildings) {
        if (b.contains(x, y)) {
          mask(i, j) = 1.0f;
          break;
        }
      }
    }
  }
  return mask;
}

FieldF distance_field(const BlastSource& source, const GridSpec& grid) {
  FieldF out(grid.nx, grid.ny);
  const double diagonal = std::hypot(grid.width(), grid.height());
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double d =
          std::hypot(grid.center_x(i) - source.x, grid.center_y(j) - source.y);
      out(i, j) = static_cast<float>(d / diagonal);
    }
  }
  return out;
}

nlohmann::json to_json(const GridSpec& grid) {
  return {{"nx", grid.nx}, {"ny", grid.ny}, {"dx", grid.dx}, {"dy", grid.dy}};
}

GridSpec grid_from_json(const nlohmann::json& j) {
  GridSpec g;
  g.nx = j.at("nx").get<int>();
  g.ny = j.at("ny").get<int>();
  g.dx = j.at("dx").get<double>();
  g.dy = j.at("dy").get<double>();
  return g;
}

nlohmann::json to_json(const ScenarioCase& c, const GridSpec& grid) {
  nlohmann::json buildings = nlohmann::json::array();
  for (const Building& b : c.buildings) {
    buildings.push_back({{"x_min", b.x_min},
                         {"y_min", b.y_min},
                         {"x_max", b.x_max},
                         {"y_max", b.y_max},
                         {"height", b.height}});
  }
  return {{"case_id", c.case_id},
          {"domain", {c.domain_x, c.domain_y}},
          {"grid", to_json(grid)},
          {"buildings", buildings},
          {"source",
           {{"x", c.source.x},
            {"y", c.source.y},
            {"z", c.source.z},
            {"charge_kg", c.source.charge_kg}}},
          {"seed", c.seed}};
}

ScenarioCase scenario_from_json(const nlohmann::json& j) {
  ScenarioCase c;
  c.case_id = j.at("case_id").get<std::string>();
  c.domain_x = j.at("domain").at(0).get<double>();
  c.domain_y = j.at("domain").at(1).get<double>();
  for (const auto& b : j.at("buildings")) {
    c.buildings.push_back({b.at("x_min").get<double>(),
                           b.at("y_min").get<double>(),
                           b.at("x_max").get<double>(),
                           b.at("y_max").get<double>(),
                           b.at("height").get<double>()});
  }
  const auto& s = j.at("source");
  c.source = {s.at("x").get<double>(), s.at("y").get<double>(),
              s.at("z").get<double>(), s.at("charge_kg").get<double>()};
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace blastcast
