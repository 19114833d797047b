#include "blastcast/euler2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace blastcast {

std::vector<double> FrameSequence::history(int i, int j) const {
  std::vector<double> out;
  out.reserve(frames.size());
  for (const FieldF& f : frames) out.push_back(f(i, j));
  return out;
}

}  // namespace blastcast

namespace blastcast::euler2d {

void SolverConfig::validate() const {
  if (!(gamma > 1.0)) throw ConfigError("gamma must exceed 1");
  if (!(cfl > 0.0 && cfl < 1.0)) throw ConfigError("cfl must lie in (0, 1)");
  if (!(ambient_pressure > 0.0 && ambient_density > 0.0)) {
    throw ConfigError("ambient pressure and density must be positive");
  }
  if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
  if (n_out < 2) throw ConfigError("n_out must be at least 2");
  if (!(source_radius > 0.0 && depth > 0.0)) {
    throw ConfigError("source radius and depth must be positive");
  }
}

double released_energy(double charge_kg, const DetonationConstants& k) {
  return charge_kg * k.specific_energy() * 1.0e6;
}

ConservedState ConservedState::uniform(const GridSpec& grid, double rho,
                                       double p, double gamma) {
  ConservedState s;
  s.grid = grid;
  s.rho = FieldD(grid.nx, grid.ny, rho);
  s.rho_u = FieldD(grid.nx, grid.ny, 0.0);
  s.rho_v = FieldD(grid.nx, grid.ny, 0.0);
  s.energy = FieldD(grid.nx, grid.ny, p / (gamma - 1.0));
  s.solid = Field<std::uint8_t>(grid.nx, grid.ny, 0);
  return s;
}

double ConservedState::total_mass() const {
  double sum = 0.0;
  for (std::size_t k = 0; k < rho.size(); ++k) {
    if (!solid[k]) sum += rho[k];
  }
  return sum * grid.dx * grid.dy;
}

double ConservedState::total_energy() const {
  double sum = 0.0;
  for (std::size_t k = 0; k < energy.size(); ++k) {
    if (!solid[k]) sum += energy[k];
  }
  return sum * grid.dx * grid.dy;
}

ConservedState init_state(const ScenarioCase& c, const GridSpec& grid,
                          const SolverConfig& cfg,
                          const DetonationConstants& k) {
  grid.validate();
  cfg.validate();
  if (c.source.charge_kg < 0.0) throw ConfigError("negative charge");

  ConservedState s = ConservedState::uniform(grid, cfg.ambient_density,
                                             cfg.ambient_pressure, cfg.gamma);
  const FieldF mask = rasterize_layout(c, grid);
  for (std::size_t n = 0; n < mask.size(); ++n) {
    s.solid[n] = mask[n] > 0.5f ? 1 : 0;
  }

  std::vector<std::size_t> disk;
  const double r2 = cfg.source_radius * cfg.source_radius;
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double ddx = grid.center_x(i) - c.source.x;
      const double ddy = grid.center_y(j) - c.source.y;
      if (ddx * ddx + ddy * ddy <= r2 && !s.is_solid(i, j)) {
        disk.push_back(s.rho.index(i, j));
      }
    }
  }
  if (disk.empty()) {
    // Disk narrower than a cell: fall back to the cell holding the source.
    const int i = std::clamp(static_cast<int>(c.source.x / grid.dx), 0,
                             grid.nx - 1);
    const int j = std::clamp(static_cast<int>(c.source.y / grid.dy), 0,
                             grid.ny - 1);
    if (s.is_solid(i, j)) {
      throw Error(ErrorKind::kSourceOccluded,
                  "source occluded: energy disk of case '" + c.case_id +
                      "' lies entirely inside obstacles");
    }
    disk.push_back(s.rho.index(i, j));
  }

  const double volume = disk.size() * grid.dx * grid.dy * cfg.depth;
  const double density = released_energy(c.source.charge_kg, k) / volume;
  for (std::size_t n : disk) s.energy[n] += density;
  return s;
}

FieldD eos_pressure(const ConservedState& state, double gamma) {
  FieldD p(state.grid.nx, state.grid.ny);
  for (int j = 0; j < state.grid.ny; ++j) {
    for (int i = 0; i < state.grid.nx; ++i) {
      const double rho = state.rho(i, j);
      const double mu = state.rho_u(i, j);
      const double mv = state.rho_v(i, j);
      const double value =
          (gamma - 1.0) * (state.energy(i, j) - 0.5 * (mu * mu + mv * mv) / rho);
      if (!(value > 0.0) || !std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-positive pressure " << value << " at cell (" << i << ", "
            << j << ")";
        throw SolverError(msg.str());
      }
      p(i, j) = value;
    }
  }
  return p;
}

double stable_dt(const ConservedState& state, const SolverConfig& cfg) {
  const double h = std::min(state.grid.dx, state.grid.dy);
  double fastest = 0.0;
  for (std::size_t n = 0; n < state.rho.size(); ++n) {
    if (state.solid[n]) continue;
    const double rho = state.rho[n];
    const double u = state.rho_u[n] / rho;
    const double v = state.rho_v[n] / rho;
    const double p =
        (cfg.gamma - 1.0) * (state.energy[n] - 0.5 * rho * (u * u + v * v));
    const double speed = std::abs(u) + std::abs(v) + std::sqrt(cfg.gamma * p / rho);
    if (!std::isfinite(speed)) {
      const int i = static_cast<int>(n % state.grid.nx);
      const int j = static_cast<int>(n / state.grid.nx);
      std::ostringstream msg;
      msg << "non-finite wave speed at cell (" << i << ", " << j << ")";
      throw SolverError(msg.str());
    }
    fastest = std::max(fastest, speed);
  }
  if (fastest <= 0.0) return std::numeric_limits<double>::infinity();
  return cfg.cfl * h / fastest;
}

namespace {

/// Face-local state with momentum split into normal and tangential parts.
struct FaceState {
  double rho;
  double m_n;
  double m_t;
  double e;
  double u_n;
  double u_t;
  double p;
  double c;

  FaceState mirrored() const {
    FaceState s = *this;
    s.m_n = -m_n;
    s.u_n = -u_n;
    return s;
  }
};

struct Flux {
  double mass = 0.0;
  double mom_n = 0.0;
  double mom_t = 0.0;
  double energy = 0.0;
};

Flux rusanov(const FaceState& l, const FaceState& r) {
  const double s = std::max(std::abs(l.u_n) + l.c, std::abs(r.u_n) + r.c);
  Flux f;
  f.mass = 0.5 * ((l.m_n + r.m_n) - s * (r.rho - l.rho));
  f.mom_n = 0.5 * ((l.m_n * l.u_n + l.p + (r.m_n * r.u_n + r.p)) -
                   s * (r.m_n - l.m_n));
  f.mom_t = 0.5 * ((l.m_n * l.u_t + r.m_n * r.u_t) - s * (r.m_t - l.m_t));
  f.energy = 0.5 * ((l.u_n * (l.e + l.p) + r.u_n * (r.e + r.p)) -
                    s * (r.e - l.e));
  return f;
}

struct Primitives {
  std::vector<double> u, v, p, c;
};

Primitives primitives(const ConservedState& s, double gamma) {
  const std::size_t n = s.rho.size();
  Primitives q{std::vector<double>(n), std::vector<double>(n),
               std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const double rho = s.rho[k];
    q.u[k] = s.rho_u[k] / rho;
    q.v[k] = s.rho_v[k] / rho;
    q.p[k] = (gamma - 1.0) *
             (s.energy[k] - 0.5 * (s.rho_u[k] * s.rho_u[k] +
                                   s.rho_v[k] * s.rho_v[k]) / rho);
    q.c[k] = std::sqrt(std::max(gamma * q.p[k] / rho, 0.0));
  }
  return q;
}

FaceState x_state(const ConservedState& s, const Primitives& q, std::size_t k) {
  return {s.rho[k], s.rho_u[k], s.rho_v[k], s.energy[k],
          q.u[k],   q.v[k],     q.p[k],     q.c[k]};
}

FaceState y_state(const ConservedState& s, const Primitives& q, std::size_t k) {
  return {s.rho[k], s.rho_v[k], s.rho_u[k], s.energy[k],
          q.v[k],   q.u[k],     q.p[k],     q.c[k]};
}

FaceState edge_ghost(const FaceState& inside, EdgeCondition edges) {
  return edges == EdgeCondition::kReflective ? inside.mirrored() : inside;
}

}  // namespace

ConservedState step(const ConservedState& state, double dt,
                    const SolverConfig& cfg, long step_index) {
  const GridSpec& g = state.grid;
  const int nx = g.nx;
  const int ny = g.ny;
  const Primitives q = primitives(state, cfg.gamma);

  // x-faces: face (i, j) separates cells (i-1, j) and (i, j).
  std::vector<Flux> fx(static_cast<std::size_t>(nx + 1) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const bool left_fluid = i > 0 && !state.is_solid(i - 1, j);
      const bool right_fluid = i < nx && !state.is_solid(i, j);
      if (!left_fluid && !right_fluid) continue;
      FaceState l, r;
      if (left_fluid) l = x_state(state, q, state.rho.index(i - 1, j));
      if (right_fluid) r = x_state(state, q, state.rho.index(i, j));
      if (!left_fluid) l = (i == 0) ? edge_ghost(r, cfg.edges) : r.mirrored();
      if (!right_fluid) r = (i == nx) ? edge_ghost(l, cfg.edges) : l.mirrored();
      fx[static_cast<std::size_t>(j) * (nx + 1) + i] = rusanov(l, r);
    }
  }

  // y-faces: face (i, j) separates cells (i, j-1) and (i, j).
  std::vector<Flux> fy(static_cast<std::size_t>(ny + 1) * nx);
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const bool low_fluid = j > 0 && !state.is_solid(i, j - 1);
      const bool high_fluid = j < ny && !state.is_solid(i, j);
      if (!low_fluid && !high_fluid) continue;
      FaceState l, r;
      if (low_fluid) l = y_state(state, q, state.rho.index(i, j - 1));
      if (high_fluid) r = y_state(state, q, state.rho.index(i, j));
      if (!low_fluid) l = (j == 0) ? edge_ghost(r, cfg.edges) : r.mirrored();
      if (!high_fluid) r = (j == ny) ? edge_ghost(l, cfg.edges) : l.mirrored();
      fy[static_cast<std::size_t>(j) * nx + i] = rusanov(l, r);
    }
  }

  ConservedState next = state;
  const double ax = dt / g.dx;
  const double ay = dt / g.dy;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (state.is_solid(i, j)) continue;
      const Flux& w = fx[static_cast<std::size_t>(j) * (nx + 1) + i];
      const Flux& e = fx[static_cast<std::size_t>(j) * (nx + 1) + i + 1];
      const Flux& s = fy[static_cast<std::size_t>(j) * nx + i];
      const Flux& n = fy[static_cast<std::size_t>(j + 1) * nx + i];
      const std::size_t k = state.rho.index(i, j);
      // Each divergence is summed before subtraction so that the x and y
      // contributions enter symmetrically.
      next.rho[k] -= ax * (e.mass - w.mass) + ay * (n.mass - s.mass);
      next.rho_u[k] -= ax * (e.mom_n - w.mom_n) + ay * (n.mom_t - s.mom_t);
      next.rho_v[k] -= ax * (e.mom_t - w.mom_t) + ay * (n.mom_n - s.mom_n);
      next.energy[k] -= ax * (e.energy - w.energy) + ay * (n.energy - s.energy);

      const double rho = next.rho[k];
      const double p =
          (cfg.gamma - 1.0) *
          (next.energy[k] - 0.5 * (next.rho_u[k] * next.rho_u[k] +
                                   next.rho_v[k] * next.rho_v[k]) / rho);
      if (!(rho > 0.0) || !(p > 0.0) || !std::isfinite(p)) {
        std::ostringstream msg;
        msg << "step " << step_index << ": ";
        if (!(rho > 0.0)) {
          msg << "non-positive density " << rho;
        } else {
          msg << "non-positive pressure " << p;
        }
        msg << " at cell (" << i << ", " << j << ")";
        throw SolverError(msg.str());
      }
    }
  }
  return next;
}

SimulationOutput run(const ConservedState& initial, const SolverConfig& cfg,
                     const std::string& case_id) {
  cfg.validate();
  SimulationOutput out;
  out.frames.case_id = case_id;
  out.frames.grid = initial.grid;
  out.frames.dt_out = cfg.dt_out();
  out.frames.frames.reserve(cfg.n_out);

  auto record = [&](const ConservedState& s) {
    const FieldD p = eos_pressure(s, cfg.gamma);
    FieldF f(p.nx(), p.ny());
    for (std::size_t k = 0; k < p.size(); ++k) f[k] = static_cast<float>(p[k]);
    out.frames.frames.push_back(std::move(f));
  };

  ConservedState state = initial;
  record(state);
  double t = 0.0;
  long steps = 0;
  for (int next = 1; next < cfg.n_out; ++next) {
    const double target = next * cfg.dt_out();
    while (t < target) {
      double dt;
      try {
        dt = stable_dt(state, cfg);
      } catch (const SolverError& e) {
        throw SolverError(std::string(e.what()) + " at t=" + std::to_string(t) +
                          " s");
      }
      const bool lands = t + dt >= target;
      if (lands) dt = target - t;
      try {
        state = step(state, dt, cfg, steps);
      } catch (const SolverError& e) {
        throw SolverError(std::string(e.what()) + " at t=" + std::to_string(t) +
                          " s");
      }
      ++steps;
      t = lands ? target : t + dt;
    }
    record(state);
  }
  out.final_state = std::move(state);
  out.steps = steps;
  return out;
}

FrameSequence simulate(const ScenarioCase& c, const GridSpec& grid,
                       const SolverConfig& cfg) {
  return run(init_state(c, grid, cfg), cfg, c.case_id).frames;
}

}  // namespace blastcast::euler2d
