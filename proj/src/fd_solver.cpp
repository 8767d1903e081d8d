#include "sphereplane/fd_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "sphereplane/errors.hpp"

namespace sphereplane {

namespace {

constexpr double kPi = std::numbers::pi;

// Cut distances below this fraction of the local spacing are clamped; the node
// then sits essentially on the conductor and carries its potential.
constexpr double kMinCutFraction = 1e-4;

std::vector<double> stretched_axis(double extent, double fine_extent, std::size_t fine_intervals,
                                   std::size_t nodes, std::string_view axis) {
  if (nodes < 16) throw ConfigError(fmt::format("{} axis needs >= 16 nodes, got {}", axis, nodes));
  if (fine_intervals == 0 || fine_intervals >= nodes) {
    throw ConfigError(fmt::format("{} axis: fine intervals must be in [1, nodes)", axis));
  }
  if (!(fine_extent > 0.0) || !(extent >= fine_extent)) {
    throw ConfigError(fmt::format("{} axis: need 0 < fine extent <= extent", axis));
  }
  const std::size_t coarse = nodes - 1 - fine_intervals;
  const double h = fine_extent / static_cast<double>(fine_intervals);
  const double span = extent - fine_extent;
  if (coarse == 0 && span > 0.0) {
    throw ConfigError(fmt::format("{} axis: no coarse intervals left to reach the extent", axis));
  }

  double ratio = 1.0;
  if (coarse > 0) {
    const auto covered = [&](double q) {
      double sum = 0.0;
      double step = h;
      for (std::size_t k = 0; k < coarse; ++k) {
        step *= q;
        sum += step;
      }
      return sum;
    };
    if (covered(1.0) >= span) {
      throw ConfigError(fmt::format(
          "{} axis: {} coarse intervals of the fine spacing already overshoot the extent; "
          "reduce the node count or enlarge the domain",
          axis, coarse));
    }
    double lo = 1.0;
    double hi = 2.0;
    while (covered(hi) < span) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (covered(mid) < span ? lo : hi) = mid;
    }
    ratio = 0.5 * (lo + hi);
  }

  std::vector<double> x(nodes);
  for (std::size_t i = 0; i <= fine_intervals; ++i) x[i] = h * static_cast<double>(i);
  x[fine_intervals] = fine_extent;
  double step = h;
  for (std::size_t i = fine_intervals + 1; i < nodes; ++i) {
    step *= ratio;
    x[i] = x[i - 1] + step;
  }
  x.back() = extent;
  return x;
}

// Solid of revolution bounded below by d + z(r). For every height the body
// occupies r in [0, r_max(z)], and for every radius z in [z_low(r), z_up(r)].
class LensBody {
 public:
  LensBody(const SurfaceProfile& profile, double d, const FdOptions& options)
      : profile_(profile), d_(d), closure_(options.closure) {
    if (closure_ == LensClosure::MirrorSphere) {
      if (profile.sagitta_mode() != SagittaMode::Exact || profile.bounded()) {
        throw ConfigError(
            "mirror-sphere closure needs an exact-sagitta profile with an unbounded outer zone");
      }
      outer_radius_ = profile.outer_radius();
      rim_ = outer_radius_;
      const double r_last = profile.breakpoints().radii.back();
      center_ = d + profile.last_finite_height() +
                std::sqrt(outer_radius_ * outer_radius_ - r_last * r_last);
      top_ = center_ + outer_radius_;
    } else {
      if (!(options.rim_radius > 0.0) || options.rim_radius > profile.max_radius()) {
        throw ConfigError(fmt::format("flat-top closure: rim radius {} outside (0, {}]",
                                      options.rim_radius, profile.max_radius()));
      }
      rim_ = options.rim_radius;
      rim_height_ = profile.height_at(rim_);
      const double thickness = options.top_thickness > 0.0 ? options.top_thickness : rim_ / 2.0;
      top_ = d + rim_height_ + thickness;
    }
  }

  double rim() const { return rim_; }
  double top() const { return top_; }

  // Largest radius inside the body at height z, or -1 when the body is absent.
  double r_max(double z) const {
    if (z < d_ || z > top_) return -1.0;
    const double rise = z - d_;
    if (closure_ == LensClosure::MirrorSphere) {
      if (z <= center_) return std::min(rim_, profile_.radius_at_height(rise));
      const double dz = z - center_;
      return std::sqrt(std::max(0.0, outer_radius_ * outer_radius_ - dz * dz));
    }
    if (rise >= rim_height_) return rim_;
    return std::min(rim_, profile_.radius_at_height(rise));
  }

  bool contains(double r, double z) const { return r <= r_max(z); }

  double z_low(double r) const { return d_ + profile_.height_at(std::min(r, rim_)); }

  double z_up(double r) const {
    if (closure_ == LensClosure::FlatTop) return top_;
    return center_ + std::sqrt(std::max(0.0, outer_radius_ * outer_radius_ - r * r));
  }

 private:
  const SurfaceProfile& profile_;
  double d_;
  LensClosure closure_;
  double outer_radius_ = 0.0;
  double rim_ = 0.0;
  double rim_height_ = 0.0;
  double center_ = 0.0;
  double top_ = 0.0;
};

double clamp_cut(double delta, double spacing) {
  return std::clamp(delta, kMinCutFraction * spacing, spacing);
}

struct Stencil {
  std::size_t node = 0;
  std::size_t neighbor[4] = {0, 0, 0, 0};
  double weight[4] = {0, 0, 0, 0};
  double inv_diagonal = 0.0;
};

// One-sided second-order derivative at x0 from samples at x0, x0+h1, x0+h1+h2.
double one_sided_derivative(double u0, double u1, double u2, double h1, double h2) {
  return -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * u0 + (h1 + h2) / (h1 * h2) * u1 -
         h1 / (h2 * (h1 + h2)) * u2;
}

}  // namespace

std::string_view to_string(OuterBoundary boundary) {
  return boundary == OuterBoundary::Grounded ? "grounded" : "zero_flux";
}

std::string_view to_string(LensClosure closure) {
  return closure == LensClosure::MirrorSphere ? "mirror_sphere" : "flat_top";
}

void FdGrid::validate() const {
  radial_nodes();
  axial_nodes();
}

std::vector<double> FdGrid::radial_nodes() const {
  return stretched_axis(radial_extent, radial_fine_extent, radial_fine_intervals, n_r, "radial");
}

std::vector<double> FdGrid::axial_nodes() const {
  return stretched_axis(axial_extent, axial_fine_extent, axial_fine_intervals, n_z, "axial");
}

FdGrid documented_grid(double sphere_radius, double d, int refinement) {
  if (!(sphere_radius > 0.0) || !(d > 0.0)) throw DomainError("grid needs R > 0 and d > 0");
  if (refinement < 0 || refinement > 4) throw ConfigError("refinement level must be in [0, 4]");

  constexpr std::size_t kAxialFineIntervals = 30;
  constexpr std::size_t kRadialFineIntervals = 40;
  constexpr double kBaseRatio = 1.1;
  const std::size_t scale = std::size_t{1} << refinement;

  FdGrid grid;
  grid.radial_extent = 14.0 * sphere_radius;
  grid.axial_extent = d + 14.0 * sphere_radius;
  grid.axial_fine_extent = 1.25 * d;
  grid.radial_fine_extent = std::min(1.5 * std::sqrt(2.0 * sphere_radius * d), sphere_radius);

  const auto coarse_intervals = [&](double extent, double fine_extent, std::size_t fine) {
    const double h = fine_extent / static_cast<double>(fine);
    const double span = extent - fine_extent;
    const double n = std::log(1.0 + span * (kBaseRatio - 1.0) / (h * kBaseRatio)) /
                     std::log(kBaseRatio);
    return static_cast<std::size_t>(std::ceil(n));
  };
  const std::size_t axial_coarse =
      coarse_intervals(grid.axial_extent, grid.axial_fine_extent, kAxialFineIntervals);
  const std::size_t radial_coarse =
      coarse_intervals(grid.radial_extent, grid.radial_fine_extent, kRadialFineIntervals);

  grid.axial_fine_intervals = kAxialFineIntervals * scale;
  grid.radial_fine_intervals = kRadialFineIntervals * scale;
  grid.n_z = (kAxialFineIntervals + axial_coarse) * scale + 1;
  grid.n_r = (kRadialFineIntervals + radial_coarse) * scale + 1;
  return grid;
}

FdSolution fd_solve(const SurfaceProfile& profile, double d, const FdGrid& grid,
                    const FdOptions& options) {
  if (!(d > 0.0)) throw DomainError("separation must be positive");
  const double gap_ratio = d / profile.outer_radius();
  if (gap_ratio < kFdMinGapRatio) {
    throw DomainError(fmt::format(
        "d/R = {:.3g} is below the finite-difference feasibility bound {}; use the image "
        "series or the PFA at smaller gaps, or a scaled-down lens model",
        gap_ratio, kFdMinGapRatio));
  }
  if (!(options.tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (options.omega != 0.0 && !(options.omega > 0.0 && options.omega < 2.0)) {
    throw ConfigError("SOR relaxation factor must lie in (0, 2)");
  }

  FdSolution sol;
  sol.r = grid.radial_nodes();
  sol.z = grid.axial_nodes();
  sol.voltage = options.voltage;
  const auto& r = sol.r;
  const auto& z = sol.z;
  const std::size_t nr = r.size();
  const std::size_t nz = z.size();
  const auto idx = [nz](std::size_t i, std::size_t j) { return i * nz + j; };
  const bool grounded = grid.outer_boundary == OuterBoundary::Grounded;

  const LensBody body(profile, d, options);
  if (body.rim() >= r.back() || body.top() >= z.back()) {
    throw ConfigError(fmt::format("lens (rim {} m, top {} m) does not fit inside the grid ({} x {})",
                                  body.rim(), body.top(), r.back(), z.back()));
  }

  sol.gap_nodes = static_cast<std::size_t>(
      std::count_if(z.begin(), z.end(), [d](double zj) { return zj <= d; }));
  if (sol.gap_nodes < 20) {
    throw ConfigError(fmt::format("only {} axial nodes resolve the gap at the apex; need >= 20",
                                  sol.gap_nodes));
  }

  sol.inside_lens.assign(nr * nz, 0);
  sol.potential.assign(nr * nz, 0.0);
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 1; j < nz; ++j) {
      if (body.contains(r[i], z[j])) {
        sol.inside_lens[idx(i, j)] = 1;
        sol.potential[idx(i, j)] = options.voltage;
      }
    }
  }
  const auto inside = [&](std::size_t i, std::size_t j) { return sol.inside_lens[idx(i, j)] != 0; };
  const auto dirichlet = [&](std::size_t i, std::size_t j) {
    return j == 0 || (grounded && (i == nr - 1 || j == nz - 1));
  };

  // Stencils for the free nodes. Neighbours inside the lens hold the lens
  // potential, so a cut only changes the arm length.
  std::vector<Stencil> stencils;
  stencils.reserve(nr * nz);
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < nz; ++j) {
      if (inside(i, j) || dirichlet(i, j)) continue;
      Stencil s;
      s.node = idx(i, j);

      // Axial arms.
      double h_south = z[j] - z[j - 1];
      if (inside(i, j - 1)) h_south = clamp_cut(z[j] - body.z_up(r[i]), h_south);
      std::size_t north = 0;
      double h_north = 0.0;
      if (j == nz - 1) {
        north = idx(i, j - 1);
        h_north = h_south;
      } else {
        north = idx(i, j + 1);
        h_north = z[j + 1] - z[j];
        if (inside(i, j + 1)) h_north = clamp_cut(body.z_low(r[i]) - z[j], h_north);
      }
      s.neighbor[0] = idx(i, j - 1);
      s.weight[0] = 2.0 / (h_south * (h_north + h_south));
      s.neighbor[1] = north;
      s.weight[1] = 2.0 / (h_north * (h_north + h_south));

      // Radial arms, conservative form (1/r) d/dr (r du/dr).
      if (i == 0) {
        const double h_east = r[1];
        s.neighbor[2] = idx(1, j);
        s.weight[2] = 4.0 / (h_east * h_east);
        s.neighbor[3] = idx(1, j);
        s.weight[3] = 0.0;
      } else {
        double h_west = r[i] - r[i - 1];
        if (inside(i - 1, j)) h_west = clamp_cut(r[i] - body.r_max(z[j]), h_west);
        std::size_t east = 0;
        double h_east = 0.0;
        if (i == nr - 1) {
          east = idx(i - 1, j);
          h_east = h_west;
        } else {
          east = idx(i + 1, j);
          h_east = r[i + 1] - r[i];
        }
        const double span = h_east + h_west;
        s.neighbor[2] = east;
        s.weight[2] = 2.0 * (r[i] + 0.5 * h_east) / (r[i] * h_east * span);
        s.neighbor[3] = idx(i - 1, j);
        s.weight[3] = 2.0 * (r[i] - 0.5 * h_west) / (r[i] * h_west * span);
      }
      s.inv_diagonal = 1.0 / (s.weight[0] + s.weight[1] + s.weight[2] + s.weight[3]);
      stencils.push_back(s);
    }
  }

  auto& u = sol.potential;
  const double scale = options.voltage != 0.0 ? std::abs(options.voltage) : 1.0;
  // Updates are projected onto [min, max] of the boundary potentials. The
  // discrete solution lies in that interval (M-matrix stencils), so the fixed
  // point is unchanged while over-relaxed iterates can no longer overshoot.
  const double lower = std::min(0.0, options.voltage);
  const double upper = std::max(0.0, options.voltage);
  const auto sweep = [&](double omega) {
    double max_correction = 0.0;
    for (const auto& s : stencils) {
      const double target = (s.weight[0] * u[s.neighbor[0]] + s.weight[1] * u[s.neighbor[1]] +
                             s.weight[2] * u[s.neighbor[2]] + s.weight[3] * u[s.neighbor[3]]) *
                            s.inv_diagonal;
      const double correction = target - u[s.node];
      max_correction = std::max(max_correction, std::abs(correction));
      u[s.node] = std::clamp(u[s.node] + omega * correction, lower, upper);
    }
    return max_correction / scale;
  };

  sol.snapshot_min = std::numeric_limits<double>::infinity();
  sol.snapshot_max = -std::numeric_limits<double>::infinity();
  const auto snapshot = [&](double residual) {
    sol.residual_history.push_back(residual);
    for (const auto& s : stencils) {
      sol.snapshot_min = std::min(sol.snapshot_min, u[s.node]);
      sol.snapshot_max = std::max(sol.snapshot_max, u[s.node]);
    }
  };
  const std::size_t snapshot_every = std::max<std::size_t>(options.snapshot_interval, 1);

  // Relaxation factor: a Gauss-Seidel probe gives a first estimate of the
  // Jacobi spectral radius; while SOR contracts slower than omega - 1 the
  // estimate is refined from rate^(1/2) = (rate + omega - 1) / (omega rho_J).
  const bool adaptive = options.omega == 0.0;
  constexpr std::size_t kWindow = 100;
  constexpr double kMaxOmega = 1.995;
  const auto optimal_omega = [](double rho_jacobi_sq) {
    return 2.0 / (1.0 + std::sqrt(1.0 - rho_jacobi_sq));
  };
  double omega = adaptive ? 1.0 : options.omega;
  std::size_t iteration = 0;
  double residual = std::numeric_limits<double>::infinity();
  std::vector<double> window;
  window.reserve(kWindow + 1);

  while (residual > options.tolerance) {
    if (iteration >= options.max_iterations) {
      throw NumericError(
          fmt::format("SOR did not reach residual {} within {} iterations (last {}, omega {})",
                      options.tolerance, options.max_iterations, residual, omega),
          sol.residual_history);
    }
    residual = sweep(omega);
    if (!std::isfinite(residual)) {
      throw NumericError("SOR diverged", sol.residual_history);
    }
    if (++iteration % snapshot_every == 0) snapshot(residual);

    if (!adaptive) continue;
    window.push_back(residual);
    if (window.size() <= kWindow) continue;
    const double rate = std::pow(window.back() / window.front(), 1.0 / kWindow);
    window.clear();
    window.push_back(residual);
    if (!(rate > omega - 1.0 && rate < 1.0)) continue;
    const double rho_sq = (rate + omega - 1.0) * (rate + omega - 1.0) / (rate * omega * omega);
    if (rho_sq < 1.0) omega = std::clamp(std::max(omega, optimal_omega(rho_sq)), 1.0, kMaxOmega);
  }
  sol.omega = omega;
  snapshot(residual);
  sol.iterations = iteration;
  sol.residual = residual;

  // Field energy: sum over grid edges of (du/dl)^2 * length * dual cross-section.
  std::vector<double> annulus(nr);
  for (std::size_t i = 0; i < nr; ++i) {
    const double lo = i == 0 ? 0.0 : 0.5 * (r[i] + r[i - 1]);
    const double hi = i == nr - 1 ? r[i] : 0.5 * (r[i] + r[i + 1]);
    annulus[i] = kPi * (hi * hi - lo * lo);
  }
  std::vector<double> dual_height(nz);
  for (std::size_t j = 0; j < nz; ++j) {
    const double lo = j == 0 ? z[0] : 0.5 * (z[j] + z[j - 1]);
    const double hi = j == nz - 1 ? z[j] : 0.5 * (z[j] + z[j + 1]);
    dual_height[j] = hi - lo;
  }

  const double v = options.voltage;
  double twice_energy_over_eps = 0.0;
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j + 1 < nz; ++j) {
      const bool a_in = inside(i, j);
      const bool b_in = inside(i, j + 1);
      if (a_in && b_in) continue;
      const double spacing = z[j + 1] - z[j];
      double du = 0.0;
      double length = spacing;
      if (!a_in && !b_in) {
        du = u[idx(i, j + 1)] - u[idx(i, j)];
      } else if (b_in) {
        length = clamp_cut(body.z_low(r[i]) - z[j], spacing);
        du = v - u[idx(i, j)];
      } else {
        length = clamp_cut(z[j + 1] - body.z_up(r[i]), spacing);
        du = u[idx(i, j + 1)] - v;
      }
      twice_energy_over_eps += du * du / length * annulus[i];
    }
  }
  for (std::size_t j = 0; j < nz; ++j) {
    for (std::size_t i = 0; i + 1 < nr; ++i) {
      const bool a_in = inside(i, j);
      const bool b_in = inside(i + 1, j);
      if (a_in && b_in) continue;
      const double spacing = r[i + 1] - r[i];
      double du = 0.0;
      double length = spacing;
      double face = 0.5 * (r[i] + r[i + 1]);
      if (!a_in && !b_in) {
        du = u[idx(i + 1, j)] - u[idx(i, j)];
      } else if (a_in) {
        length = clamp_cut(r[i + 1] - body.r_max(z[j]), spacing);
        face = r[i + 1] - 0.5 * length;
        du = u[idx(i + 1, j)] - v;
      } else {
        // The body is a prefix in r, so this arrangement cannot occur.
        continue;
      }
      twice_energy_over_eps += du * du / length * 2.0 * kPi * face * dual_height[j];
    }
  }
  sol.energy = 0.5 * kVacuumPermittivity * twice_energy_over_eps;
  sol.capacitance = v != 0.0 ? 2.0 * sol.energy / (v * v) : 0.0;

  // Gauss's law over the grounded walls of the box.
  double flux = 0.0;
  for (std::size_t i = 0; i < nr; ++i) {
    const double h1 = z[1] - z[0];
    const double h2 = z[2] - z[1];
    const double dudz = one_sided_derivative(u[idx(i, 0)], u[idx(i, 1)], u[idx(i, 2)], h1, h2);
    flux += dudz * annulus[i];
  }
  if (grounded) {
    for (std::size_t i = 0; i < nr; ++i) {
      const double h1 = z[nz - 1] - z[nz - 2];
      const double h2 = z[nz - 2] - z[nz - 3];
      // Derivative taken inward (towards -z) so the sign flips relative to +z.
      const double inward =
          one_sided_derivative(u[idx(i, nz - 1)], u[idx(i, nz - 2)], u[idx(i, nz - 3)], h1, h2);
      flux += inward * annulus[i];
    }
    for (std::size_t j = 0; j < nz; ++j) {
      const double h1 = r[nr - 1] - r[nr - 2];
      const double h2 = r[nr - 2] - r[nr - 3];
      const double inward = one_sided_derivative(u[idx(nr - 1, j)], u[idx(nr - 2, j)],
                                                 u[idx(nr - 3, j)], h1, h2);
      flux += inward * 2.0 * kPi * r.back() * dual_height[j];
    }
  }
  const double charge = kVacuumPermittivity * flux;
  sol.capacitance_from_charge = v != 0.0 ? charge / v : 0.0;
  return sol;
}

double observed_order(double coarse, double medium, double fine) {
  const double first = std::abs(coarse - medium);
  const double second = std::abs(medium - fine);
  if (!(second > 0.0)) return std::numeric_limits<double>::infinity();
  return std::log2(first / second);
}

}  // namespace sphereplane
