#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "sphereplane/profile.hpp"

namespace sphereplane {

enum class OuterBoundary { Grounded, ZeroFlux };

// How the lens is closed above its lower surface.
//   MirrorSphere: complete the outer zone's sphere above its equator (exact sagitta only);
//                 a perfect sphere then becomes a full sphere.
//   FlatTop:      plano-convex lens cut off at rim_radius with a cylindrical rim and flat top.
enum class LensClosure { MirrorSphere, FlatTop };

std::string_view to_string(OuterBoundary boundary);
std::string_view to_string(LensClosure closure);

// Tensor-product (r, z) grid. Each axis has a uniform fine region starting at
// 0 followed by geometrically stretched spacing out to the far-field boundary.
struct FdGrid {
  double radial_extent = 0.0;  // m
  double axial_extent = 0.0;   // m
  std::size_t n_r = 0;
  std::size_t n_z = 0;
  double radial_fine_extent = 0.0;  // m
  std::size_t radial_fine_intervals = 0;
  double axial_fine_extent = 0.0;  // m
  std::size_t axial_fine_intervals = 0;
  OuterBoundary outer_boundary = OuterBoundary::Grounded;

  void validate() const;
  std::vector<double> radial_nodes() const;
  std::vector<double> axial_nodes() const;
};

// The grid used throughout the test and acceptance suites: 30 intervals over
// 1.25 d axially, 40 over min(1.5 sqrt(2 R d), R) radially, stretching ratio
// ~1.1 at level 0 out to a far boundary 14R from the axis and 14R above the
// plate gap. Each refinement level halves every spacing.
FdGrid documented_grid(double sphere_radius, double d, int refinement = 0);

struct FdOptions {
  double voltage = 1.0;            // lens potential, plate at 0
  double tolerance = 1e-10;        // max SOR correction relative to |voltage|
  std::size_t max_iterations = 400'000;
  double omega = 0.0;              // 0 adapts omega from the observed contraction rate
  LensClosure closure = LensClosure::MirrorSphere;
  double rim_radius = 0.0;         // FlatTop only
  double top_thickness = 0.0;      // FlatTop only; 0 means rim_radius / 2
  std::size_t snapshot_interval = 25;
};

struct FdSolution {
  std::vector<double> r;          // node radii, m
  std::vector<double> z;          // node heights, m
  std::vector<double> potential;  // V, index i * z.size() + j
  std::vector<std::uint8_t> inside_lens;
  double voltage = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;
  double omega = 0.0;
  double energy = 0.0;                   // J
  double capacitance = 0.0;              // F, from 2E/V^2
  double capacitance_from_charge = 0.0;  // F, from flux through the grounded walls
  std::size_t gap_nodes = 0;
  std::vector<double> residual_history;  // one entry per snapshot
  double snapshot_min = 0.0;             // extremes of the free-node potential over all snapshots
  double snapshot_max = 0.0;

  double at(std::size_t i, std::size_t j) const { return potential[i * z.size() + j]; }
};

// Minimum d / R accepted by fd_solve; below this no desk-scale grid resolves the gap.
inline constexpr double kFdMinGapRatio = 0.01;

// Axisymmetric Laplace problem: plate z = 0 at 0 V, lens d + z(r) at the given
// voltage, far field per grid.outer_boundary. Shortley-Weller cut stencils at
// the lens surface, SOR iteration.
FdSolution fd_solve(const SurfaceProfile& profile, double d, const FdGrid& grid,
                    const FdOptions& options = {});

// Observed order p from three successive refinements (h, h/2, h/4).
double observed_order(double coarse, double medium, double fine);

}  // namespace sphereplane
