#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace sphereplane {

// Vacuum permittivity, F/m (CODATA 2018).
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;

struct PhysicalConstants {
  static constexpr double epsilon0 = kVacuumPermittivity;
};

// How a spherical cap's height above its apex is evaluated.
//   Paraxial: z = r^2 / 2R, the form under which the stacked-segment PFA sum is exact.
//   Exact:    z = R - sqrt(R^2 - r^2), i.e. a true circular arc.
enum class SagittaMode { Paraxial, Exact };

// One spherical zone of an axisymmetric lens, bounded by the heights (measured
// from the lens apex) at which it begins and ends.
struct SphericalSegment {
  double curvature_radius = 0.0;     // m
  double start_height = 0.0;         // m
  std::optional<double> end_height;  // m; empty for the unbounded outermost zone

  bool unbounded() const { return !end_height.has_value(); }
};

struct PerfectSphere {
  double radius = 0.0;  // m
};

struct PiecewiseSpherical {
  std::vector<SphericalSegment> segments;
};

// Radial coordinates at which each zone boundary height is reached. radii[0] is
// the apex (0); radii[i] is where segment i-1 ends.
struct RadialBreakpoints {
  std::vector<double> radii;
};

// Axisymmetric lens surface z(r) >= 0 with z(0) = 0 at the point of closest
// approach to the plate. Immutable once constructed; all invariants are checked
// in the constructor.
class SurfaceProfile {
 public:
  using Shape = std::variant<PerfectSphere, PiecewiseSpherical>;

  explicit SurfaceProfile(Shape shape, SagittaMode mode = SagittaMode::Paraxial);

  static SurfaceProfile perfect_sphere(double radius, SagittaMode mode = SagittaMode::Paraxial);

  // Stack of zones with the given curvature radii. boundary_heights holds the
  // cumulative end height of every zone but the last, which is unbounded.
  static SurfaceProfile stacked(std::span<const double> curvature_radii,
                                std::span<const double> boundary_heights,
                                SagittaMode mode = SagittaMode::Paraxial);

  const Shape& shape() const { return shape_; }
  SagittaMode sagitta_mode() const { return mode_; }
  bool is_perfect_sphere() const { return std::holds_alternative<PerfectSphere>(shape_); }

  // Zone list; a perfect sphere is presented as a single unbounded zone.
  std::span<const SphericalSegment> segments() const { return segments_; }
  const RadialBreakpoints& breakpoints() const { return breakpoints_; }

  // Curvature radius of the outermost zone (the global lens radius).
  double outer_radius() const { return segments_.back().curvature_radius; }
  bool bounded() const { return !segments_.back().unbounded(); }

  // Largest radius at which the height function is defined: infinity for an
  // unbounded paraxial profile, the equator of the outer sphere in exact mode,
  // or the last breakpoint for a bounded profile.
  double max_radius() const;

  // Height of the last finite zone boundary (0 for a perfect sphere).
  double last_finite_height() const;

  // Index of the zone that contains radius r.
  std::size_t segment_index(double r) const;

  double height_at(double r) const;

  // Inverse of height_at on the monotone branch.
  double radius_at_height(double z) const;

  SurfaceProfile with_mode(SagittaMode mode) const { return SurfaceProfile(shape_, mode); }

 private:
  // Height of zone `index` evaluated at radius r (no range check on r).
  double zone_height(std::size_t index, double r) const;

  Shape shape_;
  SagittaMode mode_;
  std::vector<SphericalSegment> segments_;
  RadialBreakpoints breakpoints_;
  std::vector<double> breakpoint_sq_;
};

double height_at(const SurfaceProfile& profile, double r);

// Lens model with an apex bubble (small radius, height h) sitting on a flattened
// zone (radius multiplier x global radius, height H) of a global sphere.
struct LensModelParameters {
  double global_radius = 0.0309;       // m
  double flat_radius_multiplier = 1.6;
  double bubble_radius = 30e-6;        // m
  double bubble_height = 8e-9;         // m
  double flat_height = 250e-9;         // m

  double flat_radius() const { return flat_radius_multiplier * global_radius; }
};

SurfaceProfile make_lens_model_profile(const LensModelParameters& params,
                                       SagittaMode mode = SagittaMode::Paraxial);

// The reference imperfect lens: R = 30.9 mm, flat zone 1.6R tall 250 nm, 30 um
// bubble 8 nm tall.
SurfaceProfile make_fig1_profile(SagittaMode mode = SagittaMode::Paraxial);

// Paraxial sagitta of a perfect sphere of radius R at the given radial extent.
double perfect_sphere_sector_height(double radius, double radial_extent);

}  // namespace sphereplane
