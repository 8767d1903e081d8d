#include "sphereplane/profile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <fmt/format.h>

#include "sphereplane/errors.hpp"

namespace sphereplane {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<SphericalSegment> normalized_segments(const SurfaceProfile::Shape& shape) {
  if (const auto* sphere = std::get_if<PerfectSphere>(&shape)) {
    return {SphericalSegment{sphere->radius, 0.0, std::nullopt}};
  }
  return std::get<PiecewiseSpherical>(shape).segments;
}

void validate_segments(const std::vector<SphericalSegment>& segments) {
  if (segments.empty()) {
    throw DomainError("profile has no segments");
  }
  if (segments.front().start_height != 0.0) {
    throw DomainError("first segment must start at height 0");
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (!(s.curvature_radius > 0.0) || !std::isfinite(s.curvature_radius)) {
      throw DomainError(fmt::format("segment {}: curvature radius must be positive and finite", i));
    }
    if (!(s.start_height >= 0.0)) {
      throw DomainError(fmt::format("segment {}: start height must be >= 0", i));
    }
    if (s.unbounded()) {
      if (i + 1 != segments.size()) {
        throw DomainError(fmt::format("segment {}: only the last segment may be unbounded", i));
      }
      continue;
    }
    if (!(*s.end_height > s.start_height) || !std::isfinite(*s.end_height)) {
      throw DomainError(fmt::format("segment {}: end height must exceed start height", i));
    }
    if (i + 1 < segments.size() && segments[i + 1].start_height != *s.end_height) {
      throw DomainError(fmt::format("segments {} and {} are not contiguous", i, i + 1));
    }
  }
}

}  // namespace

SurfaceProfile::SurfaceProfile(Shape shape, SagittaMode mode)
    : shape_(std::move(shape)), mode_(mode), segments_(normalized_segments(shape_)) {
  validate_segments(segments_);

  breakpoints_.radii.push_back(0.0);
  breakpoint_sq_.push_back(0.0);
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    const double r_prev_sq = breakpoint_sq_.back();
    const double radius = s.curvature_radius;
    if (mode_ == SagittaMode::Exact && r_prev_sq >= radius * radius) {
      throw DomainError(fmt::format(
          "segment {}: curvature radius {} m is smaller than its starting radius {} m", i, radius,
          std::sqrt(r_prev_sq)));
    }
    if (s.unbounded()) break;

    const double rise = *s.end_height - s.start_height;
    double r_sq = 0.0;
    if (mode_ == SagittaMode::Paraxial) {
      r_sq = r_prev_sq + 2.0 * radius * rise;
    } else {
      const double s_prev = std::sqrt(radius * radius - r_prev_sq);
      const double w = s_prev - rise;
      if (w < 0.0) {
        throw DomainError(fmt::format(
            "segment {}: a sphere of radius {} m cannot rise {} m in exact mode", i, radius, rise));
      }
      // R^2 - w^2 with R - w = r_prev^2 / (R + s_prev) + rise.
      r_sq = (r_prev_sq / (radius + s_prev) + rise) * (radius + w);
    }
    breakpoint_sq_.push_back(r_sq);
    breakpoints_.radii.push_back(std::sqrt(r_sq));
  }
}

SurfaceProfile SurfaceProfile::perfect_sphere(double radius, SagittaMode mode) {
  return SurfaceProfile(PerfectSphere{radius}, mode);
}

SurfaceProfile SurfaceProfile::stacked(std::span<const double> curvature_radii,
                                       std::span<const double> boundary_heights,
                                       SagittaMode mode) {
  if (curvature_radii.empty() || boundary_heights.size() + 1 != curvature_radii.size()) {
    throw DomainError("stacked profile needs one boundary height fewer than curvature radii");
  }
  PiecewiseSpherical piecewise;
  double start = 0.0;
  for (std::size_t i = 0; i < curvature_radii.size(); ++i) {
    SphericalSegment segment{curvature_radii[i], start, std::nullopt};
    if (i < boundary_heights.size()) {
      segment.end_height = boundary_heights[i];
      start = boundary_heights[i];
    }
    piecewise.segments.push_back(segment);
  }
  return SurfaceProfile(std::move(piecewise), mode);
}

double SurfaceProfile::max_radius() const {
  if (bounded()) return breakpoints_.radii.back();
  return mode_ == SagittaMode::Paraxial ? kInf : outer_radius();
}

double SurfaceProfile::last_finite_height() const {
  const auto& last = segments_.back();
  return last.unbounded() ? last.start_height : *last.end_height;
}

std::size_t SurfaceProfile::segment_index(double r) const {
  // radii[i] is the start of segment i; the first breakpoint strictly above r
  // ends the active segment.
  const auto& radii = breakpoints_.radii;
  const auto it = std::upper_bound(radii.begin(), radii.end(), r);
  const auto index = static_cast<std::size_t>(std::distance(radii.begin(), it)) - 1;
  return std::min(index, segments_.size() - 1);
}

double SurfaceProfile::zone_height(std::size_t index, double r) const {
  const auto& s = segments_[index];
  const double r_prev_sq = breakpoint_sq_[index];
  if (mode_ == SagittaMode::Paraxial) {
    return s.start_height + (r * r - r_prev_sq) / (2.0 * s.curvature_radius);
  }
  const double radius_sq = s.curvature_radius * s.curvature_radius;
  // Difference of the two sagittae, written without cancellation.
  return s.start_height + (r * r - r_prev_sq) /
                              (std::sqrt(radius_sq - r_prev_sq) + std::sqrt(radius_sq - r * r));
}

double SurfaceProfile::height_at(double r) const {
  if (!(r >= 0.0)) {
    throw DomainError(fmt::format("height requested at negative radius {}", r));
  }
  if (r > max_radius()) {
    throw DomainError(fmt::format("radius {} m beyond the profile's validity limit {} m", r,
                                  max_radius()));
  }
  return zone_height(segment_index(r), r);
}

double SurfaceProfile::radius_at_height(double z) const {
  if (!(z >= 0.0)) {
    throw DomainError(fmt::format("radius requested at negative height {}", z));
  }
  std::size_t index = 0;
  while (index + 1 < segments_.size() && z > *segments_[index].end_height) ++index;
  const auto& s = segments_[index];
  if (!s.unbounded() && z > *s.end_height) {
    throw DomainError(fmt::format("height {} m above the bounded profile", z));
  }
  const double rise = z - s.start_height;
  const double r_prev_sq = breakpoint_sq_[index];
  if (mode_ == SagittaMode::Paraxial) {
    return std::sqrt(r_prev_sq + 2.0 * s.curvature_radius * rise);
  }
  const double radius = s.curvature_radius;
  const double s_prev = std::sqrt(radius * radius - r_prev_sq);
  const double w = s_prev - rise;
  if (w < 0.0) {
    throw DomainError(fmt::format("height {} m above the equator of the outer sphere", z));
  }
  return std::sqrt((r_prev_sq / (radius + s_prev) + rise) * (radius + w));
}

double height_at(const SurfaceProfile& profile, double r) { return profile.height_at(r); }

SurfaceProfile make_lens_model_profile(const LensModelParameters& params, SagittaMode mode) {
  const double radii[] = {params.bubble_radius, params.flat_radius(), params.global_radius};
  const double heights[] = {params.bubble_height, params.bubble_height + params.flat_height};
  return SurfaceProfile::stacked(radii, heights, mode);
}

SurfaceProfile make_fig1_profile(SagittaMode mode) {
  return make_lens_model_profile(LensModelParameters{}, mode);
}

double perfect_sphere_sector_height(double radius, double radial_extent) {
  if (!(radial_extent >= 0.0)) throw DomainError("radial extent must be >= 0");
  if (!(radius > 0.0)) throw DomainError("sphere radius must be positive");
  return radial_extent * radial_extent / (2.0 * radius);
}

}  // namespace sphereplane
