#include "sphereplane/pfa.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "sphereplane/errors.hpp"

namespace sphereplane {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr int kMaxDepth = 40;
constexpr std::size_t kMaxPanels = 20000;

void require_positive_distance(double d) {
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw DomainError(fmt::format("separation must be positive and finite, got {}", d));
  }
}

// sqrt(R^2 - a^2) - sqrt(R^2 - b^2) without cancellation.
double exact_rise(double radius, double a, double b) {
  const double r_sq = radius * radius;
  return (b - a) * (b + a) / (std::sqrt(r_sq - a * a) + std::sqrt(r_sq - b * b));
}

// Adaptive bisection with 31-point Gauss-Kronrod panels. A panel's error is
// taken as the change when it is split in two, and the goal rel_tol * |total|
// is shared among panels in proportion to their width.
template <class F>
double integrate_piece(F f, double a, double b, double rel_tol, std::string_view label) {
  struct Panel {
    double lo, hi, value;
    int depth;
  };
  double l1 = 0.0;
  auto rule = [&](double lo, double hi, double* norm = nullptr) {
    double error = 0.0;
    return gauss_kronrod<double, 31>::integrate(f, lo, hi, 0, 0.0, &error, norm);
  };
  std::vector<Panel> stack{{a, b, rule(a, b, &l1), 0}};
  const double goal = rel_tol * l1;
  const double width = b - a;
  double total = 0.0;
  double total_error = 0.0;
  std::size_t panels = 1;
  while (!stack.empty() && panels < kMaxPanels) {
    const Panel p = stack.back();
    stack.pop_back();
    const double mid = 0.5 * (p.lo + p.hi);
    const double left = rule(p.lo, mid);
    const double right = rule(mid, p.hi);
    panels += 2;
    const double error = std::abs(left + right - p.value);
    if (error <= goal * (p.hi - p.lo) / width || p.depth >= kMaxDepth) {
      total += left + right;
      total_error += error;
      continue;
    }
    stack.push_back({p.lo, mid, left, p.depth + 1});
    stack.push_back({mid, p.hi, right, p.depth + 1});
  }
  if (!stack.empty() || !std::isfinite(total) || total_error > goal) {
    throw NumericError(fmt::format("quadrature over {} [{}, {}] did not converge: estimate {}, "
                                   "error {} exceeds tolerance {}",
                                   label, a, b, total, total_error, goal),
                       {total, total_error});
  }
  return total;
}

}  // namespace

void OscillatorParams::validate() const {
  if (!(effective_mass > 0.0)) throw DomainError("effective mass must be positive");
  if (!(rest_frequency > 0.0)) throw DomainError("rest frequency must be positive");
}

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::SI: return "si";
    case Normalization::N0Normalized: return "n0";
  }
  return "unknown";
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::ClosedForm: return "closed_form";
    case Provenance::Quadrature: return "quadrature";
    case Provenance::OracleSeries: return "oracle_series";
    case Provenance::OracleFd: return "oracle_fd";
  }
  return "unknown";
}

Normalization parse_normalization(std::string_view text) {
  if (text == "si") return Normalization::SI;
  if (text == "n0") return Normalization::N0Normalized;
  throw ConfigError(fmt::format("unknown normalization '{}' (expected si or n0)", text));
}

Provenance parse_provenance(std::string_view text) {
  if (text == "closed_form") return Provenance::ClosedForm;
  if (text == "quadrature") return Provenance::Quadrature;
  if (text == "oracle_series") return Provenance::OracleSeries;
  if (text == "oracle_fd") return Provenance::OracleFd;
  throw ConfigError(fmt::format("unknown provenance '{}'", text));
}

void ForceGradientCurve::validate() const {
  if (distance.size() != value.size()) {
    throw DomainError("curve distance and value columns differ in length");
  }
  for (std::size_t i = 0; i < distance.size(); ++i) {
    if (!(distance[i] > 0.0)) throw DomainError(fmt::format("curve sample {}: d <= 0", i));
    if (!(value[i] > 0.0)) throw DomainError(fmt::format("curve sample {}: value <= 0", i));
    if (i > 0 && !(distance[i] > distance[i - 1])) {
      throw DomainError(fmt::format("curve sample {}: d not strictly increasing", i));
    }
  }
}

double k_prefactor(const OscillatorParams& params) {
  params.validate();
  return kVacuumPermittivity / (4.0 * std::numbers::pi * params.effective_mass);
}

double n0_normalization(const OscillatorParams& params) { return k_prefactor(params) * 1e13; }

double pfa_sum_closed_form(double d, const SurfaceProfile& profile) {
  require_positive_distance(d);
  if (profile.sagitta_mode() != SagittaMode::Paraxial) {
    throw DomainError("closed-form PFA sum requires a paraxial profile");
  }
  const auto segments = profile.segments();
  double sum = segments.front().curvature_radius / (d * d);
  for (std::size_t i = 1; i < segments.size(); ++i) {
    const double gap = d + segments[i].start_height;
    sum += (segments[i].curvature_radius - segments[i - 1].curvature_radius) / (gap * gap);
  }
  if (profile.bounded()) {
    const double gap = d + profile.last_finite_height();
    sum -= segments.back().curvature_radius / (gap * gap);
  }
  return sum;
}

double pfa_sum_quadrature(double d, const SurfaceProfile& profile, double rel_tol) {
  require_positive_distance(d);
  if (!(rel_tol > 0.0)) throw DomainError("quadrature tolerance must be positive");

  const auto segments = profile.segments();
  const auto& radii = profile.breakpoints().radii;
  double total = 0.0;

  // Finite zones, integrated in r. The zone formula is used directly so the
  // integrand is smooth on each closed panel.
  const std::size_t finite_zones = radii.size() - 1;
  for (std::size_t i = 0; i < finite_zones; ++i) {
    const double z0 = segments[i].start_height;
    const double radius = segments[i].curvature_radius;
    const double r0 = radii[i];
    const auto integrand = [&](double r) {
      const double z = profile.sagitta_mode() == SagittaMode::Paraxial
                           ? z0 + (r * r - r0 * r0) / (2.0 * radius)
                           : z0 + exact_rise(radius, r0, r);
      const double gap = d + z;
      return 2.0 * r / (gap * gap * gap);
    };
    total += integrate_piece(integrand, radii[i], radii[i + 1], rel_tol, "zone");
  }
  if (profile.bounded()) return total;

  // Outer unbounded zone.
  const auto& outer = segments.back();
  const double r_last = radii.back();
  const double z_last = outer.start_height;
  const double radius = outer.curvature_radius;
  if (profile.sagitta_mode() == SagittaMode::Paraxial) {
    // r = r_last + s t / (1 - t) maps [0, 1) onto [r_last, inf).
    const double scale = std::sqrt(r_last * r_last + 2.0 * radius * (d + z_last));
    const auto integrand = [&](double t) {
      if (t >= 1.0) return 0.0;
      const double u = t / (1.0 - t);
      const double r = r_last + scale * u;
      const double gap = d + z_last + (r * r - r_last * r_last) / (2.0 * radius);
      const double jacobian = scale / ((1.0 - t) * (1.0 - t));
      return 2.0 * r / (gap * gap * gap) * jacobian;
    };
    total += integrate_piece(integrand, 0.0, 1.0, rel_tol, "paraxial tail");
  } else {
    // In r up to where sqrt(R^2 - r^2) has halved, then in w = sqrt(R^2 - r^2),
    // which removes the square-root behaviour at the equator.
    const double w_last = std::sqrt(radius * radius - r_last * r_last);
    const double w_split = 0.5 * w_last;
    const double r_split = std::sqrt((radius - w_split) * (radius + w_split));
    const auto inner = [&](double r) {
      const double gap = d + z_last + exact_rise(radius, r_last, r);
      return 2.0 * r / (gap * gap * gap);
    };
    total += integrate_piece(inner, r_last, r_split, rel_tol, "exact outer zone");
    const auto rim = [&](double w) {
      const double gap = d + z_last + w_last - w;
      return 2.0 * w / (gap * gap * gap);
    };
    total += integrate_piece(rim, 0.0, w_split, rel_tol, "exact outer rim");
  }
  return total;
}

double k_el_perfect(double d, double radius, const OscillatorParams& params) {
  require_positive_distance(d);
  if (!(radius > 0.0)) throw DomainError("sphere radius must be positive");
  return k_prefactor(params) * radius / (d * d);
}

double k_el_piecewise(double d, const SurfaceProfile& profile, const OscillatorParams& params) {
  return k_prefactor(params) * pfa_sum_closed_form(d, profile);
}

double k_el_quadrature(double d, const SurfaceProfile& profile, const OscillatorParams& params,
                       double rel_tol) {
  return k_prefactor(params) * pfa_sum_quadrature(d, profile, rel_tol);
}

double k_el(double d, const SurfaceProfile& profile, const OscillatorParams& params) {
  if (profile.sagitta_mode() == SagittaMode::Paraxial) {
    return k_el_piecewise(d, profile, params);
  }
  return k_el_quadrature(d, profile, params);
}

double k_el_reference_17(double d, double radius, double d0, const OscillatorParams& params) {
  require_positive_distance(d);
  require_positive_distance(d0);
  if (!(radius > 0.0)) throw DomainError("sphere radius must be positive");
  // Written as the perfect-sphere value times (d / d0)^0.3 so the two agree exactly at d0.
  return k_prefactor(params) * radius / (d * d) * std::pow(d / d0, 0.3);
}

double force_gradient(double d, const SurfaceProfile& profile, const VoltageState& voltage) {
  const double sum = profile.sagitta_mode() == SagittaMode::Paraxial
                         ? pfa_sum_closed_form(d, profile)
                         : pfa_sum_quadrature(d, profile);
  const double dv = voltage.difference();
  return std::numbers::pi * kVacuumPermittivity * dv * dv * sum;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) {
    throw DomainError(fmt::format("log grid needs 0 < lo < hi and >= 2 points (got {}, {}, {})",
                                  lo, hi, count));
  }
  std::vector<double> grid(count);
  const double log_lo = std::log(lo);
  const double step = (std::log(hi) - log_lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) grid[i] = std::exp(log_lo + step * static_cast<double>(i));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

std::vector<double> linear_spaced(double lo, double hi, std::size_t count) {
  if (!(hi > lo) || count < 2) {
    throw DomainError(
        fmt::format("linear grid needs lo < hi and >= 2 points (got {}, {}, {})", lo, hi, count));
  }
  std::vector<double> grid(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) grid[i] = lo + step * static_cast<double>(i);
  grid.back() = hi;
  return grid;
}

namespace {

void validate_grid(std::span<const double> d_grid) {
  if (d_grid.empty()) throw DomainError("distance grid is empty");
  for (std::size_t i = 0; i < d_grid.size(); ++i) {
    require_positive_distance(d_grid[i]);
    if (i > 0 && !(d_grid[i] > d_grid[i - 1])) {
      throw DomainError("distance grid must be strictly increasing");
    }
  }
}

}  // namespace

ForceGradientCurve sample_curve(const SurfaceProfile& profile, std::span<const double> d_grid,
                                Normalization normalization, const OscillatorParams& params) {
  validate_grid(d_grid);
  ForceGradientCurve curve;
  curve.normalization = normalization;
  curve.provenance = profile.sagitta_mode() == SagittaMode::Paraxial ? Provenance::ClosedForm
                                                                      : Provenance::Quadrature;
  const double scale = normalization == Normalization::SI ? 1.0 : 1.0 / n0_normalization(params);
  curve.distance.assign(d_grid.begin(), d_grid.end());
  curve.value.reserve(d_grid.size());
  for (const double d : d_grid) curve.value.push_back(k_el(d, profile, params) * scale);
  return curve;
}

ForceGradientCurve sample_reference_curve(double radius, double d0, std::span<const double> d_grid,
                                          Normalization normalization,
                                          const OscillatorParams& params) {
  validate_grid(d_grid);
  ForceGradientCurve curve;
  curve.normalization = normalization;
  curve.provenance = Provenance::ClosedForm;
  const double scale = normalization == Normalization::SI ? 1.0 : 1.0 / n0_normalization(params);
  curve.distance.assign(d_grid.begin(), d_grid.end());
  curve.value.reserve(d_grid.size());
  for (const double d : d_grid) curve.value.push_back(k_el_reference_17(d, radius, d0, params) * scale);
  return curve;
}

}  // namespace sphereplane
