#include "sphereplane/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "sphereplane/errors.hpp"

namespace sphereplane {

namespace {

void require_geometry(double radius, double d) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw DomainError("sphere radius must be positive");
  if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("separation must be positive");
}

[[noreturn]] void budget_exhausted(double radius, double d, std::size_t max_terms) {
  throw NumericError(fmt::format(
      "image series for d/R = {:.3g} needs more than {} terms; this is the proximity regime, "
      "use the PFA asymptote pi eps0 R / d^2 instead",
      d / radius, max_terms));
}

// acosh(1 + x) without the cancellation in forming 1 + x.
double bispherical_mu(double radius, double d) {
  const double x = d / radius;
  return std::log1p(x + std::sqrt(x * (x + 2.0)));
}

}  // namespace

std::string_view to_string(DifferentiationMethod method) {
  switch (method) {
    case DifferentiationMethod::AnalyticSeries: return "analytic_series";
    case DifferentiationMethod::RichardsonFiniteDifference: return "richardson_fd";
  }
  return "unknown";
}

SeriesResult exact_capacitance(double radius, double d, double rel_tol, std::size_t max_terms) {
  require_geometry(radius, d);
  const double mu = bispherical_mu(radius, d);
  const double sinh_mu = std::sinh(mu);

  SeriesResult result;
  double sum = 0.0;
  for (std::size_t n = 1;; ++n) {
    if (n > max_terms) budget_exhausted(radius, d, max_terms);
    const double term = sinh_mu / std::sinh(static_cast<double>(n) * mu);
    sum += term;
    result.terms_used = n;
    result.last_term_relative = term / sum;
    if (result.last_term_relative < rel_tol) break;
  }
  result.capacitance = 4.0 * std::numbers::pi * kVacuumPermittivity * radius * sum;
  return result;
}

namespace {

// Term-by-term d^2/dd^2 of sum_n sinh(mu)/sinh(n mu), with mu(d) from cosh mu = 1 + d/R.
std::pair<double, std::size_t> series_curvature(double radius, double d, double rel_tol,
                                                std::size_t max_terms) {
  const double mu = bispherical_mu(radius, d);
  const double sm = std::sinh(mu);
  const double cm = std::cosh(mu);
  const double dmu = 1.0 / (radius * sm);
  const double d2mu = -cm / (radius * radius * sm * sm * sm);

  double sum = 0.0;
  for (std::size_t k = 1;; ++k) {
    if (k > max_terms) budget_exhausted(radius, d, max_terms);
    const double n = static_cast<double>(k);
    const double s = std::sinh(n * mu);
    const double coth = 1.0 / std::tanh(n * mu);
    const double f1 = (cm - n * sm * coth) / s;
    const double f2 = (sm * (1.0 - n * n) - 2.0 * n * cm * coth + 2.0 * n * n * sm * coth * coth) / s;
    const double term = f2 * dmu * dmu + f1 * d2mu;
    sum += term;
    if (k > 2 && std::abs(term) < rel_tol * std::abs(sum)) {
      return {4.0 * std::numbers::pi * kVacuumPermittivity * radius * sum, k};
    }
  }
}

}  // namespace

ExactGradientResult exact_force_gradient(double radius, double d, const VoltageState& voltage,
                                         double rel_tol, DifferentiationMethod method,
                                         std::size_t max_terms) {
  require_geometry(radius, d);
  ExactGradientResult result;
  result.method = method;

  if (method == DifferentiationMethod::AnalyticSeries) {
    const auto [curvature, terms] = series_curvature(radius, d, rel_tol, max_terms);
    result.capacitance_curvature = curvature;
    result.terms_used = terms;
  } else {
    std::size_t terms = 0;
    const auto capacitance = [&](double x) {
      const auto series = exact_capacitance(radius, x, rel_tol, max_terms);
      terms = std::max(terms, series.terms_used);
      return series.capacitance;
    };
    const double c0 = capacitance(d);
    const auto second_difference = [&](double h) {
      return (capacitance(d + h) - 2.0 * c0 + capacitance(d - h)) / (h * h);
    };
    const double h = d / 8.0;
    const double coarse = second_difference(h);
    const double fine = second_difference(h / 2.0);
    const double extrapolated = (4.0 * fine - coarse) / 3.0;
    if (!std::isfinite(extrapolated) || extrapolated <= 0.0) {
      throw NumericError(fmt::format("finite-difference curvature unstable at d = {}", d),
                         {coarse, fine, extrapolated});
    }
    result.capacitance_curvature = extrapolated;
    result.terms_used = terms;
  }

  const double dv = voltage.difference();
  result.force_gradient = 0.5 * dv * dv * result.capacitance_curvature;
  return result;
}

double pfa_force_gradient_perfect(double radius, double d, const VoltageState& voltage) {
  require_geometry(radius, d);
  const double dv = voltage.difference();
  return std::numbers::pi * kVacuumPermittivity * radius * dv * dv / (d * d);
}

}  // namespace sphereplane
