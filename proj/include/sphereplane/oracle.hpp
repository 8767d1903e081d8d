#pragma once

#include <cstddef>
#include <string_view>

#include "sphereplane/pfa.hpp"

namespace sphereplane {

// Sphere-plane capacitance from the bispherical image-charge series
//   C = 4 pi eps0 R sinh(mu) sum_{n>=1} 1 / sinh(n mu),  cosh(mu) = 1 + d/R.
struct SeriesResult {
  double capacitance = 0.0;  // F
  std::size_t terms_used = 0;
  double last_term_relative = 0.0;
};

inline constexpr std::size_t kDefaultSeriesTermBudget = 50'000'000;

SeriesResult exact_capacitance(double radius, double d, double rel_tol = 1e-12,
                               std::size_t max_terms = kDefaultSeriesTermBudget);

enum class DifferentiationMethod { AnalyticSeries, RichardsonFiniteDifference };

std::string_view to_string(DifferentiationMethod method);

struct ExactGradientResult {
  double force_gradient = 0.0;           // N/m, magnitude
  double capacitance_curvature = 0.0;    // C''(d), F/m^2
  DifferentiationMethod method = DifferentiationMethod::AnalyticSeries;
  std::size_t terms_used = 0;
};

// F'(d) = (V - V_c)^2 C''(d) / 2 for a perfect sphere above a grounded plane.
ExactGradientResult exact_force_gradient(
    double radius, double d, const VoltageState& voltage, double rel_tol = 1e-12,
    DifferentiationMethod method = DifferentiationMethod::AnalyticSeries,
    std::size_t max_terms = kDefaultSeriesTermBudget);

// pi eps0 R (V - V_c)^2 / d^2.
double pfa_force_gradient_perfect(double radius, double d, const VoltageState& voltage);

}  // namespace sphereplane
