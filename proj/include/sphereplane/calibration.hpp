#pragma once

#include <span>
#include <string>
#include <vector>

#include "sphereplane/oscillator.hpp"
#include "sphereplane/profile.hpp"

namespace sphereplane {

struct ValueWithError {
  double value = 0.0;
  double error = 0.0;  // one standard error
};

struct ParabolaFitResult {
  double distance = 0.0;  // m
  ValueWithError vc;      // V
  ValueWithError k;       // s^-2 V^-2
  ValueWithError nu0;     // Hz
  double residual_rms = 0.0;  // Hz^2
  std::size_t n_points = 0;
};

// Least squares nu^2 = a V^2 + b V + c over one distance group, solved on
// centred and scaled voltages. k = -a, V_c = -b / 2a, nu0^2 = c - b^2 / 4a.
ParabolaFitResult fit_parabola(std::span<const CalibrationPoint> group);

// One fit per distinct commanded distance, in order of first appearance.
std::vector<ParabolaFitResult> fit_sequence(std::span<const CalibrationPoint> points);

struct FitWindow {
  double d_min = 0.0;  // m, inclusive
  double d_max = 0.0;  // m, inclusive
};

struct ExponentFitResult {
  ValueWithError alpha;
  double log_amplitude = 0.0;  // ln k at d = 1 m
  FitWindow window;
  std::size_t n_points = 0;
  double r_squared = 0.0;
};

// OLS of ln k on ln d over the samples inside the window.
ExponentFitResult fit_exponent(std::span<const double> distance, std::span<const double> value,
                               const FitWindow& window);

// Levenberg-Marquardt fit of k = A d^alpha on the linear scale, seeded by the
// log-log solution. Weights large k (small d) more heavily than fit_exponent.
ExponentFitResult fit_exponent_nonlinear(std::span<const double> distance,
                                         std::span<const double> value, const FitWindow& window);

struct VcSummary {
  double mean = 0.0;  // V
  double sem = 0.0;   // V
  std::vector<double> distance;  // m
  std::vector<double> vc;        // V
  ValueWithError trend;          // V per decade of d
  bool independent = true;
  bool weighted = false;
};

// Minimum number of distances vc_independence accepts.
inline constexpr std::size_t kMinIndependenceFits = 10;

// Mean and SEM of the fitted V_c plus a straight-line trend against log10(d).
// Verdict: |trend| <= 2 stderr. The weighted variant uses 1 / stderr^2 weights.
VcSummary vc_independence(std::span<const ParabolaFitResult> fits, bool weighted = false);

// "V_c = 15.29 ± 0.13 mV"
std::string format_vc_summary(const VcSummary& summary);

struct ScanAxes {
  std::vector<double> bubble_radius;           // m
  std::vector<double> bubble_height;           // m
  std::vector<double> flat_radius_multiplier;  // x global radius
  std::vector<double> flat_height;             // m
  double global_radius = 0.0309;               // m
};

struct ScanRow {
  LensModelParameters params;
  double alpha = 0.0;
  double alpha_stderr = 0.0;
};

struct ScanResult {
  std::vector<ScanRow> rows;      // sorted by alpha, ascending
  std::vector<std::string> skipped;
};

// Builds every lens model on the grid, samples k by closed form on `samples`
// log-spaced distances spanning the window and fits the exponent.
ScanResult scan_profiles(const ScanAxes& axes, const FitWindow& window, std::size_t samples = 50);

// Exponent of one profile over the window, sampled as in scan_profiles.
ExponentFitResult profile_exponent(const SurfaceProfile& profile, const FitWindow& window,
                                   std::size_t samples = 50);

}  // namespace sphereplane
