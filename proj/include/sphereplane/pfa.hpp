#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "sphereplane/profile.hpp"

namespace sphereplane {

struct VoltageState {
  double applied = 0.0;  // V
  double contact = 0.0;  // V_c; also the parabola vertex V_0

  double difference() const { return applied - contact; }
};

struct OscillatorParams {
  double effective_mass = 1e-9;    // kg
  double rest_frequency = 2000.0;  // Hz

  void validate() const;
};

enum class Normalization { SI, N0Normalized };
enum class Provenance { ClosedForm, Quadrature, OracleSeries, OracleFd };

std::string_view to_string(Normalization n);
std::string_view to_string(Provenance p);
Normalization parse_normalization(std::string_view text);
Provenance parse_provenance(std::string_view text);

// Sampled k(d) (or force gradient) with strictly increasing d and positive values.
struct ForceGradientCurve {
  std::vector<double> distance;  // m
  std::vector<double> value;
  Normalization normalization = Normalization::SI;
  Provenance provenance = Provenance::ClosedForm;

  void validate() const;
};

// eps0 / (4 pi m_eff): converts the geometric PFA sum (1/m) into k_el (s^-2 V^-2).
double k_prefactor(const OscillatorParams& params);

// Plotting normalization N0 = eps0 / (4 pi m_eff) * 1e13.
double n0_normalization(const OscillatorParams& params);

// Geometric PFA sum sum_i R_i [1/(d+z_{i-1})^2 - 1/(d+z_i)^2] in 1/m, evaluated in
// the telescoped form R_1/d^2 + sum_{i>1} (R_i - R_{i-1})/(d+z_{i-1})^2 [- R_n/(d+z_n)^2].
// Exact for paraxial profiles only.
double pfa_sum_closed_form(double d, const SurfaceProfile& profile);

// The same quantity as 2 * int_0^inf r / (d + z(r))^3 dr, by adaptive quadrature
// split at the zone breakpoints. Works for either sagitta mode.
double pfa_sum_quadrature(double d, const SurfaceProfile& profile, double rel_tol = 1e-10);

double k_el_perfect(double d, double radius, const OscillatorParams& params);
double k_el_piecewise(double d, const SurfaceProfile& profile, const OscillatorParams& params);
double k_el_quadrature(double d, const SurfaceProfile& profile, const OscillatorParams& params,
                       double rel_tol = 1e-10);

// Closed form where it is exact (paraxial), quadrature otherwise.
double k_el(double d, const SurfaceProfile& profile, const OscillatorParams& params);

// Power-law reference curve with exponent -1.7 pinned to the perfect sphere at d0.
double k_el_reference_17(double d, double radius, double d0, const OscillatorParams& params);

// Magnitude of the PFA force gradient pi eps0 (V - V_c)^2 * (geometric sum), N/m.
double force_gradient(double d, const SurfaceProfile& profile, const VoltageState& voltage);

std::vector<double> log_spaced(double lo, double hi, std::size_t count);
std::vector<double> linear_spaced(double lo, double hi, std::size_t count);

ForceGradientCurve sample_curve(const SurfaceProfile& profile, std::span<const double> d_grid,
                                Normalization normalization,
                                const OscillatorParams& params = {});

ForceGradientCurve sample_reference_curve(double radius, double d0,
                                          std::span<const double> d_grid,
                                          Normalization normalization,
                                          const OscillatorParams& params = {});

}  // namespace sphereplane
