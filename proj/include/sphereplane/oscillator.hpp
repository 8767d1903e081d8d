#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sphereplane/pfa.hpp"
#include "sphereplane/profile.hpp"

namespace sphereplane {

struct CalibrationPoint {
  double commanded_distance = 0.0;  // m
  double applied_voltage = 0.0;     // V
  double measured_frequency = 0.0;  // Hz
};

// Contact potential varying linearly with log10 of the true separation.
struct VcDrift {
  double slope_per_decade = 0.0;   // V per decade of d
  double reference_distance = 1e-6;  // m, where the drift vanishes
};

// Static piezo bias: d_actual = d_commanded + amplitude * (d_commanded / reference)^exponent.
struct PiezoCreep {
  double amplitude = 0.0;            // m
  double exponent = 1.0;
  double reference_distance = 1e-6;  // m
};

struct NoiseSpec {
  double frequency_sigma = 0.0;  // Hz, i.i.d. Gaussian on the measured frequency
  std::optional<VcDrift> vc_drift;
  std::optional<PiezoCreep> piezo_creep;

  void validate() const;
};

struct SequenceMetadata {
  std::string seq_id = "seq0";
  SurfaceProfile profile;
  OscillatorParams oscillator;
  double contact_potential = 0.0;  // V, ground truth
  NoiseSpec noise;
  std::uint64_t seed = 0;
};

// Voltage sweeps at fixed commanded distances, ordered by distance then voltage.
struct CalibrationSequence {
  std::vector<CalibrationPoint> points;
  SequenceMetadata metadata;
};

// nu = sqrt(nu0^2 - k(d) (V - V_c)^2).
double frequency_at(double d, double voltage, const SurfaceProfile& profile,
                    const OscillatorParams& params, double contact_potential);

// Distance after the creep bias, and contact potential after drift.
double actual_distance(double commanded, const NoiseSpec& noise);
double contact_potential_at(double d, double contact_potential, const NoiseSpec& noise);

// Deterministic for a given seed: one mt19937_64 stream, one normal draw per
// point in (distance, voltage) order. Creep, then drift, then frequency noise.
CalibrationSequence generate_sequence(const SurfaceProfile& profile, const OscillatorParams& params,
                                      double contact_potential, std::span<const double> d_grid,
                                      std::span<const double> v_grid, const NoiseSpec& noise,
                                      std::uint64_t seed, std::string seq_id = "seq0");

// `count` voltages spaced evenly over [center - half_span, center + half_span].
std::vector<double> symmetric_voltage_grid(double center, double half_span, std::size_t count = 9);

// Frequency noise that makes the standard error of the mean of the per-distance
// V_c estimates equal target_sem, from linear error propagation through the
// parabola fit (noise enters nu, so sigma(nu^2) = 2 nu sigma).
double frequency_sigma_for_vc_sem(double target_sem, const SurfaceProfile& profile,
                                  const OscillatorParams& params, double contact_potential,
                                  std::span<const double> d_grid, std::span<const double> v_grid);

// Synthetic stand-in for a long contact-potential calibration campaign: a
// 151.3 um sphere, 500 separations from 160.4 nm to 5150.1 nm, V_c = 15.29 mV
// and frequency noise tuned for a 0.13 mV standard error of the mean.
struct CampaignConfig {
  SurfaceProfile profile = SurfaceProfile::perfect_sphere(151.3e-6);
  OscillatorParams oscillator{};
  double contact_potential = 15.29e-3;
  std::vector<double> distances;
  std::vector<double> voltages;
  double target_sem = 0.13e-3;
  NoiseSpec noise;
};

CampaignConfig fig3_campaign();

}  // namespace sphereplane
