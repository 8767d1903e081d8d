#include "sphereplane/oscillator.hpp"

#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "sphereplane/errors.hpp"

namespace sphereplane {

namespace {

double squared_frequency(double k, double voltage, double contact, const OscillatorParams& params) {
  const double dv = voltage - contact;
  return params.rest_frequency * params.rest_frequency - k * dv * dv;
}

}  // namespace

void NoiseSpec::validate() const {
  if (!(frequency_sigma >= 0.0)) throw DomainError("frequency noise sigma must be >= 0");
  if (vc_drift && !(vc_drift->reference_distance > 0.0)) {
    throw DomainError("drift reference distance must be positive");
  }
  if (piezo_creep && !(piezo_creep->reference_distance > 0.0)) {
    throw DomainError("creep reference distance must be positive");
  }
}

double frequency_at(double d, double voltage, const SurfaceProfile& profile,
                    const OscillatorParams& params, double contact_potential) {
  const double nu_sq = squared_frequency(k_el(d, profile, params), voltage, contact_potential, params);
  if (!(nu_sq > 0.0)) {
    throw DomainError(fmt::format(
        "oscillator destabilized at d = {} m, V = {} V (nu^2 = {} Hz^2)", d, voltage, nu_sq));
  }
  return std::sqrt(nu_sq);
}

double actual_distance(double commanded, const NoiseSpec& noise) {
  if (!noise.piezo_creep) return commanded;
  const auto& creep = *noise.piezo_creep;
  return commanded + creep.amplitude * std::pow(commanded / creep.reference_distance, creep.exponent);
}

double contact_potential_at(double d, double contact_potential, const NoiseSpec& noise) {
  if (!noise.vc_drift) return contact_potential;
  const auto& drift = *noise.vc_drift;
  return contact_potential + drift.slope_per_decade * std::log10(d / drift.reference_distance);
}

CalibrationSequence generate_sequence(const SurfaceProfile& profile, const OscillatorParams& params,
                                      double contact_potential, std::span<const double> d_grid,
                                      std::span<const double> v_grid, const NoiseSpec& noise,
                                      std::uint64_t seed, std::string seq_id) {
  params.validate();
  noise.validate();
  if (d_grid.empty()) throw DomainError("distance grid is empty");
  if (v_grid.size() < 5) {
    throw DomainError(fmt::format("need >= 5 voltages per distance, got {}", v_grid.size()));
  }

  CalibrationSequence sequence{
      {},
      SequenceMetadata{std::move(seq_id), profile, params, contact_potential, noise, seed}};
  sequence.points.reserve(d_grid.size() * v_grid.size());

  std::vector<std::string> unstable;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gaussian(0.0, 1.0);

  for (const double commanded : d_grid) {
    if (!(commanded > 0.0)) throw DomainError(fmt::format("distance {} is not positive", commanded));
    const double d = actual_distance(commanded, noise);
    if (!(d > 0.0)) {
      throw DomainError(fmt::format("creep drives commanded distance {} m to {} m", commanded, d));
    }
    const double vc = contact_potential_at(d, contact_potential, noise);
    const double k = k_el(d, profile, params);
    for (const double voltage : v_grid) {
      const double nu_sq = squared_frequency(k, voltage, vc, params);
      const double draw = gaussian(rng);
      if (!(nu_sq > 0.0)) {
        unstable.push_back(fmt::format("(d = {} m, V = {} V)", commanded, voltage));
        continue;
      }
      const double nu = std::sqrt(nu_sq) + noise.frequency_sigma * draw;
      if (nu < 0.0) throw DomainError("frequency noise produced a negative frequency");
      sequence.points.push_back({commanded, voltage, nu});
    }
  }

  if (!unstable.empty()) {
    std::string list;
    const std::size_t shown = std::min<std::size_t>(unstable.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) list += (i ? ", " : "") + unstable[i];
    throw DomainError(fmt::format(
        "oscillator destabilized at {} point(s): {}{}; shrink the voltage sweep", unstable.size(),
        list, unstable.size() > shown ? ", ..." : ""));
  }
  return sequence;
}

std::vector<double> symmetric_voltage_grid(double center, double half_span, std::size_t count) {
  if (count < 3) throw DomainError("voltage grid needs >= 3 points");
  if (!(half_span > 0.0)) throw DomainError("voltage half-span must be positive");
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = center - half_span + 2.0 * half_span * static_cast<double>(i) /
                                       static_cast<double>(count - 1);
  }
  return grid;
}

double frequency_sigma_for_vc_sem(double target_sem, const SurfaceProfile& profile,
                                  const OscillatorParams& params, double contact_potential,
                                  std::span<const double> d_grid, std::span<const double> v_grid) {
  if (!(target_sem > 0.0)) throw DomainError("target SEM must be positive");
  if (d_grid.empty() || v_grid.size() < 3) throw DomainError("grids too small");

  // Work in t = (V - mean) / spread; V_c's variance does not depend on the parameterization.
  double mean = 0.0;
  for (const double v : v_grid) mean += v;
  mean /= static_cast<double>(v_grid.size());
  double spread = 0.0;
  for (const double v : v_grid) spread = std::max(spread, std::abs(v - mean));

  const auto n = static_cast<Eigen::Index>(v_grid.size());
  Eigen::MatrixXd design(n, 3);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double t = (v_grid[static_cast<std::size_t>(j)] - mean) / spread;
    design.row(j) << t * t, t, 1.0;
  }
  const Eigen::Matrix3d normal_inverse = (design.transpose() * design).inverse();
  const Eigen::MatrixXd hat = normal_inverse * design.transpose();

  double variance_sum = 0.0;  // per unit sigma^2
  for (const double d : d_grid) {
    const double k = k_el(d, profile, params);
    Eigen::VectorXd weight(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double nu_sq =
          squared_frequency(k, v_grid[static_cast<std::size_t>(j)], contact_potential, params);
      if (!(nu_sq > 0.0)) throw DomainError("oscillator destabilized inside the voltage sweep");
      weight(j) = 4.0 * nu_sq;
    }
    const Eigen::Matrix3d covariance = hat * weight.asDiagonal() * hat.transpose();
    // nu^2 = alpha t^2 + beta t + gamma with alpha = -k s^2, beta = 2 k s (V_c - mean).
    const double alpha = -k * spread * spread;
    const double beta = 2.0 * k * spread * (contact_potential - mean);
    const Eigen::Vector3d gradient(spread * beta / (2.0 * alpha * alpha), -spread / (2.0 * alpha),
                                   0.0);
    variance_sum += gradient.dot(covariance * gradient);
  }
  const double count = static_cast<double>(d_grid.size());
  return target_sem * count / std::sqrt(variance_sum);
}

CampaignConfig fig3_campaign() {
  CampaignConfig config;
  config.distances = linear_spaced(160.4e-9, 5150.1e-9, 500);
  config.voltages = symmetric_voltage_grid(0.0, 0.5, 9);
  config.noise.frequency_sigma =
      frequency_sigma_for_vc_sem(config.target_sem, config.profile, config.oscillator,
                                 config.contact_potential, config.distances, config.voltages);
  return config;
}

}  // namespace sphereplane
