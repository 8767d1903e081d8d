// Acceptance criteria AC1-AC9. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cli.hpp"
#include "sphereplane/calibration.hpp"
#include "sphereplane/fd_solver.hpp"
#include "sphereplane/io.hpp"
#include "sphereplane/oracle.hpp"
#include "sphereplane/oscillator.hpp"
#include "sphereplane/pfa.hpp"
#include "sphereplane/profile.hpp"

using namespace sphereplane;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* id;
  const char* title;
  double time_limit_s;
  std::function<Outcome()> check;
};

constexpr double kR = 0.0309;

// ---------------------------------------------------------------------- AC1

SurfaceProfile random_profile(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(2, 5);
  std::uniform_real_distribution<double> log_radius(std::log(5e-6), std::log(0.1));
  std::uniform_real_distribution<double> log_rise(std::log(1e-9), std::log(500e-9));
  const int n = count(rng);
  std::vector<double> radii, heights;
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    radii.push_back(std::exp(log_radius(rng)));
    if (i + 1 < n) {
      z += std::exp(log_rise(rng));
      heights.push_back(z);
    }
  }
  return SurfaceProfile::stacked(radii, heights);
}

Outcome ac1() {
  std::mt19937_64 rng(20240601);
  const auto grid = log_spaced(20e-9, 3e-6, 20);
  double worst = 0.0;
  for (int p = 0; p < 50; ++p) {
    const auto profile = random_profile(rng);
    for (const double d : grid) {
      const double closed = pfa_sum_closed_form(d, profile);
      const double quad = pfa_sum_quadrature(d, profile);
      worst = std::max(worst, std::abs(quad / closed - 1.0));
    }
  }
  return {worst <= 1e-6, fmt::format("50 profiles x 20 d, max |quadrature/closed - 1| = {:.2e} (<= 1e-6)", worst)};
}

// ---------------------------------------------------------------------- AC2

Outcome ac2() {
  const OscillatorParams params;
  const double d = 30e-9;
  const double ratio = k_el(d, make_fig1_profile(), params) / k_el_perfect(d, kR, params);
  return {std::abs(ratio - 1.0) <= 0.015,
          fmt::format("k_mod(30 nm)/k_el(30 nm) = {:.6f}, |ratio - 1| = {:.4f} (<= 0.015)", ratio,
                      std::abs(ratio - 1.0))};
}

// ---------------------------------------------------------------------- AC3

Outcome ac3() {
  const OscillatorParams params;
  const FitWindow window{30e-9, 100e-9};
  const auto grid = log_spaced(window.d_min, window.d_max, 50);
  const auto fit_curve = [&](const ForceGradientCurve& c) { return fit_exponent(c.distance, c.value, window).alpha.value; };
  const double fig1 = fit_curve(sample_curve(make_fig1_profile(), grid, Normalization::SI, params));
  const double ref = fit_curve(sample_reference_curve(kR, 30e-9, grid, Normalization::SI, params));
  const double sphere = fit_curve(sample_curve(SurfaceProfile::perfect_sphere(kR), grid, Normalization::SI, params));
  const bool pass = fig1 >= -1.85 && fig1 <= -1.65 && std::abs(ref + 1.7) <= 1e-3 && std::abs(sphere + 2.0) <= 1e-3;
  return {pass, fmt::format("alpha fig1 = {:.4f} in [-1.85, -1.65], reference = {:.4f}, sphere = {:.4f}", fig1,
                            ref, sphere)};
}

// ---------------------------------------------------------------------- AC4

Outcome ac4() {
  ScanAxes axes;
  axes.bubble_radius = log_spaced(5e-6, 100e-6, 12);
  axes.bubble_height = log_spaced(2e-9, 50e-9, 12);
  axes.flat_radius_multiplier = linear_spaced(1.1, 3.0, 12);
  axes.flat_height = log_spaced(100e-9, 600e-9, 12);
  axes.global_radius = kR;
  const auto result = scan_profiles(axes, {30e-9, 100e-9});
  bool pass = !result.rows.empty();
  std::string detail = fmt::format("{} profiles ({} skipped);", result.rows.size(), result.skipped.size());
  for (const double target : {-1.70, -1.77, -1.80, -1.54}) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& row : result.rows) {
      if (std::abs(row.alpha - target) < std::abs(nearest - target)) nearest = row.alpha;
    }
    const bool hit = std::abs(nearest - target) <= 0.05;
    pass = pass && hit;
    detail += fmt::format(" {:.2f}->{:.4f}", target, nearest);
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------- AC5

Outcome ac5() {
  const VoltageState v{1.0, 0.0};
  const auto ratio_at = [&](double x) {
    const double d = x * kR;
    return exact_force_gradient(kR, d, v, 1e-12).force_gradient / pfa_force_gradient_perfect(kR, d, v);
  };
  const double r4 = ratio_at(1e-4);
  const auto grid = log_spaced(1e-5, 1e-1, 41);
  bool monotone = true;
  double previous = 2.0;
  for (const double x : grid) {
    const double r = ratio_at(x);
    monotone = monotone && r < previous;
    previous = r;
  }
  return {std::abs(r4 - 1.0) <= 0.01 && monotone,
          fmt::format("ratio(1e-4) = {:.8f}, monotone decreasing over [1e-5, 1e-1]: {}, ratio(0.1) = {:.6f}", r4,
                      monotone, previous)};
}

// ---------------------------------------------------------------------- AC6

Outcome ac6() {
  const double radius = 1e-4;
  const auto sphere = SurfaceProfile::perfect_sphere(radius, SagittaMode::Exact);
  bool pass = true;
  std::string detail;
  for (const double x : {0.05, 0.1, 0.2}) {
    const double d = x * radius;
    const double exact = exact_capacitance(radius, d).capacitance;
    double c[3];
    for (int level = 0; level < 3; ++level) {
      c[level] = fd_solve(sphere, d, documented_grid(radius, d, level)).capacitance;
    }
    const double err0 = std::abs(c[0] / exact - 1.0);
    const double order = observed_order(c[0], c[1], c[2]);
    pass = pass && err0 <= 0.02 && order >= 1.0;
    detail += fmt::format("{}d/R={}: err {:.3f}% -> {:.3f}% -> {:.3f}%, p = {:.2f}", detail.empty() ? "" : "; ", x,
                          100 * err0, 100 * std::abs(c[1] / exact - 1.0), 100 * std::abs(c[2] / exact - 1.0), order);
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------- AC7

Outcome ac7() {
  const auto campaign = fig3_campaign();
  const double vc = campaign.contact_potential;

  // Noiseless: every per-distance fit returns the generating parameters.
  const auto noiseless = generate_sequence(campaign.profile, campaign.oscillator, vc, campaign.distances,
                                           campaign.voltages, NoiseSpec{}, 1);
  const auto exact_fits = fit_sequence(noiseless.points);
  double worst = 0.0;
  for (const auto& f : exact_fits) {
    const double k = k_el(f.distance, campaign.profile, campaign.oscillator);
    worst = std::max({worst, std::abs(f.vc.value / vc - 1.0), std::abs(f.k.value / k - 1.0),
                      std::abs(f.nu0.value / campaign.oscillator.rest_frequency - 1.0)});
  }

  // Noisy campaign with sigma from the target SEM.
  const auto noisy = generate_sequence(campaign.profile, campaign.oscillator, vc, campaign.distances,
                                       campaign.voltages, campaign.noise, 1);
  const auto summary = vc_independence(fit_sequence(noisy.points));
  const double z = std::abs(summary.mean - vc) / summary.sem;

  NoiseSpec drifting = campaign.noise;
  drifting.vc_drift = VcDrift{5e-3};
  const auto drifted = generate_sequence(campaign.profile, campaign.oscillator, vc, campaign.distances,
                                         campaign.voltages, drifting, 1);
  const auto drift_summary = vc_independence(fit_sequence(drifted.points));

  const bool pass = exact_fits.size() == 500 && worst <= 1e-9 && z <= 3.0 && summary.independent &&
                    !drift_summary.independent;
  return {pass, fmt::format("noiseless worst rel err {:.1e}; {} ({:.2f} SEM off, independent {}); "
                            "5 mV/decade drift: independent {}",
                            worst, format_vc_summary(summary), z, summary.independent, drift_summary.independent)};
}

// ---------------------------------------------------------------------- AC8

Outcome ac8() {
  const auto fig1 = make_fig1_profile();
  const auto& segments = fig1.segments();
  const double r_outer = fig1.breakpoints().radii[2];
  const double sector_height = r_outer * r_outer / (2.0 * kR);
  const double flat_sector = *segments[1].end_height - segments[1].start_height;
  const double flattening = sector_height - flat_sector;
  const bool pass = std::abs(sector_height / 400e-9 - 1.0) <= 0.01 && std::abs(flattening / 150e-9 - 1.0) <= 0.01;
  return {pass, fmt::format("sector height {:.2f} nm (400), flattening {:.2f} nm (150)", sector_height * 1e9,
                            flattening * 1e9)};
}

// ---------------------------------------------------------------------- AC9

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      files[fs::relative(entry.path(), dir).string()] = io::read_text_file(entry.path());
    }
  }
  return files;
}

Outcome ac9() {
  const fs::path root = fs::temp_directory_path() / "spcal_acceptance";
  fs::remove_all(root);
  const std::vector<std::vector<std::string>> commands = {
      {"profile", "--preset", "fig1"},
      {"curve", "--preset", "fig1"},
      {"curve", "--figure", "fig2"},
      {"simulate", "--seed", "7"},
      {"calibrate", "--input", "SEQ"},
      {"fit-exponent", "--preset", "fig1", "--dmin", "30e-9", "--dmax", "100e-9"},
      {"oracle", "series", "--ratio", "1e-4", "--ratio", "0.1"},
      {"oracle", "fd", "--ratio", "0.1", "--export"},
      {"scan", "--steps", "4"},
  };
  std::vector<std::string> failures;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    std::map<std::string, std::string> runs[2];
    for (int rep = 0; rep < 2; ++rep) {
      const auto dir = root / fmt::format("run{}", rep) / std::to_string(i);
      fs::create_directories(dir);
      auto args = commands[i];
      for (auto& a : args) {
        if (a == "SEQ") a = (root / fmt::format("run{}", rep) / "3" / "sequence.csv").string();
      }
      args.insert(args.begin(), {"-o", dir.string()});
      std::ostringstream out, err;
      if (spcal::run_cli(args, out, err) != spcal::kExitOk) {
        failures.push_back(fmt::format("'{}' exited nonzero: {}", commands[i][0], err.str()));
      }
      runs[rep] = snapshot(dir);
    }
    if (runs[0].empty() || runs[0] != runs[1]) failures.push_back(fmt::format("'{}' outputs differ", commands[i][0]));
  }
  fs::remove_all(root);
  return {failures.empty(), failures.empty() ? fmt::format("{} commands rerun, all outputs byte-identical", commands.size())
                                             : failures.front()};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"AC1", "closed-form/quadrature equivalence", 10, ac1},
      {"AC2", "fig. 2 crossing at 30 nm", 1e9, ac2},
      {"AC3", "anomalous exponent", 1, ac3},
      {"AC4", "exponent-range scan", 60, ac4},
      {"AC5", "image-series oracle", 1, ac5},
      {"AC6", "finite-difference solver", 300, ac6},
      {"AC7", "calibration round trip", 30, ac7},
      {"AC8", "fig. 1 geometry", 1e9, ac8},
      {"AC9", "CLI determinism", 1e9, ac9},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, fmt::format("exception: {}", e.what())};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.time_limit_s;
    const bool pass = outcome.pass && in_time;
    if (!pass) ++failed;
    std::string limit = c.time_limit_s < 1e9 ? fmt::format(" / limit {:g} s", c.time_limit_s) : "";
    std::cout << fmt::format("{} {} {}: {} [{:.2f} s{}]\n", c.id, pass ? "PASS" : "FAIL", c.title, outcome.detail,
                             seconds, limit)
              << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
