#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sphereplane/calibration.hpp"
#include "sphereplane/errors.hpp"
#include "sphereplane/fd_solver.hpp"
#include "sphereplane/io.hpp"
#include "sphereplane/oracle.hpp"
#include "sphereplane/oscillator.hpp"
#include "sphereplane/pfa.hpp"
#include "sphereplane/profile.hpp"

namespace spcal {

namespace fs = std::filesystem;
using namespace sphereplane;
using io::Json;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct Common {
  std::string output_dir;
  std::string config;
};

class Output {
 public:
  Output(const Common& common, std::ostream& out) : out_(out) {
    if (!common.output_dir.empty()) {
      dir_ = common.output_dir;
    } else if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
      dir_ = env;
    } else {
      dir_ = ".";
    }
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path path = dir_ / name;
    io::write_text_file(path, content);
    out_ << "wrote " << path.string() << '\n';
  }

  void write_json(const std::string& name, const Json& json) { write(name, json.dump(2) + "\n"); }

 private:
  std::ostream& out_;
  fs::path dir_;
};

// Config keys are option names without the leading dashes; '_' and '-' are
// interchangeable. Values already given on the command line win.
void apply_config(CLI::App& command, const std::string& path) {
  const Json json = io::read_json_file(path);
  if (!json.is_object()) throw ConfigError(fmt::format("{}: expected a JSON object", path));
  for (const auto& [raw_key, value] : json.items()) {
    if (raw_key == "schema_version") {
      if (!value.is_number_integer() || value.get<int>() != io::kSchemaVersion) {
        throw ConfigError(fmt::format("{}: schema_version must be {}", path, io::kSchemaVersion));
      }
      continue;
    }
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    CLI::Option* option = key == "config" ? nullptr : command.get_option_no_throw("--" + key);
    if (option == nullptr) {
      throw ConfigError(fmt::format("{}: unknown key '{}' for '{}'", path, raw_key, command.get_name()));
    }
    if (option->count() > 0) continue;
    std::vector<std::string> texts;
    const auto text_of = [&](const Json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
      if (v.is_number_integer()) return std::to_string(v.get<long long>());
      if (v.is_number()) return io::format_double(v.get<double>());
      throw ConfigError(fmt::format("{}: key '{}' has an unsupported value {}", path, raw_key, v.dump()));
    };
    if (value.is_array()) {
      for (const auto& v : value) texts.push_back(text_of(v));
    } else {
      texts.push_back(text_of(value));
    }
    try {
      for (const auto& t : texts) option->add_result(t);
      option->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError(fmt::format("{}: key '{}': {}", path, raw_key, e.what()));
    }
  }
}

SagittaMode parse_sagitta(const std::string& text) {
  if (text == "paraxial") return SagittaMode::Paraxial;
  if (text == "exact") return SagittaMode::Exact;
  throw ConfigError(fmt::format("unknown sagitta mode '{}' (expected paraxial or exact)", text));
}

// Preset name or JSON file; --sagitta overrides the mode when given.
SurfaceProfile resolve_profile(const std::string& preset, double radius, const std::string& file,
                               const std::string& sagitta) {
  std::optional<SurfaceProfile> profile;
  if (!file.empty()) {
    profile.emplace(io::profile_from_json(io::read_json_file(file)));
  } else if (preset == "fig1") {
    profile.emplace(make_fig1_profile());
  } else if (preset == "perfect") {
    profile.emplace(SurfaceProfile::perfect_sphere(radius));
  } else {
    throw ConfigError(fmt::format("unknown profile preset '{}' (expected fig1 or perfect)", preset));
  }
  if (!sagitta.empty()) return profile->with_mode(parse_sagitta(sagitta));
  return *profile;
}

std::string curve_csv(const ForceGradientCurve& curve) {
  std::ostringstream s;
  io::write_curve_csv(s, curve);
  return s.str();
}

Json curve_json(const ForceGradientCurve& curve) {
  curve.validate();
  Json json;
  json["schema_version"] = io::kSchemaVersion;
  json["normalization"] = to_string(curve.normalization);
  json["provenance"] = to_string(curve.provenance);
  json["d_m"] = curve.distance;
  json["k_value"] = curve.value;
  return json;
}

void write_table(Output& output, const std::string& base, const std::string& format,
                 const io::Table& table) {
  if (format == "json") {
    Json json;
    json["schema_version"] = io::kSchemaVersion;
    json["rows"] = table.to_json();
    output.write_json(base + ".json", json);
  } else {
    std::ostringstream s;
    table.write_csv(s);
    output.write(base + ".csv", s.str());
  }
}

std::vector<double> distance_grid(double lo, double hi, std::size_t count, const std::string& spacing) {
  if (spacing == "log") return log_spaced(lo, hi, count);
  if (spacing == "linear") return linear_spaced(lo, hi, count);
  throw ConfigError(fmt::format("unknown spacing '{}' (expected log or linear)", spacing));
}

// ---------------------------------------------------------------- profile

struct ProfileArgs {
  std::string preset = "fig1";
  double radius = 0.0309;
  std::string input;
  std::string sagitta;
  std::size_t samples = 200;
  double r_max = 0.0;
  std::string name = "profile";
};

int cmd_profile(const ProfileArgs& a, Output& output, std::ostream& out) {
  const auto profile = resolve_profile(a.preset, a.radius, a.input, a.sagitta);
  if (a.samples < 2) throw ConfigError("--samples must be >= 2");
  double r_max = a.r_max;
  if (r_max <= 0.0) {
    const double last = profile.breakpoints().radii.back();
    r_max = last > 0.0 ? 2.0 * last : std::sqrt(2.0 * profile.outer_radius() * 1e-6);
  }
  r_max = std::min(r_max, profile.max_radius());
  io::Table table;
  table.columns = {"r_m", "z_m"};
  for (const double r : linear_spaced(0.0, r_max, a.samples)) {
    table.add_row({r, profile.height_at(r)});
  }
  output.write_json(a.name + ".json", io::profile_to_json(profile));
  std::ostringstream csv;
  table.write_csv(csv);
  output.write(a.name + "_samples.csv", csv.str());
  const auto segments = profile.segments();
  out << fmt::format("{} segment(s), sagitta {}\n", segments.size(),
                     profile.sagitta_mode() == SagittaMode::Paraxial ? "paraxial" : "exact");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    out << fmt::format("  R = {:.6g} m, z: {:.6g} m -> {}, starts at r = {:.6g} m\n",
                       segments[i].curvature_radius, segments[i].start_height,
                       segments[i].end_height ? fmt::format("{:.6g} m", *segments[i].end_height)
                                              : std::string("unbounded"),
                       profile.breakpoints().radii[i]);
  }
  return kExitOk;
}

// ------------------------------------------------------------------ curve

struct CurveArgs {
  std::string preset = "fig1";
  std::string profile;
  std::string sagitta;
  double radius = 0.0309;
  double d0 = 30e-9;
  double d_min = 20e-9;
  double d_max = 3e-6;
  std::size_t points = 200;
  std::string spacing = "log";
  std::string normalization;
  std::string figure;
  std::string format = "csv";
  double mass = 1e-9;
  std::string name = "curve";
};

ForceGradientCurve preset_curve(const std::string& preset, const std::string& profile_file,
                                const std::string& sagitta, double radius, double d0,
                                std::span<const double> grid, Normalization normalization,
                                const OscillatorParams& params) {
  if (profile_file.empty() && preset == "reference17") {
    return sample_reference_curve(radius, d0, grid, normalization, params);
  }
  const auto profile = resolve_profile(preset, radius, profile_file, sagitta);
  return sample_curve(profile, grid, normalization, params);
}

int cmd_curve(const CurveArgs& a, Output& output, std::ostream& out) {
  OscillatorParams params;
  params.effective_mass = a.mass;
  params.validate();
  if (!(a.d_min > 0.0)) throw DomainError(fmt::format("--dmin must be positive, got {}", a.d_min));
  if (!(a.d_max > a.d_min)) throw DomainError("--dmax must exceed --dmin");
  if (a.format != "csv" && a.format != "json") throw ConfigError("--format must be csv or json");
  const auto grid = distance_grid(a.d_min, a.d_max, a.points, a.spacing);

  if (!a.figure.empty()) {
    if (a.figure != "fig2") throw ConfigError(fmt::format("unknown figure '{}'", a.figure));
    const auto norm = parse_normalization(a.normalization.empty() ? "n0" : a.normalization);
    io::FigureDataset figure;
    figure.name = "fig2";
    figure.x_label = "d_m";
    figure.y_label = norm == Normalization::N0Normalized ? "k_el / N0" : "k_el (s^-2 V^-2)";
    figure.scales = {"linear", "log-log"};
    const std::pair<const char*, const char*> series[] = {
        {"perfect", "perfect"}, {"fig1", "fig1"}, {"reference17", "reference17"}};
    for (const auto& [name, preset] : series) {
      const auto curve = preset_curve(preset, "", "", a.radius, a.d0, grid, norm, params);
      figure.series.push_back({name, curve.distance, curve.value});
      output.write(fmt::format("fig2_{}.csv", name), curve_csv(curve));
    }
    output.write_json("fig2.json", io::figure_to_json(figure));
    const auto k30 = [&](const char* preset) {
      const double d = 30e-9;
      return preset_curve(preset, "", "", a.radius, a.d0, std::span<const double>(&d, 1), norm,
                          params)
          .value.front();
    };
    out << fmt::format("k(30 nm) imperfect / perfect = {:.6f}\n", k30("fig1") / k30("perfect"));
    return kExitOk;
  }

  const auto norm = parse_normalization(a.normalization.empty() ? "si" : a.normalization);
  const auto curve = preset_curve(a.preset, a.profile, a.sagitta, a.radius, a.d0, grid, norm, params);
  if (a.format == "json") {
    output.write_json(a.name + ".json", curve_json(curve));
  } else {
    output.write(a.name + ".csv", curve_csv(curve));
  }
  out << fmt::format("{} samples, {} .. {} m, {} / {}\n", curve.distance.size(), a.d_min, a.d_max,
                     to_string(curve.normalization), to_string(curve.provenance));
  return kExitOk;
}

// --------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string campaign = "fig3";
  std::string preset;
  std::string profile;
  std::string sagitta;
  double radius = 151.3e-6;
  double vc = 15.29e-3;
  double d_min = 160.4e-9;
  double d_max = 5150.1e-9;
  std::size_t distances = 500;
  std::string spacing = "linear";
  double v_center = 0.0;
  double v_span = 0.5;
  std::size_t voltages = 9;
  std::optional<double> noise;
  double target_sem = 0.13e-3;
  std::optional<double> drift;
  double drift_ref = 1e-6;
  std::optional<double> creep;
  double creep_exponent = 1.0;
  double creep_ref = 1e-6;
  std::uint64_t seed = 1;
  std::string seq_id = "seq0";
  bool blind = false;
  double mass = 1e-9;
  double rest_frequency = 2000.0;
  std::string name = "sequence";
};

int cmd_simulate(const SimulateArgs& a, Output& output, std::ostream& out) {
  if (a.campaign != "fig3") throw ConfigError(fmt::format("unknown campaign '{}'", a.campaign));
  const auto profile = (a.preset.empty() && a.profile.empty())
                           ? SurfaceProfile::perfect_sphere(a.radius)
                           : resolve_profile(a.preset.empty() ? "perfect" : a.preset, a.radius,
                                             a.profile, a.sagitta);
  OscillatorParams params{a.mass, a.rest_frequency};
  params.validate();
  if (!(a.d_min > 0.0) || !(a.d_max > a.d_min)) throw DomainError("need 0 < --dmin < --dmax");
  const auto d_grid = distance_grid(a.d_min, a.d_max, a.distances, a.spacing);
  const auto v_grid = symmetric_voltage_grid(a.v_center, a.v_span, a.voltages);

  NoiseSpec noise;
  if (a.drift) noise.vc_drift = VcDrift{*a.drift, a.drift_ref};
  if (a.creep) noise.piezo_creep = PiezoCreep{*a.creep, a.creep_exponent, a.creep_ref};
  noise.frequency_sigma =
      a.noise ? *a.noise
              : frequency_sigma_for_vc_sem(a.target_sem, profile, params, a.vc, d_grid, v_grid);

  const auto sequence =
      generate_sequence(profile, params, a.vc, d_grid, v_grid, noise, a.seed, a.seq_id);
  std::ostringstream csv;
  io::write_sequence_csv(csv, sequence);
  output.write(a.name + ".csv", csv.str());
  output.write_json(a.name + ".json", io::sequence_metadata_json(sequence.metadata, d_grid.size(),
                                                                 v_grid.size(), a.blind));
  out << fmt::format("{} points: {} distances x {} voltages, seed {}\n", sequence.points.size(),
                     d_grid.size(), v_grid.size(), a.seed);
  if (!a.blind) out << fmt::format("frequency noise sigma = {:.6g} Hz\n", noise.frequency_sigma);
  return kExitOk;
}

// -------------------------------------------------------------- calibrate

struct CalibrateArgs {
  std::string input;
  bool weighted = false;
  std::string name = "calibration";
};

int cmd_calibrate(const CalibrateArgs& a, Output& output, std::ostream& out) {
  if (a.input.empty()) throw ConfigError("calibrate needs --input <sequence.csv>");
  std::ifstream in(a.input, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", a.input));
  const auto sequences = io::read_sequence_csv(in, a.input);

  Json fits_json = Json::array();
  Json summaries = Json::array();
  for (const auto& seq : sequences) {
    const auto fits = fit_sequence(seq.points);
    Json entry;
    entry["seq_id"] = seq.seq_id;
    Json list = Json::array();
    for (const auto& f : fits) list.push_back(io::fit_report_json(f));
    entry["fits"] = std::move(list);
    fits_json.push_back(std::move(entry));

    const auto summary = vc_independence(fits, a.weighted);
    Json s = io::vc_summary_json(summary);
    s["seq_id"] = seq.seq_id;
    summaries.push_back(std::move(s));
    out << fmt::format("{}: {} ({} distances)\n", seq.seq_id, format_vc_summary(summary), fits.size());
    out << fmt::format("{}: trend {:.4g} ± {:.4g} mV/decade, independent of separation: {}\n",
                       seq.seq_id, summary.trend.value * 1e3, summary.trend.error * 1e3,
                       summary.independent ? "true" : "false");
  }
  Json report;
  report["schema_version"] = io::kSchemaVersion;
  report["sequences"] = std::move(fits_json);
  output.write_json(a.name + "_fits.json", report);
  Json summary;
  summary["schema_version"] = io::kSchemaVersion;
  summary["summaries"] = std::move(summaries);
  output.write_json(a.name + "_summary.json", summary);
  return kExitOk;
}

// ----------------------------------------------------------- fit-exponent

struct FitExponentArgs {
  std::string curve;
  std::string preset;
  std::string profile;
  double radius = 0.0309;
  double d0 = 30e-9;
  std::optional<double> d_min;
  std::optional<double> d_max;
  std::size_t points = 50;
  std::string method = "loglog";
  std::string name = "exponent";
};

int cmd_fit_exponent(const FitExponentArgs& a, Output& output, std::ostream& out) {
  if (!a.d_min || !a.d_max) throw ConfigError("fit-exponent requires --dmin and --dmax");
  const FitWindow window{*a.d_min, *a.d_max};
  if (!(window.d_min > 0.0) || !(window.d_max > window.d_min)) {
    throw DomainError("fit window needs 0 < --dmin < --dmax");
  }
  if (a.method != "loglog" && a.method != "nonlinear") {
    throw ConfigError("--method must be loglog or nonlinear");
  }
  ForceGradientCurve curve;
  if (!a.curve.empty()) {
    std::ifstream in(a.curve, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot open '{}'", a.curve));
    curve = io::read_curve_csv(in, a.curve);
  } else {
    const auto grid = log_spaced(window.d_min, window.d_max, a.points);
    curve = preset_curve(a.preset.empty() ? "fig1" : a.preset, a.profile, "", a.radius, a.d0, grid,
                         Normalization::SI, {});
  }
  const auto fit = a.method == "loglog" ? fit_exponent(curve.distance, curve.value, window)
                                        : fit_exponent_nonlinear(curve.distance, curve.value, window);
  output.write_json(a.name + ".json", io::exponent_report_json(fit, a.method));
  out << fmt::format("alpha = {:.4f} ± {:.4f} over [{:.4g}, {:.4g}] m ({} points, r^2 = {:.6f})\n",
                     fit.alpha.value, fit.alpha.error, window.d_min, window.d_max, fit.n_points,
                     fit.r_squared);
  return kExitOk;
}

// ----------------------------------------------------------------- oracle

struct SeriesArgs {
  double radius = 0.0309;
  std::vector<double> ratios = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  double tolerance = 1e-12;
  std::string format = "csv";
  std::string name = "oracle_series";
};

int cmd_oracle_series(const SeriesArgs& a, Output& output, std::ostream& out) {
  if (!(a.radius > 0.0)) throw DomainError("--radius must be positive");
  io::Table table;
  table.columns = {"ratio", "d_m", "capacitance_F", "capacitance_over_4pi_eps0_R", "terms",
                   "force_gradient_N_per_m", "pfa_force_gradient_N_per_m", "exact_over_pfa"};
  const double unit = 4.0 * std::numbers::pi * kVacuumPermittivity * a.radius;
  const VoltageState volt{1.0, 0.0};
  for (const double ratio : a.ratios) {
    if (!(ratio > 0.0)) throw DomainError(fmt::format("--ratio must be positive, got {}", ratio));
    const double d = ratio * a.radius;
    const auto c = exact_capacitance(a.radius, d, a.tolerance);
    const auto g = exact_force_gradient(a.radius, d, volt, a.tolerance);
    const double pfa = pfa_force_gradient_perfect(a.radius, d, volt);
    table.add_row({ratio, d, c.capacitance, c.capacitance / unit,
                   static_cast<long long>(c.terms_used), g.force_gradient, pfa,
                   g.force_gradient / pfa});
    out << fmt::format("d/R = {:<8.3g} C/(4 pi eps0 R) = {:.12g}  F'/F'_pfa = {:.8f}\n", ratio,
                       c.capacitance / unit, g.force_gradient / pfa);
  }
  write_table(output, a.name, a.format, table);
  return kExitOk;
}

struct FdArgs {
  std::string profile = "perfect";
  double radius = 1e-4;
  std::vector<double> ratios = {0.1};
  int refine = 0;
  std::string boundary = "grounded";
  std::string closure = "mirror";
  double rim = 0.0;
  double tolerance = 1e-10;
  bool export_field = false;
  std::string format = "csv";
  std::string name = "oracle_fd";
};

int cmd_oracle_fd(const FdArgs& a, Output& output, std::ostream& out) {
  if (!(a.radius > 0.0)) throw DomainError("--radius must be positive");
  std::optional<SurfaceProfile> profile;
  if (a.profile == "perfect") {
    profile.emplace(SurfaceProfile::perfect_sphere(a.radius, SagittaMode::Exact));
  } else if (a.profile == "flattened") {
    const double radii[] = {1.6 * a.radius, a.radius};
    const double heights[] = {0.02 * a.radius};
    profile.emplace(SurfaceProfile::stacked(radii, heights, SagittaMode::Exact));
  } else {
    profile.emplace(io::profile_from_json(io::read_json_file(a.profile)));
  }
  const bool sphere = a.profile == "perfect";

  FdOptions options;
  options.tolerance = a.tolerance;
  if (a.closure == "flat-top") {
    options.closure = LensClosure::FlatTop;
    options.rim_radius = a.rim > 0.0 ? a.rim : 0.8 * profile->outer_radius();
  } else if (a.closure != "mirror") {
    throw ConfigError("--closure must be mirror or flat-top");
  }

  io::Table table;
  table.columns = {"ratio", "d_m", "capacitance_fd_F", "capacitance_fd_charge_F",
                   "capacitance_series_F", "fd_over_series", "iterations", "gap_nodes"};
  for (const double ratio : a.ratios) {
    const double d = ratio * profile->outer_radius();
    auto grid = documented_grid(profile->outer_radius(), d, a.refine);
    if (a.boundary == "zero-flux") {
      grid.outer_boundary = OuterBoundary::ZeroFlux;
    } else if (a.boundary != "grounded") {
      throw ConfigError("--boundary must be grounded or zero-flux");
    }
    const auto sol = fd_solve(*profile, d, grid, options);
    const double series = sphere ? exact_capacitance(a.radius, d).capacitance : kNan;
    table.add_row({ratio, d, sol.capacitance, sol.capacitance_from_charge,
                   sphere ? io::Table::Cell(series) : io::Table::Cell(std::string()),
                   sphere ? io::Table::Cell(sol.capacitance / series) : io::Table::Cell(std::string()),
                   static_cast<long long>(sol.iterations), static_cast<long long>(sol.gap_nodes)});
    out << fmt::format("d/R = {:<6.3g} C_fd = {:.8g} F", ratio, sol.capacitance);
    if (sphere) out << fmt::format("  C_series = {:.8g} F  ratio = {:.6f}", series, sol.capacitance / series);
    out << fmt::format("  ({} sweeps)\n", sol.iterations);
    if (a.export_field) {
      std::ostringstream csv;
      io::write_potential_csv(csv, sol);
      const auto stem = fmt::format("{}_potential_{:g}", a.name, ratio);
      output.write(stem + ".csv", csv.str());
      output.write_json(stem + ".json", io::fd_solution_json(sol, grid, d));
    }
  }
  write_table(output, a.name, a.format, table);
  return kExitOk;
}

// ------------------------------------------------------------------- scan

struct ScanArgs {
  double rcd_min = 5e-6, rcd_max = 100e-6;
  double h_min = 2e-9, h_max = 50e-9;
  double mult_min = 1.1, mult_max = 3.0;
  double hab_min = 100e-9, hab_max = 600e-9;
  std::size_t steps = 12;
  double radius = 0.0309;
  double d_min = 30e-9, d_max = 100e-9;
  std::size_t samples = 50;
  std::string format = "csv";
  std::string name = "scan";
};

std::vector<double> axis(double lo, double hi, std::size_t steps, bool logarithmic) {
  if (steps == 1 || lo == hi) return {lo};
  return logarithmic ? log_spaced(lo, hi, steps) : linear_spaced(lo, hi, steps);
}

int cmd_scan(const ScanArgs& a, Output& output, std::ostream& out, std::ostream& err) {
  if (a.steps < 1) throw ConfigError("--steps must be >= 1");
  ScanAxes axes;
  axes.bubble_radius = axis(a.rcd_min, a.rcd_max, a.steps, true);
  axes.bubble_height = axis(a.h_min, a.h_max, a.steps, true);
  axes.flat_radius_multiplier = axis(a.mult_min, a.mult_max, a.steps, false);
  axes.flat_height = axis(a.hab_min, a.hab_max, a.steps, true);
  axes.global_radius = a.radius;
  const auto result = scan_profiles(axes, {a.d_min, a.d_max}, a.samples);
  for (const auto& line : result.skipped) err << line << '\n';

  io::Table table;
  table.columns = {"bubble_radius_m", "bubble_height_m", "flat_radius_multiplier", "flat_height_m",
                   "alpha", "alpha_stderr"};
  for (const auto& row : result.rows) {
    table.add_row({row.params.bubble_radius, row.params.bubble_height,
                   row.params.flat_radius_multiplier, row.params.flat_height, row.alpha,
                   row.alpha_stderr});
  }
  write_table(output, a.name, a.format, table);
  out << fmt::format("{} profiles, {} skipped\n", result.rows.size(), result.skipped.size());
  if (!result.rows.empty()) {
    out << fmt::format("alpha range [{:.4f}, {:.4f}]\n", result.rows.front().alpha,
                       result.rows.back().alpha);
    for (const double target : {-1.70, -1.77, -1.80, -1.54}) {
      const auto within = std::count_if(result.rows.begin(), result.rows.end(), [&](const ScanRow& r) {
        return std::abs(r.alpha - target) <= 0.05;
      });
      out << fmt::format("  {} profile(s) within 0.05 of {:.2f}\n", within, target);
    }
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sphere-plane electrostatic calibration toolkit", "spcal"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("-o,--output-dir", common.output_dir,
                 fmt::format("Directory for output files (default ${} or .)", kOutputDirEnv));

  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON file with option values; flags override it");
  };

  ProfileArgs profile_args;
  auto* profile = app.add_subcommand("profile", "Write a lens profile as JSON plus sampled heights");
  profile->add_option("--preset", profile_args.preset, "fig1 or perfect")->capture_default_str();
  profile->add_option("--radius", profile_args.radius, "Sphere radius for the perfect preset, m")->capture_default_str();
  profile->add_option("--input", profile_args.input, "Profile JSON file instead of a preset");
  profile->add_option("--sagitta", profile_args.sagitta, "paraxial or exact");
  profile->add_option("--samples", profile_args.samples, "Number of (r, z) samples")->capture_default_str();
  profile->add_option("--rmax", profile_args.r_max, "Largest sampled radius, m (default: automatic)");
  profile->add_option("--name", profile_args.name, "Output file stem")->capture_default_str();
  add_config(profile);

  CurveArgs curve_args;
  auto* curve = app.add_subcommand("curve", "Sample k(d) for a profile or the fig2 series");
  curve->add_option("--preset", curve_args.preset, "perfect, fig1 or reference17")->capture_default_str();
  curve->add_option("--profile", curve_args.profile, "Profile JSON file");
  curve->add_option("--sagitta", curve_args.sagitta, "paraxial or exact");
  curve->add_option("--radius", curve_args.radius, "Sphere radius, m")->capture_default_str();
  curve->add_option("--d0", curve_args.d0, "Pinning distance of the -1.7 reference, m")->capture_default_str();
  curve->add_option("--dmin", curve_args.d_min, "Smallest separation, m")->capture_default_str();
  curve->add_option("--dmax", curve_args.d_max, "Largest separation, m")->capture_default_str();
  curve->add_option("--points", curve_args.points, "Number of samples")->capture_default_str();
  curve->add_option("--spacing", curve_args.spacing, "log or linear")->capture_default_str();
  curve->add_option("--normalization", curve_args.normalization, "si or n0 (default si; n0 for figures)");
  curve->add_option("--figure", curve_args.figure, "Emit a figure dataset (fig2)");
  curve->add_option("--format", curve_args.format, "csv or json")->capture_default_str();
  curve->add_option("--mass", curve_args.mass, "Effective mass, kg")->capture_default_str();
  curve->add_option("--name", curve_args.name, "Output file stem")->capture_default_str();
  add_config(curve);

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic calibration sequence");
  simulate->add_option("--campaign", sim_args.campaign, "Campaign preset (fig3)")->capture_default_str();
  simulate->add_option("--preset", sim_args.preset, "Profile preset (perfect or fig1)");
  simulate->add_option("--profile", sim_args.profile, "Profile JSON file");
  simulate->add_option("--sagitta", sim_args.sagitta, "paraxial or exact");
  simulate->add_option("--radius", sim_args.radius, "Sphere radius, m")->capture_default_str();
  simulate->add_option("--vc", sim_args.vc, "True contact potential, V")->capture_default_str();
  simulate->add_option("--dmin", sim_args.d_min, "Smallest commanded separation, m")->capture_default_str();
  simulate->add_option("--dmax", sim_args.d_max, "Largest commanded separation, m")->capture_default_str();
  simulate->add_option("--distances", sim_args.distances, "Number of separations")->capture_default_str();
  simulate->add_option("--spacing", sim_args.spacing, "linear or log")->capture_default_str();
  simulate->add_option("--vcenter", sim_args.v_center, "Centre of the voltage sweep, V")->capture_default_str();
  simulate->add_option("--vspan", sim_args.v_span, "Half-width of the voltage sweep, V")->capture_default_str();
  simulate->add_option("--voltages", sim_args.voltages, "Voltages per separation")->capture_default_str();
  simulate->add_option("--noise", sim_args.noise, "Frequency noise sigma, Hz (default: from --target-sem)");
  simulate->add_option("--target-sem", sim_args.target_sem, "Target SEM of the fitted V_c, V")->capture_default_str();
  simulate->add_option("--drift", sim_args.drift, "Contact-potential drift, V per decade of d");
  simulate->add_option("--drift-ref", sim_args.drift_ref, "Distance where the drift vanishes, m")->capture_default_str();
  simulate->add_option("--creep", sim_args.creep, "Piezo creep amplitude, m");
  simulate->add_option("--creep-exponent", sim_args.creep_exponent, "Piezo creep exponent")->capture_default_str();
  simulate->add_option("--creep-ref", sim_args.creep_ref, "Piezo creep reference distance, m")->capture_default_str();
  simulate->add_option("--seed", sim_args.seed, "Random seed")->capture_default_str();
  simulate->add_option("--seq-id", sim_args.seq_id, "Sequence label")->capture_default_str();
  simulate->add_flag("--blind", sim_args.blind, "Leave ground truth out of the metadata");
  simulate->add_option("--mass", sim_args.mass, "Effective mass, kg")->capture_default_str();
  simulate->add_option("--rest-frequency", sim_args.rest_frequency, "nu0, Hz")->capture_default_str();
  simulate->add_option("--name", sim_args.name, "Output file stem")->capture_default_str();
  add_config(simulate);

  CalibrateArgs cal_args;
  auto* calibrate = app.add_subcommand("calibrate", "Fit parabolas and summarize V_c");
  calibrate->add_option("--input,input", cal_args.input, "Sequence CSV");
  calibrate->add_flag("--weighted", cal_args.weighted, "Inverse-variance weighted summary");
  calibrate->add_option("--name", cal_args.name, "Output file stem")->capture_default_str();
  add_config(calibrate);

  FitExponentArgs fit_args;
  auto* fit = app.add_subcommand("fit-exponent", "Fit a power law to k(d) inside a window");
  fit->add_option("--curve", fit_args.curve, "Curve CSV");
  fit->add_option("--preset", fit_args.preset, "perfect, fig1 or reference17");
  fit->add_option("--profile", fit_args.profile, "Profile JSON file");
  fit->add_option("--radius", fit_args.radius, "Sphere radius, m")->capture_default_str();
  fit->add_option("--d0", fit_args.d0, "Pinning distance of the -1.7 reference, m")->capture_default_str();
  fit->add_option("--dmin", fit_args.d_min, "Window lower edge, m (required)");
  fit->add_option("--dmax", fit_args.d_max, "Window upper edge, m (required)");
  fit->add_option("--points", fit_args.points, "Samples for presets")->capture_default_str();
  fit->add_option("--method", fit_args.method, "loglog or nonlinear")->capture_default_str();
  fit->add_option("--name", fit_args.name, "Output file stem")->capture_default_str();
  add_config(fit);

  auto* oracle = app.add_subcommand("oracle", "Compare against exact electrostatic oracles");
  oracle->require_subcommand(1);
  oracle->fallthrough();
  SeriesArgs series_args;
  auto* series = oracle->add_subcommand("series", "Image-charge series for a perfect sphere");
  series->add_option("--radius", series_args.radius, "Sphere radius, m")->capture_default_str();
  series->add_option("--ratio", series_args.ratios, "d/R values (repeatable)")->capture_default_str();
  series->add_option("--tol", series_args.tolerance, "Series term tolerance")->capture_default_str();
  series->add_option("--format", series_args.format, "csv or json")->capture_default_str();
  series->add_option("--name", series_args.name, "Output file stem")->capture_default_str();
  add_config(series);
  FdArgs fd_args;
  auto* fd = oracle->add_subcommand("fd", "Finite-difference Laplace solve");
  fd->add_option("--profile", fd_args.profile, "perfect, flattened or a profile JSON file")->capture_default_str();
  fd->add_option("--radius", fd_args.radius, "Sphere radius for presets, m")->capture_default_str();
  fd->add_option("--ratio", fd_args.ratios, "d/R values (repeatable)")->capture_default_str();
  fd->add_option("--refine", fd_args.refine, "Grid refinement level 0..4")->capture_default_str();
  fd->add_option("--boundary", fd_args.boundary, "grounded or zero-flux")->capture_default_str();
  fd->add_option("--closure", fd_args.closure, "mirror or flat-top")->capture_default_str();
  fd->add_option("--rim", fd_args.rim, "Rim radius for flat-top closure, m");
  fd->add_option("--tol", fd_args.tolerance, "SOR tolerance")->capture_default_str();
  fd->add_flag("--export", fd_args.export_field, "Write the potential field");
  fd->add_option("--format", fd_args.format, "csv or json")->capture_default_str();
  fd->add_option("--name", fd_args.name, "Output file stem")->capture_default_str();
  add_config(fd);

  ScanArgs scan_args;
  auto* scan = app.add_subcommand("scan", "Scan lens-model parameters for the fitted exponent");
  scan->add_option("--rcd-min", scan_args.rcd_min, "Bubble radius lower bound, m")->capture_default_str();
  scan->add_option("--rcd-max", scan_args.rcd_max, "Bubble radius upper bound, m")->capture_default_str();
  scan->add_option("--h-min", scan_args.h_min, "Bubble height lower bound, m")->capture_default_str();
  scan->add_option("--h-max", scan_args.h_max, "Bubble height upper bound, m")->capture_default_str();
  scan->add_option("--mult-min", scan_args.mult_min, "Flat-zone radius multiplier lower bound")->capture_default_str();
  scan->add_option("--mult-max", scan_args.mult_max, "Flat-zone radius multiplier upper bound")->capture_default_str();
  scan->add_option("--hab-min", scan_args.hab_min, "Flat-zone height lower bound, m")->capture_default_str();
  scan->add_option("--hab-max", scan_args.hab_max, "Flat-zone height upper bound, m")->capture_default_str();
  scan->add_option("--steps", scan_args.steps, "Values per axis")->capture_default_str();
  scan->add_option("--radius", scan_args.radius, "Global radius, m")->capture_default_str();
  scan->add_option("--dmin", scan_args.d_min, "Window lower edge, m")->capture_default_str();
  scan->add_option("--dmax", scan_args.d_max, "Window upper edge, m")->capture_default_str();
  scan->add_option("--samples", scan_args.samples, "Samples per fit")->capture_default_str();
  scan->add_option("--format", scan_args.format, "csv or json")->capture_default_str();
  scan->add_option("--name", scan_args.name, "Output file stem")->capture_default_str();
  add_config(scan);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const bool help = e.get_exit_code() == 0;
    (help ? out : err) << (help ? app.help() : fmt::format("error: {}\n", e.what()));
    return help ? kExitOk : kExitUsage;
  }

  CLI::App* selected = app.get_subcommands().front();
  if (selected == oracle) selected = oracle->get_subcommands().front();

  try {
    if (!common.config.empty()) apply_config(*selected, common.config);
    Output output(common, out);
    if (selected == profile) return cmd_profile(profile_args, output, out);
    if (selected == curve) return cmd_curve(curve_args, output, out);
    if (selected == simulate) return cmd_simulate(sim_args, output, out);
    if (selected == calibrate) return cmd_calibrate(cal_args, output, out);
    if (selected == fit) return cmd_fit_exponent(fit_args, output, out);
    if (selected == series) return cmd_oracle_series(series_args, output, out);
    if (selected == fd) return cmd_oracle_fd(fd_args, output, out);
    if (selected == scan) return cmd_scan(scan_args, output, out, err);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return kExitUsage;
  }
  err << "error: no command selected\n";
  return kExitUsage;
}

}  // namespace spcal
