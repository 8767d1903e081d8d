#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sphereplane/calibration.hpp"
#include "sphereplane/fd_solver.hpp"
#include "sphereplane/oscillator.hpp"
#include "sphereplane/pfa.hpp"
#include "sphereplane/profile.hpp"

namespace sphereplane::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Shortest text that reads back to the same double ("%.17g").
std::string format_double(double value);

// Full-string parse; throws ConfigError naming `context` on failure.
double parse_double(std::string_view text, std::string_view context);

// Parses JSON text; syntax errors become ConfigError with line and column.
Json parse_json(std::string_view text, std::string_view source);
Json read_json_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

// {"type": "perfect_sphere", ...} or {"type": "piecewise_spherical", ...}.
Json profile_to_json(const SurfaceProfile& profile);
SurfaceProfile profile_from_json(const Json& json);

// Columns d_m, k_value, normalization, provenance.
void write_curve_csv(std::ostream& out, const ForceGradientCurve& curve);
ForceGradientCurve read_curve_csv(std::istream& in, std::string_view source = "curve");

struct LabeledSequence {
  std::string seq_id;
  std::vector<CalibrationPoint> points;
};

// Columns seq_id, d_m, V_volt, nu_hz.
void write_sequence_csv(std::ostream& out, const CalibrationSequence& sequence);
// Groups rows by seq_id in order of first appearance. Every malformed row is
// reported, with its line number, in a single ConfigError.
std::vector<LabeledSequence> read_sequence_csv(std::istream& in, std::string_view source = "sequence");

// Generation metadata. With `blind` the ground truth (contact potential, drift,
// creep and noise level) is left out.
Json sequence_metadata_json(const SequenceMetadata& metadata, std::size_t n_distances,
                            std::size_t n_voltages, bool blind);

Json fit_report_json(const ParabolaFitResult& fit);
Json exponent_report_json(const ExponentFitResult& fit, std::string_view method);
Json vc_summary_json(const VcSummary& summary);

// Columns r_m, z_m, potential_V, inside_lens.
void write_potential_csv(std::ostream& out, const FdSolution& solution);
Json fd_solution_json(const FdSolution& solution, const FdGrid& grid, double d);

struct FigureSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct FigureDataset {
  std::string name;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> scales;  // "linear", "log-log"
  std::vector<FigureSeries> series;

  void validate() const;
};

Json figure_to_json(const FigureDataset& figure);

// Small column-oriented result table with CSV and JSON writers.
struct Table {
  using Cell = std::variant<double, long long, std::string>;

  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
  void write_csv(std::ostream& out) const;
  Json to_json() const;  // array of objects keyed by column
};

}  // namespace sphereplane::io
