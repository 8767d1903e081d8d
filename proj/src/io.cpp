#include "sphereplane/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "sphereplane/errors.hpp"

namespace sphereplane::io {

std::string format_double(double value) { return fmt::format("{:.17g}", value); }

double parse_double(std::string_view text, std::string_view context) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", context, text));
  }
  return value;
}

Json parse_json(std::string_view text, std::string_view source) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t end = std::min(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ConfigError(fmt::format("{}:{}:{}: malformed JSON: {}", source, line, column, e.what()));
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Json read_json_file(const std::filesystem::path& path) {
  return parse_json(read_text_file(path), path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ConfigError(fmt::format("write to '{}' failed", path.string()));
}

namespace {

std::string_view mode_name(SagittaMode mode) {
  return mode == SagittaMode::Paraxial ? "paraxial" : "exact";
}

void reject_unknown_keys(const Json& object, std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
  for (const auto& [key, value] : object.items()) {
    bool known = false;
    for (const auto name : allowed) known = known || key == name;
    if (!known) throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

double number_field(const Json& object, std::string_view key, std::string_view where) {
  const auto it = object.find(key);
  if (it == object.end()) throw ConfigError(fmt::format("{}: missing '{}'", where, key));
  if (!it->is_number()) throw ConfigError(fmt::format("{}.{}: expected a number", where, key));
  return it->get<double>();
}

SagittaMode mode_field(const Json& object, std::string_view where) {
  const auto it = object.find("sagitta_mode");
  if (it == object.end()) return SagittaMode::Paraxial;
  if (it->is_string()) {
    const auto text = it->get<std::string>();
    if (text == "paraxial") return SagittaMode::Paraxial;
    if (text == "exact") return SagittaMode::Exact;
  }
  throw ConfigError(fmt::format("{}.sagitta_mode: expected \"paraxial\" or \"exact\"", where));
}

}  // namespace

Json profile_to_json(const SurfaceProfile& profile) {
  Json json;
  json["schema_version"] = kSchemaVersion;
  if (profile.is_perfect_sphere()) {
    json["type"] = "perfect_sphere";
    json["radius_m"] = std::get<PerfectSphere>(profile.shape()).radius;
    json["sagitta_mode"] = mode_name(profile.sagitta_mode());
    return json;
  }
  json["type"] = "piecewise_spherical";
  json["sagitta_mode"] = mode_name(profile.sagitta_mode());
  Json segments = Json::array();
  for (const auto& s : profile.segments()) {
    Json segment;
    segment["curvature_radius_m"] = s.curvature_radius;
    segment["end_height_m"] = s.end_height ? Json(*s.end_height) : Json(nullptr);
    segments.push_back(std::move(segment));
  }
  json["segments"] = std::move(segments);
  return json;
}

SurfaceProfile profile_from_json(const Json& json) {
  if (!json.is_object()) throw ConfigError("profile: expected a JSON object");
  if (const auto it = json.find("schema_version"); it != json.end()) {
    if (!it->is_number_integer() || it->get<int>() != kSchemaVersion) {
      throw ConfigError(fmt::format("profile.schema_version: expected {}", kSchemaVersion));
    }
  }
  const auto type_it = json.find("type");
  if (type_it == json.end() || !type_it->is_string()) {
    throw ConfigError("profile.type: expected \"perfect_sphere\" or \"piecewise_spherical\"");
  }
  const auto type = type_it->get<std::string>();
  if (type == "perfect_sphere") {
    reject_unknown_keys(json, {"schema_version", "type", "radius_m", "sagitta_mode"}, "profile");
    return SurfaceProfile::perfect_sphere(number_field(json, "radius_m", "profile"),
                                          mode_field(json, "profile"));
  }
  if (type != "piecewise_spherical") {
    throw ConfigError(fmt::format("profile.type: unknown profile type '{}'", type));
  }
  reject_unknown_keys(json, {"schema_version", "type", "sagitta_mode", "segments"}, "profile");
  const auto seg_it = json.find("segments");
  if (seg_it == json.end() || !seg_it->is_array() || seg_it->empty()) {
    throw ConfigError("profile.segments: expected a non-empty array");
  }
  PiecewiseSpherical shape;
  double start = 0.0;
  for (std::size_t i = 0; i < seg_it->size(); ++i) {
    const auto where = fmt::format("profile.segments[{}]", i);
    const Json& entry = (*seg_it)[i];
    if (!entry.is_object()) throw ConfigError(fmt::format("{}: expected an object", where));
    reject_unknown_keys(entry, {"curvature_radius_m", "end_height_m"}, where);
    SphericalSegment segment;
    segment.curvature_radius = number_field(entry, "curvature_radius_m", where);
    segment.start_height = start;
    const auto end_it = entry.find("end_height_m");
    if (end_it == entry.end()) throw ConfigError(fmt::format("{}: missing 'end_height_m'", where));
    if (end_it->is_null()) {
      if (i + 1 != seg_it->size()) {
        throw ConfigError(fmt::format("{}.end_height_m: only the last segment may be unbounded", where));
      }
    } else if (end_it->is_number()) {
      segment.end_height = end_it->get<double>();
      start = *segment.end_height;
    } else {
      throw ConfigError(fmt::format("{}.end_height_m: expected a number or null", where));
    }
    shape.segments.push_back(segment);
  }
  return SurfaceProfile(std::move(shape), mode_field(json, "profile"));
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                        : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

// Reads the header line; throws on an empty stream or a header mismatch.
void expect_header(std::istream& in, std::string_view expected, std::string_view source) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(fmt::format("{}: file is empty", source));
  if (strip_cr(line) != expected) {
    throw ConfigError(fmt::format("{}:1: expected header '{}', found '{}'", source, expected,
                                  strip_cr(line)));
  }
}

void check_label(std::string_view label) {
  if (label.empty() || label.find_first_of(",\"\r\n") != std::string_view::npos) {
    throw DomainError(fmt::format("sequence id '{}' must be non-empty without commas or quotes", label));
  }
}

}  // namespace

void write_curve_csv(std::ostream& out, const ForceGradientCurve& curve) {
  curve.validate();
  out << "d_m,k_value,normalization,provenance\n";
  for (std::size_t i = 0; i < curve.distance.size(); ++i) {
    out << format_double(curve.distance[i]) << ',' << format_double(curve.value[i]) << ','
        << to_string(curve.normalization) << ',' << to_string(curve.provenance) << '\n';
  }
}

ForceGradientCurve read_curve_csv(std::istream& in, std::string_view source) {
  expect_header(in, "d_m,k_value,normalization,provenance", source);
  ForceGradientCurve curve;
  std::string line;
  std::size_t line_no = 1;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = strip_cr(line);
    if (text.empty()) continue;
    const auto where = fmt::format("{}:{}", source, line_no);
    const auto fields = split_csv_line(text);
    if (fields.size() != 4) throw ConfigError(fmt::format("{}: expected 4 fields", where));
    curve.distance.push_back(parse_double(fields[0], where));
    curve.value.push_back(parse_double(fields[1], where));
    Normalization normalization;
    Provenance provenance;
    try {
      normalization = parse_normalization(fields[2]);
      provenance = parse_provenance(fields[3]);
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("{}: {}", where, e.what()));
    }
    if (first) {
      curve.normalization = normalization;
      curve.provenance = provenance;
      first = false;
    } else if (normalization != curve.normalization || provenance != curve.provenance) {
      throw ConfigError(fmt::format("{}: normalization/provenance changes mid-file", where));
    }
  }
  if (curve.distance.empty()) throw ConfigError(fmt::format("{}: no data rows", source));
  try {
    curve.validate();
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("{}: {}", source, e.what()));
  }
  return curve;
}

void write_sequence_csv(std::ostream& out, const CalibrationSequence& sequence) {
  check_label(sequence.metadata.seq_id);
  out << "seq_id,d_m,V_volt,nu_hz\n";
  for (const auto& p : sequence.points) {
    out << sequence.metadata.seq_id << ',' << format_double(p.commanded_distance) << ','
        << format_double(p.applied_voltage) << ',' << format_double(p.measured_frequency) << '\n';
  }
}

std::vector<LabeledSequence> read_sequence_csv(std::istream& in, std::string_view source) {
  expect_header(in, "seq_id,d_m,V_volt,nu_hz", source);
  std::vector<LabeledSequence> sequences;
  std::map<std::string, std::size_t, std::less<>> index;
  std::vector<std::string> problems;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = strip_cr(line);
    if (text.empty()) continue;
    const auto fields = split_csv_line(text);
    if (fields.size() != 4 || fields[0].empty()) {
      problems.push_back(fmt::format("line {}: expected 4 fields", line_no));
      continue;
    }
    CalibrationPoint point;
    try {
      const auto where = fmt::format("line {}", line_no);
      point.commanded_distance = parse_double(fields[1], where);
      point.applied_voltage = parse_double(fields[2], where);
      point.measured_frequency = parse_double(fields[3], where);
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
      continue;
    }
    if (!(point.commanded_distance > 0.0) || !(point.measured_frequency >= 0.0) ||
        !std::isfinite(point.applied_voltage) || !std::isfinite(point.measured_frequency) ||
        !std::isfinite(point.commanded_distance)) {
      problems.push_back(fmt::format("line {}: need d_m > 0, finite V_volt, nu_hz >= 0", line_no));
      continue;
    }
    auto [it, inserted] = index.try_emplace(std::string(fields[0]), sequences.size());
    if (inserted) sequences.push_back({std::string(fields[0]), {}});
    sequences[it->second].points.push_back(point);
  }
  if (!problems.empty()) {
    std::string message = fmt::format("{}: {} malformed row(s)", source, problems.size());
    for (const auto& p : problems) message += "\n  " + p;
    throw ConfigError(message);
  }
  if (sequences.empty()) throw ConfigError(fmt::format("{}: no data rows", source));
  return sequences;
}

Json sequence_metadata_json(const SequenceMetadata& metadata, std::size_t n_distances,
                            std::size_t n_voltages, bool blind) {
  Json json;
  json["schema_version"] = kSchemaVersion;
  json["seq_id"] = metadata.seq_id;
  json["seed"] = metadata.seed;
  json["n_distances"] = n_distances;
  json["n_voltages"] = n_voltages;
  json["blind"] = blind;
  json["profile"] = profile_to_json(metadata.profile);
  json["oscillator"] = {{"effective_mass_kg", metadata.oscillator.effective_mass},
                        {"rest_frequency_hz", metadata.oscillator.rest_frequency}};
  if (blind) return json;
  Json truth;
  truth["contact_potential_volt"] = metadata.contact_potential;
  truth["frequency_sigma_hz"] = metadata.noise.frequency_sigma;
  if (metadata.noise.vc_drift) {
    truth["vc_drift"] = {{"slope_volt_per_decade", metadata.noise.vc_drift->slope_per_decade},
                         {"reference_distance_m", metadata.noise.vc_drift->reference_distance}};
  } else {
    truth["vc_drift"] = nullptr;
  }
  if (metadata.noise.piezo_creep) {
    truth["piezo_creep"] = {{"amplitude_m", metadata.noise.piezo_creep->amplitude},
                            {"exponent", metadata.noise.piezo_creep->exponent},
                            {"reference_distance_m", metadata.noise.piezo_creep->reference_distance}};
  } else {
    truth["piezo_creep"] = nullptr;
  }
  json["ground_truth"] = std::move(truth);
  return json;
}

Json fit_report_json(const ParabolaFitResult& fit) {
  Json json;
  json["distance_m"] = fit.distance;
  json["vc_volt"] = fit.vc.value;
  json["vc_stderr"] = fit.vc.error;
  json["k"] = fit.k.value;
  json["k_stderr"] = fit.k.error;
  json["nu0_hz"] = fit.nu0.value;
  json["nu0_stderr"] = fit.nu0.error;
  json["residual_rms"] = fit.residual_rms;
  json["n_points"] = fit.n_points;
  return json;
}

Json exponent_report_json(const ExponentFitResult& fit, std::string_view method) {
  Json json;
  json["schema_version"] = kSchemaVersion;
  json["method"] = method;
  json["alpha"] = fit.alpha.value;
  json["alpha_stderr"] = fit.alpha.error;
  json["log_amplitude"] = fit.log_amplitude;
  json["window"] = {{"d_min_m", fit.window.d_min}, {"d_max_m", fit.window.d_max}};
  json["n_points"] = fit.n_points;
  json["r_squared"] = fit.r_squared;
  return json;
}

Json vc_summary_json(const VcSummary& summary) {
  Json json;
  json["mean_volt"] = summary.mean;
  json["sem_volt"] = summary.sem;
  json["trend_volt_per_decade"] = summary.trend.value;
  json["trend_stderr"] = summary.trend.error;
  json["independent"] = summary.independent;
  json["weighted"] = summary.weighted;
  json["n_distances"] = summary.vc.size();
  json["summary"] = format_vc_summary(summary);
  return json;
}

void write_potential_csv(std::ostream& out, const FdSolution& solution) {
  out << "r_m,z_m,potential_V,inside_lens\n";
  for (std::size_t i = 0; i < solution.r.size(); ++i) {
    for (std::size_t j = 0; j < solution.z.size(); ++j) {
      out << format_double(solution.r[i]) << ',' << format_double(solution.z[j]) << ','
          << format_double(solution.at(i, j)) << ','
          << static_cast<int>(solution.inside_lens[i * solution.z.size() + j]) << '\n';
    }
  }
}

Json fd_solution_json(const FdSolution& solution, const FdGrid& grid, double d) {
  Json json;
  json["schema_version"] = kSchemaVersion;
  json["d_m"] = d;
  json["voltage_volt"] = solution.voltage;
  json["grid"] = {{"radial_extent_m", grid.radial_extent},
                  {"axial_extent_m", grid.axial_extent},
                  {"n_r", grid.n_r},
                  {"n_z", grid.n_z},
                  {"radial_fine_extent_m", grid.radial_fine_extent},
                  {"radial_fine_intervals", grid.radial_fine_intervals},
                  {"axial_fine_extent_m", grid.axial_fine_extent},
                  {"axial_fine_intervals", grid.axial_fine_intervals},
                  {"outer_boundary", to_string(grid.outer_boundary)}};
  json["gap_nodes"] = solution.gap_nodes;
  json["iterations"] = solution.iterations;
  json["residual"] = solution.residual;
  json["omega"] = solution.omega;
  json["energy_j"] = solution.energy;
  json["capacitance_f"] = solution.capacitance;
  json["capacitance_from_charge_f"] = solution.capacitance_from_charge;
  json["snapshot_min_volt"] = solution.snapshot_min;
  json["snapshot_max_volt"] = solution.snapshot_max;
  return json;
}

void FigureDataset::validate() const {
  if (series.empty()) throw DomainError(fmt::format("figure '{}' has no series", name));
  for (const auto& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size()) {
      throw DomainError(fmt::format("series '{}' is empty or ragged", s.name));
    }
    for (std::size_t i = 1; i < s.x.size(); ++i) {
      if (!(s.x[i] > s.x[i - 1])) {
        throw DomainError(fmt::format("series '{}' x values are not strictly increasing", s.name));
      }
    }
  }
}

Json figure_to_json(const FigureDataset& figure) {
  figure.validate();
  Json json;
  json["schema_version"] = kSchemaVersion;
  json["name"] = figure.name;
  json["x_label"] = figure.x_label;
  json["y_label"] = figure.y_label;
  json["scales"] = figure.scales;
  Json series = Json::array();
  for (const auto& s : figure.series) {
    series.push_back({{"name", s.name}, {"x", s.x}, {"y", s.y}});
  }
  json["series"] = std::move(series);
  return json;
}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw DomainError(fmt::format("table row has {} cells, expected {}", row.size(), columns.size()));
  }
  rows.push_back(std::move(row));
}

namespace {

std::string cell_text(const Table::Cell& cell) {
  if (const auto* v = std::get_if<double>(&cell)) return format_double(*v);
  if (const auto* v = std::get_if<long long>(&cell)) return std::to_string(*v);
  return std::get<std::string>(cell);
}

}  // namespace

void Table::write_csv(std::ostream& out) const {
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << cell_text(row[c]);
    out << '\n';
  }
}

Json Table::to_json() const {
  Json json = Json::array();
  for (const auto& row : rows) {
    Json object;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::visit([&](const auto& v) { object[columns[c]] = v; }, row[c]);
    }
    json.push_back(std::move(object));
  }
  return json;
}

}  // namespace sphereplane::io
