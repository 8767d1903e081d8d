#include <doctest.h>

#include <cstring>
#include <random>
#include <sstream>
#include <string>

#include "sphereplane/errors.hpp"
#include "sphereplane/io.hpp"

using namespace sphereplane;

namespace {

std::string config_error_of(auto&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("format_double round trips random doubles") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::uint64_t> bits;
  int checked = 0;
  while (checked < 2000) {
    const std::uint64_t raw = bits(rng);
    double x;
    std::memcpy(&x, &raw, sizeof x);
    if (!std::isfinite(x)) continue;
    CHECK(same_bits(io::parse_double(io::format_double(x), "x"), x));
    ++checked;
  }
  CHECK_THROWS_AS(io::parse_double("1.5abc", "field"), ConfigError);
  CHECK_THROWS_AS(io::parse_double("", "field"), ConfigError);
}

TEST_CASE("profile JSON round trip") {
  const auto fig1 = make_fig1_profile();
  const auto back = io::profile_from_json(io::parse_json(io::profile_to_json(fig1).dump(), "mem"));
  REQUIRE(back.segments().size() == fig1.segments().size());
  for (std::size_t i = 0; i < fig1.segments().size(); ++i) {
    CHECK(back.segments()[i].curvature_radius == fig1.segments()[i].curvature_radius);
    CHECK(back.segments()[i].end_height == fig1.segments()[i].end_height);
  }
  CHECK(back.sagitta_mode() == fig1.sagitta_mode());

  const auto sphere = SurfaceProfile::perfect_sphere(0.0309, SagittaMode::Exact);
  const auto json = io::profile_to_json(sphere);
  CHECK(json["type"] == "perfect_sphere");
  CHECK(json["schema_version"] == io::kSchemaVersion);
  const auto sphere_back = io::profile_from_json(json);
  CHECK(sphere_back.is_perfect_sphere());
  CHECK(sphere_back.outer_radius() == 0.0309);
  CHECK(sphere_back.sagitta_mode() == SagittaMode::Exact);
}

TEST_CASE("profile JSON diagnostics") {
  const auto msg = config_error_of([] { io::parse_json("{\n  \"type\": \"perfect_sphere\",\n  \"radius_m\": }", "p.json"); });
  CHECK(msg.find("p.json:3:") != std::string::npos);

  auto json = io::profile_to_json(make_fig1_profile());
  json["segments"][1]["end_height"] = 1.0;
  CHECK(config_error_of([&] { io::profile_from_json(json); }).find("profile.segments[1]: unknown key 'end_height'") !=
        std::string::npos);

  json = io::profile_to_json(make_fig1_profile());
  json["segments"][0]["end_height_m"] = nullptr;
  CHECK(config_error_of([&] { io::profile_from_json(json); }).find("only the last segment") != std::string::npos);

  json = io::profile_to_json(make_fig1_profile());
  json["schema_version"] = 2;
  CHECK_THROWS_AS(io::profile_from_json(json), ConfigError);

  json = io::profile_to_json(make_fig1_profile());
  json["colour"] = "red";
  CHECK(config_error_of([&] { io::profile_from_json(json); }).find("unknown key 'colour'") != std::string::npos);

  json = io::profile_to_json(make_fig1_profile());
  json["segments"][2]["curvature_radius_m"] = "big";
  CHECK(config_error_of([&] { io::profile_from_json(json); }).find("segments[2].curvature_radius_m") !=
        std::string::npos);
}

TEST_CASE("curve CSV round trip is lossless") {
  const auto grid = log_spaced(20e-9, 3e-6, 37);
  for (const auto norm : {Normalization::SI, Normalization::N0Normalized}) {
    const auto curve = sample_curve(make_fig1_profile(), grid, norm);
    std::stringstream s;
    io::write_curve_csv(s, curve);
    const auto back = io::read_curve_csv(s);
    REQUIRE(back.distance.size() == curve.distance.size());
    for (std::size_t i = 0; i < curve.distance.size(); ++i) {
      CHECK(same_bits(back.distance[i], curve.distance[i]));
      CHECK(same_bits(back.value[i], curve.value[i]));
    }
    CHECK(back.normalization == norm);
    CHECK(back.provenance == curve.provenance);
  }
  std::istringstream wrong("d,k\n1,2\n");
  CHECK_THROWS_AS(io::read_curve_csv(wrong), ConfigError);
}

TEST_CASE("sequence CSV round trip is lossless") {
  const auto profile = SurfaceProfile::perfect_sphere(151.3e-6);
  const auto d_grid = linear_spaced(200e-9, 1e-6, 7);
  const auto v_grid = symmetric_voltage_grid(0.0, 0.5);
  NoiseSpec noise;
  noise.frequency_sigma = 0.05;
  const auto seq = generate_sequence(profile, {}, 0.015, d_grid, v_grid, noise, 3, "alpha");
  std::stringstream s;
  io::write_sequence_csv(s, seq);
  const auto back = io::read_sequence_csv(s);
  REQUIRE(back.size() == 1);
  CHECK(back[0].seq_id == "alpha");
  REQUIRE(back[0].points.size() == seq.points.size());
  for (std::size_t i = 0; i < seq.points.size(); ++i) {
    CHECK(same_bits(back[0].points[i].commanded_distance, seq.points[i].commanded_distance));
    CHECK(same_bits(back[0].points[i].applied_voltage, seq.points[i].applied_voltage));
    CHECK(same_bits(back[0].points[i].measured_frequency, seq.points[i].measured_frequency));
  }
}

TEST_CASE("sequence CSV groups by seq_id in order of first appearance") {
  std::istringstream in(
      "seq_id,d_m,V_volt,nu_hz\r\n"
      "b,1e-7,0,2000\r\n"
      "a,1e-7,0,2000\r\n"
      "b,2e-7,0,2000\r\n");
  const auto seqs = io::read_sequence_csv(in);
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[0].seq_id == "b");
  CHECK(seqs[0].points.size() == 2);
  CHECK(seqs[1].seq_id == "a");
}

TEST_CASE("sequence CSV errors list every bad line") {
  std::istringstream bad(
      "seq_id,d_m,V_volt,nu_hz\n"
      "s,1e-7,0,2000\n"
      "s,1e-7,oops,2000\n"
      "s,1e-7,0\n"
      "s,1e-7,0,2000\n"
      "s,nan,0,2000\n");
  const auto msg = config_error_of([&] { io::read_sequence_csv(bad, "data.csv"); });
  CHECK(msg.find("data.csv") != std::string::npos);
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("line 4") != std::string::npos);
  CHECK(msg.find("line 6") != std::string::npos);
  CHECK(msg.find("line 5") == std::string::npos);

  std::istringstream empty("");
  CHECK_THROWS_AS(io::read_sequence_csv(empty), ConfigError);
  std::istringstream header_only("seq_id,d_m,V_volt,nu_hz\n");
  CHECK_THROWS_AS(io::read_sequence_csv(header_only), ConfigError);
  std::istringstream wrong_header("id,d,V,nu\ns,1,2,3\n");
  CHECK_THROWS_AS(io::read_sequence_csv(wrong_header), ConfigError);
}

TEST_CASE("blind metadata hides ground truth") {
  SequenceMetadata meta{"x", SurfaceProfile::perfect_sphere(1e-4), {}, 0.0, {}, 0};
  meta.contact_potential = 0.01529;
  meta.noise.frequency_sigma = 0.01;
  meta.noise.vc_drift = VcDrift{5e-3};
  meta.seed = 42;
  const auto open = io::sequence_metadata_json(meta, 10, 9, false);
  const auto blind = io::sequence_metadata_json(meta, 10, 9, true);
  CHECK(open.contains("ground_truth"));
  CHECK(open["ground_truth"]["contact_potential_volt"] == 0.01529);
  CHECK_FALSE(blind.contains("ground_truth"));
  CHECK(blind["seed"] == 42);
  CHECK(blind["blind"] == true);
  CHECK(blind.dump().find("0.01529") == std::string::npos);
}

TEST_CASE("figure dataset validation") {
  io::FigureDataset fig{"f", "x", "y", {"linear"}, {{"s", {1.0, 2.0}, {3.0, 4.0}}}};
  CHECK_NOTHROW(fig.validate());
  const auto json = io::figure_to_json(fig);
  CHECK(json["series"][0]["name"] == "s");
  fig.series[0].x = {2.0, 1.0};
  CHECK_THROWS(fig.validate());
  fig.series[0].x.clear();
  fig.series[0].y.clear();
  CHECK_THROWS(fig.validate());
  fig.series.clear();
  CHECK_THROWS(fig.validate());
}

TEST_CASE("table writes CSV and JSON") {
  io::Table table;
  table.columns = {"a", "b", "c"};
  table.add_row({0.1, 3LL, std::string("x")});
  std::ostringstream s;
  table.write_csv(s);
  CHECK(s.str() == "a,b,c\n0.10000000000000001,3,x\n");
  const auto json = table.to_json();
  CHECK(json[0]["b"] == 3);
  CHECK(json[0]["c"] == "x");
  CHECK_THROWS(table.add_row({1.0}));
}
