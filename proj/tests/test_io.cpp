#include <gtest/gtest.h>

#include <string>

#include "curlopt/io.hpp"

using namespace curlopt;

namespace {

std::string data(const std::string& name) { return std::string(CURLOPT_TEST_DATA) + "/" + name; }

}  // namespace

TEST(DomainSpec, LoadsBundledDomains) {
  EXPECT_EQ(load_domain(data("ball.json")).kind(), CurveKind::AxisTouching);
  for (const char* name : {"torus_R2.json", "torus_R3.json", "torus_R5.json", "fourier_torus.json"})
    EXPECT_EQ(load_domain(data(name)).kind(), CurveKind::Toroidal) << name;
}

TEST(DomainSpec, CircleVolume) {
  const auto d = domain_from_json(json::parse(
      R"({"kind": "toroidal", "boundary": {"type": "circle", "center_z": 1.0, "center_r": 2.0, "radius": 0.5}})"));
  EXPECT_NEAR(volume(d), 2.0 * pi * pi * 2.0 * 0.25, 1e-4 * volume(d));
}

TEST(DomainSpec, FourierRadiusDefaultsToOne) {
  const auto d = domain_from_json(json::parse(
      R"({"kind": "toroidal", "boundary": {"type": "fourier", "center_z": 0.0, "center_r": 3.0, "modes": []}})"));
  EXPECT_NEAR(volume(d), 2.0 * pi * pi * 3.0, 1e-4 * volume(d));
}

TEST(DomainSpec, StructuralErrors) {
  for (const char* text : {R"([])", R"({"boundary": {}})", R"({"kind": "spherical", "boundary": {}})",
                           R"({"kind": "toroidal"})",
                           R"({"kind": "toroidal", "boundary": {"type": "ellipse"}})",
                           R"({"kind": "toroidal", "boundary": {"type": "circle", "center_z": 0.0, "radius": 1.0}})",
                           R"({"kind": "toroidal", "boundary": {"type": "polyline", "points": [[1.0]]}})",
                           R"({"kind": "toroidal", "boundary": {"type": "fourier", "center_z": 0, "center_r": 3, "modes": 4}})"})
    EXPECT_THROW(domain_from_json(json::parse(text)), io_error) << text;
}

TEST(DomainSpec, GeometricErrors) {
  EXPECT_THROW(load_domain(data("zero_volume.json")), geometry_error);
  EXPECT_THROW(domain_from_json(json::parse(
                   R"({"kind": "toroidal", "boundary": {"type": "circle", "center_z": 0, "center_r": 0.5, "radius": 1}})")),
               geometry_error);
}

TEST(DomainSpec, FileErrors) {
  EXPECT_THROW(load_domain(data("broken.json")), io_error);
  EXPECT_THROW(load_domain(data("does_not_exist.json")), io_error);
}

TEST(Hash, KnownValues) {
  // reference values of 64-bit FNV-1a
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Records, OptimalityJsonFields) {
  const auto d = load_domain(data("torus_R3.json"));
  const json j = optimality_json(check_optimality(d, 0.1));
  for (const char* key : {"kind", "mu1", "c1", "volume", "J", "q", "flux_identity_residual", "dn_psi_zeros",
                          "innermost_components", "descent_certificate", "verdict"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["kind"], "toroidal");
}

TEST(Records, BoundJsonRoundTrip) {
  const json j = bound_json(bound_report(4.0 * pi / 3.0, 4.5));
  EXPECT_EQ(j["bound"].get<double>(), 1.0);
  EXPECT_TRUE(j["bs_ratio"].is_null());
  EXPECT_EQ(json::parse(j.dump()), j);
}
