#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <tuple>

#include "curlopt/bounds.hpp"
#include "oracles.hpp"

using namespace curlopt;

namespace {

AxisymmetricDomain ball() {
  return AxisymmetricDomain::from_curve(make_circle_section(CurveKind::AxisTouching, 0.0, 0.0, 1.0));
}

AxisymmetricDomain torus(double R = 3.0, double a = 1.0) {
  return AxisymmetricDomain::from_curve(make_circle_section(CurveKind::Toroidal, 0.0, R, a));
}

VoxelField with_values(VoxelField v, const std::function<Vec3(const Vec3&)>& f) {
  for (std::size_t i = 0; i < v.size(); ++i) v.value[i] = f(v.center[i]);
  return v;
}

}  // namespace

TEST(VolumeBound, UnitBallGivesExactlyOne) { EXPECT_EQ(volume_lower_bound(4.0 * pi / 3.0), 1.0); }

TEST(VolumeBound, ScalesInverselyWithLength) {
  const double b = volume_lower_bound(2.0);
  for (double lambda : {0.5, 2.0, 7.0})
    EXPECT_NEAR(volume_lower_bound(lambda * lambda * lambda * 2.0), b / lambda, 1e-14 * b / lambda);
}

TEST(VolumeBound, RejectsNonPositiveVolume) {
  EXPECT_THROW(volume_lower_bound(0.0), geometry_error);
  EXPECT_THROW(volume_lower_bound(-1.0), geometry_error);
}

TEST(VolumeBound, ReciprocalOfOperatorBound) {
  for (double v : {0.3, 4.0, 50.0}) EXPECT_NEAR(volume_lower_bound(v) * bs_norm_bound(v), 1.0, 1e-15);
}

TEST(Rearrangement, BallCentreIsTheExtremalCase) {
  // int over the unit ball of |y|^-2 dy = 4 pi
  EXPECT_NEAR(rearrangement_constant(4.0 * pi / 3.0), 4.0 * pi, 1e-12);
}

TEST(Rearrangement, TorusIntegralsStayBelowTheConstant) {
  std::mt19937_64 gen(20240607);
  const double R = 3.0, a = 1.0;
  const double c = rearrangement_constant(2.0 * pi * pi * R * a * a);
  for (const auto& [x, z] : {std::pair{3.0, 0.0}, std::pair{2.2, 0.3}, std::pair{3.9, -0.1}}) {
    const double est = oracle::torus_newtonian_integral(x, 0.0, z, R, a, 4000, gen);
    EXPECT_LT(est, c);
    EXPECT_GT(est, 0.0);
  }
}

TEST(Voxelize, MaskedVolumeConverges) {
  const double exact = 4.0 * pi / 3.0;
  const double e1 = std::abs(voxelize(ball(), 12).masked_volume() - exact);
  const double e2 = std::abs(voxelize(ball(), 36).masked_volume() - exact);
  EXPECT_LT(e2, e1);
  EXPECT_LT(e2, 0.02 * exact);
}

TEST(Voxelize, QuarterTurnMapsTheMaskToItself) {
  const VoxelField v = voxelize(torus(2.0, 1.0), 20);
  std::set<std::tuple<long, long, long>> keys;
  auto key = [&](double x, double y, double z) {
    return std::tuple{std::lround(x / v.spacing * 2.0), std::lround(y / v.spacing * 2.0), std::lround(z / v.spacing * 2.0)};
  };
  for (const Vec3& c : v.center) keys.insert(key(c[0], c[1], c[2]));
  for (const Vec3& c : v.center) EXPECT_TRUE(keys.count(key(-c[1], c[0], c[2])));
  for (std::size_t s = 0; s < v.size(); ++s) {
    const auto [i, j, k] = v.ijk[s];
    EXPECT_EQ(v.at(i, j, k), static_cast<int>(s));
  }
}

TEST(Voxelize, Preconditions) {
  EXPECT_THROW(voxelize(ball(), 1), contract_error);
  EXPECT_EQ(voxelize(ball(), 8).at(-1, 0, 0), -1);
}

TEST(BiotSavart, UniformCurrentInBall) {
  // BS e_z = e_z x x / 3 inside the unit ball; the staircase boundary of the
  // 32^3 mask perturbs the values at the percent level
  const VoxelField v = with_values(voxelize(ball(), 32), [](const Vec3&) { return Vec3{0.0, 0.0, 1.0}; });
  std::vector<Vec3> pts{{0.3, 0.1, 0.0}, {-0.2, 0.4, 0.2}, {0.0, -0.45, -0.3}};
  const auto bs = biot_savart_apply(v, pts);
  for (std::size_t p = 0; p < pts.size(); ++p) {
    EXPECT_NEAR(bs[p][0], -pts[p][1] / 3.0, 2e-2);
    EXPECT_NEAR(bs[p][1], pts[p][0] / 3.0, 2e-2);
    EXPECT_NEAR(bs[p][2], 0.0, 2e-2);
  }
}

TEST(BiotSavart, CurlAndDivergenceOfUniformCurrent) {
  const VoxelField v = with_values(voxelize(ball(), 24), [](const Vec3&) { return Vec3{0.0, 0.0, 1.0}; });
  int probed = 0;
  for (std::size_t s = 0; s < v.size(); s += 97) {
    if (dot3(v.center[s], v.center[s]) > 0.25) continue;
    const auto d = bs_derivatives_at(v, static_cast<int>(s));
    ASSERT_TRUE(d.has_value());
    EXPECT_NEAR(d->curl[2], 2.0 / 3.0, 0.02);
    EXPECT_NEAR(d->divergence, 0.0, 0.02);
    ++probed;
  }
  EXPECT_GT(probed, 3);
}

TEST(BiotSavart, SymmetricAndLinear) {
  VoxelField v = voxelize(torus(2.0, 1.0), 14);
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> a(v.size()), b(v.size()), ab(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    a[i] = {u(gen), u(gen), u(gen)};
    b[i] = {u(gen), u(gen), u(gen)};
    for (std::size_t c = 0; c < 3; ++c) ab[i][c] = 2.0 * a[i][c] - 3.0 * b[i][c];
  }
  v.value = a;
  const auto bsa = biot_savart_voxels(v);
  v.value = b;
  const auto bsb = biot_savart_voxels(v);
  v.value = ab;
  const auto bsab = biot_savart_voxels(v);
  const double lhs = inner(v, bsa, b), rhs = inner(v, a, bsb);
  EXPECT_NEAR(lhs, rhs, 1e-12 * (std::abs(lhs) + 1.0));
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c)
      EXPECT_NEAR(bsab[i][c], 2.0 * bsa[i][c] - 3.0 * bsb[i][c], 1e-12);
}

TEST(BiotSavart, SingleVoxelHasNoSelfField) {
  VoxelField v = voxelize(ball(), 4);
  std::fill(v.value.begin(), v.value.end(), Vec3{0.0, 0.0, 0.0});
  v.value[0] = {1.0, 2.0, 3.0};
  const auto bs = biot_savart_apply(v, std::vector<Vec3>{v.center[0]});
  EXPECT_EQ(bs[0][0], 0.0);
  EXPECT_EQ(bs[0][1], 0.0);
  EXPECT_EQ(bs[0][2], 0.0);
}

TEST(BiotSavart, QuadrantShortcutEqualsFullSum) {
  const auto d = ball();
  const TriMesh m = mesh_section(d, 0.1);
  const EigenSolution s = solve(assemble(m));
  VoxelField v = voxelize(d, 16);
  rasterize(v, m, reconstruct(s, m));
  const double full = bs_self_inner(v, false), quad = bs_self_inner(v, true);
  EXPECT_NEAR(quad, full, 1e-12 * std::abs(full));
}

TEST(BiotSavart, EigenfieldReciprocity) {
  // <BS u, u> = 1 / mu1 for the normalized eigenfield
  const auto d = ball();
  const TriMesh m = mesh_section(d, 0.05);
  const EigenSolution s = solve(assemble(m));
  VoxelField v = voxelize(d, 32);
  rasterize(v, m, reconstruct(s, m));
  const double ratio = bs_self_inner(v, true) / inner(v, v.value, v.value);
  EXPECT_NEAR(ratio * s.mu1, 1.0, 0.02);
}

TEST(BiotSavart, NormBoundOnRandomFields) {
  const auto d = ball();
  VoxelField v = voxelize(d, 16);
  std::mt19937_64 gen(20240607);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    for (Vec3& x : v.value) x = {u(gen), u(gen), u(gen)};
    const BsNormReport r = verify_bs_norm_bound(v, volume(d));
    EXPECT_TRUE(r.pass);
    EXPECT_GT(r.ratio, 0.0);
  }
}

TEST(BiotSavart, ZeroFieldIsAContractViolation) {
  const VoxelField v = voxelize(ball(), 8);
  EXPECT_THROW(verify_bs_norm_bound(v, 1.0), contract_error);
}

TEST(BoundReport, SlackIsEigenvalueMinusBound) {
  const BoundReport r = bound_report(4.0 * pi / 3.0, oracle::spheromak(), 0.2);
  EXPECT_EQ(r.bound, 1.0);
  EXPECT_NEAR(r.slack, oracle::spheromak() - 1.0, 1e-15);
  ASSERT_TRUE(r.bs_ratio.has_value());
  EXPECT_EQ(*r.bs_ratio, 0.2);
  EXPECT_EQ(r.bs_bound, 1.0);
}

TEST(BoundReport, SlackPositiveAcrossTori) {
  for (double R : {2.0, 3.0, 5.0}) {
    const auto d = torus(R, 1.0);
    const double mu = solve(assemble(mesh_section(d, 0.1))).mu1;
    EXPECT_GT(bound_report(volume(d), mu).slack, 0.0);
  }
}
