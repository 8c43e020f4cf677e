#ifndef CURLOPT_BOUNDS_HPP
#define CURLOPT_BOUNDS_HPP

// Volume lower bound for curl eigenvalues and a voxel Biot-Savart operator.
//
//   BS v(x) = int_Omega v(y) x (x - y) / (4 pi |x - y|^3) dy
//
// inverts curl on divergence-free fields tangent to the boundary, and
// |BS v| <= (3 |Omega| / (4 pi))^{1/3} |v|, which yields
// mu1 >= (4 pi / (3 |Omega|))^{1/3}.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "curlopt/errors.hpp"
#include "curlopt/field_recon.hpp"
#include "curlopt/geometry.hpp"
#include "curlopt/meshing.hpp"

namespace curlopt {

using Vec3 = std::array<double, 3>;  // Cartesian (x, y, z)

inline double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline double volume_lower_bound(double vol) {
  if (!(vol > 0.0)) throw geometry_error("volume must be positive");
  return std::cbrt((4.0 * pi / 3.0) / vol);
}

/// sup over x of int_{ball of volume vol} dy / |x - y|^2, the value used to
/// bound the Biot-Savart kernel by rearrangement.
inline double rearrangement_constant(double vol) {
  if (!(vol > 0.0)) throw geometry_error("volume must be positive");
  return std::cbrt(48.0 * pi * pi * vol);
}

/// Norm bound (3 |Omega| / (4 pi))^{1/3} for the Biot-Savart operator.
inline double bs_norm_bound(double vol) { return 1.0 / volume_lower_bound(vol); }

// ---------------------------------------------------------------------------
// Voxel fields

/// Cubic voxels on a grid whose x and y centres sit at +-(i + 1/2) spacing,
/// so quarter turns about the z axis map the grid onto itself.
struct VoxelField {
  double spacing = 0.0;
  std::array<int, 3> dims{0, 0, 0};
  double z0 = 0.0;  // z of the first voxel layer centre
  /// Masked slot of each grid cell, -1 outside.
  std::vector<int> slot;
  std::vector<std::array<int, 3>> ijk;
  std::vector<Vec3> center;
  std::vector<Vec3> value;

  std::size_t size() const { return center.size(); }
  double voxel_volume() const { return spacing * spacing * spacing; }
  double masked_volume() const { return voxel_volume() * static_cast<double>(size()); }

  double coordinate(int axis, int i) const {
    if (axis == 2) return z0 + i * spacing;
    return (i - dims[static_cast<std::size_t>(axis)] / 2 + 0.5) * spacing;
  }
  /// Masked slot at grid index, -1 outside the grid or the domain.
  int at(int i, int j, int k) const {
    if (i < 0 || j < 0 || k < 0 || i >= dims[0] || j >= dims[1] || k >= dims[2]) return -1;
    return slot[(static_cast<std::size_t>(k) * static_cast<std::size_t>(dims[1]) + static_cast<std::size_t>(j)) *
                    static_cast<std::size_t>(dims[0]) +
                static_cast<std::size_t>(i)];
  }
};

namespace detail {

/// Crossing-number test against the closed sample polygon of the section.
inline bool section_contains(const SectionCurve& curve, Point2 p) {
  const auto& s = curve.samples();
  bool inside = false;
  const std::size_t n = s.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = s[i], b = s[j];
    if ((a.r > p.r) != (b.r > p.r)) {
      const double zc = a.z + (p.r - a.r) * (b.z - a.z) / (b.r - a.r);
      if (p.z < zc) inside = !inside;
    }
  }
  return inside;
}

}  // namespace detail

/// Mask of the voxels whose centres lie in the domain; n voxels span the
/// largest extent of its bounding box.
inline VoxelField voxelize(const AxisymmetricDomain& domain, int n) {
  if (n < 2) throw contract_error("voxel grid needs at least two cells per axis");
  double zmin = std::numeric_limits<double>::infinity(), zmax = -zmin, rmax = 0.0;
  for (const Point2& p : domain.curve.samples()) {
    zmin = std::min(zmin, p.z);
    zmax = std::max(zmax, p.z);
    rmax = std::max(rmax, p.r);
  }
  VoxelField v;
  v.spacing = std::max(2.0 * rmax, zmax - zmin) / n;
  const int nxy = 2 * static_cast<int>(std::ceil(rmax / v.spacing - 1e-9));
  const int nz = static_cast<int>(std::ceil((zmax - zmin) / v.spacing - 1e-9));
  v.dims = {nxy, nxy, nz};
  v.z0 = 0.5 * (zmin + zmax) - 0.5 * (nz - 1) * v.spacing;
  v.slot.assign(static_cast<std::size_t>(nxy) * static_cast<std::size_t>(nxy) * static_cast<std::size_t>(nz), -1);
  std::size_t cell = 0;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < nxy; ++j)
      for (int i = 0; i < nxy; ++i, ++cell) {
        const Vec3 c{v.coordinate(0, i), v.coordinate(1, j), v.coordinate(2, k)};
        if (!detail::section_contains(domain.curve, {c[2], std::hypot(c[0], c[1])})) continue;
        v.slot[cell] = static_cast<int>(v.center.size());
        v.ijk.push_back({i, j, k});
        v.center.push_back(c);
      }
  if (v.center.empty()) throw geometry_error("voxel mask is empty");
  v.value.assign(v.center.size(), Vec3{0.0, 0.0, 0.0});
  return v;
}

/// Point location on a triangle mesh through a uniform bucket grid.
class MeshLocator {
 public:
  explicit MeshLocator(const TriMesh& m) : mesh_(&m) {
    zmin_ = rmin_ = std::numeric_limits<double>::infinity();
    double zmax = -zmin_, rmax = -rmin_;
    for (const Point2& p : m.nodes) {
      zmin_ = std::min(zmin_, p.z);
      rmin_ = std::min(rmin_, p.r);
      zmax = std::max(zmax, p.z);
      rmax = std::max(rmax, p.r);
    }
    n_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(m.triangles.size()) / 2.0)));
    cz_ = (zmax - zmin_) / n_ * (1.0 + 1e-12);
    cr_ = (rmax - rmin_) / n_ * (1.0 + 1e-12);
    buckets_.resize(static_cast<std::size_t>(n_ * n_));
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
      double lz = std::numeric_limits<double>::infinity(), lr = lz, hz = -lz, hr = -lz;
      for (int v : m.triangles[t]) {
        const Point2 p = m.nodes[static_cast<std::size_t>(v)];
        lz = std::min(lz, p.z);
        hz = std::max(hz, p.z);
        lr = std::min(lr, p.r);
        hr = std::max(hr, p.r);
      }
      for (int a = cell_z(lz); a <= cell_z(hz); ++a)
        for (int b = cell_r(lr); b <= cell_r(hr); ++b) buckets_[static_cast<std::size_t>(a * n_ + b)].push_back(t);
    }
  }

  /// Triangle and barycentric weights for p.  Points just outside the
  /// polygonal mesh (between a wall chord and the curve) get the closest
  /// triangle with clamped weights.
  std::pair<std::size_t, std::array<double, 3>> locate(Point2 p) const {
    const int cz = cell_z(p.z), cr = cell_r(p.r);
    double best_violation = std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::array<double, 3>> best{0, {1.0, 0.0, 0.0}};
    for (int ring = 0; ring <= n_; ++ring) {
      for (int a = std::max(0, cz - ring); a <= std::min(n_ - 1, cz + ring); ++a)
        for (int b = std::max(0, cr - ring); b <= std::min(n_ - 1, cr + ring); ++b) {
          if (std::max(std::abs(a - cz), std::abs(b - cr)) != ring) continue;
          for (std::size_t t : buckets_[static_cast<std::size_t>(a * n_ + b)]) {
            const auto w = barycentric(t, p);
            const double violation = -std::min({w[0], w[1], w[2], 0.0});
            if (violation == 0.0) return {t, w};
            if (violation < best_violation) {
              best_violation = violation;
              best = {t, w};
            }
          }
        }
      if (best_violation < std::numeric_limits<double>::infinity()) break;
    }
    auto& w = best.second;
    for (double& x : w) x = std::max(x, 0.0);
    const double sum = w[0] + w[1] + w[2];
    for (double& x : w) x /= sum;
    return best;
  }

 private:
  int cell_z(double z) const { return std::clamp(static_cast<int>((z - zmin_) / cz_), 0, n_ - 1); }
  int cell_r(double r) const { return std::clamp(static_cast<int>((r - rmin_) / cr_), 0, n_ - 1); }
  std::array<double, 3> barycentric(std::size_t t, Point2 p) const {
    const auto& tri = mesh_->triangles[t];
    const Point2 a = mesh_->nodes[static_cast<std::size_t>(tri[0])];
    const Point2 b = mesh_->nodes[static_cast<std::size_t>(tri[1])];
    const Point2 c = mesh_->nodes[static_cast<std::size_t>(tri[2])];
    const double d = cross(b - a, c - a);
    const double wb = cross(p - a, c - a) / d, wc = cross(b - a, p - a) / d;
    return {1.0 - wb - wc, wb, wc};
  }

  const TriMesh* mesh_;
  double zmin_, rmin_, cz_ = 1.0, cr_ = 1.0;
  int n_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

/// Cylindrical components of a nodal field at a point of the section.
inline CylVector sample_field(const TriMesh& m, const MeshLocator& loc, const EigenField& f, Point2 p) {
  const auto [t, w] = loc.locate(p);
  CylVector out{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < 3; ++i) {
    const CylVector& u = f.u[static_cast<std::size_t>(m.triangles[t][i])];
    for (std::size_t c = 0; c < 3; ++c) out[c] += w[i] * u[c];
  }
  return out;
}

/// Samples an axisymmetric field at the voxel centres and rotates it to
/// Cartesian components.  Voxels closer than one spacing to the axis take the
/// on-axis limit, which is purely axial.
inline void rasterize(VoxelField& v, const TriMesh& m, const EigenField& f) {
  const MeshLocator loc(m);
  for (std::size_t s = 0; s < v.size(); ++s) {
    const Vec3& c = v.center[s];
    const double r = std::hypot(c[0], c[1]);
    if (r < v.spacing) {
      const CylVector u = sample_field(m, loc, f, {c[2], 0.0});
      v.value[s] = {0.0, 0.0, u[0]};
      continue;
    }
    const CylVector u = sample_field(m, loc, f, {c[2], r});
    const double cs = c[0] / r, sn = c[1] / r;
    v.value[s] = {u[1] * cs - u[2] * sn, u[1] * sn + u[2] * cs, u[0]};
  }
}

inline double inner(const VoxelField& v, std::span<const Vec3> a, std::span<const Vec3> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += dot3(a[i], b[i]);
  return acc * v.voxel_volume();
}

inline double l2_norm(const VoxelField& v) { return std::sqrt(inner(v, v.value, v.value)); }

// ---------------------------------------------------------------------------
// Biot-Savart quadrature

/// BS v at the given points by direct summation over masked voxels.  A voxel
/// whose centre coincides with the evaluation point is skipped.
inline std::vector<Vec3> biot_savart_apply(const VoxelField& v, std::span<const Vec3> points) {
  if (v.size() == 0) throw geometry_error("voxel mask is empty");
  const std::size_t n = v.size();
  std::vector<double> yx(n), yy(n), yz(n), vx(n), vy(n), vz(n);
  for (std::size_t i = 0; i < n; ++i) {
    yx[i] = v.center[i][0];
    yy[i] = v.center[i][1];
    yz[i] = v.center[i][2];
    vx[i] = v.value[i][0];
    vy[i] = v.value[i][1];
    vz[i] = v.value[i][2];
  }
  // A coincident source has zero cross product; the tiny offset keeps its
  // kernel finite so the loop stays branch-free.
  const double floor2 = 1e-30 * v.spacing * v.spacing;
  const double scale = v.voxel_volume() / (4.0 * pi);
  std::vector<Vec3> out(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    const double px = points[p][0], py = points[p][1], pz = points[p][2];
    double bx = 0.0, by = 0.0, bz = 0.0;
#pragma omp simd reduction(+ : bx, by, bz)
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = px - yx[i], dy = py - yy[i], dz = pz - yz[i];
      const double d2 = dx * dx + dy * dy + dz * dz + floor2;
      const double k = 1.0 / (d2 * std::sqrt(d2));
      bx += (vy[i] * dz - vz[i] * dy) * k;
      by += (vz[i] * dx - vx[i] * dz) * k;
      bz += (vx[i] * dy - vy[i] * dx) * k;
    }
    out[p] = {bx * scale, by * scale, bz * scale};
  }
  return out;
}

/// BS v at every masked voxel centre.
inline std::vector<Vec3> biot_savart_voxels(const VoxelField& v) { return biot_savart_apply(v, v.center); }

/// <BS v, v> over the voxel grid.  With rotational_symmetry the field must
/// commute with quarter turns about the z axis (any rasterized axisymmetric
/// field does); the sum then runs over one quadrant and is multiplied by 4.
inline double bs_self_inner(const VoxelField& v, bool rotational_symmetry = false) {
  std::vector<Vec3> pts, vals;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (rotational_symmetry && !(v.center[i][0] > 0.0 && v.center[i][1] > 0.0)) continue;
    pts.push_back(v.center[i]);
    vals.push_back(v.value[i]);
  }
  const std::vector<Vec3> bs = biot_savart_apply(v, pts);
  return (rotational_symmetry ? 4.0 : 1.0) * inner(v, bs, vals);
}

struct BsNormReport {
  double ratio = 0.0;  // |BS v| / |v|
  double bound = 0.0;  // (3 |Omega| / (4 pi))^{1/3}
  bool pass = false;
};

inline BsNormReport verify_bs_norm_bound(const VoxelField& v, double domain_volume) {
  const double nv = l2_norm(v);
  if (!(nv > 0.0)) throw contract_error("zero field has no norm ratio");
  const std::vector<Vec3> bs = biot_savart_voxels(v);
  BsNormReport rep;
  rep.ratio = std::sqrt(inner(v, bs, bs)) / nv;
  rep.bound = bs_norm_bound(domain_volume);
  rep.pass = rep.ratio <= rep.bound;
  return rep;
}

/// Centred-difference curl and divergence of BS v at a masked voxel whose six
/// face neighbours are masked.
struct ProbeDerivatives {
  Vec3 curl{0.0, 0.0, 0.0};
  double divergence = 0.0;
};

inline std::optional<ProbeDerivatives> bs_derivatives_at(const VoxelField& v, int slot) {
  const auto [i, j, k] = v.ijk[static_cast<std::size_t>(slot)];
  const std::array<std::array<int, 3>, 6> offs{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
  std::vector<Vec3> pts;
  for (const auto& o : offs) {
    const int s = v.at(i + o[0], j + o[1], k + o[2]);
    if (s < 0) return std::nullopt;
    pts.push_back(v.center[static_cast<std::size_t>(s)]);
  }
  const std::vector<Vec3> b = biot_savart_apply(v, pts);
  const double h2 = 2.0 * v.spacing;
  auto d = [&](int axis, int comp) {
    return (b[static_cast<std::size_t>(2 * axis)][static_cast<std::size_t>(comp)] -
            b[static_cast<std::size_t>(2 * axis + 1)][static_cast<std::size_t>(comp)]) /
           h2;
  };
  ProbeDerivatives out;
  out.curl = {d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0)};
  out.divergence = d(0, 0) + d(1, 1) + d(2, 2);
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct BoundReport {
  double volume = 0.0;
  double bound = 0.0;
  double mu1 = 0.0;
  double slack = 0.0;
  std::optional<double> bs_ratio;
  double bs_bound = 0.0;
};

inline BoundReport bound_report(double vol, double mu1, std::optional<double> bs_ratio = std::nullopt) {
  BoundReport r;
  r.volume = vol;
  r.bound = volume_lower_bound(vol);
  r.mu1 = mu1;
  r.slack = mu1 - r.bound;
  r.bs_ratio = bs_ratio;
  r.bs_bound = bs_norm_bound(vol);
  return r;
}

}  // namespace curlopt

#endif  // CURLOPT_BOUNDS_HPP
