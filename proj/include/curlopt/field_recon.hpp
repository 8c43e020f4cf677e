#ifndef CURLOPT_FIELD_RECON_HPP
#define CURLOPT_FIELD_RECON_HPP

// Eigenfield reconstruction and boundary diagnostics.
//
// u = (1/r) [d_r psi e_z - d_z psi e_r + mu psi e_phi].  On the wall psi is
// constant, so |u|^2 there is q = ((d_n psi)^2 + mu^2 c1^2) / r^2.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "curlopt/errors.hpp"
#include "curlopt/geometry.hpp"
#include "curlopt/gs_solver.hpp"
#include "curlopt/meshing.hpp"

namespace curlopt {

/// Cylindrical components (u_z, u_r, u_phi).
using CylVector = std::array<double, 3>;

struct EigenField {
  std::vector<CylVector> u;  // per mesh node
  double mu1 = 0.0;
  /// Factor applied to the solution's psi to reach unit L2 norm (1 for
  /// solutions coming straight from the solver).
  double psi_scale = 1.0;
};

/// Closed-form field energy int |u|^2 dx = 2 pi (a(psi, psi) + mu^2 b(psi, psi)).
inline double field_energy(const WeightedForms& f, const Vector& psi, double mu) {
  return 2.0 * pi * (psi.dot(f.a_full * psi) + mu * mu * psi.dot(f.b_full * psi));
}

/// Per-triangle gradient (d_z, d_r) of a P1 function.
inline Point2 triangle_gradient(const TriMesh& m, std::size_t t, const Vector& psi) {
  const auto& tri = m.triangles[t];
  const Point2 p[3] = {m.nodes[static_cast<std::size_t>(tri[0])], m.nodes[static_cast<std::size_t>(tri[1])],
                       m.nodes[static_cast<std::size_t>(tri[2])]};
  const double twice_area = cross(p[1] - p[0], p[2] - p[0]);
  Point2 g{0.0, 0.0};
  for (int i = 0; i < 3; ++i) {
    const Point2 a = p[(i + 1) % 3], b = p[(i + 2) % 3];
    const double v = psi[tri[static_cast<std::size_t>(i)]];
    g.z += v * (a.r - b.r) / twice_area;
    g.r += v * (b.z - a.z) / twice_area;
  }
  return g;
}

/// Area-weighted average of the gradients of the triangles around each node.
inline std::vector<Point2> recovered_gradient(const TriMesh& m, const Vector& psi) {
  std::vector<Point2> g(m.nodes.size(), Point2{0.0, 0.0});
  std::vector<double> w(m.nodes.size(), 0.0);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const Point2 gt = triangle_gradient(m, t, psi);
    const double area = triangle_area(m, t);
    for (int v : m.triangles[t]) {
      g[static_cast<std::size_t>(v)] = g[static_cast<std::size_t>(v)] + area * gt;
      w[static_cast<std::size_t>(v)] += area;
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (1.0 / w[i]) * g[i];
  return g;
}

inline double axis_threshold(const TriMesh& m) { return 1e-8 * m.curve.diameter(); }

namespace detail {

/// lim psi / r^2 at an axis node from the one-sided fit psi = alpha r^2 along
/// its incident edges.
inline double axis_curvature_fit(const TriMesh& m, const std::vector<std::vector<int>>& nbrs,
                                 std::size_t node, const Vector& psi, double r_min) {
  double num = 0.0, den = 0.0;
  for (int j : nbrs[node]) {
    const double r = m.nodes[static_cast<std::size_t>(j)].r;
    if (r < r_min) continue;
    num += psi[j] * r * r;
    den += r * r * r * r;
  }
  if (!(den > 0.0)) throw reconstruction_error("axis node has no off-axis neighbours");
  return num / den;
}

inline std::vector<std::vector<int>> node_neighbours(const TriMesh& m) {
  std::vector<std::vector<int>> nb(m.nodes.size());
  for (const auto& t : m.triangles)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) nb[static_cast<std::size_t>(t[static_cast<std::size_t>(i)])].push_back(t[static_cast<std::size_t>(j)]);
  for (auto& v : nb) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return nb;
}

}  // namespace detail

inline EigenField reconstruct(const EigenSolution& s, const TriMesh& m) {
  if (s.psi.size() != static_cast<Eigen::Index>(m.nodes.size()))
    throw reconstruction_error("solution does not belong to this mesh");
  const WeightedForms f = assemble(m);
  const double energy = field_energy(f, s.psi, s.mu1);
  if (!(energy > 0.0) || !std::isfinite(energy))
    throw reconstruction_error("zero field cannot be normalized");
  EigenField out;
  out.mu1 = s.mu1;
  out.psi_scale = 1.0 / std::sqrt(energy);
  const Vector psi = out.psi_scale * s.psi;

  const std::vector<Point2> grad = recovered_gradient(m, psi);
  const auto nbrs = detail::node_neighbours(m);
  const double r_min = axis_threshold(m);
  out.u.resize(m.nodes.size());
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    const double r = m.nodes[i].r;
    if (r < r_min) {
      const double alpha = detail::axis_curvature_fit(m, nbrs, i, psi, r_min);
      out.u[i] = {2.0 * alpha, 0.0, 0.0};
    } else {
      out.u[i] = {grad[i].r / r, -grad[i].z / r, s.mu1 * psi[static_cast<Eigen::Index>(i)] / r};
    }
  }
  return out;
}

enum class TraceMethod {
  /// Wall fluxes from the Galerkin residual A psi - mu^2 B psi, divided by
  /// the lumped wall mass.
  ConsistentFlux,
  /// Area-weighted gradient of the wall-adjacent triangles.
  GradientLayer,
};

struct BoundaryTrace {
  CurveKind kind = CurveKind::Toroidal;
  double mu1 = 0.0;
  double c1 = 0.0;
  double length = 0.0;

  // Wall nodes in increasing arclength.
  std::vector<int> node_ids;
  std::vector<double> node_arclength;
  std::vector<double> node_q;
  std::vector<double> node_dn_psi;

  // Uniform arclength grid.
  WallGrid grid;
  std::vector<double> z;
  std::vector<double> r;
  std::vector<double> q;
  std::vector<double> dn_psi;

  double q_min = 0.0;
  double q_max = 0.0;
  double q_mean = 0.0;      // int q r dl / int r dl
  double q_variance = 0.0;  // int (q - q_mean)^2 r dl / int r dl
  double r_integral = 0.0;  // int r dl
};

namespace detail {

/// Wall nodes of a mesh sorted by arclength.
inline std::vector<int> wall_nodes_in_order(const TriMesh& m) {
  std::vector<int> ids;
  for (std::size_t i = 0; i < m.nodes.size(); ++i)
    if (m.on_wall_curve(static_cast<int>(i))) ids.push_back(static_cast<int>(i));
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    return m.wall_arclength[static_cast<std::size_t>(a)] < m.wall_arclength[static_cast<std::size_t>(b)];
  });
  return ids;
}

/// Fills the uniform grid and statistics from node samples.
inline void finish_trace(BoundaryTrace& tr, const SectionCurve& curve, std::size_t grid_size) {
  tr.grid = wall_grid(curve, grid_size);
  const std::size_t n = tr.node_arclength.size();
  auto interp = [&](const std::vector<double>& v, double s) {
    if (tr.kind == CurveKind::Toroidal) {
      // periodic piecewise-linear in node arclength
      auto it = std::upper_bound(tr.node_arclength.begin(), tr.node_arclength.end(), s);
      const std::size_t hi = static_cast<std::size_t>(it - tr.node_arclength.begin());
      const std::size_t a = hi == 0 ? n - 1 : hi - 1;
      const std::size_t b = hi == n ? 0 : hi;
      double sa = tr.node_arclength[a], sb = tr.node_arclength[b];
      double x = s;
      if (hi == 0) sa -= tr.length;
      if (hi == n) sb += tr.length;
      const double t = sb > sa ? (x - sa) / (sb - sa) : 0.0;
      return (1.0 - t) * v[a] + t * v[b];
    }
    auto it = std::upper_bound(tr.node_arclength.begin(), tr.node_arclength.end(), s);
    std::size_t hi = std::clamp<std::size_t>(static_cast<std::size_t>(it - tr.node_arclength.begin()), 1, n - 1);
    const std::size_t a = hi - 1;
    const double t = std::clamp((s - tr.node_arclength[a]) / (tr.node_arclength[hi] - tr.node_arclength[a]), 0.0, 1.0);
    return (1.0 - t) * v[a] + t * v[hi];
  };
  const std::size_t g = tr.grid.size;
  tr.z.resize(g);
  tr.r.resize(g);
  tr.q.resize(g);
  tr.dn_psi.resize(g);
  for (std::size_t i = 0; i < g; ++i) {
    const double s = tr.grid.at(i);
    const Point2 p = curve.at(s);
    tr.z[i] = p.z;
    tr.r[i] = std::max(p.r, 0.0);
    tr.q[i] = interp(tr.node_q, s);
    tr.dn_psi[i] = interp(tr.node_dn_psi, s);
  }
  double rq = 0.0, rsum = 0.0;
  tr.q_min = std::numeric_limits<double>::infinity();
  tr.q_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g; ++i) {
    rq += tr.grid.weight(i) * tr.q[i] * tr.r[i];
    rsum += tr.grid.weight(i) * tr.r[i];
    tr.q_min = std::min(tr.q_min, tr.q[i]);
    tr.q_max = std::max(tr.q_max, tr.q[i]);
  }
  tr.r_integral = rsum;
  tr.q_mean = rq / rsum;
  double var = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const double d = tr.q[i] - tr.q_mean;
    var += tr.grid.weight(i) * d * d * tr.r[i];
  }
  tr.q_variance = var / rsum;
}

}  // namespace detail

/// Wall values of g = (d_n psi) / r from a residual vector (the consistent
/// flux A psi - load), divided by the lumped wall mass.  Axis endpoints of
/// axis-touching walls are filled by linear extrapolation along the wall.
inline std::vector<double> consistent_wall_flux(const TriMesh& m, const std::vector<int>& wall,
                                                const Vector& residual) {
  const std::size_t n = wall.size();
  std::vector<double> mass(m.nodes.size(), 0.0);
  for (const auto& e : m.boundary_edges) {
    if (e.tag != EdgeTag::Wall) continue;
    const double len = norm(m.nodes[static_cast<std::size_t>(e.nodes[0])] - m.nodes[static_cast<std::size_t>(e.nodes[1])]);
    mass[static_cast<std::size_t>(e.nodes[0])] += 0.5 * len;
    mass[static_cast<std::size_t>(e.nodes[1])] += 0.5 * len;
  }
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto id = static_cast<std::size_t>(wall[k]);
    g[k] = residual[static_cast<Eigen::Index>(id)] / mass[id];
  }
  if (m.kind == CurveKind::AxisTouching && n >= 3) {
    auto extrap = [&](std::size_t end, std::size_t a, std::size_t b) {
      const double sa = m.wall_arclength[static_cast<std::size_t>(wall[a])];
      const double sb = m.wall_arclength[static_cast<std::size_t>(wall[b])];
      const double se = m.wall_arclength[static_cast<std::size_t>(wall[end])];
      g[end] = g[a] + (g[b] - g[a]) * (se - sa) / (sb - sa);
    };
    extrap(0, 1, 2);
    extrap(n - 1, n - 2, n - 3);
  }
  return g;
}

/// Half-width of the wall-node window used to smooth the recovered flux.
inline constexpr int default_trace_smoothing = 2;

namespace detail {

/// Least-squares quadratic fit in arclength over 2w+1 consecutive wall nodes,
/// evaluated at the centre node (one-sided windows at axis endpoints).
inline std::vector<double> local_quadratic_smooth(const TriMesh& m, const std::vector<int>& wall,
                                                  const std::vector<double>& g, int w) {
  const auto n = static_cast<long>(wall.size());
  if (n < 2 * w + 1) return g;
  const double length = m.curve.length();
  const bool periodic = m.kind == CurveKind::Toroidal;
  std::vector<double> out(g.size());
  for (long k = 0; k < n; ++k) {
    long lo = k - w;
    if (!periodic) lo = std::clamp(lo, 0L, n - 2 * w - 1);
    const double s0 = m.wall_arclength[static_cast<std::size_t>(wall[static_cast<std::size_t>(k)])];
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atb = Eigen::Vector3d::Zero();
    for (long j = lo; j <= lo + 2 * w; ++j) {
      const long jj = ((j % n) + n) % n;
      double ds = m.wall_arclength[static_cast<std::size_t>(wall[static_cast<std::size_t>(jj)])] - s0;
      if (periodic) ds -= length * std::round(ds / length);
      const Eigen::Vector3d row(1.0, ds, ds * ds);
      ata += row * row.transpose();
      atb += row * g[static_cast<std::size_t>(jj)];
    }
    out[static_cast<std::size_t>(k)] = ata.ldlt().solve(atb)[0];
  }
  return out;
}

}  // namespace detail

inline BoundaryTrace boundary_trace(const EigenSolution& s, const TriMesh& m,
                                    TraceMethod method = TraceMethod::ConsistentFlux,
                                    std::size_t grid_size = default_curve_samples,
                                    int smoothing_halfwidth = default_trace_smoothing) {
  if (s.psi.size() != static_cast<Eigen::Index>(m.nodes.size()))
    throw reconstruction_error("solution does not belong to this mesh");
  BoundaryTrace tr;
  tr.kind = m.kind;
  tr.mu1 = s.mu1;
  tr.c1 = s.c1;
  tr.length = m.curve.length();
  tr.node_ids = detail::wall_nodes_in_order(m);
  const std::size_t n = tr.node_ids.size();
  if (n < 3) throw reconstruction_error("too few wall nodes for a boundary trace");

  std::vector<double> g(n);  // d_n psi / r
  if (method == TraceMethod::ConsistentFlux) {
    const WeightedForms f = assemble(m);
    const Vector res = f.a_full * s.psi - s.lambda() * (f.b_full * s.psi);
    g = consistent_wall_flux(m, tr.node_ids, res);
  } else {
    std::vector<Point2> grad(m.nodes.size(), Point2{0.0, 0.0});
    std::vector<double> w(m.nodes.size(), 0.0);
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
      bool touches = false;
      for (int v : m.triangles[t]) touches = touches || m.on_wall_curve(v);
      if (!touches) continue;
      const Point2 gt = triangle_gradient(m, t, s.psi);
      const double area = triangle_area(m, t);
      for (int v : m.triangles[t]) {
        grad[static_cast<std::size_t>(v)] = grad[static_cast<std::size_t>(v)] + area * gt;
        w[static_cast<std::size_t>(v)] += area;
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      const auto id = static_cast<std::size_t>(tr.node_ids[k]);
      const Point2 gr = (1.0 / w[id]) * grad[id];
      const double dn = dot(gr, m.curve.normal(m.wall_arclength[id]));
      g[k] = m.nodes[id].r > 0.0 ? dn / m.nodes[id].r : 0.0;
    }
    if (m.kind == CurveKind::AxisTouching) {
      g[0] = 2.0 * g[1] - g[2];
      g[n - 1] = 2.0 * g[n - 2] - g[n - 3];
    }
  }

  if (smoothing_halfwidth > 0) g = detail::local_quadratic_smooth(m, tr.node_ids, g, smoothing_halfwidth);

  tr.node_arclength.resize(n);
  tr.node_q.resize(n);
  tr.node_dn_psi.resize(n);
  const double mc = s.mu1 * s.c1;
  for (std::size_t k = 0; k < n; ++k) {
    const auto id = static_cast<std::size_t>(tr.node_ids[k]);
    const double r = m.nodes[id].r;
    tr.node_arclength[k] = m.wall_arclength[id];
    tr.node_dn_psi[k] = g[k] * r;
    tr.node_q[k] = g[k] * g[k] + (r > 0.0 ? mc * mc / (r * r) : 0.0);
  }
  detail::finish_trace(tr, m.curve, grid_size);
  return tr;
}

/// max over wall nodes off the axis of |u . N| (meridional normal component).
inline double tangency_residual(const EigenField& field, const TriMesh& m) {
  const double r_min = axis_threshold(m);
  double worst = 0.0;
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    if (!m.on_wall_curve(static_cast<int>(i)) || m.nodes[i].r < r_min) continue;
    const Point2 n = m.curve.normal(m.wall_arclength[i]);
    worst = std::max(worst, std::abs(field.u[i][0] * n.z + field.u[i][1] * n.r));
  }
  return worst;
}

/// max over interior hat functions phi of |int u . grad phi dx| / ||phi||,
/// with u the P1 interpolant of the recovered nodal field.
inline double weak_divergence_residual(const EigenField& field, const TriMesh& m) {
  std::vector<double> flux(m.nodes.size(), 0.0), phi_norm2(m.nodes.size(), 0.0);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    const Point2 p[3] = {m.nodes[static_cast<std::size_t>(tri[0])], m.nodes[static_cast<std::size_t>(tri[1])],
                         m.nodes[static_cast<std::size_t>(tri[2])]};
    const double twice_area = cross(p[1] - p[0], p[2] - p[0]);
    const double area = 0.5 * twice_area;
    // Edge-midpoint rule (exact for quadratics): integrand u . grad phi * r.
    for (int i = 0; i < 3; ++i) {
      const Point2 a = p[(i + 1) % 3], b = p[(i + 2) % 3];
      const Point2 grad{(a.r - b.r) / twice_area, (b.z - a.z) / twice_area};
      double acc = 0.0, mass = 0.0;
      for (int e = 0; e < 3; ++e) {
        const int u0 = e, u1 = (e + 1) % 3;
        const auto n0 = static_cast<std::size_t>(tri[static_cast<std::size_t>(u0)]);
        const auto n1 = static_cast<std::size_t>(tri[static_cast<std::size_t>(u1)]);
        const double uz = 0.5 * (field.u[n0][0] + field.u[n1][0]);
        const double ur = 0.5 * (field.u[n0][1] + field.u[n1][1]);
        const double r = 0.5 * (p[u0].r + p[u1].r);
        const double phi = (u0 == i || u1 == i) ? 0.5 : 0.0;
        acc += (uz * grad.z + ur * grad.r) * r;
        mass += phi * phi * r;
      }
      const auto node = static_cast<std::size_t>(tri[static_cast<std::size_t>(i)]);
      flux[node] += 2.0 * pi * area / 3.0 * acc;
      phi_norm2[node] += 2.0 * pi * area / 3.0 * mass;
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < m.nodes.size(); ++i)
    if (m.node_kind[i] == NodeKind::Interior)
      worst = std::max(worst, std::abs(flux[i]) / std::sqrt(phi_norm2[i]));
  return worst;
}

/// CSV with columns arclength,z,r,q,dn_psi on the uniform wall grid.
inline void write_trace_csv(std::ostream& os, const BoundaryTrace& tr) {
  os << "arclength,z,r,q,dn_psi\n" << std::setprecision(12);
  for (std::size_t i = 0; i < tr.grid.size; ++i)
    os << tr.grid.at(i) << ',' << tr.z[i] << ',' << tr.r[i] << ',' << tr.q[i] << ',' << tr.dn_psi[i] << '\n';
}

}  // namespace curlopt

#endif  // CURLOPT_FIELD_RECON_HPP
