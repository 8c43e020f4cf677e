#ifndef CURLOPT_MESHING_HPP
#define CURLOPT_MESHING_HPP

// Structured triangulation of star-shaped sections.
//
// Toroidal sections are meshed by rings around the section centroid: ring k
// carries 6k nodes at equal arclength fractions of the wall, scaled towards
// the centroid by k/K.  Axis-touching sections use the same construction on
// a half-disk reference about an axis point, ring k carrying 3k+1 nodes of
// which the first and last lie on the axis.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "curlopt/errors.hpp"
#include "curlopt/geometry.hpp"

namespace curlopt {

enum class EdgeTag { Wall, Axis };
enum class NodeKind { Interior, Wall, Axis };

inline const char* to_string(EdgeTag t) { return t == EdgeTag::Wall ? "WALL" : "AXIS"; }

struct BoundaryEdge {
  std::array<int, 2> nodes{};
  EdgeTag tag = EdgeTag::Wall;
};

struct TriMesh {
  CurveKind kind = CurveKind::Toroidal;
  std::vector<Point2> nodes;
  std::vector<std::array<int, 3>> triangles;
  /// One closed counterclockwise loop.
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<NodeKind> node_kind;
  /// Arclength on the section curve of every node lying on the wall curve
  /// (NaN elsewhere).  Axis-touching wall endpoints carry 0 and the curve
  /// length although their kind is Axis.
  std::vector<double> wall_arclength;
  SectionCurve curve;
  double h = 0.0;

  std::size_t node_count() const { return nodes.size(); }
  bool on_wall_curve(int node) const { return !std::isnan(wall_arclength[static_cast<std::size_t>(node)]); }
};

inline double triangle_signed_area(Point2 a, Point2 b, Point2 c) {
  return 0.5 * cross(b - a, c - a);
}

inline double triangle_area(const TriMesh& m, std::size_t t) {
  const auto& tri = m.triangles[t];
  return triangle_signed_area(m.nodes[static_cast<std::size_t>(tri[0])],
                              m.nodes[static_cast<std::size_t>(tri[1])],
                              m.nodes[static_cast<std::size_t>(tri[2])]);
}

/// Smallest interior angle of a triangle, in degrees.
inline double min_angle_deg(Point2 a, Point2 b, Point2 c) {
  const std::array<Point2, 3> p{a, b, c};
  double best = 180.0;
  for (int i = 0; i < 3; ++i) {
    const Point2 u = p[static_cast<std::size_t>((i + 1) % 3)] - p[static_cast<std::size_t>(i)];
    const Point2 v = p[static_cast<std::size_t>((i + 2) % 3)] - p[static_cast<std::size_t>(i)];
    const double ang = std::atan2(std::abs(cross(u, v)), dot(u, v)) * 180.0 / pi;
    best = std::min(best, ang);
  }
  return best;
}

struct MeshQuality {
  double min_angle_deg = 180.0;
  double max_edge = 0.0;
  double min_signed_area = std::numeric_limits<double>::infinity();
};

inline MeshQuality mesh_quality(const TriMesh& m) {
  MeshQuality q;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    const Point2 a = m.nodes[static_cast<std::size_t>(tri[0])];
    const Point2 b = m.nodes[static_cast<std::size_t>(tri[1])];
    const Point2 c = m.nodes[static_cast<std::size_t>(tri[2])];
    q.min_angle_deg = std::min(q.min_angle_deg, min_angle_deg(a, b, c));
    q.max_edge = std::max({q.max_edge, norm(b - a), norm(c - b), norm(a - c)});
    q.min_signed_area = std::min(q.min_signed_area, triangle_signed_area(a, b, c));
  }
  return q;
}

inline constexpr double mesh_min_angle_floor_deg = 20.0;

namespace detail {

/// Zips two node rings (given as node index lists in counterclockwise order)
/// with triangles, choosing the shorter diagonal at every step.
inline void zip_rings(const std::vector<Point2>& nodes, const std::vector<int>& inner,
                      const std::vector<int>& outer, bool periodic,
                      std::vector<std::array<int, 3>>& tris) {
  const std::size_t m = inner.size(), n = outer.size();
  const std::size_t steps_inner = periodic ? m : m - 1;
  const std::size_t steps_outer = periodic ? n : n - 1;
  std::size_t i = 0, j = 0;
  auto in = [&](std::size_t k) { return inner[k % m]; };
  auto out = [&](std::size_t k) { return outer[k % n]; };
  auto dist = [&](int a, int b) {
    return norm(nodes[static_cast<std::size_t>(a)] - nodes[static_cast<std::size_t>(b)]);
  };
  while (i < steps_inner || j < steps_outer) {
    bool advance_outer;
    if (i == steps_inner) {
      advance_outer = true;
    } else if (j == steps_outer) {
      advance_outer = false;
    } else {
      advance_outer = dist(in(i), out(j + 1)) <= dist(out(j), in(i + 1));
    }
    if (advance_outer) {
      tris.push_back({in(i), out(j), out(j + 1)});
      ++j;
    } else {
      tris.push_back({in(i), out(j), in(i + 1)});
      ++i;
    }
  }
}

inline Point2 mesh_center(const AxisymmetricDomain& domain) {
  const auto [area, centroid] = section_area_centroid(domain.curve);
  (void)area;
  if (domain.kind() == CurveKind::AxisTouching) return {centroid.z, 0.0};
  return centroid;
}

}  // namespace detail

/// True when every ray from `center` meets the wall exactly once, i.e. the
/// polar angle about `center` increases strictly along the curve.
inline bool is_star_shaped(const SectionCurve& curve, Point2 center) {
  const std::size_t n = 8 * curve.samples().size();
  const double ds = curve.length() / static_cast<double>(curve.closed() ? n : n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = ds * static_cast<double>(i);
    const Point2 rel = curve.at(s) - center;
    const Point2 t = curve.tangent(s);
    const double c = cross(rel, t);
    if (!curve.closed() && (i == 0 || i + 1 == n)) {
      // endpoints lie on the axis together with the center
      if (!(c >= 0.0)) return false;
      continue;
    }
    if (!(c > 1e-3 * norm(rel))) return false;
  }
  return true;
}

inline void validate_mesh(const TriMesh& m) {
  for (std::size_t t = 0; t < m.triangles.size(); ++t)
    if (!(triangle_area(m, t) > 0.0)) throw meshing_error("mesh has an inverted triangle");
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    if (m.nodes[i].r < 0.0) throw meshing_error("mesh node below the axis");
    if (m.nodes[i].r == 0.0 && m.node_kind[i] != NodeKind::Axis)
      throw meshing_error("mesh node on the axis is not tagged as an axis node");
  }
  const MeshQuality q = mesh_quality(m);
  if (q.min_angle_deg < mesh_min_angle_floor_deg) {
    std::ostringstream msg;
    msg << "mesh quality floor violated: minimum angle " << q.min_angle_deg << " deg";
    throw meshing_error(msg.str());
  }
}

/// Structured mesh with `rings` node rings between the center and the wall.
inline TriMesh mesh_section_rings(const AxisymmetricDomain& domain, int rings) {
  if (rings < 1) throw meshing_error("ring count must be positive");
  const SectionCurve& curve = domain.curve;
  const Point2 center = detail::mesh_center(domain);
  if (!is_star_shaped(curve, center))
    throw unsupported_shape_error("section is not star-shaped with respect to its centroid");

  TriMesh m;
  m.kind = domain.kind();
  m.curve = curve;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const bool toroidal = domain.kind() == CurveKind::Toroidal;
  const double len = curve.length();

  auto add = [&](Point2 p, NodeKind kind, double s) {
    m.nodes.push_back(p);
    m.node_kind.push_back(kind);
    m.wall_arclength.push_back(s);
    return static_cast<int>(m.nodes.size() - 1);
  };

  std::vector<int> prev{add(center, toroidal ? NodeKind::Interior : NodeKind::Axis, nan)};
  for (int k = 1; k <= rings; ++k) {
    const bool wall = k == rings;
    const int count = toroidal ? 6 * k : 3 * k + 1;
    const int segments = toroidal ? count : count - 1;
    const double scale = static_cast<double>(k) / static_cast<double>(rings);
    std::vector<int> ring;
    ring.reserve(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
      const double s = j == segments ? len : len * static_cast<double>(j) / segments;
      const Point2 on_wall = curve.at(s);
      Point2 p = wall ? on_wall : center + scale * (on_wall - center);
      const bool axis = !toroidal && (j == 0 || j == count - 1);
      if (axis) p.r = 0.0;
      const NodeKind kind = axis ? NodeKind::Axis : (wall ? NodeKind::Wall : NodeKind::Interior);
      ring.push_back(add(p, kind, wall ? s : nan));
    }
    if (k == 1) {
      for (int j = 0; j < segments; ++j)
        m.triangles.push_back({prev[0], ring[static_cast<std::size_t>(j)],
                               ring[static_cast<std::size_t>((j + 1) % count)]});
    } else {
      detail::zip_rings(m.nodes, prev, ring, toroidal, m.triangles);
    }
    if (wall) {
      for (int j = 0; j < segments; ++j)
        m.boundary_edges.push_back(
            {{ring[static_cast<std::size_t>(j)], ring[static_cast<std::size_t>((j + 1) % count)]},
             EdgeTag::Wall});
      if (!toroidal) {
        // Axis from the far wall endpoint back through the center.
        // Ring k's axis nodes are its first and last entries.
        std::vector<int> axis_far, axis_near;
        // Collect per-ring axis nodes: ring k occupies a contiguous block.
        int offset = 1;
        for (int kk = 1; kk <= rings; ++kk) {
          const int cnt = 3 * kk + 1;
          axis_near.push_back(offset);
          axis_far.push_back(offset + cnt - 1);
          offset += cnt;
        }
        int from = axis_far.back();
        for (int kk = rings - 1; kk >= 1; --kk) {
          const int to = axis_far[static_cast<std::size_t>(kk - 1)];
          m.boundary_edges.push_back({{from, to}, EdgeTag::Axis});
          from = to;
        }
        m.boundary_edges.push_back({{from, 0}, EdgeTag::Axis});
        from = 0;
        for (int kk = 1; kk <= rings; ++kk) {
          const int to = axis_near[static_cast<std::size_t>(kk - 1)];
          m.boundary_edges.push_back({{from, to}, EdgeTag::Axis});
          from = to;
        }
      }
    }
    prev = std::move(ring);
  }
  for (std::size_t t = 0; t < m.triangles.size(); ++t)
    if (!(triangle_area(m, t) > 0.0))
      throw meshing_error("structured mesh produced an inverted triangle");
  validate_mesh(m);
  m.h = mesh_quality(m).max_edge;
  return m;
}

/// Smallest structured mesh whose longest edge is at most 1.5 h.
inline TriMesh mesh_section(const AxisymmetricDomain& domain, double h) {
  if (!(h > 0.0)) throw meshing_error("mesh size must be positive");
  const Point2 center = detail::mesh_center(domain);
  double reach = 0.0;
  for (const Point2& p : domain.curve.samples()) reach = std::max(reach, norm(p - center));
  // The slack keeps the ring count stable under rounding-level changes of
  // the geometry (translations, rescalings).
  constexpr double slack = 1e-9;
  int rings = std::max(1, static_cast<int>(std::ceil(reach / h - slack)));
  for (int attempt = 0; attempt < 64; ++attempt) {
    TriMesh m = mesh_section_rings(domain, rings);
    const double longest = mesh_quality(m).max_edge;
    if (longest <= 1.5 * h * (1.0 + slack)) {
      m.h = h;
      return m;
    }
    rings = std::max(rings + 1, static_cast<int>(std::ceil(rings * longest / (1.45 * h))));
  }
  throw meshing_error("could not reach the requested mesh size");
}

/// Uniform 1:4 refinement; new wall nodes are projected onto the section
/// curve at the mean arclength of the split edge.
inline TriMesh refine(const TriMesh& in) {
  TriMesh m;
  m.kind = in.kind;
  m.curve = in.curve;
  m.h = 0.5 * in.h;
  m.nodes = in.nodes;
  m.node_kind = in.node_kind;
  m.wall_arclength = in.wall_arclength;
  const double len = in.curve.length();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::map<std::pair<int, int>, EdgeTag> boundary;
  for (const auto& e : in.boundary_edges)
    boundary[{std::min(e.nodes[0], e.nodes[1]), std::max(e.nodes[0], e.nodes[1])}] = e.tag;

  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
    if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
    const Point2 pa = in.nodes[static_cast<std::size_t>(a)], pb = in.nodes[static_cast<std::size_t>(b)];
    Point2 p = 0.5 * (pa + pb);
    NodeKind kind = NodeKind::Interior;
    double s = nan;
    if (auto bit = boundary.find(key); bit != boundary.end()) {
      if (bit->second == EdgeTag::Wall) {
        double sa = in.wall_arclength[static_cast<std::size_t>(a)];
        double sb = in.wall_arclength[static_cast<std::size_t>(b)];
        if (in.kind == CurveKind::Toroidal && std::abs(sa - sb) > 0.5 * len) {
          (sa < sb ? sa : sb) += len;
        }
        s = 0.5 * (sa + sb);
        if (s >= len && in.kind == CurveKind::Toroidal) s -= len;
        p = in.curve.at(s);
        kind = NodeKind::Wall;
      } else {
        p.r = 0.0;
        kind = NodeKind::Axis;
      }
    }
    m.nodes.push_back(p);
    m.node_kind.push_back(kind);
    m.wall_arclength.push_back(s);
    const int id = static_cast<int>(m.nodes.size() - 1);
    midpoint.emplace(key, id);
    return id;
  };

  m.triangles.reserve(4 * in.triangles.size());
  for (const auto& t : in.triangles) {
    const int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
    m.triangles.push_back({t[0], ab, ca});
    m.triangles.push_back({ab, t[1], bc});
    m.triangles.push_back({ca, bc, t[2]});
    m.triangles.push_back({ab, bc, ca});
  }
  for (const auto& e : in.boundary_edges) {
    const int c = mid(e.nodes[0], e.nodes[1]);
    m.boundary_edges.push_back({{e.nodes[0], c}, e.tag});
    m.boundary_edges.push_back({{c, e.nodes[1]}, e.tag});
  }
  validate_mesh(m);
  return m;
}

/// Writes the ASCII "trimesh v1" format: header, node count, "z r" lines,
/// triangle count, "i j k" lines, then one "i j TAG" line per boundary edge.
/// A non-empty comment goes on a "# " line right after the header.
inline void write_mesh(std::ostream& os, const TriMesh& m, const std::string& comment = {}) {
  os << "trimesh v1\n";
  if (!comment.empty()) os << "# " << comment << '\n';
  os << m.nodes.size() << '\n';
  os << std::setprecision(17);
  for (const Point2& p : m.nodes) os << p.z << ' ' << p.r << '\n';
  os << m.triangles.size() << '\n';
  for (const auto& t : m.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& e : m.boundary_edges)
    os << e.nodes[0] << ' ' << e.nodes[1] << ' ' << to_string(e.tag) << '\n';
}

/// Raw contents of a mesh dump (the section curve is not part of the format).
struct MeshDump {
  std::vector<Point2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
};

inline MeshDump read_mesh(std::istream& is) {
  MeshDump d;
  std::string header;
  std::getline(is, header);
  if (header != "trimesh v1") throw io_error("not a trimesh v1 file");
  while (is.peek() == '#') std::getline(is, header);
  std::size_t n = 0;
  if (!(is >> n)) throw io_error("missing node count");
  d.nodes.resize(n);
  for (auto& p : d.nodes)
    if (!(is >> p.z >> p.r)) throw io_error("truncated node list");
  std::size_t nt = 0;
  if (!(is >> nt)) throw io_error("missing triangle count");
  d.triangles.resize(nt);
  for (auto& t : d.triangles)
    if (!(is >> t[0] >> t[1] >> t[2])) throw io_error("truncated triangle list");
  int a = 0, b = 0;
  std::string tag;
  while (is >> a >> b >> tag) {
    if (tag != "WALL" && tag != "AXIS") throw io_error("unknown boundary tag " + tag);
    d.boundary_edges.push_back({{a, b}, tag == "WALL" ? EdgeTag::Wall : EdgeTag::Axis});
  }
  return d;
}

}  // namespace curlopt

#endif  // CURLOPT_MESHING_HPP
