#ifndef CURLOPT_GEOMETRY_HPP
#define CURLOPT_GEOMETRY_HPP

// Axisymmetric domains described by their meridional section in the
// (z, r) half-plane, r >= 0.  The section boundary is traversed
// counterclockwise with z as abscissa and r as ordinate, so the outward
// normal of a curve with unit tangent (z', r') is (r', -z').

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "curlopt/errors.hpp"

namespace curlopt {

inline constexpr double pi = std::numbers::pi;
inline constexpr std::size_t default_curve_samples = 512;

struct Point2 {
  double z = 0.0;
  double r = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.z + b.z, a.r + b.r}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.z - b.z, a.r - b.r}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.z, s * a.r}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double dot(Point2 a, Point2 b) { return a.z * b.z + a.r * b.r; }
inline double cross(Point2 a, Point2 b) { return a.z * b.r - a.r * b.z; }
inline double norm(Point2 a) { return std::hypot(a.z, a.r); }

enum class CurveKind { Toroidal, AxisTouching };

inline const char* to_string(CurveKind kind) {
  return kind == CurveKind::Toroidal ? "toroidal" : "axis_touching";
}

namespace detail {

/// Interpolating cubic spline of one coordinate, either periodic or with
/// prescribed end slopes.
class CubicSpline1d {
 public:
  CubicSpline1d() = default;

  static CubicSpline1d periodic(std::vector<double> knots, std::vector<double> values,
                                double period) {
    CubicSpline1d s;
    const std::size_t n = knots.size();
    knots.push_back(period);
    values.push_back(values.front());
    s.knots_ = std::move(knots);
    s.values_ = std::move(values);
    s.periodic_ = true;

    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t im = (i + n - 1) % n;
      const double hm = s.step(im);
      const double h = s.step(i);
      const auto ii = static_cast<Eigen::Index>(i);
      trip.emplace_back(ii, static_cast<Eigen::Index>(im), hm);
      trip.emplace_back(ii, ii, 2.0 * (hm + h));
      trip.emplace_back(ii, static_cast<Eigen::Index>((i + 1) % n), h);
      const double ym = s.values_[im];
      rhs[ii] = 6.0 * ((s.values_[i + 1] - s.values_[i]) / h - (s.values_[i] - ym) / hm);
    }
    s.second_ = solve_tridiagonal(n, trip, rhs);
    s.second_.push_back(s.second_.front());
    return s;
  }

  static CubicSpline1d clamped(std::vector<double> knots, std::vector<double> values,
                               double slope_begin, double slope_end) {
    CubicSpline1d s;
    const std::size_t n = knots.size();
    s.knots_ = std::move(knots);
    s.values_ = std::move(values);
    s.periodic_ = false;

    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (i == 0) {
        const double h = s.step(0);
        trip.emplace_back(0, 0, 2.0 * h);
        trip.emplace_back(0, 1, h);
        rhs[0] = 6.0 * ((s.values_[1] - s.values_[0]) / h - slope_begin);
      } else if (i + 1 == n) {
        const double h = s.step(n - 2);
        trip.emplace_back(ii, ii - 1, h);
        trip.emplace_back(ii, ii, 2.0 * h);
        rhs[ii] = 6.0 * (slope_end - (s.values_[n - 1] - s.values_[n - 2]) / h);
      } else {
        const double hm = s.step(i - 1);
        const double h = s.step(i);
        trip.emplace_back(ii, ii - 1, hm);
        trip.emplace_back(ii, ii, 2.0 * (hm + h));
        trip.emplace_back(ii, ii + 1, h);
        rhs[ii] = 6.0 * ((s.values_[i + 1] - s.values_[i]) / h -
                         (s.values_[i] - s.values_[i - 1]) / hm);
      }
    }
    s.second_ = solve_tridiagonal(n, trip, rhs);
    return s;
  }

  double value(double x) const {
    const auto [i, a, b, h] = locate(x);
    return second_[i] * a * a * a / (6.0 * h) + second_[i + 1] * b * b * b / (6.0 * h) +
           (values_[i] / h - second_[i] * h / 6.0) * a +
           (values_[i + 1] / h - second_[i + 1] * h / 6.0) * b;
  }

  double derivative(double x) const {
    const auto [i, a, b, h] = locate(x);
    return -second_[i] * a * a / (2.0 * h) + second_[i + 1] * b * b / (2.0 * h) -
           (values_[i] / h - second_[i] * h / 6.0) + (values_[i + 1] / h - second_[i + 1] * h / 6.0);
  }

  double second_derivative(double x) const {
    const auto [i, a, b, h] = locate(x);
    return (second_[i] * a + second_[i + 1] * b) / h;
  }

 private:
  struct Location {
    std::size_t index;
    double to_right;  // knots[i+1] - x
    double to_left;   // x - knots[i]
    double width;
  };

  double step(std::size_t i) const { return knots_[i + 1] - knots_[i]; }

  Location locate(double x) const {
    if (periodic_) {
      const double period = knots_.back();
      x = std::fmod(x, period);
      if (x < 0.0) x += period;
    } else {
      x = std::clamp(x, knots_.front(), knots_.back());
    }
    auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    std::size_t i = it == knots_.begin() ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
    i = std::min(i, knots_.size() - 2);
    return {i, knots_[i + 1] - x, x - knots_[i], step(i)};
  }

  static std::vector<double> solve_tridiagonal(std::size_t n,
                                               const std::vector<Eigen::Triplet<double>>& trip,
                                               const Eigen::VectorXd& rhs) {
    Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    m.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(m);
    if (ldlt.info() != Eigen::Success) throw geometry_error("spline system is singular");
    Eigen::VectorXd x = ldlt.solve(rhs);
    return {x.data(), x.data() + x.size()};
  }

  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> second_;
  bool periodic_ = false;
};

inline int orientation_sign(Point2 a, Point2 b, Point2 c) {
  const double v = cross(b - a, c - a);
  const double scale = std::max({norm(b - a), norm(c - a), 1e-300});
  if (std::abs(v) <= 1e-14 * scale * scale) return 0;
  return v > 0 ? 1 : -1;
}

inline bool on_segment(Point2 a, Point2 b, Point2 p) {
  return std::min(a.z, b.z) <= p.z && p.z <= std::max(a.z, b.z) && std::min(a.r, b.r) <= p.r &&
         p.r <= std::max(a.r, b.r);
}

inline bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d) {
  const int o1 = orientation_sign(a, b, c);
  const int o2 = orientation_sign(a, b, d);
  const int o3 = orientation_sign(c, d, a);
  const int o4 = orientation_sign(c, d, b);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

// Derivative at x0 of the cubic through four points (Lagrange form).
inline double endpoint_slope(std::span<const double> x, std::span<const double> y) {
  double slope = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    // d/dx of L_j at x[0]
    double dl = 0.0;
    for (std::size_t m = 0; m < 4; ++m) {
      if (m == j) continue;
      double term = 1.0 / (x[j] - x[m]);
      for (std::size_t k = 0; k < 4; ++k) {
        if (k == j || k == m) continue;
        term *= (x[0] - x[k]) / (x[j] - x[k]);
      }
      dl += term;
    }
    slope += y[j] * dl;
  }
  return slope;
}

}  // namespace detail

/// Generating curve of an axisymmetric domain: dense samples interpolated by
/// a cubic spline in the cumulative chord length, which is used as the
/// arclength coordinate throughout.
///
/// Toroidal curves are closed (the last sample connects back to the first);
/// axis-touching curves are open with both endpoints on r = 0 and the axis
/// segment between them closes the section.
class SectionCurve {
 public:
  static SectionCurve from_samples(CurveKind kind, std::vector<Point2> samples) {
    SectionCurve c;
    c.kind_ = kind;
    c.samples_ = std::move(samples);
    c.build();
    return c;
  }

  CurveKind kind() const { return kind_; }
  bool closed() const { return kind_ == CurveKind::Toroidal; }
  std::span<const Point2> samples() const { return samples_; }
  /// Arclength coordinate of each sample.
  std::span<const double> arclength() const { return knots_; }
  double length() const { return length_; }

  Point2 at(double s) const { return {z_.value(s), r_.value(s)}; }

  Point2 derivative(double s) const { return {z_.derivative(s), r_.derivative(s)}; }

  Point2 tangent(double s) const {
    const Point2 d = derivative(s);
    return (1.0 / norm(d)) * d;
  }

  Point2 normal(double s) const {
    const Point2 t = tangent(s);
    return {t.r, -t.z};
  }

  /// Signed curvature, positive where the section is locally convex.
  double curvature(double s) const {
    const Point2 d = derivative(s);
    const Point2 dd{z_.second_derivative(s), r_.second_derivative(s)};
    const double speed = norm(d);
    return cross(d, dd) / (speed * speed * speed);
  }

  /// Closed boundary polygon of the section (axis-touching curves are closed
  /// implicitly by the axis segment from the last sample to the first).
  double signed_area() const {
    double a = 0.0;
    const std::size_t n = samples_.size();
    for (std::size_t i = 0; i < n; ++i) a += cross(samples_[i], samples_[(i + 1) % n]);
    return 0.5 * a;
  }

  /// Accurate arclength of the spline between consecutive samples.
  std::vector<double> spline_arclength() const {
    static constexpr std::array<double, 5> gx{0.0, -0.5384693101056831, 0.5384693101056831,
                                              -0.9061798459386640, 0.9061798459386640};
    static constexpr std::array<double, 5> gw{0.5688888888888889, 0.4786286704993665,
                                              0.4786286704993665, 0.2369268850561891,
                                              0.2369268850561891};
    std::vector<double> cum(knot_count(), 0.0);
    for (std::size_t i = 0; i + 1 < cum.size(); ++i) {
      const double a = knot(i), b = knot(i + 1);
      double acc = 0.0;
      for (std::size_t q = 0; q < gx.size(); ++q)
        acc += gw[q] * norm(derivative(0.5 * (a + b) + 0.5 * (b - a) * gx[q]));
      cum[i + 1] = cum[i] + 0.5 * (b - a) * acc;
    }
    return cum;
  }

  /// The same curve re-sampled at `count` points equally spaced in spline
  /// arclength.
  SectionCurve resampled(std::size_t count) const {
    const std::vector<double> cum = spline_arclength();
    const double total = cum.back();
    std::vector<Point2> out;
    out.reserve(count);
    const double spacing = closed() ? total / static_cast<double>(count)
                                    : total / static_cast<double>(count - 1);
    for (std::size_t k = 0; k < count; ++k) {
      const double target = spacing * static_cast<double>(k);
      if (!closed() && k + 1 == count) {
        out.push_back(samples_.back());
        break;
      }
      auto it = std::upper_bound(cum.begin(), cum.end(), target);
      std::size_t i = it == cum.begin() ? 0 : static_cast<std::size_t>(it - cum.begin()) - 1;
      i = std::min(i, cum.size() - 2);
      const double frac = (target - cum[i]) / (cum[i + 1] - cum[i]);
      double s = knot(i) + frac * (knot(i + 1) - knot(i));
      for (int iter = 0; iter < 8; ++iter) {
        const double f = cum[i] + partial_length(knot(i), s) - target;
        s -= f / norm(derivative(s));
      }
      out.push_back(at(s));
    }
    if (!closed()) {
      out.front() = samples_.front();
      out.back() = samples_.back();
    }
    return from_samples(kind_, std::move(out));
  }

  /// Image under (z, r) -> (scale * z + shift_z, scale * r).
  SectionCurve transformed(double scale, double shift_z = 0.0) const {
    std::vector<Point2> out(samples_.size());
    std::transform(samples_.begin(), samples_.end(), out.begin(), [&](Point2 p) {
      return Point2{scale * p.z + shift_z, scale * p.r};
    });
    return from_samples(kind_, std::move(out));
  }

  /// Largest distance between two samples.
  double diameter() const {
    double d = 0.0;
    for (std::size_t i = 0; i < samples_.size(); ++i)
      for (std::size_t j = i + 1; j < samples_.size(); ++j)
        d = std::max(d, norm(samples_[i] - samples_[j]));
    return d;
  }

 private:
  std::size_t knot_count() const { return samples_.size() + (closed() ? 1 : 0); }
  double knot(std::size_t i) const { return i < knots_.size() ? knots_[i] : length_; }

  double partial_length(double a, double b) const {
    static constexpr std::array<double, 3> gx{0.0, -0.7745966692414834, 0.7745966692414834};
    static constexpr std::array<double, 3> gw{0.8888888888888888, 0.5555555555555556,
                                              0.5555555555555556};
    double acc = 0.0;
    for (std::size_t q = 0; q < gx.size(); ++q)
      acc += gw[q] * norm(derivative(0.5 * (a + b) + 0.5 * (b - a) * gx[q]));
    return 0.5 * (b - a) * acc;
  }

  void build() {
    const std::size_t n = samples_.size();
    if (n < 4) throw geometry_error("section curve needs at least 4 samples");
    for (const Point2& p : samples_)
      if (!std::isfinite(p.z) || !std::isfinite(p.r))
        throw geometry_error("section curve has non-finite samples");

    double extent = 0.0;
    for (const Point2& p : samples_) extent = std::max({extent, std::abs(p.z), std::abs(p.r)});
    const double snap = 1e-12 * extent;

    if (kind_ == CurveKind::Toroidal) {
      for (const Point2& p : samples_)
        if (!(p.r > 0.0)) throw geometry_error("toroidal section must stay in r > 0");
    } else {
      for (Point2* end : {&samples_.front(), &samples_.back()}) {
        if (std::abs(end->r) > snap)
          throw geometry_error("axis-touching section must start and end on the axis");
        end->r = 0.0;
      }
      for (std::size_t i = 1; i + 1 < n; ++i)
        if (!(samples_[i].r > 0.0))
          throw geometry_error("axis-touching section touches the axis away from its endpoints");
    }

    knots_.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
      const double chord = norm(samples_[i] - samples_[i - 1]);
      if (!(chord > 0.0)) throw geometry_error("section curve has repeated samples");
      knots_[i] = knots_[i - 1] + chord;
    }
    if (closed()) {
      const double chord = norm(samples_.front() - samples_.back());
      if (!(chord > 0.0)) throw geometry_error("closed section repeats its first sample");
      length_ = knots_.back() + chord;
    } else {
      length_ = knots_.back();
    }

    std::vector<double> zs(n), rs(n);
    for (std::size_t i = 0; i < n; ++i) {
      zs[i] = samples_[i].z;
      rs[i] = samples_[i].r;
    }
    if (closed()) {
      z_ = detail::CubicSpline1d::periodic(knots_, zs, length_);
      r_ = detail::CubicSpline1d::periodic(knots_, rs, length_);
    } else {
      auto slopes = [&](const std::vector<double>& v) {
        std::array<double, 4> xb{}, yb{}, xe{}, ye{};
        for (std::size_t j = 0; j < 4; ++j) {
          xb[j] = knots_[j];
          yb[j] = v[j];
          xe[j] = knots_[n - 1 - j];
          ye[j] = v[n - 1 - j];
        }
        return std::pair{detail::endpoint_slope(xb, yb), detail::endpoint_slope(xe, ye)};
      };
      const auto [zb, ze] = slopes(zs);
      const auto [rb, re] = slopes(rs);
      z_ = detail::CubicSpline1d::clamped(knots_, zs, zb, ze);
      r_ = detail::CubicSpline1d::clamped(knots_, rs, rb, re);
      for (double s : {0.0, length_}) {
        if (std::abs(tangent(s).r) < 0.1)
          throw geometry_error("section meets the axis too obliquely (|dr/ds| < 0.1)");
      }
    }

    if (!(signed_area() > 0.0))
      throw geometry_error("section curve must be oriented counterclockwise in the (z, r) plane");
    check_simple();
  }

  void check_simple() const {
    const std::size_t n = samples_.size();
    // Segment k joins sample k to sample k+1 (mod n); for axis-touching curves
    // segment n-1 is the closing axis segment.
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 a = samples_[i], b = samples_[(i + 1) % n];
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        const Point2 c = samples_[j], d = samples_[(j + 1) % n];
        if (detail::segments_intersect(a, b, c, d))
          throw geometry_error("section curve self-intersects");
      }
    }
  }

  CurveKind kind_ = CurveKind::Toroidal;
  std::vector<Point2> samples_;
  std::vector<double> knots_;
  double length_ = 0.0;
  detail::CubicSpline1d z_;
  detail::CubicSpline1d r_;
};

/// Volume of revolution of the section polygon, 2 pi times the integral of
/// r over the section, evaluated exactly for the polygon by Green's theorem.
inline double section_volume(const SectionCurve& curve) {
  const auto pts = curve.samples();
  const std::size_t n = pts.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = pts[i], b = pts[(i + 1) % n];
    acc += (b.z - a.z) * (a.r * a.r + a.r * b.r + b.r * b.r);
  }
  return -pi / 3.0 * acc;
}

struct AxisymmetricDomain {
  SectionCurve curve;
  double delta = 0.0;  // distance to the symmetry axis
  int betti1 = 0;

  static AxisymmetricDomain from_curve(SectionCurve c) {
    AxisymmetricDomain d;
    d.curve = std::move(c);
    d.delta = std::numeric_limits<double>::infinity();
    for (const Point2& p : d.curve.samples()) d.delta = std::min(d.delta, p.r);
    d.betti1 = d.curve.kind() == CurveKind::Toroidal ? 1 : 0;
    return d;
  }

  CurveKind kind() const { return curve.kind(); }
};

/// Volume of the solid of revolution.
inline double volume(const AxisymmetricDomain& domain) {
  const double v = section_volume(domain.curve);
  if (!(v > 0.0)) throw geometry_error("domain has non-positive volume");
  return v;
}

/// Section area and the centroid of the section polygon.
inline std::pair<double, Point2> section_area_centroid(const SectionCurve& curve) {
  const auto pts = curve.samples();
  const std::size_t n = pts.size();
  double a = 0.0, cz = 0.0, cr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p = pts[i], q = pts[(i + 1) % n];
    const double w = cross(p, q);
    a += w;
    cz += (p.z + q.z) * w;
    cr += (p.r + q.r) * w;
  }
  a *= 0.5;
  return {a, Point2{cz / (6.0 * a), cr / (6.0 * a)}};
}

// ---------------------------------------------------------------------------
// Innermost boundary set

struct ArclengthInterval {
  double begin = 0.0;
  double end = 0.0;  // may exceed the curve length for arcs wrapping past 0
};

struct InnermostSet {
  double tolerance = 0.0;
  double delta = 0.0;  // minimum of r along the spline
  std::vector<ArclengthInterval> arcs;
  int component_count = 0;
  bool whole_wall = false;

  /// Arclength distance from s to the nearest arc (0 inside an arc).
  double distance(double s, double length) const {
    if (whole_wall) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& arc : arcs) {
      for (double shift : {-length, 0.0, length}) {
        const double x = s + shift;
        if (x >= arc.begin && x <= arc.end) return 0.0;
        best = std::min({best, std::abs(x - arc.begin), std::abs(x - arc.end)});
      }
    }
    return best;
  }
};

inline double default_innermost_tolerance(const AxisymmetricDomain& domain) {
  return 1e-6 * domain.curve.diameter();
}

/// Maximal wall arcs on which r is within `tol` of its minimum.
inline InnermostSet innermost_set(const AxisymmetricDomain& domain, double tol) {
  if (domain.kind() != CurveKind::Toroidal)
    throw unsupported_topology_error("innermost set is defined for toroidal domains only");
  const SectionCurve& c = domain.curve;
  const double len = c.length();
  const std::size_t fine = 32 * c.samples().size();
  const double ds = len / static_cast<double>(fine);
  std::vector<double> rv(fine);
  for (std::size_t i = 0; i < fine; ++i) rv[i] = c.at(ds * static_cast<double>(i)).r;
  auto r_at = [&](double s) { return c.at(s).r; };

  // Refine every discrete local minimum by golden-section search.
  std::vector<std::pair<double, double>> minima;  // (s, r)
  for (std::size_t i = 0; i < fine; ++i) {
    const double prev = rv[(i + fine - 1) % fine], next = rv[(i + 1) % fine];
    if (rv[i] <= prev && rv[i] < next) {
      double a = ds * (static_cast<double>(i) - 1.0), b = ds * (static_cast<double>(i) + 1.0);
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      double x1 = b - g * (b - a), x2 = a + g * (b - a);
      double f1 = r_at(x1), f2 = r_at(x2);
      for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
          b = x2; x2 = x1; f2 = f1; x1 = b - g * (b - a); f1 = r_at(x1);
        } else {
          a = x1; x1 = x2; f1 = f2; x2 = a + g * (b - a); f2 = r_at(x2);
        }
      }
      const double sm = 0.5 * (a + b);
      minima.emplace_back(sm, std::min(r_at(sm), rv[i]));
    }
  }
  double delta = *std::min_element(rv.begin(), rv.end());
  for (const auto& m : minima) delta = std::min(delta, m.second);

  InnermostSet out;
  out.tolerance = tol;
  out.delta = delta;
  const double level = delta + tol;
  if (*std::max_element(rv.begin(), rv.end()) <= level) {
    out.whole_wall = true;
    out.arcs.push_back({0.0, len});
    out.component_count = 1;
    return out;
  }

  // Grow an arc around each qualifying minimum until r exceeds the level,
  // then locate the crossing by bisection.
  auto crossing = [&](double inside, double outside) {
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (inside + outside);
      (r_at(mid) <= level ? inside : outside) = mid;
    }
    return inside;
  };
  std::vector<ArclengthInterval> arcs;
  for (const auto& [sm, rm] : minima) {
    if (rm > level) continue;
    double right = sm, left = sm;
    while (r_at(right + ds) <= level) right += ds;
    while (r_at(left - ds) <= level) left -= ds;
    ArclengthInterval arc{crossing(left, left - ds), crossing(right, right + ds)};
    // Normalize so that begin lies in [0, len).
    const double shift = std::floor(arc.begin / len) * len;
    arc.begin -= shift;
    arc.end -= shift;
    arcs.push_back(arc);
  }
  std::sort(arcs.begin(), arcs.end(),
            [](const auto& a, const auto& b) { return a.begin < b.begin; });
  std::vector<ArclengthInterval> merged;
  for (const auto& a : arcs) {
    if (!merged.empty() && a.begin <= merged.back().end + 0.5 * ds)
      merged.back().end = std::max(merged.back().end, a.end);
    else
      merged.push_back(a);
  }
  if (merged.size() > 1 && merged.back().end >= merged.front().begin + len - 0.5 * ds) {
    merged.back().end = std::max(merged.back().end, merged.front().end + len);
    merged.erase(merged.begin());
  }
  out.arcs = std::move(merged);
  out.component_count = static_cast<int>(out.arcs.size());
  return out;
}

// ---------------------------------------------------------------------------
// Uniform wall grids and boundary perturbations

/// Uniform arclength grid on the wall: periodic with `size` points for
/// toroidal curves, endpoints included for axis-touching curves. Quadrature
/// weights are the trapezoidal ones.
struct WallGrid {
  CurveKind kind = CurveKind::Toroidal;
  double length = 0.0;
  std::size_t size = default_curve_samples;

  double spacing() const {
    return kind == CurveKind::Toroidal ? length / static_cast<double>(size)
                                       : length / static_cast<double>(size - 1);
  }
  double at(std::size_t i) const { return spacing() * static_cast<double>(i); }
  double weight(std::size_t i) const {
    if (kind == CurveKind::AxisTouching && (i == 0 || i + 1 == size)) return 0.5 * spacing();
    return spacing();
  }

  /// Linear interpolation of grid values at arclength s.
  double interpolate(std::span<const double> values, double s) const {
    const double h = spacing();
    if (kind == CurveKind::Toroidal) {
      double x = std::fmod(s / h, static_cast<double>(size));
      if (x < 0.0) x += static_cast<double>(size);
      const auto i = std::min(static_cast<std::size_t>(x), size - 1);
      const double f = x - static_cast<double>(i);
      return (1.0 - f) * values[i] + f * values[(i + 1) % size];
    }
    const double x = std::clamp(s / h, 0.0, static_cast<double>(size - 1));
    const auto i = std::min(static_cast<std::size_t>(x), size - 2);
    const double f = x - static_cast<double>(i);
    return (1.0 - f) * values[i] + f * values[i + 1];
  }
};

inline WallGrid wall_grid(const SectionCurve& curve, std::size_t size = default_curve_samples) {
  return WallGrid{curve.kind(), curve.length(), size};
}

/// Normal boundary velocity sampled on the uniform wall grid.
struct NormalVelocity {
  std::vector<double> theta;
  bool volume_preserving = false;
};

/// Wraps grid samples, deciding the first-order volume conservation flag
/// |int theta r dl| <= 1e-10 int |theta| r dl.
inline NormalVelocity make_normal_velocity(const SectionCurve& curve, std::vector<double> theta) {
  const WallGrid grid = wall_grid(curve, theta.size());
  double signed_flux = 0.0, abs_flux = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double r = curve.at(grid.at(i)).r;
    signed_flux += grid.weight(i) * theta[i] * r;
    abs_flux += grid.weight(i) * std::abs(theta[i]) * r;
  }
  return {std::move(theta), std::abs(signed_flux) <= 1e-10 * abs_flux};
}

/// Moves every curve sample by eps * theta along the outward normal.
/// Axis endpoints slide along the axis by the axial component of that move.
inline SectionCurve perturb(const SectionCurve& curve, const NormalVelocity& v, double eps) {
  const WallGrid grid = wall_grid(curve, v.theta.size());
  const auto pts = curve.samples();
  const auto arc = curve.arclength();
  std::vector<Point2> out(pts.begin(), pts.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double th = grid.interpolate(v.theta, arc[i]);
    const Point2 n = curve.normal(arc[i]);
    const bool axis_end = !curve.closed() && (i == 0 || i + 1 == out.size());
    if (axis_end) {
      out[i].z += eps * th * n.z;
    } else {
      out[i] = out[i] + (eps * th) * n;
      if (!(out[i].r > 0.0)) throw geometry_error("perturbation pushes the section across the axis");
    }
  }
  return SectionCurve::from_samples(curve.kind(), std::move(out));
}

// ---------------------------------------------------------------------------
// Analytic section builders

/// Circle of radius `radius` about (center_z, center_r), or for axis-touching
/// domains the half-circle r >= 0 about a center on the axis.
inline SectionCurve make_circle_section(CurveKind kind, double center_z, double center_r,
                                        double radius,
                                        std::size_t count = default_curve_samples) {
  if (!(radius > 0.0)) throw geometry_error("circle radius must be positive");
  std::vector<Point2> pts(count);
  if (kind == CurveKind::Toroidal) {
    if (!(center_r - radius > 0.0)) throw geometry_error("toroidal circle crosses the axis");
    for (std::size_t i = 0; i < count; ++i) {
      const double t = 2.0 * pi * static_cast<double>(i) / static_cast<double>(count);
      pts[i] = {center_z + radius * std::cos(t), center_r + radius * std::sin(t)};
    }
  } else {
    if (center_r != 0.0) throw geometry_error("axis-touching circle must be centered on the axis");
    for (std::size_t i = 0; i < count; ++i) {
      const double t = pi * static_cast<double>(i) / static_cast<double>(count - 1);
      pts[i] = {center_z + radius * std::cos(t), radius * std::sin(t)};
    }
    pts.front().r = 0.0;
    pts.back().r = 0.0;
    pts.back().z = center_z - radius;
  }
  return SectionCurve::from_samples(kind, std::move(pts));
}

/// rho(t) = radius * (1 + sum_k a_k cos(k t) + b_k sin(k t)), k = 1, 2, ...
/// about the center; t runs over [0, 2 pi) (toroidal) or [0, pi]
/// (axis-touching, center on the axis).
inline SectionCurve make_fourier_section(CurveKind kind, double center_z, double center_r,
                                         double radius,
                                         std::span<const std::array<double, 2>> modes,
                                         std::size_t count = default_curve_samples) {
  if (!(radius > 0.0)) throw geometry_error("fourier radius must be positive");
  if (kind == CurveKind::AxisTouching && center_r != 0.0)
    throw geometry_error("axis-touching fourier section must be centered on the axis");
  const std::size_t dense = 4 * count;
  std::vector<Point2> pts(dense);
  const double span = kind == CurveKind::Toroidal ? 2.0 * pi : pi;
  const double denom = kind == CurveKind::Toroidal ? static_cast<double>(dense)
                                                   : static_cast<double>(dense - 1);
  for (std::size_t i = 0; i < dense; ++i) {
    const double t = span * static_cast<double>(i) / denom;
    double rho = 1.0;
    for (std::size_t k = 0; k < modes.size(); ++k) {
      const double kt = static_cast<double>(k + 1) * t;
      rho += modes[k][0] * std::cos(kt) + modes[k][1] * std::sin(kt);
    }
    rho *= radius;
    if (!(rho > 0.0)) throw geometry_error("fourier radius function must stay positive");
    pts[i] = {center_z + rho * std::cos(t), center_r + rho * std::sin(t)};
  }
  if (kind == CurveKind::AxisTouching) {
    pts.front().r = 0.0;
    pts.back().r = 0.0;
  }
  return SectionCurve::from_samples(kind, std::move(pts)).resampled(count);
}

/// Free-form polyline section, interpolated and re-sampled to `count` points.
inline SectionCurve make_polyline_section(CurveKind kind, std::vector<Point2> points,
                                          std::size_t count = default_curve_samples) {
  return SectionCurve::from_samples(kind, std::move(points)).resampled(count);
}

}  // namespace curlopt

#endif  // CURLOPT_GEOMETRY_HPP
