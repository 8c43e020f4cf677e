#ifndef CURLOPT_TESTS_ORACLES_HPP
#define CURLOPT_TESTS_ORACLES_HPP

// Reference values computed without any of the library's numerics.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

/// Root of f in [a, b] with a sign change, to full double precision.
inline double bisect(const std::function<double(double)>& f, double a, double b) {
  double fa = f(a);
  if (fa * f(b) > 0.0) throw std::invalid_argument("no sign change");
  for (int i = 0; i < 200 && b - a > 1e-15 * std::abs(a); ++i) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if ((fm > 0.0) == (fa > 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

/// First sign change of f on (from, to) scanned with the given step, refined
/// by bisection.
inline double first_root(const std::function<double(double)>& f, double from, double to, double step) {
  double x = from, fx = f(x);
  while (x < to) {
    const double y = x + step, fy = f(y);
    if ((fx > 0.0) != (fy > 0.0)) return bisect(f, x, y);
    x = y;
    fx = fy;
  }
  throw std::runtime_error("no root in range");
}

/// Unit-ball spheromak eigenvalue: smallest positive root of tan x = x,
/// written as sin x - x cos x = 0 on (pi, 3 pi / 2).
inline double spheromak() {
  return bisect([](double x) { return std::sin(x) - x * std::cos(x); }, pi, 1.5 * pi);
}

inline double sph_j1(double x) { return std::sin(x) / (x * x) - std::cos(x) / x; }
inline double sph_j2(double x) { return (3.0 / (x * x * x) - 1.0 / x) * std::sin(x) - 3.0 * std::cos(x) / (x * x); }

/// Second axisymmetric eigenvalue of the unit ball: the smaller of the first
/// root of j_2 and the second root of j_1.
inline double ball_second() {
  const double j2 = first_root(sph_j2, 0.5, 20.0, 1e-3);
  const double j1_first = first_root(sph_j1, 0.5, 20.0, 1e-3);
  const double j1_second = first_root(sph_j1, j1_first + 1e-2, 20.0, 1e-3);
  return std::min(j2, j1_second);
}

/// RK4 integration of y'' = -y'/rho + m^2 y / rho^2 - mu^2 y on (0, 1],
/// started from the regular series at rho0.  Also returns int_0^1 y rho.
struct RadialShot {
  double y1 = 0.0;
  double integral = 0.0;
};

inline RadialShot shoot(int m, double mu, int steps = 4000) {
  const double rho0 = 1e-6;
  double rho = rho0;
  double y = m == 0 ? 1.0 : rho0, dy = m == 0 ? 0.0 : 1.0, in = 0.0;
  const double h = (1.0 - rho0) / steps;
  auto rhs = [&](double r, double yy, double dd, double& a, double& b, double& c) {
    a = dd;
    b = -dd / r + (m * m) * yy / (r * r) - mu * mu * yy;
    c = yy * r;
  };
  for (int i = 0; i < steps; ++i) {
    double k1[3], k2[3], k3[3], k4[3];
    rhs(rho, y, dy, k1[0], k1[1], k1[2]);
    rhs(rho + h / 2, y + h / 2 * k1[0], dy + h / 2 * k1[1], k2[0], k2[1], k2[2]);
    rhs(rho + h / 2, y + h / 2 * k2[0], dy + h / 2 * k2[1], k3[0], k3[1], k3[2]);
    rhs(rho + h, y + h * k3[0], dy + h * k3[1], k4[0], k4[1], k4[2]);
    y += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
    dy += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    in += h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
    rho += h;
  }
  return {y, in};
}

/// Limit of a * mu1 for circular tori of minor radius a as R / a -> infinity:
/// the smallest eigenvalue of the unit disk with a constant boundary value and
/// zero mean.  Modes with angular order m >= 1 need y(1) = 0; the radial mode
/// needs int_0^1 (y - y(1)) rho = 0.
inline double thin_torus_limit() {
  const double m1 = first_root([](double mu) { return shoot(1, mu).y1; }, 0.5, 10.0, 0.01);
  const double m0 = first_root(
      [](double mu) {
        const RadialShot s = shoot(0, mu);
        return s.integral - 0.5 * s.y1;
      },
      0.5, 10.0, 0.01);
  return std::min(m1, m0);
}

/// Monte Carlo estimate of int_Omega dy / |x - y|^2 = int_{S^2} (chord length
/// of the ray from x inside Omega) d omega, for a solid torus with circular
/// section (R, a).  Chords are found by marching plus bisection.
inline double torus_newtonian_integral(double x, double y, double z, double R, double a, int directions,
                                       std::mt19937_64& gen) {
  auto inside = [&](double px, double py, double pz) {
    const double r = std::hypot(px, py) - R;
    return r * r + pz * pz < a * a;
  };
  std::normal_distribution<double> g(0.0, 1.0);
  const double t_max = 2.0 * (R + a) + 1.0;
  const double dt = a / 40.0;
  double acc = 0.0;
  for (int d = 0; d < directions; ++d) {
    double wx = g(gen), wy = g(gen), wz = g(gen);
    const double n = std::sqrt(wx * wx + wy * wy + wz * wz);
    wx /= n;
    wy /= n;
    wz /= n;
    auto in_at = [&](double t) { return inside(x + t * wx, y + t * wy, z + t * wz); };
    double length = 0.0, t = 0.0, enter = 0.0;
    bool state = in_at(0.0);
    while (t < t_max) {
      const double t2 = t + dt;
      const bool s2 = in_at(t2);
      if (s2 != state) {
        double lo = t, hi = t2;
        for (int k = 0; k < 50; ++k) {
          const double mid = 0.5 * (lo + hi);
          (in_at(mid) == state ? lo : hi) = mid;
        }
        const double tc = 0.5 * (lo + hi);
        if (state) length += tc - enter;
        else enter = tc;
        state = s2;
      }
      t = t2;
    }
    if (state) length += t - enter;
    acc += length;
  }
  return 4.0 * pi * acc / directions;
}

}  // namespace oracle

#endif  // CURLOPT_TESTS_ORACLES_HPP
