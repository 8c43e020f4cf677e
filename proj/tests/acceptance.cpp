// End-to-end acceptance run.  Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "curlopt/bounds.hpp"
#include "curlopt/io.hpp"
#include "curlopt/shape_opt.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace curlopt;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

AxisymmetricDomain circle(CurveKind kind, double R, double a) {
  return AxisymmetricDomain::from_curve(make_circle_section(kind, 0.0, R, a));
}

std::string data(const std::string& name) { return std::string(CURLOPT_TEST_DATA) + "/" + name; }

ConvergenceStudy study(const AxisymmetricDomain& d, double h, int levels) {
  TriMesh m = mesh_section(d, h);
  std::vector<double> mus;
  for (int l = 0; l < levels; ++l) {
    if (l) m = refine(m);
    mus.push_back(solve(assemble(m)).mu1);
  }
  return richardson(mus);
}

void ball_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const ConvergenceStudy st = study(circle(CurveKind::AxisTouching, 0.0, 1.0), 0.05, 3);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double target = oracle::spheromak();
  const double err = std::abs(st.extrapolated - target);
  report(1, err <= 5e-3 && secs <= 60.0,
         "mu1 = " + fmt("%.7f", st.extrapolated) + " vs " + fmt("%.7f", target) + ", |err| = " + fmt("%.2e", err) +
             ", " + fmt("%.1f", secs) + " s");
}

void convergence_order() {
  const ConvergenceStudy b = study(circle(CurveKind::AxisTouching, 0.0, 1.0), 0.05, 3);
  const ConvergenceStudy t = study(circle(CurveKind::Toroidal, 3.0, 1.0), 0.05, 3);
  auto ok = [](double p) { return p >= 1.7 && p <= 2.3; };
  report(2, ok(b.observed_order) && ok(t.observed_order),
         "order ball " + fmt("%.3f", b.observed_order) + ", torus " + fmt("%.3f", t.observed_order));
}

void invariances() {
  double worst_shift = 0.0, worst_scale = 0.0;
  for (const auto& d : {circle(CurveKind::AxisTouching, 0.0, 1.0), circle(CurveKind::Toroidal, 3.0, 1.0)}) {
    const TriMesh m = mesh_section(d, 0.05);
    const double mu = solve(assemble(m)).mu1;
    for (double dz : {1.0, -7.5}) {
      const auto moved = AxisymmetricDomain::from_curve(d.curve.transformed(1.0, dz));
      worst_shift = std::max(worst_shift, std::abs(solve(assemble(mesh_section(moved, 0.05))).mu1 / mu - 1.0));
    }
    for (double lambda : {0.5, 3.0}) {
      TriMesh s = m;
      for (Point2& p : s.nodes) p = lambda * p;
      s.curve = m.curve.transformed(lambda);
      worst_scale = std::max(worst_scale, std::abs(solve(assemble(s)).mu1 * lambda / mu - 1.0));
    }
  }
  report(3, worst_shift <= 1e-12 && worst_scale <= 1e-12,
         "translation " + fmt("%.1e", worst_shift) + ", scaling " + fmt("%.1e", worst_scale) + " (relative)");
}

void constraint_fidelity() {
  double worst_b = 0.0, worst_flux = 0.0;
  for (double R : {2.0, 3.0, 5.0}) {
    const TriMesh m = mesh_section(circle(CurveKind::Toroidal, R, 1.0), 0.05);
    const WeightedForms f = assemble(m);
    const EigenSolution s = solve(f);
    worst_b = std::max(worst_b, s.constraint_residual);
    worst_flux = std::max(worst_flux, flux_identity_residual(m, f, s));
  }
  report(4, worst_b <= 1e-12 && worst_flux <= 1e-6,
         "|b(psi,1)| " + fmt("%.1e", worst_b) + ", flux identity " + fmt("%.1e", worst_flux));
}

void shape_derivative_oracle() {
  double worst = 0.0;
  for (const auto& d : {circle(CurveKind::AxisTouching, 0.0, 1.0), circle(CurveKind::Toroidal, 3.0, 1.0)}) {
    const int rings = rings_for(d, 0.025);
    const Analysis a = analyze_rings(d, rings);
    for (const auto& [k, phase] : {std::pair{1, 0.9}, std::pair{2, 0.4}, std::pair{3, 1.3}}) {
      const NormalVelocity v = mode_velocity(d.curve, k, phase);
      const double predicted = shape_derivative(a.solution, a.trace, v);
      const double fd = finite_difference_derivative(d, v, 1e-3, rings);
      worst = std::max(worst, std::abs(predicted - fd) / std::abs(fd));
    }
  }
  report(5, worst <= 0.01, "worst relative gap " + fmt("%.2e", worst) + " over 6 velocities");
}

void optimality_mechanism() {
  const auto torus = circle(CurveKind::Toroidal, 3.0, 1.0);
  const OptimalityReport r = check_optimality(torus, 0.05);
  const bool certificate = r.certificate && r.certificate->dmu1_predicted < 0.0;
  std::string zeros;
  for (double s : r.dn_zero_arclength) zeros += (zeros.empty() ? "" : ",") + fmt("%.3f", s);

  auto monotone = [](const AxisymmetricDomain& d, std::string& note) {
    OptimizeOptions opt;
    opt.steps = 5;
    opt.h = 0.05;
    const Trajectory t = optimize(d, opt);
    bool ok = t.rows.size() == 6 && t.termination == "completed";
    for (std::size_t i = 1; i < t.rows.size(); ++i) ok = ok && t.rows[i].J < t.rows[i - 1].J;
    note = fmt("%.5f", t.rows.front().J) + "->" + fmt("%.5f", t.rows.back().J) + " (" + t.termination + ")";
    return ok;
  };
  std::string torus_note, ball_note;
  const bool torus_ok = monotone(torus, torus_note);
  const bool ball_ok = monotone(circle(CurveKind::AxisTouching, 0.0, 1.0), ball_note);

  const bool pass = r.innermost_connected && r.q_nonconstant && r.zeros_in_innermost_set && certificate && torus_ok && ball_ok;
  report(6, pass,
         std::string("R_D connected ") + (r.innermost_connected ? "yes" : "no") + ", q_max/q_min-1 " +
             fmt("%.3f", r.q_constancy) + " vs noise " + fmt("%.3f", r.noise_threshold) +
             ", d_n psi zeros at s={" + zeros + "} within " + fmt("%.3f", r.zero_neighbourhood) + " of R_D: " +
             (r.zeros_in_innermost_set ? "yes" : "no") + ", dmu1 " +
             (r.certificate ? fmt("%.4e", r.certificate->dmu1_predicted) : std::string("none")) + ", J torus " +
             torus_note + ", J ball " + ball_note);
}

void volume_bound() {
  bool pass = volume_lower_bound(4.0 * pi / 3.0) == 1.0;
  double min_slack = 1e300;
  for (const char* name : {"ball.json", "torus_R2.json", "torus_R3.json", "torus_R5.json", "fourier_torus.json"}) {
    const auto d = load_domain(data(name));
    const double mu = study(d, 0.1, 3).extrapolated;
    const double slack = bound_report(volume(d), mu).slack;
    min_slack = std::min(min_slack, slack);
    pass = pass && slack > 0.0;
  }
  report(7, pass, "unit-ball bound " + fmt("%.17g", volume_lower_bound(4.0 * pi / 3.0)) + ", min slack " +
                      fmt("%.4f", min_slack) + " over 5 domains");
}

std::vector<Vec3> sphere_tangent_field(const VoxelField& v, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::array<double, 20> a{};
  for (double& x : a) x = coef(gen);
  std::vector<Vec3> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = v.center[i][0], y = v.center[i][1], z = v.center[i][2];
    Vec3 g{0.0, 0.0, 0.0};
    std::size_t m = 0;
    for (int p = 0; p <= 3; ++p)
      for (int q = 0; p + q <= 3; ++q)
        for (int s = 0; p + q + s <= 3; ++s, ++m) {
          if (p > 0) g[0] += a[m] * p * std::pow(x, p - 1) * std::pow(y, q) * std::pow(z, s);
          if (q > 0) g[1] += a[m] * q * std::pow(x, p) * std::pow(y, q - 1) * std::pow(z, s);
          if (s > 0) g[2] += a[m] * s * std::pow(x, p) * std::pow(y, q) * std::pow(z, s - 1);
        }
    out[i] = {g[1] * z - g[2] * y, g[2] * x - g[0] * z, g[0] * y - g[1] * x};
  }
  return out;
}

void biot_savart() {
  const auto ball = circle(CurveKind::AxisTouching, 0.0, 1.0);
  const TriMesh m = mesh_section(ball, 0.02);
  const EigenSolution s = solve(assemble(m));
  const EigenField field = reconstruct(s, m);

  VoxelField v64 = voxelize(ball, 64);
  rasterize(v64, m, field);
  const double recip = bs_self_inner(v64, true) / inner(v64, v64.value, v64.value);
  const double recip_err = std::abs(recip * s.mu1 - 1.0);

  std::mt19937_64 gen(20240607);
  VoxelField v32 = voxelize(ball, 32);
  double worst_ratio = 0.0;
  bool bound_ok = true;
  for (int k = 0; k < 20; ++k) {
    VoxelField probe = v32;
    probe.value = sphere_tangent_field(probe, gen);
    const BsNormReport r = verify_bs_norm_bound(probe, volume(ball));
    bound_ok = bound_ok && r.pass;
    worst_ratio = std::max(worst_ratio, r.ratio / r.bound);
  }

  // curl BS u = u at 100 fixed interior points, snapped to the nearest voxel
  std::mt19937_64 pgen(20240607);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Vec3> probes;
  while (probes.size() < 100) {
    const Vec3 p{unit(pgen), unit(pgen), unit(pgen)};
    if (dot3(p, p) < 0.6 * 0.6) probes.push_back(p);
  }
  std::vector<double> errs;
  for (int n : {32, 48, 64}) {
    VoxelField v = voxelize(ball, n);
    rasterize(v, m, field);
    double peak = 0.0, err2 = 0.0;
    for (const Vec3& u : v.value) peak = std::max(peak, std::sqrt(dot3(u, u)));
    for (const Vec3& p : probes) {
      int best = -1;
      double bd = 1e300;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec3 d{v.center[i][0] - p[0], v.center[i][1] - p[1], v.center[i][2] - p[2]};
        if (dot3(d, d) < bd) {
          bd = dot3(d, d);
          best = static_cast<int>(i);
        }
      }
      const auto der = bs_derivatives_at(v, best);
      if (!der) continue;
      const Vec3& u = v.value[static_cast<std::size_t>(best)];
      const Vec3 d{der->curl[0] - u[0], der->curl[1] - u[1], der->curl[2] - u[2]};
      err2 += dot3(d, d);
    }
    errs.push_back(std::sqrt(err2 / 100.0) / peak);
  }
  const bool curl_ok = errs[1] < errs[0] && errs[2] < errs[1];
  report(8, recip_err <= 0.02 && bound_ok && curl_ok,
         "<BS u,u> mu1 - 1 = " + fmt("%.2e", recip_err) + " (64^3), max |BS v|/|v| / bound " + fmt("%.3f", worst_ratio) +
             " over 20 fields, curl error " + fmt("%.4f", errs[0]) + " > " + fmt("%.4f", errs[1]) + " > " +
             fmt("%.4f", errs[2]));
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CURLOPT_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / "curlopt_acceptance";
  fs::remove_all(root);
  const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
      {"solve --domain " + data("fourier_torus.json") + " --h 0.1 --levels 2", {"result.json", "trace.csv", "mesh.txt"}},
      {"check --domain " + data("torus_R3.json") + " --h 0.1", {"optimality.json"}},
      {"optimize --domain " + data("ball.json") + " --h 0.1 --steps 2", {"trajectory.csv"}},
      {"bs-verify --domain " + data("ball.json") + " --h 0.1 --grid 12", {"bs_verify.json"}}};
  bool pass = true;
  int files = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const fs::path a = root / ("a" + std::to_string(i)), b = root / ("b" + std::to_string(i));
    pass = pass && run_cli(runs[i].first + " --out " + a.string()) == 0;
    pass = pass && run_cli(runs[i].first + " --out " + b.string()) == 0;
    for (const std::string& f : runs[i].second) {
      const std::string x = slurp(a / f), y = slurp(b / f);
      pass = pass && !x.empty() && x == y;
      ++files;
    }
  }
  fs::remove_all(root);
  report(9, pass, std::to_string(files) + " output files compared byte for byte across repeated runs");
}

}  // namespace

int main() {
  const std::vector<void (*)()> criteria{ball_oracle,      convergence_order, invariances,  constraint_fidelity,
                                         shape_derivative_oracle, optimality_mechanism, volume_bound, biot_savart,
                                         determinism};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i) + 1, false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
