// Command-line driver: solve | check | optimize | bound | bs-verify.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "curlopt/bounds.hpp"
#include "curlopt/io.hpp"
#include "curlopt/shape_opt.hpp"

namespace fs = std::filesystem;
using namespace curlopt;

namespace {

struct RunConfig {
  std::string command;
  std::string domain_path;
  double h = 0.05;
  int levels = 1;
  double tol = 1e-10;
  int steps = 5;
  std::uint64_t seed = 20240607;
  int grid = 32;
  std::string out = ".";
};

void apply_config_file(RunConfig& c, const std::string& path) {
  const json j = parse_json_text(read_text_file(path), path);
  if (!j.is_object()) throw io_error(path + ": config must be a JSON object");
  try {
    if (j.contains("domain")) c.domain_path = j["domain"].get<std::string>();
    if (j.contains("h")) c.h = j["h"].get<double>();
    if (j.contains("levels")) c.levels = j["levels"].get<int>();
    if (j.contains("tol")) c.tol = j["tol"].get<double>();
    if (j.contains("steps")) c.steps = j["steps"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("grid")) c.grid = j["grid"].get<int>();
    if (j.contains("out")) c.out = j["out"].get<std::string>();
  } catch (const json::exception& e) {
    throw io_error(path + ": " + e.what());
  }
}

void validate(const RunConfig& c) {
  if (c.domain_path.empty()) throw io_error("no domain file given (--domain)");
  if (c.levels < 1) throw io_error("invalid configuration: levels must be at least 1");
  if (!(c.tol > 0.0)) throw io_error("invalid configuration: tol must be positive");
  if (c.steps < 0) throw io_error("invalid configuration: steps must be non-negative");
  if (c.grid < 8) throw io_error("invalid configuration: grid must be at least 8");
}

struct Run {
  RunConfig cfg;
  json desc;
  AxisymmetricDomain domain;
  std::string hash;
  SolveOptions solve;
};

Run prepare(const RunConfig& cfg) {
  Run run;
  run.cfg = cfg;
  run.desc = parse_json_text(read_text_file(cfg.domain_path), cfg.domain_path);
  json fingerprint = {{"command", cfg.command}, {"domain", run.desc}, {"h", cfg.h},     {"levels", cfg.levels},
                      {"tol", cfg.tol},         {"steps", cfg.steps}, {"seed", cfg.seed}, {"grid", cfg.grid}};
  run.hash = fnv1a_hex(fingerprint.dump());
  run.domain = domain_from_json(run.desc);
  run.solve.tol = cfg.tol;
  run.solve.seed = cfg.seed;
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw io_error("cannot create output directory " + cfg.out);
  return run;
}

std::ofstream open_out(const Run& run, const std::string& name) {
  const fs::path p = fs::path(run.cfg.out) / name;
  std::ofstream os(p, std::ios::binary);
  if (!os) throw io_error("cannot write " + p.string());
  return os;
}

void stamp(json& j, const Run& run) {
  j["config_hash"] = run.hash;
  j["tool_version"] = tool_version;
}

std::string csv_stamp(const Run& run) {
  return "# config_hash=" + run.hash + " tool_version=" + tool_version + "\n";
}

void write_json(const Run& run, const std::string& name, const json& j) {
  auto os = open_out(run, name);
  os << j.dump(2) << '\n';
}

int cmd_solve(const Run& run) {
  TriMesh mesh = mesh_section(run.domain, run.cfg.h);
  std::vector<double> mus;
  double h = run.cfg.h;
  EigenSolution sol;
  for (int level = 0; level < run.cfg.levels; ++level) {
    if (level > 0) {
      mesh = refine(mesh);
      h *= 0.5;
    }
    sol = solve(assemble(mesh), run.solve);
    mus.push_back(sol.mu1);
  }
  json j = eigen_result_json(sol, h);
  j["label"] = "axisymmetric-sector first eigenvalue";
  j["kind"] = to_string(run.domain.kind());
  j["volume"] = volume(run.domain);
  j["levels"] = mus;
  if (mus.size() >= 2) {
    const ConvergenceStudy st = richardson(mus);
    j["mu1_extrapolated"] = st.extrapolated;
    j["observed_order"] = mus.size() >= 3 ? json(st.observed_order) : json(nullptr);
  }
  stamp(j, run);
  write_json(run, "result.json", j);
  {
    auto os = open_out(run, "trace.csv");
    os << csv_stamp(run);
    write_trace_csv(os, boundary_trace(sol, mesh));
  }
  {
    auto os = open_out(run, "mesh.txt");
    write_mesh(os, mesh, "config_hash=" + run.hash + " tool_version=" + tool_version);
  }
  std::cout << std::setprecision(10) << "mu1 = " << (mus.size() >= 2 ? richardson(mus).extrapolated : sol.mu1) << '\n';
  return 0;
}

int cmd_check(const Run& run) {
  const OptimalityReport rep = check_optimality(run.domain, run.cfg.h, run.solve);
  json j = optimality_json(rep);
  stamp(j, run);
  write_json(run, "optimality.json", j);
  std::cout << rep.verdict << '\n';
  return 0;
}

int cmd_optimize(const Run& run) {
  OptimizeOptions opt;
  opt.steps = run.cfg.steps;
  opt.h = run.cfg.h;
  opt.solve = run.solve;
  const Trajectory t = optimize(run.domain, opt);
  auto os = open_out(run, "trajectory.csv");
  os << csv_stamp(run);
  write_trajectory_csv(os, t);
  std::cout << (t.rows.size() - 1) << " accepted steps, J " << std::setprecision(10) << t.rows.front().J << " -> "
            << t.rows.back().J << " (" << t.termination << ")\n";
  return 0;
}

struct FieldRun {
  TriMesh mesh;
  EigenSolution sol;
  VoxelField voxels;
};

FieldRun rasterized_eigenfield(const Run& run) {
  FieldRun f;
  f.mesh = mesh_section(run.domain, run.cfg.h);
  f.sol = solve(assemble(f.mesh), run.solve);
  f.voxels = voxelize(run.domain, run.cfg.grid);
  rasterize(f.voxels, f.mesh, reconstruct(f.sol, f.mesh));
  return f;
}

int cmd_bound(const Run& run) {
  const FieldRun f = rasterized_eigenfield(run);
  const double vol = volume(run.domain);
  const BsNormReport bs = verify_bs_norm_bound(f.voxels, vol);
  json j = bound_json(bound_report(vol, f.sol.mu1, bs.ratio));
  stamp(j, run);
  write_json(run, "bound.json", j);
  std::cout << "slack = " << std::setprecision(10) << f.sol.mu1 - volume_lower_bound(vol) << '\n';
  return 0;
}

/// Divergence-free fields tangent to a sphere: grad f x (x - c) with a random
/// cubic polynomial f.
std::vector<Vec3> random_sphere_tangent_field(const VoxelField& v, double cz, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::array<double, 20> a{};
  for (double& x : a) x = coef(gen);
  std::vector<Vec3> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = v.center[i][0], y = v.center[i][1], z = v.center[i][2] - cz;
    // f = sum over monomials x^p y^q z^s with p + q + s <= 3
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

int cmd_bs_verify(const Run& run) {
  FieldRun f = rasterized_eigenfield(run);
  const double vol = volume(run.domain);
  const double norm2 = inner(f.voxels, f.voxels.value, f.voxels.value);
  const double reciprocity = bs_self_inner(f.voxels, true) / norm2;
  const BsNormReport eig = verify_bs_norm_bound(f.voxels, vol);
  json j;
  j["mu1"] = f.sol.mu1;
  j["inv_mu1"] = 1.0 / f.sol.mu1;
  j["bs_inner_normalized"] = reciprocity;
  j["reciprocity_relative_error"] = std::abs(reciprocity * f.sol.mu1 - 1.0);
  j["eigenfield_ratio"] = eig.ratio;
  j["bs_bound"] = eig.bound;
  j["voxels"] = f.voxels.size();
  j["spacing"] = f.voxels.spacing;

  const json& b = run.desc["boundary"];
  if (run.domain.kind() == CurveKind::AxisTouching && b.value("type", "") == "circle") {
    std::mt19937_64 gen(run.cfg.seed);
    json ratios = json::array();
    bool all_pass = true;
    VoxelField probe = f.voxels;
    for (int k = 0; k < 20; ++k) {
      probe.value = random_sphere_tangent_field(probe, b["center_z"].get<double>(), gen);
      const BsNormReport r = verify_bs_norm_bound(probe, vol);
      ratios.push_back(r.ratio);
      all_pass = all_pass && r.pass;
    }
    j["random_field_ratios"] = ratios;
    j["random_fields_pass"] = all_pass;
  } else {
    j["random_field_ratios"] = nullptr;
  }
  stamp(j, run);
  write_json(run, "bs_verify.json", j);
  std::cout << "<BS u, u> mu1 = " << std::setprecision(10) << reciprocity * f.sol.mu1 << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Axisymmetric curl eigenvalue toolkit"};
  app.require_subcommand(1);
  // "--h" is the mesh size, so help is long-form only
  app.set_help_flag("--help", "print this help and exit");
  RunConfig cfg;
  std::string config_path;
  auto add_common = [&](CLI::App* sub) {
    sub->set_help_flag("--help", "print this help and exit");
    sub->add_option("--domain", cfg.domain_path, "domain description JSON file");
    sub->add_option("--h", cfg.h, "mesh size");
    sub->add_option("--levels", cfg.levels, "refinement levels");
    sub->add_option("--tol", cfg.tol, "eigen-residual tolerance");
    sub->add_option("--steps", cfg.steps, "descent steps");
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--grid", cfg.grid, "voxels across the largest extent");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--config", config_path, "JSON config file; its values override flags");
  };
  for (const char* name : {"solve", "check", "optimize", "bound", "bs-verify"})
    add_common(app.add_subcommand(name));
  CLI11_PARSE(app, argc, argv);
  cfg.command = app.get_subcommands().front()->get_name();

  try {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    validate(cfg);
    const Run run = prepare(cfg);
    if (cfg.command == "solve") return cmd_solve(run);
    if (cfg.command == "check") return cmd_check(run);
    if (cfg.command == "optimize") return cmd_optimize(run);
    if (cfg.command == "bound") return cmd_bound(run);
    return cmd_bs_verify(run);
  } catch (const curlopt::error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
