#ifndef CURLOPT_IO_HPP
#define CURLOPT_IO_HPP

// JSON domain files, result records and run fingerprints.

#include <array>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "curlopt/bounds.hpp"
#include "curlopt/errors.hpp"
#include "curlopt/geometry.hpp"
#include "curlopt/gs_solver.hpp"
#include "curlopt/shape_opt.hpp"

namespace curlopt {

using json = nlohmann::ordered_json;

inline constexpr const char* tool_version = "curlopt 0.1.0";

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw io_error(what + ": invalid JSON: " + e.what());
  }
}

namespace detail {

inline double number_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw io_error(std::string("domain file: missing number \"") + key + "\"");
  return j[key].get<double>();
}

}  // namespace detail

/// Builds a domain from a parsed domain description:
///   {"kind": "toroidal" | "axis_touching",
///    "boundary": {"type": "circle", "center_z", "center_r", "radius"}
///              | {"type": "fourier", "center_z", "center_r", "radius" (default 1), "modes": [[c, s], ...]}
///              | {"type": "polyline", "points": [[z, r], ...]}}
/// Structural problems are I/O errors; geometrically invalid shapes are
/// geometry errors.
inline AxisymmetricDomain domain_from_json(const json& desc) {
  if (!desc.is_object() || !desc.contains("kind") || !desc["kind"].is_string())
    throw io_error("domain file: missing \"kind\"");
  const std::string k = desc["kind"].get<std::string>();
  CurveKind kind;
  if (k == "toroidal") kind = CurveKind::Toroidal;
  else if (k == "axis_touching") kind = CurveKind::AxisTouching;
  else throw io_error("domain file: unknown kind \"" + k + "\"");
  if (!desc.contains("boundary") || !desc["boundary"].is_object()) throw io_error("domain file: missing \"boundary\"");
  const json& b = desc["boundary"];
  const std::string type = b.value("type", "");
  if (type == "circle") {
    return AxisymmetricDomain::from_curve(make_circle_section(kind, detail::number_field(b, "center_z"),
                                                              detail::number_field(b, "center_r"),
                                                              detail::number_field(b, "radius")));
  }
  if (type == "fourier") {
    std::vector<std::array<double, 2>> modes;
    if (b.contains("modes")) {
      if (!b["modes"].is_array()) throw io_error("domain file: \"modes\" must be an array");
      for (const auto& m : b["modes"]) {
        if (!m.is_array() || m.size() != 2 || !m[0].is_number() || !m[1].is_number())
          throw io_error("domain file: each mode is [cos_k, sin_k]");
        modes.push_back({m[0].get<double>(), m[1].get<double>()});
      }
    }
    const double radius = b.contains("radius") ? detail::number_field(b, "radius") : 1.0;
    return AxisymmetricDomain::from_curve(make_fourier_section(kind, detail::number_field(b, "center_z"),
                                                               detail::number_field(b, "center_r"), radius, modes));
  }
  if (type == "polyline") {
    if (!b.contains("points") || !b["points"].is_array()) throw io_error("domain file: missing \"points\"");
    std::vector<Point2> pts;
    for (const auto& p : b["points"]) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
        throw io_error("domain file: each point is [z, r]");
      pts.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return AxisymmetricDomain::from_curve(make_polyline_section(kind, std::move(pts)));
  }
  throw io_error("domain file: unknown boundary type \"" + type + "\"");
}

inline AxisymmetricDomain load_domain(const std::string& path) {
  return domain_from_json(parse_json_text(read_text_file(path), path));
}

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

// ---------------------------------------------------------------------------
// Records

inline json eigen_result_json(const EigenSolution& s, double h) {
  json j;
  j["mu1"] = s.mu1;
  j["c1"] = s.c1;
  j["residual"] = s.residual;
  j["constraint_residual"] = s.constraint_residual;
  j["ndof"] = s.ndof;
  j["h"] = h;
  return j;
}

inline json optimality_json(const OptimalityReport& r) {
  json j;
  j["kind"] = to_string(r.kind);
  j["mu1"] = r.mu1;
  j["c1"] = r.c1;
  j["volume"] = r.volume;
  j["J"] = r.J;
  j["residual"] = r.residual;
  j["ndof"] = r.ndof;
  j["h"] = r.h;
  j["q"] = {{"min", r.q_min},
            {"max", r.q_max},
            {"mean", r.q_mean},
            {"variance", r.q_variance},
            {"constancy", std::isfinite(r.q_constancy) ? json(r.q_constancy) : json(nullptr)},
            {"noise_threshold", r.noise_threshold},
            {"nonconstant", r.q_nonconstant}};
  j["flux_identity_residual"] = r.flux_identity_residual;
  json zeros = json::array();
  for (std::size_t i = 0; i < r.dn_zero_arclength.size(); ++i)
    zeros.push_back({{"arclength", r.dn_zero_arclength[i]}, {"z", r.dn_zero_points[i].z}, {"r", r.dn_zero_points[i].r}});
  j["dn_psi_zeros"] = zeros;
  j["zero_neighbourhood"] = r.zero_neighbourhood;
  j["zeros_in_innermost_set"] = r.zeros_in_innermost_set;
  j["innermost_components"] = r.innermost_components;
  j["innermost_connected"] = r.innermost_connected;
  j["localization_hypotheses"] = r.localization_hypotheses;
  j["c1_zero_branch"] = r.c1_zero_branch;
  if (r.certificate) {
    j["descent_certificate"] = {{"dmu1_predicted", r.certificate->dmu1_predicted},
                                {"q_variance_weighted", r.certificate->q_variance_weighted},
                                {"theta", r.certificate->theta.theta}};
  } else {
    j["descent_certificate"] = nullptr;
  }
  j["verdict"] = r.verdict;
  return j;
}

inline json bound_json(const BoundReport& r) {
  json j;
  j["volume"] = r.volume;
  j["bound"] = r.bound;
  j["mu1"] = r.mu1;
  j["slack"] = r.slack;
  j["bs_ratio"] = r.bs_ratio ? json(*r.bs_ratio) : json(nullptr);
  j["bs_bound"] = r.bs_bound;
  return j;
}

}  // namespace curlopt

#endif  // CURLOPT_IO_HPP
