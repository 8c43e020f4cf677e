#ifndef CURLOPT_GS_SOLVER_HPP
#define CURLOPT_GS_SOLVER_HPP

// Weighted P1 discretization of the axisymmetric curl eigenproblem.
//
// With u = (1/r)[d_r psi e_z - d_z psi e_r + mu psi e_phi] the curl
// eigenproblem in the axisymmetric sector reduces to
//
//   d_zz psi + d_rr psi - (1/r) d_r psi = -mu^2 psi      in the section D,
//
// with psi constant on the wall.  Its weak form pairs the forms
//
//   a(u, v) = int_D grad u . grad v / r dz dr,   b(u, v) = int_D u v / r dz dr.
//
// Toroidal sections carry an unknown wall constant c1 (one shared degree of
// freedom for all wall nodes) and the orthogonality to the harmonic field
// e_phi / r, which is b(psi, 1) = 0.  Axis-touching sections need psi = 0 on
// the whole boundary.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "curlopt/errors.hpp"
#include "curlopt/geometry.hpp"
#include "curlopt/meshing.hpp"

namespace curlopt {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

struct WeightedForms {
  CurveKind kind = CurveKind::Toroidal;
  SparseMatrix a;  // retained degrees of freedom
  SparseMatrix b;
  SparseMatrix a_full;  // every mesh node
  SparseMatrix b_full;
  /// Degree of freedom of each node, -1 where eliminated.
  std::vector<int> dof_of_node;
  /// Shared wall degree of freedom (toroidal only).
  int floating_dof = -1;

  int ndof() const { return static_cast<int>(a.rows()); }

  /// Nodal values of a degree-of-freedom vector (eliminated nodes are 0).
  Vector to_nodes(const Vector& x) const {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(dof_of_node.size()));
    for (std::size_t i = 0; i < dof_of_node.size(); ++i)
      if (dof_of_node[i] >= 0) out[static_cast<Eigen::Index>(i)] = x[dof_of_node[i]];
    return out;
  }
};

/// Local element matrices of one triangle; the 1/r weight is sampled at the
/// centroid.
struct ElementForms {
  double stiffness[3][3];
  double mass[3][3];
};

inline ElementForms element_forms(Point2 p0, Point2 p1, Point2 p2) {
  const double twice_area = cross(p1 - p0, p2 - p0);
  const double rc = (p0.r + p1.r + p2.r) / 3.0;
  if (!(rc > 0.0)) throw solver_error("triangle centroid on the axis");
  if (!(twice_area > 0.0)) throw solver_error("degenerate or inverted triangle");
  const double area = 0.5 * twice_area;
  const double w = 1.0 / rc;
  const Point2 p[3] = {p0, p1, p2};
  double gz[3], gr[3];
  for (int i = 0; i < 3; ++i) {
    const Point2 a = p[(i + 1) % 3], b = p[(i + 2) % 3];
    gz[i] = (a.r - b.r) / twice_area;
    gr[i] = (b.z - a.z) / twice_area;
  }
  ElementForms e{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      e.stiffness[i][j] = w * area * (gz[i] * gz[j] + gr[i] * gr[j]);
      e.mass[i][j] = w * area * (i == j ? 2.0 : 1.0) / 12.0;
    }
  return e;
}

inline WeightedForms assemble(const TriMesh& mesh) {
  WeightedForms f;
  f.kind = mesh.kind;
  const std::size_t n = mesh.nodes.size();
  f.dof_of_node.assign(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (mesh.node_kind[i] == NodeKind::Interior) f.dof_of_node[i] = next++;
  if (mesh.kind == CurveKind::Toroidal) {
    f.floating_dof = next++;
    for (std::size_t i = 0; i < n; ++i)
      if (mesh.node_kind[i] == NodeKind::Wall) f.dof_of_node[i] = f.floating_dof;
  }
  if (mesh.kind == CurveKind::AxisTouching) {
    for (const auto& t : mesh.triangles) {
      int axis = 0;
      for (int v : t) axis += mesh.node_kind[static_cast<std::size_t>(v)] == NodeKind::Axis;
      if (axis > 2) throw solver_error("triangle with three axis nodes");
    }
  }

  std::vector<Eigen::Triplet<double>> ta, tb, ta_full, tb_full;
  ta_full.reserve(9 * mesh.triangles.size());
  tb_full.reserve(9 * mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    const ElementForms e = element_forms(mesh.nodes[static_cast<std::size_t>(t[0])],
                                         mesh.nodes[static_cast<std::size_t>(t[1])],
                                         mesh.nodes[static_cast<std::size_t>(t[2])]);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        ta_full.emplace_back(t[static_cast<std::size_t>(i)], t[static_cast<std::size_t>(j)], e.stiffness[i][j]);
        tb_full.emplace_back(t[static_cast<std::size_t>(i)], t[static_cast<std::size_t>(j)], e.mass[i][j]);
        const int di = f.dof_of_node[static_cast<std::size_t>(t[static_cast<std::size_t>(i)])];
        const int dj = f.dof_of_node[static_cast<std::size_t>(t[static_cast<std::size_t>(j)])];
        if (di >= 0 && dj >= 0) {
          ta.emplace_back(di, dj, e.stiffness[i][j]);
          tb.emplace_back(di, dj, e.mass[i][j]);
        }
      }
  }
  const auto nn = static_cast<Eigen::Index>(n);
  f.a_full.resize(nn, nn);
  f.b_full.resize(nn, nn);
  f.a_full.setFromTriplets(ta_full.begin(), ta_full.end());
  f.b_full.setFromTriplets(tb_full.begin(), tb_full.end());
  f.a.resize(next, next);
  f.b.resize(next, next);
  f.a.setFromTriplets(ta.begin(), ta.end());
  f.b.setFromTriplets(tb.begin(), tb.end());
  return f;
}

struct SolveOptions {
  double tol = 1e-10;
  int max_iterations = 500;
  std::uint64_t seed = 20240607;
  int guard_vectors = 3;
};

struct EigenSolution {
  CurveKind kind = CurveKind::Toroidal;
  double mu1 = 0.0;
  /// Nodal flux function, normalized so that the eigenfield has unit L2 norm
  /// (4 pi mu1^2 b(psi, psi) = 1).
  Vector psi;
  double c1 = 0.0;
  /// Relative residual ||A x - mu^2 B x||_{B^-1} / (mu^2 ||x||_B).
  double residual = 0.0;
  /// |b(psi, 1)|; identically 0 for axis-touching sections, which carry no
  /// flux constraint.
  double constraint_residual = 0.0;
  int ndof = 0;
  int iterations = 0;

  double lambda() const { return mu1 * mu1; }
};

namespace detail {

/// Deterministic uniform doubles in [-1, 1).
inline double unit_random(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

/// Solves A x = rhs on the retained space.  For toroidal forms A is singular
/// with the constant vector as kernel; the system is grounded by dropping the
/// floating wall degree of freedom (set to zero), which is exact whenever rhs
/// is orthogonal to the constant vector.
class GroundedSolver {
 public:
  explicit GroundedSolver(const WeightedForms& f) : n_(f.ndof()), drop_(f.floating_dof) {
    if (drop_ >= 0) {
      keep_.reserve(static_cast<std::size_t>(n_ - 1));
      for (int i = 0; i < n_; ++i)
        if (i != drop_) keep_.push_back(i);
      std::vector<int> pos(static_cast<std::size_t>(n_), -1);
      for (std::size_t k = 0; k < keep_.size(); ++k) pos[static_cast<std::size_t>(keep_[k])] = static_cast<int>(k);
      std::vector<Eigen::Triplet<double>> trip;
      for (int col = 0; col < f.a.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(f.a, col); it; ++it) {
          const int pi_ = pos[static_cast<std::size_t>(it.row())], pj = pos[static_cast<std::size_t>(it.col())];
          if (pi_ >= 0 && pj >= 0) trip.emplace_back(pi_, pj, it.value());
        }
      SparseMatrix reduced(n_ - 1, n_ - 1);
      reduced.setFromTriplets(trip.begin(), trip.end());
      factor(reduced);
    } else {
      factor(f.a);
    }
  }

  Vector solve(const Vector& rhs) const {
    if (drop_ < 0) return ldlt_.solve(rhs);
    Vector r(static_cast<Eigen::Index>(keep_.size()));
    for (std::size_t k = 0; k < keep_.size(); ++k) r[static_cast<Eigen::Index>(k)] = rhs[keep_[k]];
    const Vector y = ldlt_.solve(r);
    Vector x = Vector::Zero(n_);
    for (std::size_t k = 0; k < keep_.size(); ++k) x[keep_[k]] = y[static_cast<Eigen::Index>(k)];
    return x;
  }

 private:
  void factor(const SparseMatrix& m) {
    if (m.rows() == 0) throw ill_conditioned_error("no free degrees of freedom");
    ldlt_.compute(m);
    if (ldlt_.info() != Eigen::Success) throw ill_conditioned_error("sparse factorization failed");
    const Vector d = ldlt_.vectorD();
    if (!(d.minCoeff() > 0.0)) throw ill_conditioned_error("stiffness matrix is not positive definite");
  }

  int n_;
  int drop_;
  std::vector<int> keep_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

/// B-orthogonal projection away from a set of B-orthonormal vectors.
inline void project_out(Vector& x, const std::vector<Vector>& basis, const std::vector<Vector>& b_basis) {
  for (std::size_t k = 0; k < basis.size(); ++k) x -= b_basis[k].dot(x) * basis[k];
}

}  // namespace detail

struct EigenPairs {
  std::vector<double> values;  // mu^2, ascending
  std::vector<Vector> vectors;  // retained-dof vectors, B-normalized
  std::vector<double> residuals;
  int iterations = 0;
};

/// Smallest `count` eigenpairs of A x = lambda B x on the B-orthogonal
/// complement of `constraints`, by shift-invert block inverse iteration at
/// shift 0 with Rayleigh-Ritz extraction.  The projection is applied at every
/// iteration.
inline EigenPairs constrained_eigenpairs(const WeightedForms& f, int count,
                                         std::vector<Vector> constraints,
                                         const SolveOptions& opt) {
  const int n = f.ndof();
  const int free_dim = n - static_cast<int>(constraints.size());
  if (count < 1 || free_dim < count) {
    std::ostringstream msg;
    msg << "requested " << count << " eigenpairs but only " << std::max(free_dim, 0)
        << " constrained degrees of freedom are available";
    throw solver_error(msg.str());
  }
  const detail::GroundedSolver stiff(f);
  Eigen::SimplicialLDLT<SparseMatrix> mass(f.b);
  if (mass.info() != Eigen::Success) throw ill_conditioned_error("mass matrix factorization failed");

  // B-orthonormalize the constraint set.
  std::vector<Vector> cons, b_cons;
  for (Vector c : constraints) {
    detail::project_out(c, cons, b_cons);
    Vector bc = f.b * c;
    const double nrm2 = c.dot(bc);
    if (!(nrm2 > 0.0)) throw solver_error("constraint vector has zero B-norm");
    const double s = 1.0 / std::sqrt(nrm2);
    cons.push_back(s * c);
    b_cons.push_back(s * bc);
  }

  const int block = std::min(free_dim, count + opt.guard_vectors);
  std::mt19937_64 gen(opt.seed);
  Eigen::MatrixXd x(n, block);
  for (int j = 0; j < block; ++j)
    for (int i = 0; i < n; ++i) x(i, j) = detail::unit_random(gen);

  auto b_orthonormalize = [&](Eigen::MatrixXd& m) {
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < m.cols(); ++j) {
        Vector v = m.col(j);
        detail::project_out(v, cons, b_cons);
        for (int k = 0; k < j; ++k) {
          const Vector col = m.col(k);
          v -= (f.b * col).dot(v) * col;
        }
        const double nrm2 = v.dot(f.b * v);
        if (!(nrm2 > 0.0)) throw convergence_error("iteration subspace collapsed");
        m.col(j) = v / std::sqrt(nrm2);
      }
  };

  EigenPairs out;
  b_orthonormalize(x);
  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    Eigen::MatrixXd y(n, block);
    for (int j = 0; j < block; ++j) {
      Vector rhs = f.b * x.col(j);
      Vector v = stiff.solve(rhs);
      detail::project_out(v, cons, b_cons);
      y.col(j) = v;
    }
    b_orthonormalize(y);
    const Eigen::MatrixXd ay = f.a * y;
    Eigen::MatrixXd ar = y.transpose() * ay;
    ar = 0.5 * (ar + ar.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(ar);
    if (ritz.info() != Eigen::Success) throw convergence_error("Rayleigh-Ritz step failed");
    x = y * ritz.eigenvectors();

    bool converged = true;
    std::vector<double> res(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
      const double lam = ritz.eigenvalues()[j];
      const Vector xj = x.col(j);
      const Vector r = f.a * xj - lam * (f.b * xj);
      const double rn = std::sqrt(std::max(0.0, r.dot(mass.solve(r))));
      res[static_cast<std::size_t>(j)] = rn / std::max(std::abs(lam), std::numeric_limits<double>::min());
      converged = converged && res[static_cast<std::size_t>(j)] <= opt.tol;
    }
    if (converged) {
      for (int j = 0; j < count; ++j) {
        out.values.push_back(ritz.eigenvalues()[j]);
        out.vectors.emplace_back(x.col(j));
      }
      out.residuals = std::move(res);
      out.iterations = iter;
      return out;
    }
  }
  throw convergence_error("eigen-iteration did not converge within the iteration limit");
}

/// The constant function on the retained space (toroidal forms).
inline Vector constant_dof_vector(const WeightedForms& f) { return Vector::Ones(f.ndof()); }

namespace detail {

inline std::vector<Vector> default_constraints(const WeightedForms& f) {
  if (f.kind == CurveKind::Toroidal) return {constant_dof_vector(f)};
  return {};
}

inline EigenSolution finish_solution(const WeightedForms& f, double lam, const Vector& x_in,
                                     double residual, int iterations) {
  if (!(lam > 0.0)) throw solver_error("non-positive eigenvalue");
  EigenSolution s;
  s.kind = f.kind;
  s.mu1 = std::sqrt(lam);
  s.residual = residual;
  s.iterations = iterations;
  s.ndof = f.ndof();
  Vector x = x_in;
  if (f.kind == CurveKind::Toroidal) {
    // Exact re-projection of the flux constraint.
    const Vector one = constant_dof_vector(f);
    const Vector b1 = f.b * one;
    x -= (b1.dot(x) / b1.dot(one)) * one;
  }
  const double bnorm = x.dot(f.b * x);
  x *= 1.0 / std::sqrt(4.0 * pi * lam * bnorm);
  // Sign convention: c1 >= 0 when the wall constant is resolvable, otherwise
  // the largest nodal value is positive.
  double sign = 1.0;
  const Eigen::Index imax = [&] {
    Eigen::Index k = 0;
    x.cwiseAbs().maxCoeff(&k);
    return k;
  }();
  if (f.floating_dof >= 0 && std::abs(x[f.floating_dof]) > 1e-8 * std::abs(x[imax]))
    sign = x[f.floating_dof] < 0.0 ? -1.0 : 1.0;
  else
    sign = x[imax] < 0.0 ? -1.0 : 1.0;
  x *= sign;
  s.psi = f.to_nodes(x);
  s.c1 = f.floating_dof >= 0 ? x[f.floating_dof] : 0.0;
  if (f.kind == CurveKind::Toroidal) {
    const Vector ones = Vector::Ones(s.psi.size());
    s.constraint_residual = std::abs(s.psi.dot(f.b_full * ones));
  }
  return s;
}

}  // namespace detail

inline EigenSolution solve_axis_touching(const WeightedForms& f, const SolveOptions& opt = {}) {
  if (f.kind != CurveKind::AxisTouching) throw contract_error("solve_axis_touching needs axis-touching forms");
  const EigenPairs p = constrained_eigenpairs(f, 1, {}, opt);
  return detail::finish_solution(f, p.values[0], p.vectors[0], p.residuals[0], p.iterations);
}

inline EigenSolution solve_toroidal(const WeightedForms& f, const SolveOptions& opt = {}) {
  if (f.kind != CurveKind::Toroidal) throw contract_error("solve_toroidal needs toroidal forms");
  const EigenPairs p = constrained_eigenpairs(f, 1, {constant_dof_vector(f)}, opt);
  return detail::finish_solution(f, p.values[0], p.vectors[0], p.residuals[0], p.iterations);
}

/// First axisymmetric-sector eigenpair for either topology.  The reported
/// mu1 is the positive root; -mu1 belongs to the same psi with the azimuthal
/// component flipped.
inline EigenSolution solve(const WeightedForms& f, const SolveOptions& opt = {}) {
  return f.kind == CurveKind::Toroidal ? solve_toroidal(f, opt) : solve_axis_touching(f, opt);
}

struct SpectralGap {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double gap = 0.0;  // mu2^2 - mu1^2
  double residual = 0.0;  // max residual of the two pairs
};

/// Two smallest constrained eigenvalues; the second is computed by deflating
/// the first eigenvector out of the iteration space.
inline SpectralGap spectral_gap(const WeightedForms& f, const SolveOptions& opt = {}) {
  std::vector<Vector> cons = detail::default_constraints(f);
  if (f.ndof() - static_cast<int>(cons.size()) < 2)
    throw solver_error("spectral gap needs at least two constrained degrees of freedom");
  const EigenPairs first = constrained_eigenpairs(f, 1, cons, opt);
  cons.push_back(first.vectors[0]);
  const EigenPairs second = constrained_eigenpairs(f, 1, cons, opt);
  SpectralGap g;
  g.mu1 = std::sqrt(first.values[0]);
  g.mu2 = std::sqrt(second.values[0]);
  g.gap = second.values[0] - first.values[0];
  g.residual = std::max(first.residuals[0], second.residuals[0]);
  return g;
}

/// Rayleigh quotient a(psi, psi) / b(psi, psi) of a nodal vector.
inline double rayleigh_quotient(const WeightedForms& f, const Vector& psi) {
  return psi.dot(f.a_full * psi) / psi.dot(f.b_full * psi);
}

/// Discrete counterpart of the identity int_{dD} (grad psi . N) / r dl = 0 for
/// toroidal eigenfunctions: the variationally consistent wall fluxes
/// (A psi - mu^2 B psi) restricted to wall nodes sum to zero.  Returned as
/// |sum| / sum |flux|.
inline double flux_identity_residual(const TriMesh& mesh, const WeightedForms& f,
                                     const EigenSolution& s) {
  const Vector flux = f.a_full * s.psi - s.lambda() * (f.b_full * s.psi);
  double sum = 0.0, abs_sum = 0.0;
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    if (mesh.node_kind[i] != NodeKind::Wall) continue;
    sum += flux[static_cast<Eigen::Index>(i)];
    abs_sum += std::abs(flux[static_cast<Eigen::Index>(i)]);
  }
  return abs_sum > 0.0 ? std::abs(sum) / abs_sum : 0.0;
}

/// Richardson extrapolation of a second-order sequence on meshes h, h/2, h/4.
struct ConvergenceStudy {
  std::vector<double> values;
  double extrapolated = 0.0;
  double observed_order = 0.0;
};

inline ConvergenceStudy richardson(std::vector<double> values) {
  ConvergenceStudy c;
  c.values = std::move(values);
  const std::size_t n = c.values.size();
  if (n == 0) return c;
  if (n == 1) {
    c.extrapolated = c.values[0];
    return c;
  }
  double order = 2.0;
  if (n >= 3) {
    const double d1 = c.values[n - 3] - c.values[n - 2];
    const double d2 = c.values[n - 2] - c.values[n - 1];
    if (d2 != 0.0 && d1 / d2 > 0.0) order = std::log2(d1 / d2);
    c.observed_order = order;
  }
  const double factor = std::pow(2.0, 2.0);
  c.extrapolated = (factor * c.values[n - 1] - c.values[n - 2]) / (factor - 1.0);
  return c;
}

}  // namespace curlopt

#endif  // CURLOPT_GS_SOLVER_HPP
