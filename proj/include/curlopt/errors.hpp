#ifndef CURLOPT_ERRORS_HPP
#define CURLOPT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace curlopt {

/// Base class of every error raised by the library. The error class maps
/// onto a process exit code in the command-line tool.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Invalid or degenerate section curve (self-intersection, wrong
/// orientation, negative radius, zero volume).
class geometry_error : public error {
 public:
  using error::error;
  int exit_code() const noexcept override { return 2; }
};

/// The requested topology is not supported by an operation.
class unsupported_topology_error : public geometry_error {
 public:
  using geometry_error::geometry_error;
};

/// Mesh generation failed (non-star-shaped section, quality floor).
class meshing_error : public error {
 public:
  using error::error;
  int exit_code() const noexcept override { return 3; }
};

class unsupported_shape_error : public meshing_error {
 public:
  using meshing_error::meshing_error;
};

/// Assembly, factorization or eigen-iteration failure.
class solver_error : public error {
 public:
  using error::error;
  int exit_code() const noexcept override { return 4; }
};

class ill_conditioned_error : public solver_error {
 public:
  using solver_error::solver_error;
};

class convergence_error : public solver_error {
 public:
  using solver_error::solver_error;
};

/// Post-processing of a solution failed (e.g. axis limit fit).
class reconstruction_error : public solver_error {
 public:
  using solver_error::solver_error;
};

/// A caller violated an operation's documented precondition.
class contract_error : public error {
 public:
  using error::error;
  int exit_code() const noexcept override { return 4; }
};

/// Unreadable or malformed input, unwritable output.
class io_error : public error {
 public:
  using error::error;
  int exit_code() const noexcept override { return 5; }
};

}  // namespace curlopt

#endif  // CURLOPT_ERRORS_HPP
