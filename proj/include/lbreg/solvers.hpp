#pragma once

// Linearized Bregman solvers on the smooth dual: fixed step, kicking and
// Barzilai-Borwein with a nonmonotone line search.

#include <optional>
#include <string>
#include <vector>

#include "lbreg/models.hpp"

namespace lbreg::solvers {

using linalg::Vector;
using models::Model;
using models::PrimalPoint;

enum class Variant { Fixed, Kicking, BB };

struct BBParams {
  double h_min = 1e-10;
  double h_max = 1e10;
  double eta = 0.85;
  double c_armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
};

struct SolverOptions {
  Variant variant = Variant::Fixed;
  /// Step size; empty means Auto (safe_step from nu if given, else 1/L).
  std::optional<double> h;
  std::optional<double> nu;
  double tol = 1e-6;
  long max_iter = 100000;
  BBParams bb;
  /// Starting dual point; defaults to zero.
  std::optional<Vector> y0;
  /// When false only the scalar columns of each record are kept.
  bool keep_iterates = true;

  void validate() const;
};

struct IterateRecord {
  /// Iteration index in fixed-step numbering (kicks skip indices).
  long k = 0;
  Vector y;
  /// alpha * shrink(A* y) at this record's y.
  PrimalPoint x;
  double f = 0.0;
  double grad_norm = 0.0;
  /// Step taken from this record to the next one (0 on the last record).
  double step = 0.0;
  /// True when the step into this record was a kick of more than one step.
  bool kicked = false;
  /// ||A x - b||
  double primal_residual = 0.0;
};

enum class Status { Converged, MaxIter };

struct Trace {
  Variant variant = Variant::Fixed;
  std::vector<IterateRecord> records;
  Status status = Status::MaxIter;
  Vector y;
  PrimalPoint x;
  /// Resolved base step size.
  double h = 0.0;
  /// Number of updates applied (records - 1).
  long iterations = 0;
  long evaluations = 0;
};

Trace lbreg_fixed(const Model& model, const SolverOptions& opts);
Trace lbreg_kicking(const Model& model, const SolverOptions& opts);
Trace lbreg_bb(const Model& model, const SolverOptions& opts);

/// Dispatches on opts.variant.
Trace solve(const Model& model, const SolverOptions& opts);

/// nu / (alpha^2 ||A||^4)
double safe_step(double nu, double alpha, double norm_a);

/// Lipschitz constant alpha ||A||^2 of the dual gradient.
double lipschitz_constant(const Model& model);

/// The step a solver would use under these options.
double resolve_step(const Model& model, const SolverOptions& opts);

/// Reruns the primal-dual (v) form of the iteration and checks that
/// v^(k) = A* y^(k) at every record. Needs recorded iterates and sigma == 0.
bool v_form_check(const Model& model, const Trace& trace, double tol = 1e-10);

const char* to_string(Variant v);
Variant parse_variant(const std::string& name);

}  // namespace lbreg::solvers
