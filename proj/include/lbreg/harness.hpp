#pragma once

// Experiment harness: seeded signal and matrix generators, the
// phase-transition sweep and the three-solver convergence comparison.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lbreg/linalg.hpp"
#include "lbreg/solvers.hpp"

namespace lbreg::harness {

using linalg::ConstSpan;
using linalg::Matrix;
using linalg::Vector;

enum class SignalKind { Flat, Gaussian, PowerLaw };

const char* to_string(SignalKind kind);
SignalKind parse_signal_kind(const std::string& name);

struct SignalSpec {
  std::size_t n = 0;
  std::size_t k = 0;
  SignalKind kind = SignalKind::Flat;
  std::uint64_t seed = 0;
};

/// k-sparse signal with a uniformly random support and ||x||_inf = 1.
Vector gen_signal(const SignalSpec& spec);

/// i.i.d. standard normal entries.
Matrix gen_gaussian_matrix(std::size_t m, std::size_t n, std::uint64_t seed);

/// ||x_star - x_true||_2 / ||x_true||_2
double relative_error(ConstSpan x_star, ConstSpan x_true);

// ---- phase transition -----------------------------------------------------

struct ExperimentConfig {
  std::size_t n = 100;
  std::vector<std::size_t> m_values;
  std::vector<std::size_t> k_values;
  std::size_t trials = 25;
  /// Multiples of ||x0||_inf; 1000 stands in for basis pursuit.
  std::vector<double> alphas{1.0, 10.0, 1000.0};
  SignalKind kind = SignalKind::Flat;
  std::vector<double> error_levels{1e-3, 1e-5};
  /// A trial succeeds when its relative error is at most this.
  double success_level = 1e-3;
  std::uint64_t master_seed = 1;
  solvers::SolverOptions solver = default_solver();
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 0;
  /// Centered 3-point moving average of the cutoff curves.
  bool smooth = false;

  static solvers::SolverOptions default_solver();
  /// n = 100, m = 10..60 step 5, k = 1..20, 25 trials.
  static ExperimentConfig desk_scale();
  /// n = 400, m = 40..200, k = 1..80, 100 trials.
  static ExperimentConfig paper_scale();

  void validate() const;
};

/// Reads `key = value` lines (TOML style) on top of the desk-scale defaults.
/// Ranges are written start:stop:step or as [a, b, c] lists.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

struct TrialResult {
  std::size_t m = 0;
  std::size_t k = 0;
  double alpha_multiple = 0.0;
  std::size_t alpha_index = 0;
  std::size_t trial = 0;
  double rel_error = 0.0;
  long iterations = 0;
  double wall_time = 0.0;
  bool converged = false;
};

struct CellSummary {
  std::size_t m = 0;
  std::size_t k = 0;
  double alpha_multiple = 0.0;
  double mean_rel_error = 0.0;
  double success_rate = 0.0;
  /// Binomial standard error sqrt(p(1-p)/trials).
  double std_error = 0.0;
};

struct CurvePoint {
  double level = 0.0;
  double alpha_multiple = 0.0;
  std::size_t k = 0;
  /// Smallest m whose mean relative error meets the level; empty if none.
  std::optional<double> m_star;
};

struct PhaseResult {
  std::vector<TrialResult> trials;
  std::vector<CellSummary> cells;
  std::vector<CurvePoint> curves;

  const CellSummary& cell(std::size_t m, std::size_t k, double alpha_multiple) const;
};

/// Seed of instance (m, k, trial). It does not depend on alpha, so every
/// alpha sees the same A and x0.
std::uint64_t instance_seed(std::uint64_t master, std::size_t m, std::size_t k, std::size_t trial);

PhaseResult run_phase(const ExperimentConfig& config);

void write_trials_csv(const PhaseResult& r, std::ostream& out);
void write_timing_csv(const PhaseResult& r, std::ostream& out);
void write_curves_csv(const PhaseResult& r, std::ostream& out);
void write_cells_csv(const PhaseResult& r, std::ostream& out);

// ---- convergence demo -----------------------------------------------------

struct ConvRow {
  long k = 0;
  std::string solver;
  double x_err = 0.0;
  double y_err = 0.0;
  double f = 0.0;
  double grad_norm = 0.0;
};

struct ConvergenceRun {
  Matrix a;
  Vector x0;
  Vector b;
  double alpha = 0.0;
  Vector x_star;
  std::vector<solvers::Trace> traces;  // fixed, kicking, bb
  std::vector<Vector> y_star;          // projection of each final iterate
  std::vector<ConvRow> rows;
};

struct ConvergenceOptions {
  double tol = 1e-6;
  long max_iter = 200000;
  /// Largest allowed distance between any solver's answer and the consensus.
  double agreement = 1e-4;
};

ConvergenceRun run_convergence(std::size_t m, std::size_t n, std::size_t k, SignalKind kind, double alpha_multiple,
                               std::uint64_t seed, const ConvergenceOptions& opts = {});

void write_conv_csv(const ConvergenceRun& r, std::ostream& out);

}  // namespace lbreg::harness
