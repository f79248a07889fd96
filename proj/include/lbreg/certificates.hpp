#pragma once

// Recovery and convergence constants at desk scale: exhaustive RIP constants,
// the theta / alpha thresholds and stable-recovery constants, NSP, SSP and
// RIPless checks, lambda_A, nu, v_min, the dual solution set Y* and the
// Euclidean projection onto it.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lbreg/linalg.hpp"
#include "lbreg/models.hpp"
#include "lbreg/solvers.hpp"

namespace lbreg::certificates {

using linalg::ConstSpan;
using linalg::Matrix;
using linalg::Vector;
using Support = std::vector<std::size_t>;

// ---- RIP ------------------------------------------------------------------

struct RipReport {
  std::size_t k = 0;
  double delta_k = 0.0;
  double lambda_min = 0.0;  // smallest eigenvalue of any A_S^T A_S
  double lambda_max = 0.0;  // largest eigenvalue of any A_S^T A_S
  Support support_min;      // attains lambda_min
  Support support_max;      // attains lambda_max
};

inline constexpr double kDefaultSupportCap = 2e6;

/// Exact delta_k by enumerating every k-column support.
RipReport rip_constant(const Matrix& a, std::size_t k, double support_cap = kDefaultSupportCap);

// ---- thresholds -----------------------------------------------------------

/// sqrt(4(1+5d-4d^2) / ((1-d)(32-25d)))
double theta(double delta);

/// The delta at which theta reaches 1: (77 - sqrt(1337)) / 82.
double theta_crossing();

struct RecoveryThresholds {
  double delta = 0.0;
  double theta = 0.0;
  /// (1/theta - 1)^-1; empty when theta >= 1.
  std::optional<double> alpha_multiplier;
  /// alpha_multiplier * x_inf.
  std::optional<double> alpha_required;
  double C3 = 0.0;
  double C4 = 0.0;
  /// Populated only when C3 * theta < 1.
  std::optional<double> C1;
  std::optional<double> C2;
  std::optional<double> C1bar;
  std::optional<double> C2bar;

  bool stable_feasible() const { return C1.has_value(); }
};

RecoveryThresholds recovery_thresholds(double delta, double alpha, double xs_inf, double xz_inf, double x_inf);

/// Low-rank version: C3 and C4 use sigma_1 and sigma_{r+1} of X0.
RecoveryThresholds recovery_thresholds_matrix(double delta_2r, double alpha, ConstSpan sigma_x0, std::size_t r);

// ---- NSP / SSP / RIPless --------------------------------------------------

struct NspResult {
  double margin = 0.0;
  bool pass = false;
};

/// ||h_{S^c}||_1 - (1 + x_inf/alpha) ||h_S||_1
NspResult nsp_check(ConstSpan h, std::span<const std::size_t> support, double alpha, double x_inf);

/// sum_{i>r} sigma_i(H) - (1 + ||X0||_2/alpha) sum_{i<=r} sigma_i(H)
NspResult nsp_check_matrix(const Matrix& h, std::size_t r, double alpha, double x0_norm2);

struct SspBounds {
  double exact_m_needed = 0.0;
  double stable_m_needed = 0.0;
  bool exact_ok = false;   // m >= exact_m_needed
  bool stable_ok = false;  // m >= stable_m_needed
};

SspBounds ssp_bounds(std::size_t m, std::size_t k, double delta_ssp, double alpha, double x_inf, double c3);

/// Minimum of ||h||_1/||h||_2 over `samples` random null-space directions.
/// This is an upper bound on the true minimum over Null(A). Sample i is the
/// same for every sample count, so the estimate is monotone in `samples`.
double ssp_ratio_estimate(const Matrix& a, std::size_t samples, std::uint64_t seed);

struct RiplessResult {
  double cond_op = 0.0;    // ||(A_S^T A_S)^{-1}||_2, needs <= 2
  double cond_coh = 0.0;   // max_{i not in S} ||A_S^T a_i||_2, needs <= 1
  double cond_sign = 0.0;  // ||v_S - sign||_2, needs <= 1/4
  double cond_off = 0.0;   // ||v_{S^c}||_inf, needs <= 1/4
  bool pass = false;
};

RiplessResult ripless_check(const Matrix& a, std::span<const std::size_t> support, ConstSpan signs, ConstSpan y);

// ---- strong convexity -----------------------------------------------------

inline constexpr std::size_t kSubsetCap = 16;

/// min over nonempty column subsets C of lambda_min_pp(C C^T).
double lambda_A(const Matrix& a, std::size_t cap = kSubsetCap);

struct StrongConvexityReport {
  double lambda_A = 0.0;
  double nu = 0.0;
  double L = 0.0;
  double h_star = 0.0;
  double decay_factor = 0.0;
  double omega = 0.0;
  double kappa = 0.0;
  double norm_A = 0.0;
  double alpha = 0.0;
};

StrongConvexityReport nu_constant(const Matrix& a, ConstSpan x_star, double alpha);

/// min lambda_min_pp(A D A^T + C C^T) over column subsets C of B with
/// r <= |C| <= cols(B), r = rank([A B]) - rank(A).
double v_min(const Matrix& a_bar, const Matrix& b_bar, ConstSpan d, std::size_t cap = kSubsetCap);

// ---- dual solution set ----------------------------------------------------

struct SolutionSet {
  Support s_plus;
  Support s_minus;
  Support s_zero;
  Vector rhs_plus;   // 1 + x_i/alpha on S+
  Vector rhs_minus;  // -1 + x_i/alpha on S-
  Vector x_star;
  double alpha = 0.0;
};

/// Partitions coordinates by the sign of x*. Throws unless
/// ||A x* - b|| <= tol * max(1, ||b||).
SolutionSet solution_set(const models::Model& model, ConstSpan x_star, double tol = 1e-6);

/// Whether y satisfies the equalities and boxes of Y* within tol.
bool in_solution_set(const SolutionSet& ss, const Matrix& a, ConstSpan y, double tol = 1e-9);

struct Projection {
  Vector y_proj;
  double dist = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Euclidean projection onto Y* (dual active-set method).
Projection project_Ystar(const SolutionSet& ss, const Matrix& a, ConstSpan y);

struct PolishedSolution {
  Vector x;
  Vector y;
  bool accepted = false;
};

/// Re-solves the optimality system on the support and signs of x. The result
/// is accepted only when the signs are reproduced and the residual does not
/// grow; otherwise x is returned unchanged.
PolishedSolution polish_primal(const models::Model& model, ConstSpan x);

struct ConvergenceCheck {
  bool dyk_ok = true;
  bool dyk2_ok = true;
  bool dyk3_ok = true;
  bool rescvx_ok = true;
  double worst_slack = 0.0;
  std::size_t records_checked = 0;
};

inline constexpr double kBoundSlack = 1e-8;

/// Checks the distance, objective and primal bounds of linear convergence
/// (and restricted strong convexity) at every record of a fixed-step trace.
ConvergenceCheck verify_convergence(const models::Model& model, const solvers::Trace& trace, const SolutionSet& ss,
                                    const StrongConvexityReport& report, double h);

}  // namespace lbreg::certificates
