#include "lbreg/certificates.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "lbreg/error.hpp"
#include "lbreg/rng.hpp"

namespace lbreg::certificates {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double binomial(std::size_t n, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(c);
}

// Advances s to the next k-subset of {0..n-1} in lexicographic order.
bool next_combination(Support& s, std::size_t n) {
  const std::size_t k = s.size();
  for (std::size_t i = k; i-- > 0;) {
    if (s[i] < n - k + i) {
      ++s[i];
      for (std::size_t j = i + 1; j < k; ++j) s[j] = s[j - 1] + 1;
      return true;
    }
  }
  return false;
}

Matrix principal_submatrix(const Matrix& g, const Support& s) {
  Matrix out(s.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) out(i, j) = g(s[i], s[j]);
  }
  return out;
}

Support mask_to_support(std::uint64_t mask) {
  Support s;
  for (std::size_t j = 0; mask != 0; ++j, mask >>= 1) {
    if (mask & 1U) s.push_back(j);
  }
  return s;
}

// M += sum_{j in s} w_j c_j c_j^T for columns c_j of a (w_j = 1 when w is empty).
void add_column_outer(Matrix& m, const Matrix& a, const Support& s, ConstSpan w = {}) {
  for (std::size_t t = 0; t < s.size(); ++t) {
    const std::size_t j = s[t];
    const double wj = w.empty() ? 1.0 : w[j];
    for (std::size_t p = 0; p < a.rows(); ++p) {
      const double ap = wj * a(p, j);
      if (ap == 0.0) continue;
      for (std::size_t q = 0; q < a.rows(); ++q) m(p, q) += ap * a(q, j);
    }
  }
}

std::vector<bool> support_mask(std::span<const std::size_t> support, std::size_t n, const char* who) {
  std::vector<bool> in(n, false);
  for (std::size_t i : support) {
    if (i >= n) throw InvalidArgument(std::string(who) + ": support index out of range");
    if (in[i]) throw InvalidArgument(std::string(who) + ": duplicate support index");
    in[i] = true;
  }
  return in;
}

void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be finite and nonnegative");
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

const Matrix& dense_equality_matrix(const models::Model& model, const char* who) {
  if (model.is_matrix()) throw InvalidArgument(std::string(who) + ": needs a dense vector model");
  if (model.sigma() != 0.0) throw InvalidArgument(std::string(who) + ": needs the equality-constrained model");
  return model.op().dense_matrix();
}

}  // namespace

// ---- RIP ------------------------------------------------------------------

RipReport rip_constant(const Matrix& a, std::size_t k, double support_cap) {
  const std::size_t n = a.cols();
  if (k < 1 || k > n) throw InvalidArgument("rip_constant: need 1 <= k <= n");
  const double count = binomial(n, k);
  if (count > support_cap) {
    std::ostringstream os;
    os << "rip_constant: C(" << n << "," << k << ") = " << count << " supports exceeds the enumeration cap "
       << support_cap << "; use a randomized estimate instead";
    throw InvalidArgument(os.str());
  }

  const Matrix gram = linalg::inner_gram(a);
  RipReport rep;
  rep.k = k;
  rep.lambda_min = kInf;
  rep.lambda_max = -kInf;
  Support s(k);
  std::iota(s.begin(), s.end(), std::size_t{0});
  do {
    const Vector ev = linalg::sym_eig(principal_submatrix(gram, s)).eigenvalues;
    if (ev.front() < rep.lambda_min) {
      rep.lambda_min = ev.front();
      rep.support_min = s;
    }
    if (ev.back() > rep.lambda_max) {
      rep.lambda_max = ev.back();
      rep.support_max = s;
    }
  } while (next_combination(s, n));
  rep.delta_k = std::max(rep.lambda_max - 1.0, 1.0 - rep.lambda_min);
  return rep;
}

// ---- thresholds -----------------------------------------------------------

double theta(double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) throw InvalidArgument("theta: delta must lie in [0, 1)");
  return std::sqrt(4.0 * (1.0 + 5.0 * delta - 4.0 * delta * delta) / ((1.0 - delta) * (32.0 - 25.0 * delta)));
}

double theta_crossing() { return (77.0 - std::sqrt(1337.0)) / 82.0; }

RecoveryThresholds recovery_thresholds(double delta, double alpha, double xs_inf, double xz_inf, double x_inf) {
  if (!(alpha > 0.0)) throw InvalidArgument("recovery_thresholds: alpha must be positive");
  require_nonnegative(xs_inf, "recovery_thresholds: xS_inf");
  require_nonnegative(xz_inf, "recovery_thresholds: xZ_inf");
  require_nonnegative(x_inf, "recovery_thresholds: x_inf");
  if (!(alpha > xz_inf)) throw InvalidArgument("recovery_thresholds: alpha must exceed xZ_inf");

  RecoveryThresholds t;
  t.delta = delta;
  t.theta = theta(delta);
  if (t.theta < 1.0) {
    t.alpha_multiplier = 1.0 / (1.0 / t.theta - 1.0);
    t.alpha_required = *t.alpha_multiplier * x_inf;
  }
  t.C3 = (alpha + xs_inf) / (alpha - xz_inf);
  t.C4 = 2.0 * alpha / (alpha - xz_inf);

  const double gap = 1.0 - t.C3 * t.theta;
  if (gap > 0.0) {
    const double q = (1.0 - delta) * (32.0 - 25.0 * delta);
    const double root = std::sqrt(1.0 - delta);
    t.C1 = 2.0 * std::sqrt(2.0) * (1.0 + t.C3) / (root * gap);
    t.C2 = (1.0 + t.theta) * t.C4 / gap;
    t.C1bar = 2.0 / root * (4.0 * t.C3 / gap * std::sqrt((2.0 - delta) / q) + 1.0);
    t.C2bar = 2.0 * t.C4 / gap * std::sqrt(2.0 * (2.0 - delta) / q);
  }
  return t;
}

RecoveryThresholds recovery_thresholds_matrix(double delta_2r, double alpha, ConstSpan sigma_x0, std::size_t r) {
  if (sigma_x0.empty()) throw InvalidArgument("recovery_thresholds_matrix: no singular values");
  const double s1 = sigma_x0.front();
  const double tail = r < sigma_x0.size() ? sigma_x0[r] : 0.0;
  return recovery_thresholds(delta_2r, alpha, s1, tail, s1);
}

// ---- NSP / SSP / RIPless --------------------------------------------------

NspResult nsp_check(ConstSpan h, std::span<const std::size_t> support, double alpha, double x_inf) {
  if (linalg::norm_inf(h) == 0.0) throw InvalidArgument("nsp_check: h must be nonzero");
  if (!(alpha > 0.0)) throw InvalidArgument("nsp_check: alpha must be positive");
  require_nonnegative(x_inf, "nsp_check: x_inf");
  const auto in = support_mask(support, h.size(), "nsp_check");
  double on = 0.0;
  double off = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) (in[i] ? on : off) += std::abs(h[i]);
  NspResult res;
  res.margin = off - (1.0 + x_inf / alpha) * on;
  res.pass = res.margin >= 0.0;
  return res;
}

NspResult nsp_check_matrix(const Matrix& h, std::size_t r, double alpha, double x0_norm2) {
  if (linalg::max_abs(h) == 0.0) throw InvalidArgument("nsp_check_matrix: H must be nonzero");
  if (!(alpha > 0.0)) throw InvalidArgument("nsp_check_matrix: alpha must be positive");
  require_nonnegative(x0_norm2, "nsp_check_matrix: ||X0||_2");
  const Vector s = linalg::singular_values(h);
  if (r > s.size()) throw InvalidArgument("nsp_check_matrix: rank exceeds the matrix size");
  double head = 0.0;
  double tail = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) (i < r ? head : tail) += s[i];
  NspResult res;
  res.margin = tail - (1.0 + x0_norm2 / alpha) * head;
  res.pass = res.margin >= 0.0;
  return res;
}

SspBounds ssp_bounds(std::size_t m, std::size_t k, double delta_ssp, double alpha, double x_inf, double c3) {
  if (!(delta_ssp > 0.0)) throw InvalidArgument("ssp_bounds: Delta must be positive");
  if (!(alpha > 0.0)) throw InvalidArgument("ssp_bounds: alpha must be positive");
  require_nonnegative(x_inf, "ssp_bounds: x_inf");
  const double kd = static_cast<double>(k) * delta_ssp;
  const double lead = 2.0 + x_inf / alpha;
  SspBounds b;
  b.exact_m_needed = lead * lead * kd;
  b.stable_m_needed = 4.0 * (1.0 + c3) * (1.0 + c3) * kd;
  b.exact_ok = static_cast<double>(m) >= b.exact_m_needed;
  b.stable_ok = static_cast<double>(m) >= b.stable_m_needed;
  return b;
}

double ssp_ratio_estimate(const Matrix& a, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw InvalidArgument("ssp_ratio_estimate: need at least one sample");
  const std::size_t n = a.cols();
  const linalg::SymEigResult eig = linalg::sym_eig(linalg::inner_gram(a));
  const double cutoff = linalg::kRankEpsilon * std::max(eig.eigenvalues.back(), 0.0);
  std::vector<std::size_t> basis;
  for (std::size_t i = 0; i < n; ++i) {
    if (eig.eigenvalues[i] <= cutoff) basis.push_back(i);
  }
  if (basis.empty()) throw InvalidArgument("ssp_ratio_estimate: the null space of A is trivial");

  SplitMix64 rng(seed);
  double best = kInf;
  Vector h(n);
  for (std::size_t s = 0; s < samples; ++s) {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t b : basis) {
      const double z = rng.gaussian();
      for (std::size_t i = 0; i < n; ++i) h[i] += z * eig.eigenvectors(i, b);
    }
    const double n2 = linalg::norm2(h);
    if (n2 > 0.0) best = std::min(best, linalg::norm1(h) / n2);
  }
  return best;
}

RiplessResult ripless_check(const Matrix& a, std::span<const std::size_t> support, ConstSpan signs, ConstSpan y) {
  const std::size_t n = a.cols();
  if (support.empty()) throw InvalidArgument("ripless_check: support must be nonempty");
  if (signs.size() != support.size()) throw InvalidArgument("ripless_check: one sign per support index");
  if (y.size() != a.rows()) throw InvalidArgument("ripless_check: y has the wrong length");
  const auto in = support_mask(support, n, "ripless_check");

  const Matrix as = linalg::select_columns(a, support);
  const Vector ev = linalg::sym_eig(linalg::inner_gram(as)).eigenvalues;
  if (!(ev.back() > 0.0) || ev.front() <= linalg::kRankEpsilon * ev.back()) {
    throw InvalidArgument("ripless_check: A_S is rank deficient");
  }

  RiplessResult res;
  res.cond_op = 1.0 / ev.front();
  const Vector v = linalg::multiply_transposed(a, y);
  double sign_sq = 0.0;
  for (std::size_t t = 0; t < support.size(); ++t) {
    const double d = v[support[t]] - sign(signs[t]);
    sign_sq += d * d;
  }
  res.cond_sign = std::sqrt(sign_sq);
  for (std::size_t i = 0; i < n; ++i) {
    if (in[i]) continue;
    res.cond_off = std::max(res.cond_off, std::abs(v[i]));
    res.cond_coh = std::max(res.cond_coh, linalg::norm2(linalg::multiply_transposed(as, a.column(i))));
  }
  res.pass = res.cond_op <= 2.0 && res.cond_coh <= 1.0 && res.cond_sign <= 0.25 && res.cond_off <= 0.25;
  return res;
}

// ---- strong convexity -----------------------------------------------------

double lambda_A(const Matrix& a, std::size_t cap) {
  const std::size_t n = a.cols();
  if (n == 0 || linalg::max_abs(a) == 0.0) throw InvalidArgument("lambda_A: A must be nonzero");
  if (n > cap) {
    throw InvalidArgument("lambda_A: n = " + std::to_string(n) + " exceeds the subset enumeration cap " +
                          std::to_string(cap));
  }
  const Matrix gram = linalg::inner_gram(a);
  double best = kInf;
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
    const Support s = mask_to_support(mask);
    bool nonzero = false;
    for (std::size_t j : s) nonzero = nonzero || gram(j, j) > 0.0;
    if (!nonzero) continue;
    // C C^T and C^T C share their positive eigenvalues; use the smaller one.
    if (s.size() <= a.rows()) {
      best = std::min(best, linalg::lambda_min_pp(principal_submatrix(gram, s)));
    } else {
      Matrix cc(a.rows(), a.rows());
      add_column_outer(cc, a, s);
      best = std::min(best, linalg::lambda_min_pp(cc));
    }
  }
  return best;
}

StrongConvexityReport nu_constant(const Matrix& a, ConstSpan x_star, double alpha) {
  if (x_star.size() != a.cols()) throw InvalidArgument("nu_constant: x* has the wrong length");
  if (!(alpha > 0.0)) throw InvalidArgument("nu_constant: alpha must be positive");
  const double xinf = linalg::norm_inf(x_star);
  if (xinf == 0.0) throw InvalidArgument("nu_constant: x* must be nonzero");

  StrongConvexityReport rep;
  rep.alpha = alpha;
  rep.lambda_A = lambda_A(a);
  rep.norm_A = linalg::spectral_norm(a);
  const double thr = 1e-10 * xinf;
  double min_ratio = kInf;
  double min_omega = kInf;
  for (double xi : x_star) {
    const double ax = std::abs(xi);
    if (ax <= thr) continue;
    min_ratio = std::min(min_ratio, alpha * ax / (ax + 2.0 * alpha));
    const double r = ax / alpha;
    min_omega = std::min(min_omega, r / (2.0 + r));
  }
  const double a2 = rep.norm_A * rep.norm_A;
  rep.nu = rep.lambda_A * min_ratio;
  rep.omega = min_omega;
  rep.kappa = rep.lambda_A / a2;
  rep.L = alpha * a2;
  rep.h_star = rep.nu / (alpha * alpha * a2 * a2);
  rep.decay_factor = 1.0 - rep.omega * rep.omega * rep.kappa * rep.kappa;
  return rep;
}

double v_min(const Matrix& a_bar, const Matrix& b_bar, ConstSpan d, std::size_t cap) {
  if (a_bar.empty() || linalg::max_abs(a_bar) == 0.0) throw InvalidArgument("v_min: A_bar must be nonzero");
  if (d.size() != a_bar.cols()) throw InvalidArgument("v_min: D must have one entry per column of A_bar");
  for (double di : d) {
    if (!(di > 0.0) || !std::isfinite(di)) throw InvalidArgument("v_min: D must be positive");
  }
  const std::size_t ell = b_bar.cols();
  if (ell > 0 && b_bar.rows() != a_bar.rows()) throw InvalidArgument("v_min: A_bar and B_bar row counts differ");
  if (ell > cap) {
    throw InvalidArgument("v_min: B_bar has " + std::to_string(ell) + " columns, above the enumeration cap " +
                          std::to_string(cap));
  }

  const std::size_t m = a_bar.rows();
  Matrix base(m, m);
  Support all(a_bar.cols());
  std::iota(all.begin(), all.end(), std::size_t{0});
  add_column_outer(base, a_bar, all, d);

  const std::size_t rank_a = linalg::numerical_rank(a_bar);
  const std::size_t r = ell == 0 ? 0 : linalg::numerical_rank(linalg::hstack(a_bar, b_bar)) - rank_a;

  double best = kInf;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << ell); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) < r) continue;
    Matrix mm = base;
    add_column_outer(mm, b_bar, mask_to_support(mask));
    best = std::min(best, linalg::lambda_min_pp(mm));
  }
  return best;
}

// ---- dual solution set ----------------------------------------------------

SolutionSet solution_set(const models::Model& model, ConstSpan x_star, double tol) {
  const Matrix& a = dense_equality_matrix(model, "solution_set");
  if (x_star.size() != a.cols()) throw InvalidArgument("solution_set: x* has the wrong length");
  Vector res = linalg::multiply(a, x_star);
  linalg::axpy(-1.0, model.b(), res);
  const double rnorm = linalg::norm2(res);
  if (rnorm > tol * std::max(1.0, linalg::norm2(model.b()))) {
    std::ostringstream os;
    os << "solution_set: x* is inconsistent with b (||Ax* - b|| = " << rnorm << ")";
    throw InvalidArgument(os.str());
  }

  SolutionSet ss;
  ss.alpha = model.alpha();
  ss.x_star.assign(x_star.begin(), x_star.end());
  const double thr = 1e-10 * linalg::norm_inf(x_star);
  for (std::size_t i = 0; i < x_star.size(); ++i) {
    const double xi = x_star[i];
    if (xi > thr) {
      ss.s_plus.push_back(i);
      ss.rhs_plus.push_back(1.0 + xi / ss.alpha);
    } else if (xi < -thr) {
      ss.s_minus.push_back(i);
      ss.rhs_minus.push_back(-1.0 + xi / ss.alpha);
    } else {
      ss.s_zero.push_back(i);
    }
  }
  return ss;
}

bool in_solution_set(const SolutionSet& ss, const Matrix& a, ConstSpan y, double tol) {
  if (y.size() != a.rows()) throw InvalidArgument("in_solution_set: y has the wrong length");
  const Vector v = linalg::multiply_transposed(a, y);
  for (std::size_t t = 0; t < ss.s_plus.size(); ++t) {
    if (std::abs(v[ss.s_plus[t]] - ss.rhs_plus[t]) > tol) return false;
  }
  for (std::size_t t = 0; t < ss.s_minus.size(); ++t) {
    if (std::abs(v[ss.s_minus[t]] - ss.rhs_minus[t]) > tol) return false;
  }
  for (std::size_t i : ss.s_zero) {
    if (std::abs(v[i]) > 1.0 + tol) return false;
  }
  return true;
}

namespace {

// Projection onto {z : n_i^T z = b_i (equalities), n_j^T z >= b_j} by the
// dual active-set method of Goldfarb and Idnani with identity Hessian.
class DualActiveSet {
 public:
  struct Constraint {
    Vector n;
    double b = 0.0;
    bool equality = false;
  };

  DualActiveSet(std::vector<Constraint> cons, Vector y, int max_steps)
      : cons_(std::move(cons)), y_(std::move(y)), x_(y_), max_steps_(max_steps) {
    for (auto& c : cons_) norms_.push_back(linalg::norm2(c.n));
  }

  void run() {
    for (std::size_t p = 0; p < cons_.size(); ++p) {
      if (cons_[p].equality) add(p);
    }
    while (true) {
      std::size_t worst = cons_.size();
      double worst_s = 0.0;
      for (std::size_t p = 0; p < cons_.size(); ++p) {
        if (cons_[p].equality || is_active(p)) continue;
        const double s = slack(p);
        if (s < -feas_tol(p) && s < worst_s) {
          worst_s = s;
          worst = p;
        }
      }
      if (worst == cons_.size()) break;
      add(worst);
    }
    polish();
  }

  const Vector& x() const { return x_; }
  int steps() const { return steps_; }

  double kkt_residual() const {
    Vector stat = linalg::subtract(x_, y_);
    double worst = 0.0;
    for (std::size_t t = 0; t < active_.size(); ++t) {
      linalg::axpy(-u_[t], dir(t), stat);
      if (!cons_[active_[t]].equality) worst = std::max(worst, -u_[t]);
    }
    worst = std::max(worst, linalg::norm2(stat));
    for (std::size_t p = 0; p < cons_.size(); ++p) {
      const double s = slack(p);
      worst = std::max(worst, cons_[p].equality ? std::abs(s) : -s);
    }
    return worst;
  }

 private:
  double slack(std::size_t p) const { return linalg::dot(cons_[p].n, x_) - cons_[p].b; }

  double feas_tol(std::size_t p) const {
    return 1e-12 * (1.0 + std::abs(cons_[p].b) + norms_[p] * linalg::norm_inf(x_));
  }

  bool is_active(std::size_t p) const { return std::find(active_.begin(), active_.end(), p) != active_.end(); }

  // Normal of active constraint t, oriented so that its slack was negative
  // when it entered.
  Vector dir(std::size_t t) const { return linalg::scaled(flip_[t], cons_[active_[t]].n); }

  Matrix normals() const {
    Matrix n(x_.size(), active_.size());
    for (std::size_t t = 0; t < active_.size(); ++t) n.set_column(t, dir(t));
    return n;
  }

  void add(std::size_t p) {
    double orient = 1.0;
    double s = slack(p);
    if (cons_[p].equality && s > 0.0) {
      orient = -1.0;
      s = -s;
    }
    const Vector np = linalg::scaled(orient, cons_[p].n);
    double up = 0.0;
    while (true) {
      if (++steps_ > max_steps_) {
        std::ostringstream os;
        os << "projection onto Y* did not converge (KKT residual " << kkt_residual() << ")";
        throw ConvergenceError(os.str(), steps_);
      }
      Vector r;
      Vector z = np;
      if (!active_.empty()) {
        const Matrix n = normals();
        r = linalg::least_squares(n, np);
        linalg::axpy(-1.0, linalg::multiply(n, r), z);
      }
      double t1 = kInf;
      std::size_t drop = active_.size();
      for (std::size_t t = 0; t < active_.size(); ++t) {
        if (cons_[active_[t]].equality || r[t] <= 1e-14) continue;
        const double ratio = u_[t] / r[t];
        if (ratio < t1) {
          t1 = ratio;
          drop = t;
        }
      }
      const double zz = linalg::dot(z, z);
      const bool full = std::sqrt(zz) > 1e-11 * norms_[p];
      const double t2 = full ? -s / zz : kInf;

      if (!full && t1 == kInf) {
        if (cons_[p].equality && std::abs(s) <= 1e-9 * (1.0 + std::abs(cons_[p].b))) return;  // redundant
        throw InvalidArgument("project_Ystar: the solution set is empty");
      }
      const double t = std::min(t1, t2);
      if (full) linalg::axpy(t, z, x_);
      for (std::size_t j = 0; j < active_.size(); ++j) u_[j] -= t * r[j];
      up += t;
      if (t2 <= t1) {
        active_.push_back(p);
        flip_.push_back(orient);
        u_.push_back(up);
        return;
      }
      active_.erase(active_.begin() + static_cast<std::ptrdiff_t>(drop));
      flip_.erase(flip_.begin() + static_cast<std::ptrdiff_t>(drop));
      u_.erase(u_.begin() + static_cast<std::ptrdiff_t>(drop));
      s = orient * slack(p);
    }
  }

  // Re-solves the final active set exactly: x = y + w with w the minimum-norm
  // solution of N^T w = b_A - N^T y, then u from N u = w.
  void polish() {
    if (active_.empty()) return;
    const Matrix n = normals();
    Vector rhs(active_.size());
    for (std::size_t t = 0; t < active_.size(); ++t) rhs[t] = flip_[t] * cons_[active_[t]].b - linalg::dot(dir(t), y_);
    const Vector w = linalg::least_squares(n.transposed(), rhs);
    const Vector saved_x = x_;
    const Vector saved_u = u_;
    const double before = kkt_residual();
    x_ = linalg::add(y_, w);
    u_ = linalg::least_squares(n, w);
    if (!(kkt_residual() <= before)) {
      x_ = saved_x;
      u_ = saved_u;
    }
  }

  std::vector<Constraint> cons_;
  std::vector<double> norms_;
  Vector y_;
  Vector x_;
  std::vector<std::size_t> active_;
  std::vector<double> flip_;
  Vector u_;
  int steps_ = 0;
  int max_steps_;
};

}  // namespace

Projection project_Ystar(const SolutionSet& ss, const Matrix& a, ConstSpan y) {
  if (y.size() != a.rows()) throw InvalidArgument("project_Ystar: y has the wrong length");
  if (ss.x_star.size() != a.cols()) throw InvalidArgument("project_Ystar: solution set does not match A");

  std::vector<DualActiveSet::Constraint> cons;
  for (std::size_t t = 0; t < ss.s_plus.size(); ++t) cons.push_back({a.column(ss.s_plus[t]), ss.rhs_plus[t], true});
  for (std::size_t t = 0; t < ss.s_minus.size(); ++t) {
    cons.push_back({a.column(ss.s_minus[t]), ss.rhs_minus[t], true});
  }
  for (std::size_t i : ss.s_zero) {
    const Vector col = a.column(i);
    cons.push_back({linalg::scaled(-1.0, col), -1.0, false});  //  a_i^T z <= 1
    cons.push_back({col, -1.0, false});                         // -a_i^T z <= 1
  }

  const int max_steps = 20 * static_cast<int>(cons.size() + a.rows()) + 100;
  DualActiveSet qp(std::move(cons), Vector(y.begin(), y.end()), max_steps);
  qp.run();

  Projection p;
  p.y_proj = qp.x();
  p.dist = linalg::norm2(linalg::subtract(y, p.y_proj));
  p.kkt_residual = qp.kkt_residual();
  p.iterations = qp.steps();
  const double scale = std::max(1.0, linalg::norm_inf(y));
  if (p.kkt_residual > 1e-9 * scale) {
    std::ostringstream os;
    os << "projection onto Y* stalled with KKT residual " << p.kkt_residual;
    throw ConvergenceError(os.str(), p.iterations);
  }
  return p;
}

PolishedSolution polish_primal(const models::Model& model, ConstSpan x) {
  const Matrix& a = dense_equality_matrix(model, "polish_primal");
  if (x.size() != a.cols()) throw InvalidArgument("polish_primal: x has the wrong length");
  PolishedSolution out;
  out.x.assign(x.begin(), x.end());
  out.y.assign(a.rows(), 0.0);
  const double xinf = linalg::norm_inf(x);
  if (xinf == 0.0) return out;

  Support s;
  Vector signs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) > 1e-10 * xinf) {
      s.push_back(i);
      signs.push_back(sign(x[i]));
    }
  }
  const Matrix as = linalg::select_columns(a, s);
  Vector rhs = linalg::scaled(1.0 / model.alpha(), model.b());
  linalg::axpy(1.0, linalg::multiply(as, signs), rhs);
  const Vector y = linalg::least_squares(linalg::outer_gram(as), rhs);
  const Vector v = linalg::multiply_transposed(a, y);

  Vector xp(x.size(), 0.0);
  std::vector<bool> in(x.size(), false);
  for (std::size_t t = 0; t < s.size(); ++t) {
    const std::size_t i = s[t];
    in[i] = true;
    xp[i] = model.alpha() * (v[i] - signs[t]);
    if (sign(xp[i]) != signs[t]) return out;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!in[i] && std::abs(v[i]) > 1.0 + 1e-12) return out;
  }

  auto residual = [&](ConstSpan z) {
    Vector r = linalg::multiply(a, z);
    linalg::axpy(-1.0, model.b(), r);
    return linalg::norm2(r);
  };
  const double floor = 1e-14 * linalg::norm2(model.b());
  if (residual(xp) > std::max(residual(x), floor)) return out;
  out.x = std::move(xp);
  out.y = y;
  out.accepted = true;
  return out;
}

ConvergenceCheck verify_convergence(const models::Model& model, const solvers::Trace& trace, const SolutionSet& ss,
                                    const StrongConvexityReport& report, double h) {
  const Matrix& a = dense_equality_matrix(model, "verify_convergence");
  const double alpha = model.alpha();
  const double na = report.norm_A;
  const double a4 = alpha * alpha * na * na * na * na;
  const double h_limit = 2.0 * report.nu / a4;
  if (!(h > 0.0 && h < h_limit)) {
    std::ostringstream os;
    os << "verify_convergence: step h = " << h << " is outside (0, 2 nu/(alpha^2 ||A||^4)) = (0, " << h_limit << ")";
    throw InvalidArgument(os.str());
  }
  if (trace.records.empty()) throw InvalidArgument("verify_convergence: empty trace");
  for (const auto& r : trace.records) {
    if (r.y.size() != a.rows()) throw InvalidArgument("verify_convergence: trace has no recorded iterates");
  }

  const double factor = std::max(0.0, 1.0 - 2.0 * h * report.nu + h * h * a4);
  const double lip = alpha * na * na;
  const Projection p0 = project_Ystar(ss, a, trace.records.front().y);
  const double dist0 = p0.dist;
  const double f_star = models::dual_objective(model, p0.y_proj);

  ConvergenceCheck c;
  c.worst_slack = kInf;
  auto record = [&](bool& ok, double slack) {
    if (slack < -kBoundSlack) ok = false;
    c.worst_slack = std::min(c.worst_slack, slack);
  };

  for (const auto& r : trace.records) {
    const Projection p = project_Ystar(ss, a, r.y);
    const double kd = static_cast<double>(r.k);
    const double dist = p.dist;

    record(c.dyk_ok, std::pow(factor, kd / 2.0) * dist0 - dist);
    record(c.dyk2_ok, 0.5 * lip * std::pow(factor, kd) * dist0 * dist0 - (r.f - f_star));
    const double xerr = linalg::norm2(linalg::subtract(r.x.values(), ss.x_star));
    record(c.dyk3_ok, alpha * na * dist - xerr);

    const Vector diff = linalg::subtract(r.y, p.y_proj);
    const Vector grad = models::dual_gradient(model, r.y);
    record(c.rescvx_ok, linalg::dot(diff, grad) - report.nu * linalg::dot(diff, diff));
    ++c.records_checked;
  }
  return c;
}

}  // namespace lbreg::certificates
