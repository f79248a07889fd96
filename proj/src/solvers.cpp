#include "lbreg/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lbreg/error.hpp"

namespace lbreg::solvers {

namespace {

// Largest jump a single kick may take; keeps the fixed-step index in range
// when a dead coordinate moves only by rounding noise.
constexpr long kMaxKick = 1'000'000'000L;

struct Point {
  Vector y;
  models::DualEvaluation e;
  double grad_norm = 0.0;
  double residual = 0.0;
};

void require_solvable(const Model& model) {
  if (linalg::norm2(model.b()) == 0.0) throw InvalidArgument("solver: b must be nonzero");
  if (model.op().norm() == 0.0) throw InvalidArgument("solver: operator must be nonzero");
}

// Dual value, gradient and primal image at y. At y = 0 with sigma > 0 the
// minimum-norm subgradient -b (1 - sigma/||b||)_+ stands in for the gradient.
Point evaluate_point(const Model& model, Vector y) {
  Point p;
  const double ynorm = linalg::norm2(y);
  if (model.sigma() > 0.0 && ynorm == 0.0) {
    p.e.aty = models::adjoint_op(model.op(), y);
    p.e.x = models::PrimalPoint::zeros_like(p.e.aty);
    p.e.f = 0.0;
    const double bnorm = linalg::norm2(model.b());
    const double scale = bnorm > model.sigma() ? 1.0 - model.sigma() / bnorm : 0.0;
    p.e.grad = linalg::scaled(-scale, model.b());
    p.residual = bnorm;
  } else {
    p.e = models::evaluate(model, y);
    if (model.sigma() > 0.0) {
      Vector r = p.e.grad;
      linalg::axpy(-model.sigma() / ynorm, y, r);
      p.residual = linalg::norm2(r);
    }
  }
  p.grad_norm = linalg::norm2(p.e.grad);
  if (model.sigma() == 0.0) p.residual = p.grad_norm;
  p.y = std::move(y);
  return p;
}

std::string describe_step(double h) {
  std::ostringstream os;
  os << h;
  return os.str();
}

void require_finite(const Vector& y, double f, long k, double h) {
  if (!linalg::all_finite(y) || !std::isfinite(f)) {
    throw DivergenceError("non-finite iterate at k=" + std::to_string(k) + " with step h=" + describe_step(h) +
                          "; the step size is too large");
  }
}

class Recorder {
 public:
  Recorder(Trace& trace, bool keep) : trace_(trace), keep_(keep) {}

  void push(long k, const Point& p, bool kicked) {
    IterateRecord r;
    r.k = k;
    if (keep_) {
      r.y = p.y;
      r.x = p.e.x;
    }
    r.f = p.e.f;
    r.grad_norm = p.grad_norm;
    r.kicked = kicked;
    r.primal_residual = p.residual;
    trace_.records.push_back(std::move(r));
  }

  void set_last_step(double h) { trace_.records.back().step = h; }

  void finish(Point& p, Status status, long iterations, long evaluations) {
    trace_.status = status;
    trace_.iterations = iterations;
    trace_.evaluations = evaluations;
    trace_.x = std::move(p.e.x);
    trace_.y = std::move(p.y);
  }

 private:
  Trace& trace_;
  bool keep_;
};

Vector initial_point(const Model& model, const SolverOptions& opts) {
  if (!opts.y0) return Vector(model.measurements(), 0.0);
  if (opts.y0->size() != model.measurements()) throw InvalidArgument("solver: y0 has the wrong length");
  if (!linalg::all_finite(*opts.y0)) throw InvalidArgument("solver: y0 is not finite");
  return *opts.y0;
}

// Smallest s >= 1 with |v + s*step| > 1, for |v| <= 1 and step != 0.
long steps_to_boundary(double v, double step) {
  const double target = step > 0.0 ? 1.0 - v : -1.0 - v;
  const double ratio = target / step;
  if (!(ratio < static_cast<double>(kMaxKick))) return kMaxKick;
  long s = std::max(1L, static_cast<long>(std::floor(ratio)) + 1);
  while (s > 1 && std::abs(v + static_cast<double>(s - 1) * step) > 1.0) --s;
  while (s < kMaxKick && std::abs(v + static_cast<double>(s) * step) <= 1.0) ++s;
  return s;
}

// Fixed-step count until the first dead coordinate of A^T y leaves [-1, 1]
// while the gradient stays frozen at g.
long kick_length(const Model& model, const Point& p, double h) {
  const Vector w = linalg::multiply_transposed(model.op().dense_matrix(), p.e.grad);
  const auto v = p.e.aty.values();
  long best = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1.0 || w[i] == 0.0) continue;
    // The dual moves along -h*g, so v moves along -h*A^T g.
    const long s = steps_to_boundary(v[i], -h * w[i]);
    if (best == 0 || s < best) best = s;
  }
  return best == 0 ? 1 : best;
}

Trace run_gradient(const Model& model, const SolverOptions& opts, bool kicking) {
  opts.validate();
  require_solvable(model);
  const double h = resolve_step(model, opts);
  const bool can_kick = kicking && !model.is_matrix() && model.sigma() == 0.0;

  Trace trace;
  trace.variant = kicking ? Variant::Kicking : Variant::Fixed;
  trace.h = h;
  Recorder rec(trace, opts.keep_iterates);

  Point p = evaluate_point(model, initial_point(model, opts));
  long evaluations = 1;
  long k = 0;
  long iterations = 0;
  rec.push(k, p, false);
  PrimalPoint prev_x;
  bool have_prev = false;

  while (true) {
    if (p.grad_norm < opts.tol) {
      rec.finish(p, Status::Converged, iterations, evaluations);
      return trace;
    }
    if (iterations >= opts.max_iter) {
      rec.finish(p, Status::MaxIter, iterations, evaluations);
      return trace;
    }
    long s = 1;
    if (can_kick && have_prev && p.e.x == prev_x) s = kick_length(model, p, h);

    Vector y = p.y;
    linalg::axpy(-static_cast<double>(s) * h, p.e.grad, y);
    rec.set_last_step(h);
    if (can_kick) {
      prev_x = p.e.x;
      have_prev = true;
    }
    Point next = evaluate_point(model, std::move(y));
    ++evaluations;
    require_finite(next.y, next.e.f, k + s, h);
    k += s;
    ++iterations;
    p = std::move(next);
    rec.push(k, p, s > 1);
  }
}

}  // namespace

void SolverOptions::validate() const {
  if (!(tol > 0.0)) throw InvalidArgument("solver options: tol must be positive");
  if (max_iter < 0) throw InvalidArgument("solver options: max_iter must be nonnegative");
  if (h && !(*h > 0.0 && std::isfinite(*h))) throw InvalidArgument("solver options: h must be positive");
  if (nu && !(*nu > 0.0 && std::isfinite(*nu))) throw InvalidArgument("solver options: nu must be positive");
  if (!(bb.h_min > 0.0) || !(bb.h_min <= bb.h_max)) throw InvalidArgument("solver options: need 0 < h_min <= h_max");
  if (!(bb.eta >= 0.0 && bb.eta < 1.0)) throw InvalidArgument("solver options: eta must lie in [0, 1)");
  if (!(bb.c_armijo > 0.0 && bb.c_armijo < 1.0)) throw InvalidArgument("solver options: c_armijo must lie in (0, 1)");
  if (!(bb.backtrack > 0.0 && bb.backtrack < 1.0)) throw InvalidArgument("solver options: backtrack must lie in (0, 1)");
  if (bb.max_backtracks < 1) throw InvalidArgument("solver options: max_backtracks must be positive");
}

double safe_step(double nu, double alpha, double norm_a) {
  if (!(nu > 0.0) || !(alpha > 0.0) || !(norm_a > 0.0)) throw InvalidArgument("safe_step: inputs must be positive");
  const double a2 = norm_a * norm_a;
  return nu / (alpha * alpha * a2 * a2);
}

double lipschitz_constant(const Model& model) {
  const double n = model.op().norm();
  return model.alpha() * n * n;
}

double resolve_step(const Model& model, const SolverOptions& opts) {
  if (opts.h) return *opts.h;
  if (opts.nu) return safe_step(*opts.nu, model.alpha(), model.op().norm());
  const double lip = lipschitz_constant(model);
  if (!(lip > 0.0)) throw InvalidArgument("solver: operator must be nonzero");
  return 1.0 / lip;
}

Trace lbreg_fixed(const Model& model, const SolverOptions& opts) { return run_gradient(model, opts, false); }

Trace lbreg_kicking(const Model& model, const SolverOptions& opts) { return run_gradient(model, opts, true); }

Trace lbreg_bb(const Model& model, const SolverOptions& opts) {
  opts.validate();
  require_solvable(model);
  const BBParams& bb = opts.bb;

  Trace trace;
  trace.variant = Variant::BB;
  trace.h = resolve_step(model, opts);
  Recorder rec(trace, opts.keep_iterates);

  Point p = evaluate_point(model, initial_point(model, opts));
  long evaluations = 1;
  long iterations = 0;
  rec.push(0, p, false);

  double c_ref = p.e.f;
  double q = 1.0;
  Vector prev_y;
  Vector prev_g;

  while (true) {
    if (p.grad_norm < opts.tol) {
      rec.finish(p, Status::Converged, iterations, evaluations);
      return trace;
    }
    if (iterations >= opts.max_iter) {
      rec.finish(p, Status::MaxIter, iterations, evaluations);
      return trace;
    }

    double h = trace.h;
    if (iterations > 0) {
      const Vector s = linalg::subtract(p.y, prev_y);
      const Vector dg = linalg::subtract(p.e.grad, prev_g);
      const double sdg = linalg::dot(s, dg);
      h = sdg > 0.0 ? linalg::dot(s, s) / sdg : bb.h_max;
      h = std::clamp(h, bb.h_min, bb.h_max);
    }

    const double g2 = p.grad_norm * p.grad_norm;
    int backtracks = 0;
    Point next;
    while (true) {
      Vector y = p.y;
      linalg::axpy(-h, p.e.grad, y);
      bool accepted = false;
      if (linalg::all_finite(y)) {
        next = evaluate_point(model, std::move(y));
        ++evaluations;
        // The allowance covers rounding in f once the required decrease
        // drops below the resolution of f itself.
        const double fuzz = 100.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(c_ref));
        accepted = std::isfinite(next.e.f) && next.e.f <= c_ref - bb.c_armijo * h * g2 + fuzz;
      }
      if (accepted) break;
      if (++backtracks > bb.max_backtracks) {
        throw ConvergenceError("BB line search found no acceptable step at iteration " + std::to_string(iterations),
                               backtracks);
      }
      h *= bb.backtrack;
    }

    const double q_next = bb.eta * q + 1.0;
    c_ref = (bb.eta * q * c_ref + next.e.f) / q_next;
    q = q_next;

    rec.set_last_step(h);
    prev_y = std::move(p.y);
    prev_g = std::move(p.e.grad);
    p = std::move(next);
    ++iterations;
    rec.push(iterations, p, false);
  }
}

Trace solve(const Model& model, const SolverOptions& opts) {
  switch (opts.variant) {
    case Variant::Fixed:
      return lbreg_fixed(model, opts);
    case Variant::Kicking:
      return lbreg_kicking(model, opts);
    case Variant::BB:
      return lbreg_bb(model, opts);
  }
  throw InvalidArgument("solver: unknown variant");
}

bool v_form_check(const Model& model, const Trace& trace, double tol) {
  if (model.sigma() > 0.0) throw InvalidArgument("v_form_check: only the equality-constrained model has a v form");
  if (trace.records.empty()) return true;
  for (const auto& r : trace.records) {
    if (r.y.size() != model.measurements()) throw InvalidArgument("v_form_check: trace has no recorded iterates");
  }

  auto matches = [&](const PrimalPoint& v, const Vector& y) {
    const PrimalPoint aty = models::adjoint_op(model.op(), y);
    const double scale = std::max(1.0, linalg::norm_inf(v.values()));
    const Vector diff = linalg::subtract(v.values(), aty.values());
    return linalg::norm_inf(diff) <= tol * scale;
  };

  PrimalPoint v = models::adjoint_op(model.op(), trace.records.front().y);
  for (std::size_t i = 0; i + 1 < trace.records.size(); ++i) {
    const auto& cur = trace.records[i];
    if (!matches(v, cur.y)) return false;
    const long steps = trace.records[i + 1].k - cur.k;
    for (long s = 0; s < steps; ++s) {
      PrimalPoint x = models::shrink_image(v);
      for (double& e : x.values()) e *= model.alpha();
      Vector r = model.b();
      linalg::axpy(-1.0, models::apply_op(model.op(), x), r);
      const PrimalPoint w = models::adjoint_op(model.op(), r);
      linalg::axpy(cur.step, w.values(), v.values());
    }
  }
  return matches(v, trace.records.back().y);
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Fixed:
      return "fixed";
    case Variant::Kicking:
      return "kicking";
    case Variant::BB:
      return "bb";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "fixed") return Variant::Fixed;
  if (name == "kicking") return Variant::Kicking;
  if (name == "bb") return Variant::BB;
  throw InvalidArgument("unknown solver variant '" + name + "' (expected fixed, kicking or bb)");
}

}  // namespace lbreg::solvers
