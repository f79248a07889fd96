#include <cmath>
#include <limits>

#include "doctest.h"
#include "lbreg/error.hpp"
#include "lbreg/rng.hpp"
#include "lbreg/solvers.hpp"
#include "oracles.hpp"

using namespace lbreg;
using namespace lbreg::solvers;
using linalg::Matrix;
using linalg::Vector;
using models::Model;
using models::PrimalPoint;
using models::SensingOperator;

namespace {

Model one_dim(double alpha) { return Model(SensingOperator::dense(Matrix::identity(1)), {1.0}, alpha); }

Model sparse_instance(oracle::Random& rng, std::size_t m, std::size_t n, std::size_t k, double alpha) {
  const Matrix a = rng.matrix(m, n, 1.0 / std::sqrt(static_cast<double>(m)));
  Vector x0(n, 0.0);
  for (std::size_t i = 0; i < k; ++i) x0[rng.index(n)] = rng.normal();
  return Model(SensingOperator::dense(a), linalg::multiply(a, x0), alpha);
}

SolverOptions options(Variant v, double tol = 1e-8) {
  SolverOptions o;
  o.variant = v;
  o.tol = tol;
  return o;
}

}  // namespace

TEST_CASE("fixed step converges on the one-dimensional example") {
  const Model model = one_dim(2.0);
  SolverOptions opts = options(Variant::Fixed, 1e-12);
  opts.h = 0.25;
  const Trace t = lbreg_fixed(model, opts);
  CHECK(t.status == Status::Converged);
  CHECK(t.y[0] == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(t.x.to_vector()[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(t.records.front().k == 0);
  CHECK(t.records.size() == static_cast<std::size_t>(t.iterations + 1));
  CHECK(t.records.back().step == 0.0);
}

TEST_CASE("solvers reject degenerate problems and options") {
  const Model zero_b(SensingOperator::dense(Matrix::identity(2)), {0.0, 0.0}, 1.0);
  for (Variant v : {Variant::Fixed, Variant::Kicking, Variant::BB}) {
    CHECK_THROWS_AS(solve(zero_b, options(v)), InvalidArgument);
  }
  const Model zero_a(SensingOperator::dense(Matrix(2, 2)), {1.0, 0.0}, 1.0);
  CHECK_THROWS_AS(solve(zero_a, options(Variant::Fixed)), InvalidArgument);

  const Model model = one_dim(1.0);
  SolverOptions bad = options(Variant::Fixed);
  bad.tol = 0.0;
  CHECK_THROWS_AS(solve(model, bad), InvalidArgument);
  bad = options(Variant::Fixed);
  bad.h = -1.0;
  CHECK_THROWS_AS(solve(model, bad), InvalidArgument);
  bad = options(Variant::BB);
  bad.bb.eta = 1.0;
  CHECK_THROWS_AS(solve(model, bad), InvalidArgument);
  bad = options(Variant::Fixed);
  bad.y0 = Vector{1.0, 2.0};
  CHECK_THROWS_AS(solve(model, bad), InvalidArgument);
}

TEST_CASE("every variant reaches a feasible point on a random instance") {
  oracle::Random rng(51);
  const Model model = sparse_instance(rng, 5, 10, 2, 5.0);
  for (Variant v : {Variant::Fixed, Variant::Kicking, Variant::BB}) {
    const Trace t = solve(model, options(v, 1e-7));
    REQUIRE(t.status == Status::Converged);
    const Vector ax = models::apply_op(model.op(), t.x);
    CHECK(oracle::dist(ax, model.b()) <= 1e-5);
    CHECK(t.records.back().primal_residual < 1e-7);
  }
}

TEST_CASE("max_iter stops the run with MaxIter status") {
  oracle::Random rng(52);
  const Model model = sparse_instance(rng, 5, 10, 2, 5.0);
  SolverOptions opts = options(Variant::Fixed, 1e-14);
  opts.max_iter = 3;
  const Trace t = solve(model, opts);
  CHECK(t.status == Status::MaxIter);
  CHECK(t.iterations == 3);
  CHECK(t.records.size() == 4);
}

TEST_CASE("kicking skips the stagnation phase of the one-dimensional example") {
  const Model model = one_dim(1.0);
  SolverOptions opts = options(Variant::Kicking, 1e-10);
  opts.h = 0.01;
  const Trace t = lbreg_kicking(model, opts);
  REQUIRE(t.records.size() >= 3);
  CHECK(t.records[1].k == 1);
  CHECK_FALSE(t.records[1].kicked);
  CHECK(t.records[2].k == 101);
  CHECK(t.records[2].kicked);
  CHECK(t.records[2].y[0] == doctest::Approx(1.01).epsilon(1e-12));
  CHECK(t.status == Status::Converged);
  CHECK(t.y[0] == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("kicked iterates coincide with fixed-step iterates at the same index") {
  oracle::Random rng(53);
  for (int trial = 0; trial < 5; ++trial) {
    const Model model = sparse_instance(rng, 6, 14, 2, 5.0);
    SolverOptions opts = options(Variant::Fixed, 1e-6);
    opts.h = 0.5 / lipschitz_constant(model);
    opts.max_iter = 20000;
    const Trace fixed = lbreg_fixed(model, opts);
    opts.variant = Variant::Kicking;
    const Trace kick = lbreg_kicking(model, opts);
    // Compare while the kicking trace still shadows the fixed one exactly
    // (kicks only compress steps taken with a frozen gradient).
    bool saw_kick = false;
    for (const auto& r : kick.records) {
      if (r.k >= static_cast<long>(fixed.records.size())) break;
      const auto& f = fixed.records[static_cast<std::size_t>(r.k)];
      CHECK(f.k == r.k);
      CHECK(oracle::dist(f.y, r.y) <= 1e-10 * std::max(1.0, oracle::norm2(f.y)));
      saw_kick = saw_kick || r.kicked;
      if (saw_kick && r.k > 0 && !(r.x == fixed.records[static_cast<std::size_t>(r.k)].x)) break;
    }
    CHECK(saw_kick);
    CHECK(kick.iterations < fixed.iterations);
  }
}

TEST_CASE("kicking matches fixed exactly when nothing stagnates") {
  const Model model(SensingOperator::dense(Matrix::identity(3)), {5.0, -6.0, 7.0}, 1.0);
  SolverOptions opts = options(Variant::Fixed, 1e-9);
  opts.h = 0.5;
  const Trace fixed = lbreg_fixed(model, opts);
  const Trace kick = lbreg_kicking(model, opts);
  REQUIRE(fixed.records.size() == kick.records.size());
  for (std::size_t i = 0; i < fixed.records.size(); ++i) {
    CHECK(fixed.records[i].k == kick.records[i].k);
    CHECK(fixed.records[i].y == kick.records[i].y);
    CHECK_FALSE(kick.records[i].kicked);
  }
}

TEST_CASE("kicking falls back to fixed steps for matrix and noisy models") {
  oracle::Random rng(54);
  const Model mat(SensingOperator::trace_list({rng.matrix(2, 2), rng.matrix(2, 2), rng.matrix(2, 2)}),
                  rng.vector(3), 2.0);
  SolverOptions opts = options(Variant::Fixed, 1e-8);
  const Trace f = lbreg_fixed(mat, opts);
  const Trace k = lbreg_kicking(mat, opts);
  CHECK(f.iterations == k.iterations);
  CHECK(f.y == k.y);
}

TEST_CASE("BB first step is 1/L and later steps stay clamped") {
  oracle::Random rng(55);
  const Model model = sparse_instance(rng, 8, 20, 3, 10.0);
  SolverOptions opts = options(Variant::BB, 1e-8);
  opts.bb.h_max = 1.0;
  const Trace t = lbreg_bb(model, opts);
  REQUIRE(t.records.size() > 2);
  CHECK(t.h == doctest::Approx(1.0 / lipschitz_constant(model)));
  CHECK(t.records.front().step <= t.h * (1.0 + 1e-15));
  for (std::size_t i = 0; i + 1 < t.records.size(); ++i) {
    CHECK(t.records[i].step > 0.0);
    CHECK(t.records[i].step <= 1.0);
  }
}

TEST_CASE("BB accepted steps satisfy the nonmonotone Armijo test") {
  oracle::Random rng(56);
  for (int trial = 0; trial < 5; ++trial) {
    const Model model = sparse_instance(rng, 10, 25, 3, 10.0);
    SolverOptions opts = options(Variant::BB, 1e-9);
    const Trace t = lbreg_bb(model, opts);
    double c = t.records.front().f;
    double q = 1.0;
    for (std::size_t i = 0; i + 1 < t.records.size(); ++i) {
      const auto& r = t.records[i];
      const double next_f = t.records[i + 1].f;
      CHECK(next_f <= c - opts.bb.c_armijo * r.step * r.grad_norm * r.grad_norm + 1e-12 * std::abs(c));
      const double qn = opts.bb.eta * q + 1.0;
      c = (opts.bb.eta * q * c + next_f) / qn;
      q = qn;
    }
  }
}

TEST_CASE("BB agrees with fixed step and needs fewer iterations") {
  oracle::Random rng(57);
  for (int trial = 0; trial < 5; ++trial) {
    const Model model = sparse_instance(rng, 12, 30, 3, 10.0);
    const Trace fixed = lbreg_fixed(model, options(Variant::Fixed, 1e-9));
    const Trace bb = lbreg_bb(model, options(Variant::BB, 1e-9));
    REQUIRE(fixed.status == Status::Converged);
    REQUIRE(bb.status == Status::Converged);
    CHECK(oracle::dist(fixed.x.to_vector(), bb.x.to_vector()) <= 1e-5);
    CHECK(bb.iterations < fixed.iterations);
  }
}

TEST_CASE("noisy model converges to the constrained optimality condition") {
  oracle::Random rng(58);
  const Matrix a = rng.matrix(6, 15, 0.4);
  Vector x0(15, 0.0);
  x0[2] = 1.0;
  x0[9] = -0.7;
  Vector b = linalg::multiply(a, x0);
  for (double& v : b) v += 0.01 * rng.normal();
  const Model model(SensingOperator::dense(a), b, 10.0, 0.05);
  for (Variant v : {Variant::Fixed, Variant::BB}) {
    const Trace t = solve(model, options(v, 1e-8));
    REQUIRE(t.status == Status::Converged);
    const Vector r = linalg::subtract(models::apply_op(model.op(), t.x), b);
    CHECK(oracle::norm2(r) == doctest::Approx(0.05).epsilon(1e-5));
  }
}

TEST_CASE("noisy model with sigma above ||b|| stays at the origin") {
  const Model model(SensingOperator::dense(Matrix::identity(2)), {0.3, 0.4}, 1.0, 1.0);
  const Trace t = lbreg_fixed(model, options(Variant::Fixed));
  CHECK(t.status == Status::Converged);
  CHECK(t.iterations == 0);
  CHECK(t.x.to_vector() == Vector{0.0, 0.0});
}

TEST_CASE("safe_step and resolve_step") {
  CHECK(safe_step(2.0, 1.0, 1.0) == 2.0);
  CHECK(safe_step(1.0, 2.0, 3.0) == doctest::Approx(1.0 / 324.0));
  CHECK_THROWS_AS(safe_step(0.0, 1.0, 1.0), InvalidArgument);
  const Model model(SensingOperator::dense(Matrix::diagonal(Vector{3.0, 1.0})), {1.0, 1.0}, 2.0);
  CHECK(lipschitz_constant(model) == doctest::Approx(18.0));
  SolverOptions opts;
  CHECK(resolve_step(model, opts) == doctest::Approx(1.0 / 18.0));
  opts.nu = 0.5;
  CHECK(resolve_step(model, opts) == doctest::Approx(0.5 / (4.0 * 81.0)));
  opts.h = 0.125;
  CHECK(resolve_step(model, opts) == 0.125);
}

TEST_CASE("v form reproduces the dual iterates") {
  oracle::Random rng(59);
  const Model model = sparse_instance(rng, 6, 14, 2, 5.0);
  SolverOptions opts = options(Variant::Fixed, 1e-6);
  opts.max_iter = 400;
  const Trace fixed = lbreg_fixed(model, opts);
  CHECK(v_form_check(model, fixed));

  opts.variant = Variant::Kicking;
  const Trace kick = lbreg_kicking(model, opts);
  CHECK(v_form_check(model, kick, 1e-9));

  Trace broken = fixed;
  broken.records[broken.records.size() / 2].y[0] += 1e-3;
  CHECK_FALSE(v_form_check(model, broken));

  opts.max_iter = 0;
  CHECK(v_form_check(model, lbreg_fixed(model, opts)));

  const Model mat(SensingOperator::trace_list({rng.matrix(3, 2), rng.matrix(3, 2), rng.matrix(3, 2)}),
                  rng.vector(3), 2.0);
  opts.variant = Variant::Fixed;
  opts.max_iter = 200;
  CHECK(v_form_check(mat, lbreg_fixed(mat, opts)));
}

TEST_CASE("v_form_check refuses unusable inputs") {
  const Model noisy(SensingOperator::dense(Matrix::identity(2)), {1.0, 1.0}, 1.0, 0.1);
  CHECK_THROWS_AS(v_form_check(noisy, Trace{}), InvalidArgument);
  const Model model = one_dim(1.0);
  SolverOptions opts = options(Variant::Fixed);
  opts.keep_iterates = false;
  CHECK_THROWS_AS(v_form_check(model, lbreg_fixed(model, opts)), InvalidArgument);
}

TEST_CASE("an oversized step raises a divergence error") {
  oracle::Random rng(60);
  const Model model = sparse_instance(rng, 5, 10, 2, 5.0);
  SolverOptions opts = options(Variant::Fixed, 1e-12);
  opts.h = 1e6 / lipschitz_constant(model);
  opts.max_iter = 100000;
  CHECK_THROWS_AS(lbreg_fixed(model, opts), DivergenceError);
}

TEST_CASE("low-rank recovery through matrix operators") {
  oracle::Random rng(61);
  const Vector u = rng.vector(5);
  const Vector v = rng.vector(5);
  Matrix x0(5, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) x0(i, j) = u[i] * v[j];
  }
  std::vector<Matrix> mats;
  for (int i = 0; i < 20; ++i) mats.push_back(rng.matrix(5, 5));
  const auto op = SensingOperator::trace_list(std::move(mats));
  const Vector b = models::apply_op(op, PrimalPoint::matrix(x0));
  const Model model(op, b, 10.0 * linalg::spectral_norm(x0));
  const Trace t = lbreg_bb(model, options(Variant::BB, 1e-9));
  REQUIRE(t.status == Status::Converged);
  CHECK(t.x.is_matrix());
  CHECK(oracle::max_abs_diff(t.x.as_matrix(), x0) <= 1e-5 * linalg::max_abs(x0));
}

TEST_CASE("variant names round-trip") {
  for (Variant v : {Variant::Fixed, Variant::Kicking, Variant::BB}) CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_variant("newton"), InvalidArgument);
}

TEST_CASE("BB line search tolerates rounding in f near the optimum") {
  // Low-rank instance whose required Armijo decrease falls below the
  // resolution of f before the gradient reaches tol.
  SplitMix64 rng(derive_seed({909, 10}));
  Vector u(8);
  Vector v(8);
  for (double& e : u) e = rng.gaussian();
  for (double& e : v) e = rng.gaussian();
  Matrix x0(8, 8);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 8; ++j) x0(i, j) = u[i] * v[j];
  }
  std::vector<Matrix> mats;
  for (int i = 0; i < 40; ++i) {
    Matrix ai(8, 8);
    for (double& e : ai.values()) e = rng.gaussian();
    mats.push_back(std::move(ai));
  }
  const auto op = SensingOperator::trace_list(std::move(mats));
  const Model model(op, models::apply_op(op, PrimalPoint::matrix(x0)), 10.0 * linalg::spectral_norm(x0));
  SolverOptions opts = options(Variant::BB, 1e-9);
  opts.max_iter = 50000;
  Trace t;
  REQUIRE_NOTHROW(t = lbreg_bb(model, opts));
  CHECK(t.status == Status::Converged);
  CHECK(oracle::max_abs_diff(t.x.as_matrix(), x0) <= 1e-6 * linalg::max_abs(x0));
}
