#include "lbreg/models.hpp"

#include <cmath>
#include <set>
#include <string>

#include "lbreg/error.hpp"

namespace lbreg::models {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void require_shape(const SensingOperator& op, const PrimalPoint& p) {
  if (p.rows() != op.primal_rows() || p.cols() != op.primal_cols() ||
      p.is_matrix() != op.is_matrix()) {
    throw InvalidArgument("primal point shape " + std::to_string(p.rows()) + "x" +
                          std::to_string(p.cols()) + " does not match the operator");
  }
}

void require_dual_length(const Model& model, linalg::ConstSpan y) {
  if (y.size() != model.measurements()) {
    throw InvalidArgument("dual point has length " + std::to_string(y.size()) + ", expected " +
                          std::to_string(model.measurements()));
  }
}

}  // namespace

// ---- PrimalPoint ----------------------------------------------------------

PrimalPoint PrimalPoint::vector(Vector x) {
  PrimalPoint p;
  const std::size_t n = x.size();
  p.value_ = Matrix(n, 1, std::move(x));
  p.is_matrix_ = false;
  return p;
}

PrimalPoint PrimalPoint::matrix(Matrix x) {
  PrimalPoint p;
  p.value_ = std::move(x);
  p.is_matrix_ = true;
  return p;
}

PrimalPoint PrimalPoint::zeros_like(const PrimalPoint& q) {
  PrimalPoint p;
  p.value_ = Matrix(q.rows(), q.cols());
  p.is_matrix_ = q.is_matrix_;
  return p;
}

// ---- SensingOperator ------------------------------------------------------

SensingOperator SensingOperator::dense(Matrix a) {
  if (a.rows() == 0 || a.cols() == 0) throw InvalidArgument("dense operator: empty matrix");
  return SensingOperator(DenseVectorOp{std::move(a)});
}

SensingOperator SensingOperator::entry_sampler(
    std::size_t n1, std::size_t n2, std::vector<std::pair<std::size_t, std::size_t>> omega) {
  if (n1 == 0 || n2 == 0) throw InvalidArgument("entry sampler: empty matrix shape");
  if (omega.empty()) throw InvalidArgument("entry sampler: no observed entries");
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& ij : omega) {
    if (ij.first >= n1 || ij.second >= n2) throw InvalidArgument("entry sampler: index out of range");
    if (!seen.insert(ij).second) throw InvalidArgument("entry sampler: duplicate index");
  }
  return SensingOperator(EntrySampler{n1, n2, std::move(omega)});
}

SensingOperator SensingOperator::trace_list(std::vector<Matrix> mats) {
  if (mats.empty()) throw InvalidArgument("trace list: no measurement matrices");
  const std::size_t n1 = mats.front().rows();
  const std::size_t n2 = mats.front().cols();
  if (n1 == 0 || n2 == 0) throw InvalidArgument("trace list: empty measurement matrix");
  for (const auto& m : mats) {
    if (m.rows() != n1 || m.cols() != n2) throw InvalidArgument("trace list: shape mismatch");
  }
  return SensingOperator(TraceList{n1, n2, std::move(mats)});
}

std::size_t SensingOperator::measurements() const {
  return std::visit(Overloaded{[](const DenseVectorOp& d) { return d.a.rows(); },
                               [](const EntrySampler& s) { return s.omega.size(); },
                               [](const TraceList& t) { return t.mats.size(); }},
                    op_);
}

std::size_t SensingOperator::primal_rows() const {
  return std::visit(Overloaded{[](const DenseVectorOp& d) { return d.a.cols(); },
                               [](const EntrySampler& s) { return s.n1; },
                               [](const TraceList& t) { return t.n1; }},
                    op_);
}

std::size_t SensingOperator::primal_cols() const {
  return std::visit(Overloaded{[](const DenseVectorOp&) { return std::size_t{1}; },
                               [](const EntrySampler& s) { return s.n2; },
                               [](const TraceList& t) { return t.n2; }},
                    op_);
}

const Matrix& SensingOperator::dense_matrix() const {
  if (const auto* d = std::get_if<DenseVectorOp>(&op_)) return d->a;
  throw InvalidArgument("operator is not a dense vector operator");
}

Matrix SensingOperator::explicit_matrix() const {
  return std::visit(Overloaded{[](const DenseVectorOp& d) { return d.a; },
                               [](const EntrySampler& s) {
                                 Matrix m(s.omega.size(), s.n1 * s.n2);
                                 for (std::size_t k = 0; k < s.omega.size(); ++k) {
                                   m(k, s.omega[k].first * s.n2 + s.omega[k].second) = 1.0;
                                 }
                                 return m;
                               },
                               [](const TraceList& t) {
                                 Matrix m(t.mats.size(), t.n1 * t.n2);
                                 for (std::size_t k = 0; k < t.mats.size(); ++k) {
                                   const auto v = t.mats[k].values();
                                   for (std::size_t j = 0; j < v.size(); ++j) m(k, j) = v[j];
                                 }
                                 return m;
                               }},
                    op_);
}

double SensingOperator::norm() const {
  if (norm_ < 0.0) {
    if (std::holds_alternative<EntrySampler>(op_)) {
      norm_ = 1.0;
    } else {
      const Matrix m = explicit_matrix();
      // The Gram side with fewer rows keeps the SVD small.
      norm_ = m.rows() <= m.cols() ? std::sqrt(linalg::sym_eig(linalg::outer_gram(m)).eigenvalues.back())
                                   : std::sqrt(linalg::sym_eig(linalg::inner_gram(m)).eigenvalues.back());
    }
  }
  return norm_;
}

Vector apply_op(const SensingOperator& op, const PrimalPoint& p) {
  require_shape(op, p);
  return std::visit(Overloaded{[&](const DenseVectorOp& d) { return linalg::multiply(d.a, p.values()); },
                               [&](const EntrySampler& s) {
                                 Vector out(s.omega.size());
                                 for (std::size_t k = 0; k < s.omega.size(); ++k) {
                                   out[k] = p.as_matrix()(s.omega[k].first, s.omega[k].second);
                                 }
                                 return out;
                               },
                               [&](const TraceList& t) {
                                 Vector out(t.mats.size());
                                 for (std::size_t k = 0; k < t.mats.size(); ++k) {
                                   out[k] = linalg::dot(t.mats[k].values(), p.values());
                                 }
                                 return out;
                               }},
                    op.variant());
}

PrimalPoint adjoint_op(const SensingOperator& op, linalg::ConstSpan y) {
  if (y.size() != op.measurements()) {
    throw InvalidArgument("adjoint: length " + std::to_string(y.size()) + " != " +
                          std::to_string(op.measurements()));
  }
  return std::visit(
      Overloaded{[&](const DenseVectorOp& d) { return PrimalPoint::vector(linalg::multiply_transposed(d.a, y)); },
                 [&](const EntrySampler& s) {
                   Matrix out(s.n1, s.n2);
                   for (std::size_t k = 0; k < s.omega.size(); ++k) {
                     out(s.omega[k].first, s.omega[k].second) = y[k];
                   }
                   return PrimalPoint::matrix(std::move(out));
                 },
                 [&](const TraceList& t) {
                   Matrix out(t.n1, t.n2);
                   for (std::size_t k = 0; k < t.mats.size(); ++k) {
                     if (y[k] != 0.0) linalg::axpy(y[k], t.mats[k].values(), out.values());
                   }
                   return PrimalPoint::matrix(std::move(out));
                 }},
      op.variant());
}

// ---- Model ----------------------------------------------------------------

Model::Model(SensingOperator op, Vector b, double alpha, double sigma)
    : op_(std::move(op)), b_(std::move(b)), alpha_(alpha), sigma_(sigma) {
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw InvalidArgument("model: alpha must be positive");
  if (!(sigma_ >= 0.0) || !std::isfinite(sigma_)) throw InvalidArgument("model: sigma must be nonnegative");
  if (b_.size() != op_.measurements()) {
    throw InvalidArgument("model: b has length " + std::to_string(b_.size()) + " but the operator has " +
                          std::to_string(op_.measurements()) + " measurements");
  }
  if (!linalg::all_finite(b_)) throw InvalidArgument("model: non-finite measurement");
}

PrimalPoint shrink_image(const PrimalPoint& v) {
  if (v.is_matrix()) return PrimalPoint::matrix(linalg::sv_shrink(v.as_matrix(), 1.0));
  return PrimalPoint::vector(linalg::shrink(v.values(), 1.0));
}

DualEvaluation evaluate(const Model& model, linalg::ConstSpan y) {
  require_dual_length(model, y);
  DualEvaluation e;
  e.aty = adjoint_op(model.op(), y);
  e.x = shrink_image(e.aty);
  const double shrink_sq = linalg::dot(e.x.values(), e.x.values());
  for (double& v : e.x.values()) v *= model.alpha();

  const double ynorm = linalg::norm2(y);
  e.f = -linalg::dot(model.b(), y) + 0.5 * model.alpha() * shrink_sq;
  if (model.sigma() > 0.0) e.f += model.sigma() * ynorm;

  e.grad = apply_op(model.op(), e.x);
  linalg::axpy(-1.0, model.b(), e.grad);
  if (model.sigma() > 0.0) {
    if (ynorm == 0.0) throw InvalidArgument("dual nondifferentiable at origin");
    linalg::axpy(model.sigma() / ynorm, y, e.grad);
  }
  return e;
}

double dual_objective(const Model& model, linalg::ConstSpan y) {
  require_dual_length(model, y);
  const PrimalPoint s = shrink_image(adjoint_op(model.op(), y));
  double f = -linalg::dot(model.b(), y) + 0.5 * model.alpha() * linalg::dot(s.values(), s.values());
  if (model.sigma() > 0.0) f += model.sigma() * linalg::norm2(y);
  return f;
}

Vector dual_gradient(const Model& model, linalg::ConstSpan y) { return evaluate(model, y).grad; }

PrimalPoint primal_from_dual(const Model& model, linalg::ConstSpan y) {
  require_dual_length(model, y);
  PrimalPoint x = shrink_image(adjoint_op(model.op(), y));
  for (double& v : x.values()) v *= model.alpha();
  return x;
}

double primal_objective(const Model& model, const PrimalPoint& p) {
  require_shape(model.op(), p);
  const double sq = linalg::dot(p.values(), p.values());
  const double reg = p.is_matrix() ? linalg::nuclear_norm(p.as_matrix()) : linalg::norm1(p.values());
  return reg + sq / (2.0 * model.alpha());
}

}  // namespace lbreg::models
