#pragma once

// Augmented l1 / nuclear-norm models and their smooth Lagrange duals.
//
//   primal:  min ||x||_1 + ||x||^2/(2 alpha)   s.t. A x = b      (sigma == 0)
//                                              or ||A x - b|| <= sigma
//   dual:    f(y) = -b'y + sigma ||y|| + (alpha/2) ||shrink(A* y)||^2
//
// The matrix variants replace the l1 norm with the nuclear norm and the
// componentwise shrink with singular-value shrink.

#include <cstddef>
#include <utility>
#include <variant>
#include <vector>

#include "lbreg/linalg.hpp"

namespace lbreg::models {

using linalg::Matrix;
using linalg::Vector;

/// x (stored as an n x 1 matrix) or X (n1 x n2).
class PrimalPoint {
 public:
  PrimalPoint() = default;
  static PrimalPoint vector(Vector x);
  static PrimalPoint matrix(Matrix x);
  static PrimalPoint zeros_like(const PrimalPoint& p);

  bool is_matrix() const noexcept { return is_matrix_; }
  std::size_t rows() const noexcept { return value_.rows(); }
  std::size_t cols() const noexcept { return value_.cols(); }
  const Matrix& as_matrix() const noexcept { return value_; }
  linalg::ConstSpan values() const noexcept { return value_.values(); }
  std::span<double> values() noexcept { return value_.values(); }
  Vector to_vector() const { return Vector(values().begin(), values().end()); }

  bool operator==(const PrimalPoint&) const = default;

 private:
  Matrix value_;
  bool is_matrix_ = false;
};

struct DenseVectorOp {
  Matrix a;
};

struct EntrySampler {
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::vector<std::pair<std::size_t, std::size_t>> omega;
};

struct TraceList {
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::vector<Matrix> mats;
};

/// The linear map A (vector models) or calA (matrix models).
class SensingOperator {
 public:
  using Variant = std::variant<DenseVectorOp, EntrySampler, TraceList>;

  static SensingOperator dense(Matrix a);
  static SensingOperator entry_sampler(std::size_t n1, std::size_t n2,
                                       std::vector<std::pair<std::size_t, std::size_t>> omega);
  static SensingOperator trace_list(std::vector<Matrix> mats);

  const Variant& variant() const noexcept { return op_; }
  /// Number of measurements m.
  std::size_t measurements() const;
  bool is_matrix() const noexcept { return !std::holds_alternative<DenseVectorOp>(op_); }
  /// Shape of the primal variable (n x 1 for vector models).
  std::size_t primal_rows() const;
  std::size_t primal_cols() const;
  /// Dense matrix of a DenseVectorOp; throws for the matrix variants.
  const Matrix& dense_matrix() const;
  /// m x (n1*n2) matrix representing the operator on row-major vec(X).
  Matrix explicit_matrix() const;
  /// Operator 2-norm ||A||_2 (cached).
  double norm() const;

 private:
  explicit SensingOperator(Variant op) : op_(std::move(op)) {}

  Variant op_;
  mutable double norm_ = -1.0;
};

Vector apply_op(const SensingOperator& op, const PrimalPoint& p);
PrimalPoint adjoint_op(const SensingOperator& op, linalg::ConstSpan y);

class Model {
 public:
  /// sigma == 0 selects the equality-constrained dual.
  Model(SensingOperator op, Vector b, double alpha, double sigma = 0.0);

  const SensingOperator& op() const noexcept { return op_; }
  const Vector& b() const noexcept { return b_; }
  double alpha() const noexcept { return alpha_; }
  double sigma() const noexcept { return sigma_; }
  std::size_t measurements() const noexcept { return b_.size(); }
  bool is_matrix() const noexcept { return op_.is_matrix(); }

 private:
  SensingOperator op_;
  Vector b_;
  double alpha_;
  double sigma_;
};

/// Everything a solver needs at one dual point, sharing a single A* y.
struct DualEvaluation {
  PrimalPoint aty;   // A* y
  PrimalPoint x;     // alpha * shrink(A* y)
  double f = 0.0;    // dual objective
  Vector grad;       // dual gradient
};

/// Evaluates objective, gradient and primal image at y. For sigma > 0 and
/// y == 0 the gradient is not defined and this throws.
DualEvaluation evaluate(const Model& model, linalg::ConstSpan y);

double dual_objective(const Model& model, linalg::ConstSpan y);
Vector dual_gradient(const Model& model, linalg::ConstSpan y);
PrimalPoint primal_from_dual(const Model& model, linalg::ConstSpan y);
double primal_objective(const Model& model, const PrimalPoint& p);

/// shrink(V, 1) for vector points, sv_shrink(V, 1) for matrix points.
PrimalPoint shrink_image(const PrimalPoint& v);

}  // namespace lbreg::models
