#pragma once

// Small dense linear algebra for desk-scale problems: row-major matrices,
// plain std::vector<double> vectors, one-sided Jacobi SVD, cyclic Jacobi
// symmetric eigensolver and the shrinkage operators.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace lbreg::linalg {

using Vector = std::vector<double>;
using ConstSpan = std::span<const double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of row-major entries; throws unless the length is
  /// rows*cols and every entry is finite.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(ConstSpan d);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  /// n x 1 matrix holding x.
  static Matrix column_vector(ConstSpan x);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  ConstSpan row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> values() noexcept { return data_; }
  ConstSpan values() const noexcept { return data_; }

  Vector column(std::size_t j) const;
  void set_column(std::size_t j, ConstSpan v);
  Matrix transposed() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---- vector helpers -------------------------------------------------------

double dot(ConstSpan a, ConstSpan b);
double norm2(ConstSpan a);
double norm1(ConstSpan a);
double norm_inf(ConstSpan a);
bool all_finite(ConstSpan a);
/// y += a * x
void axpy(double a, ConstSpan x, std::span<double> y);
Vector add(ConstSpan a, ConstSpan b);
Vector subtract(ConstSpan a, ConstSpan b);
Vector scaled(double s, ConstSpan a);

// ---- matrix helpers -------------------------------------------------------

/// A * x
Vector multiply(const Matrix& a, ConstSpan x);
/// A^T * y
Vector multiply_transposed(const Matrix& a, ConstSpan y);
Matrix multiply(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scaled(double s, const Matrix& a);
/// A * A^T
Matrix outer_gram(const Matrix& a);
/// A^T * A
Matrix inner_gram(const Matrix& a);
Matrix select_columns(const Matrix& a, std::span<const std::size_t> columns);
/// [A B]
Matrix hstack(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);

// ---- shrinkage ------------------------------------------------------------

inline double shrink(double s, double mu = 1.0) {
  if (s > mu) return s - mu;
  if (s < -mu) return s + mu;
  return 0.0;
}

/// Componentwise sign(v)*max(|v|-mu, 0). Throws on mu <= 0 or non-finite v.
Vector shrink(ConstSpan v, double mu);

/// Singular-value soft thresholding U diag(shrink(sigma, mu)) V^T.
Matrix sv_shrink(const Matrix& x, double mu);

// ---- decompositions -------------------------------------------------------

struct SvdOptions {
  std::size_t size_cap = 512;
  int max_sweeps = 80;
  /// Relative off-diagonal threshold for a Jacobi rotation.
  double tolerance = 1e-14;
};

/// Thin SVD: U is rows x p, sigma has p entries (descending), V is cols x p,
/// p = min(rows, cols).
struct SvdResult {
  Matrix u;
  Vector sigma;
  Matrix v;
};

SvdResult svd(const Matrix& x, const SvdOptions& options = {});
Vector singular_values(const Matrix& x);

struct SymEigResult {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // column i pairs with eigenvalues[i]
};

SymEigResult sym_eig(const Matrix& s);

/// Relative cutoff below which an eigenvalue is treated as zero.
inline constexpr double kRankEpsilon = 1e-10;

/// Smallest eigenvalue of a symmetric PSD matrix exceeding
/// kRankEpsilon * lambda_max.
double lambda_min_pp(const Matrix& s, double rank_epsilon = kRankEpsilon);

double spectral_norm(const Matrix& a);
double nuclear_norm(const Matrix& a);
std::size_t numerical_rank(const Matrix& a, double relative_tolerance = kRankEpsilon);

/// Minimum-norm least-squares solution of M z = rhs via the SVD; singular
/// values below relative_tolerance * sigma_max are discarded.
Vector least_squares(const Matrix& m, ConstSpan rhs,
                     double relative_tolerance = 1e-12);

}  // namespace lbreg::linalg
