#include "lbreg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "lbreg/error.hpp"

namespace lbreg::linalg {

namespace {

void require_same_length(ConstSpan a, ConstSpan b, const char* what) {
  if (a.size() != b.size()) {
    throw InvalidArgument(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(what) + ": shape mismatch");
  }
}

void require_finite(const Matrix& a, const char* what) {
  if (!all_finite(a.values())) throw InvalidArgument(std::string(what) + ": non-finite entry");
}

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Column-major working copy used by the Jacobi SVD.
using Columns = std::vector<Vector>;

Columns to_columns(const Matrix& a) {
  Columns cols(a.cols(), Vector(a.rows()));
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) cols[j][i] = a(i, j);
  }
  return cols;
}

// Replaces near-null columns of q (flagged in `deficient`) with unit vectors
// orthogonal to every other column.
void complete_orthonormal(Columns& q, const std::vector<bool>& deficient) {
  const std::size_t m = q.empty() ? 0 : q[0].size();
  for (std::size_t c = 0; c < q.size(); ++c) {
    if (!deficient[c]) continue;
    Vector best;
    double best_norm = -1.0;
    for (std::size_t e = 0; e < m; ++e) {
      Vector cand(m, 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t o = 0; o < q.size(); ++o) {
          if (o == c || (deficient[o] && o > c)) continue;
          axpy(-dot(q[o], cand), q[o], cand);
        }
      }
      const double nrm = norm2(cand);
      if (nrm > best_norm) {
        best_norm = nrm;
        best = std::move(cand);
      }
      if (best_norm > 0.7) break;
    }
    for (double& v : best) v /= best_norm;
    q[c] = std::move(best);
  }
}

// One-sided (Hestenes) Jacobi for rows >= cols.
SvdResult svd_tall(const Matrix& a, const SvdOptions& options) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Columns w = to_columns(a);
  Columns v(n, Vector(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) v[j][j] = 1.0;

  const double tol = std::max(options.tolerance, static_cast<double>(m) * kEps);
  int sweep = 0;
  bool rotated = true;
  while (rotated) {
    if (sweep == options.max_sweeps) {
      throw ConvergenceError("svd: one-sided Jacobi did not converge", sweep);
    }
    rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(w[p], w[p]);
        const double beta = dot(w[q], w[q]);
        const double gamma = dot(w[p], w[q]);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w[p][i];
          const double wq = w[q][i];
          w[p][i] = c * wp - s * wq;
          w[q][i] = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v[p][i];
          const double vq = v[q][i];
          v[p][i] = c * vp - s * vq;
          v[q][i] = s * vp + c * vq;
        }
      }
    }
    ++sweep;
  }

  Vector sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(w[j]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

  const double smax = n == 0 ? 0.0 : sigma[order[0]];
  Columns u(n);
  std::vector<bool> deficient(n, false);
  SvdResult out;
  out.sigma.resize(n);
  out.v = Matrix(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t j = order[r];
    out.sigma[r] = sigma[j];
    for (std::size_t i = 0; i < n; ++i) out.v(i, r) = v[j][i];
    if (sigma[j] == 0.0 || sigma[j] <= 1e-13 * smax) {
      deficient[r] = true;
      u[r] = Vector(m, 0.0);
    } else {
      u[r] = scaled(1.0 / sigma[j], w[j]);
    }
  }
  if (std::any_of(deficient.begin(), deficient.end(), [](bool b) { return b; })) {
    complete_orthonormal(u, deficient);
  }
  out.u = Matrix(m, n);
  for (std::size_t r = 0; r < n; ++r) out.u.set_column(r, u[r]);
  return out;
}

}  // namespace

// ---- Matrix ---------------------------------------------------------------

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  if (data_.size() != rows * cols) {
    throw InvalidArgument("Matrix: expected " + std::to_string(rows * cols) + " entries, got " +
                          std::to_string(data_.size()));
  }
  if (!all_finite(data_)) throw InvalidArgument("Matrix: non-finite entry");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(ConstSpan d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw InvalidArgument("Matrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::column_vector(ConstSpan x) { return Matrix(x.size(), 1, Vector(x.begin(), x.end())); }

Vector Matrix::column(std::size_t j) const {
  Vector out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

void Matrix::set_column(std::size_t j, ConstSpan v) {
  if (v.size() != rows_) throw InvalidArgument("Matrix::set_column: length mismatch");
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

// ---- vectors --------------------------------------------------------------

double dot(ConstSpan a, ConstSpan b) {
  require_same_length(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(ConstSpan a) {
  // Scaled accumulation so huge/tiny entries do not overflow.
  double scale = 0.0;
  double ssq = 1.0;
  for (double v : a) {
    if (v == 0.0) continue;
    const double av = std::abs(v);
    if (scale < av) {
      ssq = 1.0 + ssq * (scale / av) * (scale / av);
      scale = av;
    } else {
      ssq += (av / scale) * (av / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

double norm1(ConstSpan a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

double norm_inf(ConstSpan a) {
  double s = 0.0;
  for (double v : a) s = std::max(s, std::abs(v));
  return s;
}

bool all_finite(ConstSpan a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

void axpy(double a, ConstSpan x, std::span<double> y) {
  require_same_length(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Vector add(ConstSpan a, ConstSpan b) {
  require_same_length(a, b, "add");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vector subtract(ConstSpan a, ConstSpan b) {
  require_same_length(a, b, "subtract");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector scaled(double s, ConstSpan a) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

// ---- matrices -------------------------------------------------------------

Vector multiply(const Matrix& a, ConstSpan x) {
  if (x.size() != a.cols()) throw InvalidArgument("multiply: A.cols != len(x)");
  // Skip zero entries of x; iterates are typically sparse.
  std::vector<std::size_t> nz;
  nz.reserve(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0) nz.push_back(j);
  }
  Vector out(a.rows(), 0.0);
  if (nz.size() * 2 < x.size()) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double* r = a.row(i).data();
      double s = 0.0;
      for (std::size_t j : nz) s += r[j] * x[j];
      out[i] = s;
    }
  } else {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double* r = a.row(i).data();
      double s = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) s += r[j] * x[j];
      out[i] = s;
    }
  }
  return out;
}

Vector multiply_transposed(const Matrix& a, ConstSpan y) {
  if (y.size() != a.rows()) throw InvalidArgument("multiply_transposed: A.rows != len(y)");
  Vector out(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double yi = y[i];
    if (yi == 0.0) continue;
    const double* r = a.row(i).data();
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += r[j] * yi;
  }
  return out;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("multiply: inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix c = a;
  axpy(1.0, b.values(), c.values());
  return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix c = a;
  axpy(-1.0, b.values(), c.values());
  return c;
}

Matrix scaled(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.values()) v *= s;
  return c;
}

Matrix outer_gram(const Matrix& a) {
  Matrix g(a.rows(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i; j < a.rows(); ++j) {
      const double s = dot(a.row(i), a.row(j));
      g(i, j) = s;
      g(j, i) = s;
    }
  }
  return g;
}

Matrix inner_gram(const Matrix& a) {
  Matrix g(a.cols(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ri = row[i];
      if (ri == 0.0) continue;
      for (std::size_t j = i; j < a.cols(); ++j) g(i, j) += ri * row[j];
    }
  }
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  }
  return g;
}

Matrix select_columns(const Matrix& a, std::span<const std::size_t> columns) {
  Matrix out(a.rows(), columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] >= a.cols()) throw InvalidArgument("select_columns: index out of range");
    for (std::size_t i = 0; i < a.rows(); ++i) out(i, c) = a(i, columns[c]);
  }
  return out;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  if (a.empty() && a.cols() == 0) return b;
  if (b.cols() == 0) return a;
  if (a.rows() != b.rows()) throw InvalidArgument("hstack: row count mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
  }
  return out;
}

double frobenius_norm(const Matrix& a) { return norm2(a.values()); }

double max_abs(const Matrix& a) { return norm_inf(a.values()); }

// ---- shrinkage ------------------------------------------------------------

Vector shrink(ConstSpan v, double mu) {
  if (!(mu > 0.0)) throw InvalidArgument("shrink: mu must be positive");
  if (!all_finite(v)) throw InvalidArgument("shrink: non-finite input");
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = shrink(v[i], mu);
  return out;
}

Matrix sv_shrink(const Matrix& x, double mu) {
  if (!(mu > 0.0)) throw InvalidArgument("sv_shrink: mu must be positive");
  const SvdResult d = svd(x);
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < d.sigma.size(); ++r) {
    const double s = shrink(d.sigma[r], mu);
    if (s == 0.0) break;  // sigma is sorted descending
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double ui = s * d.u(i, r);
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += ui * d.v(j, r);
    }
  }
  return out;
}

// ---- decompositions -------------------------------------------------------

SvdResult svd(const Matrix& x, const SvdOptions& options) {
  if (x.rows() > options.size_cap || x.cols() > options.size_cap) {
    throw InvalidArgument("svd: " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                          " exceeds the size cap " + std::to_string(options.size_cap));
  }
  require_finite(x, "svd");
  if (x.rows() >= x.cols()) return svd_tall(x, options);
  SvdResult t = svd_tall(x.transposed(), options);
  std::swap(t.u, t.v);
  return t;
}

Vector singular_values(const Matrix& x) { return svd(x).sigma; }

SymEigResult sym_eig(const Matrix& s) {
  if (s.rows() != s.cols()) throw InvalidArgument("sym_eig: matrix is not square");
  require_finite(s, "sym_eig");
  const std::size_t n = s.rows();
  const double scale = max_abs(s);
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(s(i, j) - s(j, i)) > 1e-12 * scale) {
        throw InvalidArgument("sym_eig: matrix is not symmetric");
      }
      a(i, j) = 0.5 * (s(i, j) + s(j, i));
    }
  }
  Matrix q = Matrix::identity(n);

  constexpr int kMaxSweeps = 100;
  const double fro = frobenius_norm(a);
  int sweep = 0;
  for (;; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    }
    if (std::sqrt(off) <= 1e-14 * fro || fro == 0.0) break;
    if (sweep == kMaxSweeps) throw ConvergenceError("sym_eig: Jacobi did not converge", sweep);
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t r = p + 1; r < n; ++r) {
        const double apq = a(p, r);
        if (apq == 0.0) continue;
        if (std::abs(apq) <= kEps * 1e-2 * std::sqrt(std::abs(a(p, p) * a(r, r)))) {
          a(p, r) = a(r, p) = 0.0;
          continue;
        }
        const double theta = (a(r, r) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(1.0, theta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akr = a(k, r);
          a(k, p) = c * akp - sn * akr;
          a(k, r) = sn * akp + c * akr;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double ark = a(r, k);
          a(p, k) = c * apk - sn * ark;
          a(r, k) = sn * apk + c * ark;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double qkp = q(k, p);
          const double qkr = q(k, r);
          q(k, p) = c * qkp - sn * qkr;
          q(k, r) = sn * qkp + c * qkr;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  SymEigResult out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    out.eigenvalues[c] = a(order[c], order[c]);
    for (std::size_t k = 0; k < n; ++k) out.eigenvectors(k, c) = q(k, order[c]);
  }
  return out;
}

double lambda_min_pp(const Matrix& s, double rank_epsilon) {
  const SymEigResult e = sym_eig(s);
  if (e.eigenvalues.empty()) throw InvalidArgument("lambda_min_pp: empty matrix");
  const double lmax = e.eigenvalues.back();
  if (!(lmax > 0.0)) throw InvalidArgument("lambda_min_pp: matrix has no positive eigenvalue");
  const double cutoff = rank_epsilon * lmax;
  for (double l : e.eigenvalues) {
    if (l > cutoff) return l;
  }
  throw InvalidArgument("lambda_min_pp: all eigenvalues below the rank threshold");
}

double spectral_norm(const Matrix& a) {
  if (a.empty()) return 0.0;
  return svd(a).sigma.front();
}

double nuclear_norm(const Matrix& a) {
  const Vector s = singular_values(a);
  return std::accumulate(s.begin(), s.end(), 0.0);
}

std::size_t numerical_rank(const Matrix& a, double relative_tolerance) {
  if (a.empty()) return 0;
  const Vector s = singular_values(a);
  if (s.front() == 0.0) return 0;
  return static_cast<std::size_t>(std::count_if(
      s.begin(), s.end(), [&](double v) { return v > relative_tolerance * s.front(); }));
}

Vector least_squares(const Matrix& m, ConstSpan rhs, double relative_tolerance) {
  if (rhs.size() != m.rows()) throw InvalidArgument("least_squares: length mismatch");
  Vector z(m.cols(), 0.0);
  if (m.empty()) return z;
  const SvdResult d = svd(m);
  const double cutoff = relative_tolerance * (d.sigma.empty() ? 0.0 : d.sigma.front());
  for (std::size_t r = 0; r < d.sigma.size(); ++r) {
    if (d.sigma[r] <= cutoff || d.sigma[r] == 0.0) break;
    double c = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) c += d.u(i, r) * rhs[i];
    c /= d.sigma[r];
    for (std::size_t j = 0; j < m.cols(); ++j) z[j] += c * d.v(j, r);
  }
  return z;
}

}  // namespace lbreg::linalg
