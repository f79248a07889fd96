#pragma once

// Independent reference computations for the tests. Eigen supplies the
// decompositions and std::mt19937_64 the random inputs, so nothing here
// shares code with the library under test.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "lbreg/linalg.hpp"

namespace oracle {

using lbreg::linalg::Matrix;
using lbreg::linalg::Vector;

inline Eigen::MatrixXd to_eigen(const Matrix& a) {
  Eigen::MatrixXd m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j);
  }
  return m;
}

inline Matrix from_eigen(const Eigen::MatrixXd& m) {
  Matrix a(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) a(i, j) = m(i, j);
  }
  return a;
}

inline Eigen::VectorXd to_eigen(const Vector& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

inline Vector from_eigen_vec(const Eigen::VectorXd& v) { return Vector(v.data(), v.data() + v.size()); }

class Random {
 public:
  explicit Random(std::uint64_t seed) : gen_(seed) {}

  double normal() { return normal_(gen_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_); }

  Matrix matrix(std::size_t m, std::size_t n, double scale = 1.0) {
    Matrix a(m, n);
    for (double& v : a.values()) v = scale * normal();
    return a;
  }

  Vector vector(std::size_t n, double scale = 1.0) {
    Vector v(n);
    for (double& x : v) x = scale * normal();
    return v;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Descending singular values.
inline Vector singular_values(const Matrix& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(a));
  return from_eigen_vec(svd.singularValues());
}

/// Ascending eigenvalues of a symmetric matrix.
inline Vector sym_eigenvalues(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(s));
  return from_eigen_vec(es.eigenvalues());
}

/// Smallest eigenvalue of M restricted to Range(A): lambda_min(Q^T M Q) for an
/// orthonormal basis Q of Range(A).
inline double restricted_min_eigenvalue(const Matrix& m, const Matrix& a, double rank_tol = 1e-10) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(a), Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > rank_tol * s(0)) ++r;
  const Eigen::MatrixXd q = svd.matrixU().leftCols(r);
  const Eigen::MatrixXd reduced = q.transpose() * to_eigen(m) * q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced);
  return es.eigenvalues()(0);
}

/// Central differences of f at y.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& y, double step) {
  Vector g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    Vector p = y;
    Vector q = y;
    p[i] += step;
    q[i] -= step;
    g[i] = (f(p) - f(q)) / (2.0 * step);
  }
  return g;
}

inline double norm2(const Vector& v) { return to_eigen(v).norm(); }

inline double dist(const Vector& a, const Vector& b) { return (to_eigen(a) - to_eigen(b)).norm(); }

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  return (to_eigen(a) - to_eigen(b)).cwiseAbs().maxCoeff();
}

}  // namespace oracle
