#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "dgmm/errors.hpp"

namespace dgmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NonFiniteEntry(what + " contains NaN/Inf");
}

inline void require_same_shape(const Matrix& a, const Matrix& b,
                               const std::string& what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatch(what + ": " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
  }
}

// Relative asymmetry max|A - A^T| / (1 + max|A|).
inline double asymmetry(const Matrix& a) {
  const double scale = 1.0 + a.cwiseAbs().maxCoeff();
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

inline Matrix symmetrized(const Matrix& a) {
  return 0.5 * (a + a.transpose());
}

// Solves A X = B for symmetric positive-definite A via Cholesky.
// A is symmetrized as (A + A^T)/2 before factorization; posterior precision
// matrices are symmetric analytically but accumulate asymmetry numerically.
// One iterative-refinement pass keeps the residual within the contract
// ||A X - B||_inf <= 1e-8 (1 + ||B||_inf).
inline Matrix cholesky_solve(const Matrix& a, const Matrix& b) {
  if (a.rows() < 1 || a.rows() != a.cols()) {
    throw ShapeMismatch("cholesky_solve: A must be square n>=1, got " +
                        std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()));
  }
  if (b.rows() != a.rows()) {
    throw ShapeMismatch("cholesky_solve: B rows " + std::to_string(b.rows()) +
                        " != n " + std::to_string(a.rows()));
  }
  if (asymmetry(a) > 1e-10) {
    throw InvalidArgument("cholesky_solve: A is not symmetric");
  }
  const Matrix sym = symmetrized(a);
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("cholesky_solve: non-positive pivot");
  }
  Matrix x = llt.solve(b);
  x += llt.solve(b - sym * x);
  return x;
}

// Inverse of a symmetric positive-definite matrix through the same path.
inline Matrix spd_inverse(const Matrix& a) {
  return cholesky_solve(a, Matrix::Identity(a.rows(), a.cols()));
}

// log|A| for symmetric positive-definite A.
inline double spd_log_det(const Matrix& a) {
  Eigen::LLT<Matrix> llt(symmetrized(a));
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("spd_log_det: non-positive pivot");
  }
  return 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
}

// Lower Cholesky factor, used for sampling from N(mu, Sigma).
inline Matrix cholesky_factor(const Matrix& a) {
  Eigen::LLT<Matrix> llt(symmetrized(a));
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("cholesky_factor: non-positive pivot");
  }
  return Matrix(llt.matrixL());
}

}  // namespace dgmm
