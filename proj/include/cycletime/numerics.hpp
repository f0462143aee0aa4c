#pragma once

// Dense linear-algebra kernels shared by the Levenberg-Marquardt / Bayesian
// trainers and the ANFIS consequent estimator. Storage and factorizations are
// Eigen's; this header only fixes the failure semantics the callers rely on.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>

#include <cmath>
#include <limits>

#include "cycletime/errors.hpp"

namespace cycletime {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace numerics {

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kConditionLimit = 1e12;
inline constexpr double kRidge = 1e-8;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// Solves A x = b for symmetric positive-definite A by Cholesky.
///
/// A pivot is rejected when it is not larger than n * eps * max(diag(A)); such a
/// factorization would be dominated by rounding, so the caller sees
/// NotPositiveDefinite and can raise its damping instead.
inline Vector solve_spd(const Matrix& a, const Vector& b) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.size() != n) {
    throw DimensionMismatch("solve_spd: matrix must be square and match the right-hand side");
  }
  if (n == 0) return Vector(0);
  const double scale = a.cwiseAbs().maxCoeff();
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * std::max(scale, 1.0)) {
    throw Error("solve_spd: matrix is not symmetric");
  }

  Eigen::LLT<Matrix> llt(a);
  const double max_diag = a.diagonal().maxCoeff();
  const double floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * std::max(max_diag, 0.0);
  if (llt.info() != Eigen::Success || !(max_diag > 0.0)) {
    throw NotPositiveDefinite(0);
  }
  const Matrix& l = llt.matrixLLT();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double pivot = l(k, k) * l(k, k);
    if (!(pivot > floor) || !std::isfinite(pivot)) throw NotPositiveDefinite(static_cast<std::size_t>(k));
  }
  return llt.solve(b);
}

struct LeastSquaresResult {
  Vector x;
  /// Set when the design was too ill-conditioned and the ridge solution was used.
  bool rank_deficient = false;
  double condition_estimate = 1.0;
};

/// argmin ||A x - b||_2 by column-pivoted Householder QR.
///
/// The condition number is estimated from the pivoted R diagonal. Above 1e12
/// the problem is re-solved as ridge regression with lambda = 1e-8 (through the
/// augmented system [A; sqrt(lambda) I], which keeps QR's stability).
inline LeastSquaresResult solve_least_squares(const Matrix& a, const Vector& b) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  if (b.size() != m) throw DimensionMismatch("solve_least_squares: rhs length differs from row count");

  LeastSquaresResult out;
  if (n == 0) {
    out.x = Vector(0);
    return out;
  }

  // Fewer equations than unknowns is rank deficient by construction.
  out.condition_estimate = std::numeric_limits<double>::infinity();
  if (m >= n) {
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    const auto diag = qr.matrixQR().diagonal().cwiseAbs();
    const double largest = diag.maxCoeff();
    const double smallest = diag.minCoeff();
    if (smallest > 0.0) out.condition_estimate = largest / smallest;
    if (out.condition_estimate <= kConditionLimit) {
      out.x = qr.solve(b);
      return out;
    }
  }

  Matrix augmented(m + n, n);
  augmented.topRows(m) = a;
  augmented.bottomRows(n) = std::sqrt(kRidge) * Matrix::Identity(n, n);
  Vector rhs = Vector::Zero(m + n);
  rhs.head(m) = b;
  out.x = augmented.householderQr().solve(rhs);
  out.rank_deficient = true;
  return out;
}

}  // namespace numerics
}  // namespace cycletime
