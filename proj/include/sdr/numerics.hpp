#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace sdr {

/// Dense row-major matrix used throughout the engine. The similarity path is
/// always evaluated in 64-bit precision.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultRidgeScale = 1e-6;

/// Throws NonFinite if any entry of `m` is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);
void require_finite(const Vector& v, std::string_view what);

/// Solves (h + lambda I) x = b with lambda = ridge_scale * trace(h) / n via a
/// Cholesky factorization. `h` must be square and symmetric (1e-9 relative).
///
/// Throws NonFinite on NaN/Inf input, ShapeMismatch on incompatible shapes and
/// NotPositiveDefinite when the shifted matrix has a non-positive pivot.
Matrix cholesky_solve_regularized(const Matrix& h, const Matrix& b,
                                  double ridge_scale = kDefaultRidgeScale);

/// Sum of squared entries.
double frobenius_norm_sq(const Matrix& m);

}  // namespace sdr
