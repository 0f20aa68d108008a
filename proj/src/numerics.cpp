#include "sdr/numerics.hpp"

#include "sdr/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace sdr {

void require_finite(const Matrix& m, std::string_view what) {
    if (!m.allFinite()) fail(ErrorCode::NonFinite, std::string(what) + " has non-finite entries");
}

void require_finite(const Vector& v, std::string_view what) {
    if (!v.allFinite()) fail(ErrorCode::NonFinite, std::string(what) + " has non-finite entries");
}

Matrix cholesky_solve_regularized(const Matrix& h, const Matrix& b, double ridge_scale) {
    require_finite(h, "cholesky_solve_regularized: h");
    require_finite(b, "cholesky_solve_regularized: b");
    require(h.rows() == h.cols(), ErrorCode::ShapeMismatch, "cholesky_solve_regularized: h is not square");
    require(b.rows() == h.rows(), ErrorCode::ShapeMismatch,
            "cholesky_solve_regularized: b.rows != h.rows");
    require(std::isfinite(ridge_scale) && ridge_scale >= 0.0, ErrorCode::InvalidArgument,
            "cholesky_solve_regularized: ridge_scale must be >= 0");

    const Eigen::Index n = h.rows();
    if (n == 0) return Matrix(0, b.cols());

    const double scale = h.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (std::abs(h(i, j) - h(j, i)) > 1e-9 * scale) {
                fail(ErrorCode::InvalidArgument, "cholesky_solve_regularized: h is not symmetric");
            }
        }
    }

    const double lambda = ridge_scale * h.trace() / static_cast<double>(n);
    // Pivots at rounding level of the diagonal count as zero.
    const double tiny = static_cast<double>(n) * std::numeric_limits<double>::epsilon() *
                        (h.diagonal().cwiseAbs().maxCoeff() + lambda);

    // Lower factor, row-major so that the inner products below are contiguous.
    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double d = h(j, j) + lambda - l.row(j).head(j).squaredNorm();
        if (!(d > tiny) || !std::isfinite(d)) {
            fail(ErrorCode::NotPositiveDefinite,
                 "cholesky_solve_regularized: non-positive pivot at row " + std::to_string(j));
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            l(i, j) = (h(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
        }
    }

    // Forward substitution L y = b, then back substitution L^T x = y.
    Matrix x = b;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < i; ++k) x.row(i) -= l(i, k) * x.row(k);
        x.row(i) /= l(i, i);
    }
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        for (Eigen::Index k = i + 1; k < n; ++k) x.row(i) -= l(k, i) * x.row(k);
        x.row(i) /= l(i, i);
    }
    return x;
}

double frobenius_norm_sq(const Matrix& m) {
    require_finite(m, "frobenius_norm_sq");
    return m.squaredNorm();
}

}  // namespace sdr
