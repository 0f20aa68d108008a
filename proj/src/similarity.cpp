#include "sdr/similarity.hpp"

#include "sdr/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace sdr::similarity {

EmbeddingMatrix EmbeddingMatrix::from_raw(const Matrix& raw, int source_task, int target_task) {
    require_finite(raw, "EmbeddingMatrix");
    EmbeddingMatrix out;
    out.rows_ = raw;
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        const double norm = raw.row(i).norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            fail(ErrorCode::NonFinite, "EmbeddingMatrix: row " + std::to_string(i) + " cannot be normalized");
        }
        out.rows_.row(i) /= norm;
    }
    out.source_task_ = source_task;
    out.target_task_ = target_task;
    return out;
}

namespace {

double kernel_from_inner(double inner) {
    const double c = std::clamp(inner, -1.0, 1.0);
    return c * (std::numbers::pi - std::acos(c)) / (2.0 * std::numbers::pi);
}

void check_unit(std::span<const double> u, std::string_view what) {
    double sq = 0.0;
    for (const double x : u) {
        if (!std::isfinite(x)) fail(ErrorCode::NonFinite, std::string(what) + ": non-finite entry");
        sq += x * x;
    }
    require(std::abs(std::sqrt(sq) - 1.0) <= 1e-9, ErrorCode::InvalidArgument, std::string(what) + ": not unit norm");
}

}  // namespace

double gram_entry(std::span<const double> u, std::span<const double> v) {
    require(u.size() == v.size(), ErrorCode::ShapeMismatch, "gram_entry: dimension mismatch");
    check_unit(u, "gram_entry");
    check_unit(v, "gram_entry");
    double inner = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) inner += u[i] * v[i];
    return kernel_from_inner(inner);
}

double gram_entry_mc(std::span<const double> u, std::span<const double> v, std::size_t samples, Rng& rng) {
    require(u.size() == v.size(), ErrorCode::ShapeMismatch, "gram_entry_mc: dimension mismatch");
    require(samples >= 1, ErrorCode::InvalidArgument, "gram_entry_mc: samples must be >= 1");
    check_unit(u, "gram_entry_mc");
    check_unit(v, "gram_entry_mc");
    double inner = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) inner += u[i] * v[i];
    std::size_t both = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        double wu = 0.0;
        double wv = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double w = rng.normal();
            wu += w * u[i];
            wv += w * v[i];
        }
        both += (wu >= 0.0 && wv >= 0.0) ? 1 : 0;
    }
    return inner * static_cast<double>(both) / static_cast<double>(samples);
}

Matrix build_gram(const EmbeddingMatrix& emb, std::size_t cap) {
    const Eigen::Index n = emb.size();
    require(n >= 2, ErrorCode::InvalidArgument, "build_gram: need at least 2 rows");
    require(static_cast<std::size_t>(n) <= cap, ErrorCode::TooLarge,
            "build_gram: " + std::to_string(n) + " rows exceeds cap " + std::to_string(cap));
    const Matrix inner = emb.rows() * emb.rows().transpose();
    Matrix h(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        h(i, i) = 0.5;
        for (Eigen::Index k = i + 1; k < n; ++k) {
            const double value = kernel_from_inner(inner(i, k));
            h(i, k) = value;
            h(k, i) = value;
        }
    }
    require_finite(h, "build_gram");
    return h;
}

Matrix one_hot(std::span<const int> labels, int classes) {
    require(classes >= 1, ErrorCode::InvalidArgument, "one_hot: classes must be >= 1");
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] >= 0 && labels[i] < classes, ErrorCode::InvalidArgument, "one_hot: label out of range");
        y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
    }
    return y;
}

double similarity_metric(const Matrix& h, const Matrix& y, double ridge_scale, MetricVariant variant) {
    require(h.rows() == y.rows(), ErrorCode::ShapeMismatch, "similarity_metric: H and Y row counts differ");
    require(h.rows() >= 1, ErrorCode::InvalidArgument, "similarity_metric: empty input");
    const Matrix a = y.transpose() * cholesky_solve_regularized(h, y, ridge_scale);
    const double n = static_cast<double>(h.rows());
    if (y.cols() == 1) {
        // Single label column: the binary form sqrt(2 y^T H^-1 y / n).
        return std::sqrt(2.0 * std::max(a(0, 0), 0.0) / n);
    }
    const double norm_sq =
        variant == MetricVariant::GramOfAssociation ? frobenius_norm_sq(a.transpose() * a) : frobenius_norm_sq(a);
    return std::sqrt(2.0 * norm_sq / n);
}

int rank_candidates(std::span<const Candidate> candidates) {
    require(!candidates.empty(), ErrorCode::EmptyCandidates, "rank_candidates: no candidates");
    const Candidate* best = nullptr;
    for (const auto& c : candidates) {
        if (!std::isfinite(c.value)) fail(ErrorCode::NonFinite, "rank_candidates: non-finite S value");
        if (!best || c.value < best->value || (c.value == best->value && c.task_id < best->task_id)) best = &c;
    }
    return best->task_id;
}

std::vector<std::size_t> stratified_subsample(std::span<const int> labels, int classes, std::size_t cap, Rng& rng) {
    std::vector<std::size_t> all(labels.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (labels.size() <= cap) return all;

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] >= 0 && labels[i] < classes, ErrorCode::InvalidArgument,
                "stratified_subsample: label out of range");
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    for (auto& members : by_class) rng.shuffle(members);

    // Round-robin over classes keeps per-class counts within one of each other
    // (up to classes that run out).
    std::vector<std::size_t> picked;
    picked.reserve(cap);
    for (std::size_t round = 0; picked.size() < cap; ++round) {
        bool any = false;
        for (const auto& members : by_class) {
            if (round < members.size() && picked.size() < cap) {
                picked.push_back(members[round]);
                any = true;
            }
        }
        if (!any) break;
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace sdr::similarity
