#pragma once

#include "sdr/numerics.hpp"
#include "sdr/rng.hpp"

#include <span>
#include <vector>

namespace sdr::similarity {

inline constexpr std::size_t kDefaultSampleCap = 512;

/// Rows are unit-norm encodings e_i = E_j(x_i) of task `target_task`'s
/// predictors under the encoder of repository entry `source_task`.
class EmbeddingMatrix {
public:
    /// L2-normalizes each row of `raw`. NonFinite on NaN/Inf or a zero row.
    static EmbeddingMatrix from_raw(const Matrix& raw, int source_task = -1, int target_task = -1);

    const Matrix& rows() const { return rows_; }
    Eigen::Index size() const { return rows_.rows(); }
    Eigen::Index dim() const { return rows_.cols(); }
    int source_task() const { return source_task_; }
    int target_task() const { return target_task_; }

private:
    Matrix rows_;
    int source_task_ = -1;
    int target_task_ = -1;
};

/// Infinite-width ReLU kernel on unit vectors:
/// u.v * (pi - arccos(u.v)) / (2 pi), with u.v clamped to [-1, 1].
double gram_entry(std::span<const double> u, std::span<const double> v);

/// Monte-Carlo estimate of E_{w ~ N(0, I)}[u.v * 1{w.u >= 0, w.v >= 0}].
/// Independent oracle for gram_entry; draws full-dimensional w.
double gram_entry_mc(std::span<const double> u, std::span<const double> v, std::size_t samples, Rng& rng);

/// Symmetric n x n Gram matrix of gram_entry values with diagonal exactly
/// 0.5. TooLarge when n exceeds `cap`; InvalidArgument when n < 2.
Matrix build_gram(const EmbeddingMatrix& emb, std::size_t cap = kDefaultSampleCap);

/// n x c one-hot label matrix.
Matrix one_hot(std::span<const int> labels, int classes);

enum class MetricVariant {
    /// sqrt(2 ||A^T A||_F^2 / n), the printed multi-class form.
    GramOfAssociation,
    /// sqrt(2 ||A||_F^2 / n), kept for sensitivity experiments.
    Association,
};

/// Complexity measure S for Gram matrix `h` and one-hot labels `y`, with
/// A = Y^T (H + lambda I)^{-1} Y. A single label column is the binary case
/// and evaluates sqrt(2 y^T H^{-1} y / n) regardless of `variant`.
double similarity_metric(const Matrix& h, const Matrix& y, double ridge_scale = kDefaultRidgeScale,
                         MetricVariant variant = MetricVariant::GramOfAssociation);

struct Candidate {
    int task_id = 0;
    double value = 0.0;
};

/// Task id with the smallest value, ties to the lowest id. EmptyCandidates
/// on an empty list, NonFinite on a NaN/Inf value.
int rank_candidates(std::span<const Candidate> candidates);

/// Class-balanced seeded subsample of at most `cap` indices (all indices when
/// n <= cap). Returned indices are sorted.
std::vector<std::size_t> stratified_subsample(std::span<const int> labels, int classes, std::size_t cap, Rng& rng);

}  // namespace sdr::similarity
