#pragma once

#include "sdr/nets/models.hpp"
#include "sdr/numerics.hpp"

#include <span>
#include <vector>

namespace sdr::consistency {

/// Mixture weights over repository tasks; empty means uniform. Computation
/// is always in the log domain.
struct MixtureConfig {
    std::vector<double> priors;

    /// log pi_j for `count` tasks. InvalidArgument unless the priors are
    /// positive, `count` long and sum to 1 (within 1e-9).
    std::vector<double> log_priors(std::size_t count) const;
};

/// softmax_j(log pi_j + elbo_j) via log-sum-exp. NonFinite on a NaN ELBO.
Vector posterior_from_elbos(std::span<const double> elbos, std::span<const double> log_priors);

/// Posterior over repository tasks for one predictor, using each model's
/// deterministic ELBO as its log marginal likelihood.
Vector sample_posterior(const Vector& x, std::span<const nets::Vae* const> models, const MixtureConfig& config);

struct ConsistencyReport {
    std::vector<int> task_ids;
    /// Mean per-sample posterior, one entry per task id.
    Vector aggregate;
    /// argmax of aggregate; ties go to the lowest task id.
    int selected = -1;
    /// n x tasks posterior matrix, filled only on request.
    Matrix per_sample;
};

/// Aggregates a precomputed n x tasks ELBO matrix.
ConsistencyReport aggregate_from_elbos(const Matrix& elbos, std::span<const int> task_ids,
                                       const MixtureConfig& config, bool keep_per_sample = false);

/// Task-level consistency of `predictors` (one row per sample) with each model.
ConsistencyReport aggregate_consistency(const Matrix& predictors, std::span<const nets::Vae* const> models,
                                        std::span<const int> task_ids, const MixtureConfig& config,
                                        bool keep_per_sample = false);

/// Normalized entropy H(p) / ln(tasks) of the aggregate, in [0, 1]. Diagnostic
/// only. InvalidArgument with fewer than two tasks.
double uniformity_score(const ConsistencyReport& report);

}  // namespace sdr::consistency
