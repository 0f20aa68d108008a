#include "sdr/consistency.hpp"

#include "sdr/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdr::consistency {

std::vector<double> MixtureConfig::log_priors(std::size_t count) const {
    require(count >= 1, ErrorCode::InvalidArgument, "mixture: no tasks");
    if (priors.empty()) return std::vector<double>(count, -std::log(static_cast<double>(count)));
    require(priors.size() == count, ErrorCode::InvalidArgument, "mixture: prior count does not match task count");
    double sum = 0.0;
    std::vector<double> out;
    out.reserve(count);
    for (const double p : priors) {
        require(std::isfinite(p) && p > 0.0, ErrorCode::InvalidArgument, "mixture: priors must be positive");
        sum += p;
        out.push_back(std::log(p));
    }
    require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::InvalidArgument, "mixture: priors must sum to 1");
    return out;
}

Vector posterior_from_elbos(std::span<const double> elbos, std::span<const double> log_priors) {
    require(!elbos.empty() && elbos.size() == log_priors.size(), ErrorCode::ShapeMismatch,
            "posterior_from_elbos: size mismatch");
    double top = -std::numeric_limits<double>::infinity();
    for (const double e : elbos) {
        if (!std::isfinite(e)) fail(ErrorCode::NonFinite, "posterior_from_elbos: non-finite ELBO");
        top = std::max(top, e);
    }
    // ELBOs are centred before the priors are added, so a common offset
    // cancels exactly rather than leaking into the rounding.
    Vector logits(static_cast<Eigen::Index>(elbos.size()));
    for (std::size_t j = 0; j < elbos.size(); ++j) logits[static_cast<Eigen::Index>(j)] = (elbos[j] - top) + log_priors[j];
    const double peak = logits.maxCoeff();
    const double log_norm = peak + std::log((logits.array() - peak).exp().sum());
    return (logits.array() - log_norm).exp().matrix();
}

Vector sample_posterior(const Vector& x, std::span<const nets::Vae* const> models, const MixtureConfig& config) {
    require(!models.empty(), ErrorCode::InvalidArgument, "sample_posterior: no models");
    std::vector<double> elbos;
    elbos.reserve(models.size());
    for (const auto* model : models) elbos.push_back(model->elbo(x));
    const auto log_priors = config.log_priors(models.size());
    return posterior_from_elbos(elbos, log_priors);
}

ConsistencyReport aggregate_from_elbos(const Matrix& elbos, std::span<const int> task_ids,
                                       const MixtureConfig& config, bool keep_per_sample) {
    const auto tasks = static_cast<std::size_t>(elbos.cols());
    require(elbos.rows() >= 1, ErrorCode::InvalidArgument, "aggregate_consistency: no samples");
    require(tasks >= 1 && task_ids.size() == tasks, ErrorCode::ShapeMismatch,
            "aggregate_consistency: task id count mismatch");
    const auto log_priors = config.log_priors(tasks);

    ConsistencyReport report;
    report.task_ids.assign(task_ids.begin(), task_ids.end());
    report.aggregate = Vector::Zero(static_cast<Eigen::Index>(tasks));
    if (keep_per_sample) report.per_sample.resize(elbos.rows(), static_cast<Eigen::Index>(tasks));
    std::vector<double> row(tasks);
    for (Eigen::Index i = 0; i < elbos.rows(); ++i) {
        for (std::size_t j = 0; j < tasks; ++j) row[j] = elbos(i, static_cast<Eigen::Index>(j));
        const Vector post = posterior_from_elbos(row, log_priors);
        report.aggregate += post;
        if (keep_per_sample) report.per_sample.row(i) = post.transpose();
    }
    report.aggregate /= static_cast<double>(elbos.rows());

    std::size_t best = 0;
    for (std::size_t j = 1; j < tasks; ++j) {
        const double v = report.aggregate[static_cast<Eigen::Index>(j)];
        const double b = report.aggregate[static_cast<Eigen::Index>(best)];
        if (v > b || (v == b && task_ids[j] < task_ids[best])) best = j;
    }
    report.selected = task_ids[best];
    return report;
}

ConsistencyReport aggregate_consistency(const Matrix& predictors, std::span<const nets::Vae* const> models,
                                        std::span<const int> task_ids, const MixtureConfig& config,
                                        bool keep_per_sample) {
    require(!models.empty(), ErrorCode::InvalidArgument, "aggregate_consistency: no models");
    Matrix elbos(predictors.rows(), static_cast<Eigen::Index>(models.size()));
    for (std::size_t j = 0; j < models.size(); ++j) elbos.col(static_cast<Eigen::Index>(j)) = models[j]->elbo(predictors);
    return aggregate_from_elbos(elbos, task_ids, config, keep_per_sample);
}

double uniformity_score(const ConsistencyReport& report) {
    const Eigen::Index t = report.aggregate.size();
    require(t >= 2, ErrorCode::InvalidArgument, "uniformity_score: need at least two tasks");
    double entropy = 0.0;
    for (Eigen::Index j = 0; j < t; ++j) {
        const double p = report.aggregate[j];
        if (p > 0.0) entropy -= p * std::log(p);
    }
    return std::clamp(entropy / std::log(static_cast<double>(t)), 0.0, 1.0);
}

}  // namespace sdr::consistency
