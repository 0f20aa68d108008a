#pragma once

#include "sdr/engine.hpp"
#include "sdr/nets/layers.hpp"
#include "sdr/rng.hpp"
#include "sdr/taskgen.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

namespace sdr::test {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

inline std::vector<double> random_unit(std::size_t dim, Rng& rng) {
    std::vector<double> v(dim);
    double n = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        n += x * x;
    }
    for (auto& x : v) x /= std::sqrt(n);
    return v;
}

/// Largest relative error between analytic gradients and central differences
/// over `coords` random coordinates of `p`. `loss` must be a pure function of
/// the current parameter values.
inline double max_gradient_error(nets::Parameter& p, const Vector& analytic, const std::function<double()>& loss,
                                 std::size_t coords, Rng& rng, double step = 1e-5) {
    double worst = 0.0;
    for (std::size_t k = 0; k < coords; ++k) {
        const auto i = static_cast<Eigen::Index>(rng.uniform_index(p.size()));
        const double saved = p.value[i];
        p.value[i] = saved + step;
        const double up = loss();
        p.value[i] = saved - step;
        const double down = loss();
        p.value[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max(std::abs(numeric) + std::abs(analytic[i]), 1e-6);
        worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
    return worst;
}

/// Small vector-mode sequence: 4x4 predictors, quick to train.
inline taskgen::SequenceSpec small_spec(int train = 200) {
    taskgen::SequenceSpec s;
    s.unique_sources = 4;
    s.replicas = 2;
    s.classes = 3;
    s.dim = 16;
    s.train_per_task = train;
    s.validation_per_task = 60;
    s.test_per_task = 60;
    return s;
}

inline EngineConfig small_engine() {
    EngineConfig c;
    c.arch.backbone.channels = {8, 16};
    c.arch.backbone.pooled_size = 4;
    c.arch.backbone.embedding_dim = 16;
    c.arch.eft.spatial_group = 4;
    c.arch.eft.pointwise_group = 8;
    c.arch.head.hidden = 8;
    c.arch.vae.hidden = 32;
    c.arch.vae.latent = 4;
    c.pretrain.epochs = 3;
    c.adapter.epochs = 3;
    c.adapter.decay_epoch = 2;
    c.head.epochs = 5;
    c.vae.epochs = 5;
    c.detector.sample_cap = 64;
    return c;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("sdr_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace sdr::test
