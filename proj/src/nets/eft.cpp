#include "sdr/nets/eft.hpp"

#include "sdr/error.hpp"

namespace sdr::nets {

namespace {

void check_groups(int channels, const EftConfig& config) {
    require(config.spatial_group > 0 && config.pointwise_group > 0, ErrorCode::ShapeMismatch,
            "EFT group sizes must be positive");
    require(channels % config.spatial_group == 0, ErrorCode::ShapeMismatch,
            "EFT: K=" + std::to_string(channels) + " not divisible by a=" +
                std::to_string(config.spatial_group));
    require(!config.use_pointwise || channels % config.pointwise_group == 0, ErrorCode::ShapeMismatch,
            "EFT: K=" + std::to_string(channels) + " not divisible by b=" +
                std::to_string(config.pointwise_group));
}

}  // namespace

EftLayer::EftLayer(const std::string& name, int channels, const EftConfig& config)
    : channels_(channels), config_(config) {
    check_groups(channels, config);
    const auto k = static_cast<std::size_t>(channels);
    const auto a = static_cast<std::size_t>(config.spatial_group);
    const auto b = static_cast<std::size_t>(config.pointwise_group);
    spatial = Parameter(name + ".spatial", {k / a, 3, 3, a, a});
    pointwise = config.use_pointwise ? Parameter(name + ".pointwise", {k / b, b, b})
                                     : Parameter(name + ".pointwise", {0});
}

void EftLayer::init_near_identity(Rng& rng) {
    const int a = config_.spatial_group;
    for (Eigen::Index i = 0; i < spatial.value.size(); ++i) spatial.value[i] = 0.01 * rng.normal();
    for (int g = 0; g < channels_ / a; ++g) {
        auto kernels = spatial_group(g);
        for (int j = 0; j < a; ++j) kernels(4 * a + j, j) += 1.0;  // centre tap, own channel
    }
    if (config_.use_pointwise) {
        const double scale = 0.1 / std::sqrt(static_cast<double>(config_.pointwise_group));
        for (Eigen::Index i = 0; i < pointwise.value.size(); ++i) pointwise.value[i] = scale * rng.normal();
    }
}

Eigen::Map<Matrix> EftLayer::spatial_group(int group) {
    const int a = config_.spatial_group;
    return Eigen::Map<Matrix>(spatial.value.data() + static_cast<Eigen::Index>(group) * 9 * a * a, 9 * a, a);
}

Eigen::Map<const Matrix> EftLayer::spatial_group(int group) const {
    const int a = config_.spatial_group;
    return Eigen::Map<const Matrix>(spatial.value.data() + static_cast<Eigen::Index>(group) * 9 * a * a, 9 * a,
                                    a);
}

Eigen::Map<Matrix> EftLayer::pointwise_group(int group) {
    const int b = config_.pointwise_group;
    return Eigen::Map<Matrix>(pointwise.value.data() + static_cast<Eigen::Index>(group) * b * b, b, b);
}

Eigen::Map<const Matrix> EftLayer::pointwise_group(int group) const {
    const int b = config_.pointwise_group;
    return Eigen::Map<const Matrix>(pointwise.value.data() + static_cast<Eigen::Index>(group) * b * b, b, b);
}

FeatureMap EftLayer::forward(const FeatureMap& f) const {
    require(f.channels() == channels_, ErrorCode::ShapeMismatch, "EFT: feature map channel mismatch");
    const int a = config_.spatial_group;
    const int b = config_.pointwise_group;
    FeatureMap out{Matrix(f.data.rows(), channels_), f.batch, f.height, f.width};
    for (int g = 0; g < channels_ / a; ++g) {
        out.data.middleCols(g * a, a).noalias() = im2col3x3(f, g * a, a) * spatial_group(g);
    }
    if (config_.use_pointwise) {
        for (int g = 0; g < channels_ / b; ++g) {
            out.data.middleCols(g * b, b).noalias() += f.data.middleCols(g * b, b) * pointwise_group(g);
        }
    }
    return out;
}

FeatureMap EftLayer::backward(const FeatureMap& f, const Matrix& dy, bool need_dx) {
    const int a = config_.spatial_group;
    const int b = config_.pointwise_group;
    FeatureMap dx{Matrix(), f.batch, f.height, f.width};
    if (need_dx) dx.data = Matrix::Zero(f.data.rows(), channels_);
    for (int g = 0; g < channels_ / a; ++g) {
        const Matrix cols = im2col3x3(f, g * a, a);
        const Matrix dy_g = dy.middleCols(g * a, a);
        Eigen::Map<Matrix> grad(spatial.grad.data() + static_cast<Eigen::Index>(g) * 9 * a * a, 9 * a, a);
        grad.noalias() += cols.transpose() * dy_g;
        if (need_dx) col2im3x3_add(dy_g * spatial_group(g).transpose(), dx, g * a, a);
    }
    if (config_.use_pointwise) {
        for (int g = 0; g < channels_ / b; ++g) {
            Eigen::Map<Matrix> grad(pointwise.grad.data() + static_cast<Eigen::Index>(g) * b * b, b, b);
            grad.noalias() += f.data.middleCols(g * b, b).transpose() * dy.middleCols(g * b, b);
            if (need_dx) dx.data.middleCols(g * b, b).noalias() += dy.middleCols(g * b, b) * pointwise_group(g).transpose();
        }
    }
    return dx;
}

FeatureMap eft_transform(const FeatureMap& f, const EftLayer& layer) { return layer.forward(f); }

ParameterRefs EftAdapter::parameters() {
    ParameterRefs out;
    for (auto& layer : layers) {
        out.push_back(&layer.spatial);
        if (layer.config().use_pointwise) out.push_back(&layer.pointwise);
    }
    return out;
}

std::vector<const Parameter*> EftAdapter::parameters() const {
    std::vector<const Parameter*> out;
    for (const auto& layer : layers) {
        out.push_back(&layer.spatial);
        if (layer.config().use_pointwise) out.push_back(&layer.pointwise);
    }
    return out;
}

std::size_t EftAdapter::parameter_count() const { return count_parameters(parameters()); }

std::size_t eft_parameter_count(std::span<const int> channels, const EftConfig& config) {
    std::size_t total = 0;
    for (const int k : channels) {
        check_groups(k, config);
        total += static_cast<std::size_t>(k) * 9 * static_cast<std::size_t>(config.spatial_group);
        if (config.use_pointwise) total += static_cast<std::size_t>(k) * static_cast<std::size_t>(config.pointwise_group);
    }
    return total;
}

}  // namespace sdr::nets
