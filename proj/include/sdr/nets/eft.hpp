#pragma once

#include "sdr/nets/layers.hpp"

#include <span>

namespace sdr::nets {

/// Group sizes of the efficient feature transform. `spatial_group` is a (the
/// channel-group size for the 3x3 kernels) and `pointwise_group` is b (for the
/// 1x1 kernels); `use_pointwise` is the gamma switch.
struct EftConfig {
    int spatial_group = 8;
    int pointwise_group = 16;
    bool use_pointwise = true;
};

/// Task-specific transform of one conv layer's K feature maps:
/// W = W^s + gamma * W^d. Channels are split into K/a groups; in group i each
/// of the a spatial kernels (3x3xa) convolves the whole group into one output
/// channel, and likewise K/b groups of b pointwise (1x1xb) kernels.
class EftLayer {
public:
    EftLayer() = default;
    EftLayer(const std::string& name, int channels, const EftConfig& config);

    /// Each spatial kernel starts as a centre delta on its own channel plus
    /// small noise, so the transform begins close to the identity.
    void init_near_identity(Rng& rng);

    int channels() const { return channels_; }
    const EftConfig& config() const { return config_; }

    FeatureMap forward(const FeatureMap& f) const;
    /// Accumulates parameter gradients; returns d loss / d f when need_dx.
    FeatureMap backward(const FeatureMap& f, const Matrix& dy, bool need_dx);

    /// Kernel j of spatial group i as a (9a x 1) column view: entry
    /// (ky * 3 + kx) * a + c.
    Eigen::Map<Matrix> spatial_group(int group);
    Eigen::Map<const Matrix> spatial_group(int group) const;
    Eigen::Map<Matrix> pointwise_group(int group);
    Eigen::Map<const Matrix> pointwise_group(int group) const;

    Parameter spatial;    // (K/a) x 3 x 3 x a x a
    Parameter pointwise;  // (K/b) x b x b, empty when gamma = 0

private:
    int channels_ = 0;
    EftConfig config_;
};

FeatureMap eft_transform(const FeatureMap& f, const EftLayer& layer);

/// One EftLayer per adapted backbone conv layer.
struct EftAdapter {
    std::vector<EftLayer> layers;

    ParameterRefs parameters();
    std::vector<const Parameter*> parameters() const;
    std::size_t parameter_count() const;
};

/// Adapter size for conv layers with the given output channel counts.
std::size_t eft_parameter_count(std::span<const int> channels, const EftConfig& config);

}  // namespace sdr::nets
