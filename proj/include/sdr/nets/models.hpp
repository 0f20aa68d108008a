#pragma once

#include "sdr/data.hpp"
#include "sdr/nets/eft.hpp"
#include "sdr/nets/layers.hpp"

namespace sdr::nets {

struct BackboneConfig {
    std::vector<int> channels{16, 32, 32};
    /// Feature maps are average-pooled down to pooled_size x pooled_size
    /// before flattening; the input side must be a multiple of it.
    int pooled_size = 8;
    int embedding_dim = 64;
};

/// Frozen feature extractor: 3x3 conv + ReLU stages, average pooling,
/// flatten, and a linear projection to the embedding. An optional EftAdapter
/// transforms each conv stage's feature maps before the ReLU.
class Backbone {
public:
    Backbone() = default;
    Backbone(const Geometry& input, const BackboneConfig& config);

    void init(Rng& rng);

    const Geometry& input_geometry() const { return input_; }
    const BackboneConfig& config() const { return config_; }
    int embedding_dim() const { return config_.embedding_dim; }

    struct Tape {
        std::vector<FeatureMap> conv_in;
        std::vector<FeatureMap> conv_out;
        std::vector<Matrix> pre_relu;
        Matrix flat;
    };

    /// Embeddings for the rows of `x` (flat HWC predictors).
    Matrix forward(const Matrix& x, const EftAdapter* adapter, Tape* tape) const;
    /// Inference in chunks; safe to call concurrently.
    Matrix embed(const Matrix& x, const EftAdapter* adapter) const;

    /// Back-propagates d loss / d embedding. Adapter gradients accumulate when
    /// `adapter` is given; backbone gradients only when train_backbone.
    void backward(const Tape& tape, const Matrix& d_embedding, EftAdapter* adapter, bool train_backbone);

    EftAdapter make_adapter(const EftConfig& config, Rng& rng) const;

    ParameterRefs parameters();
    std::vector<const Parameter*> parameters() const;
    std::size_t parameter_count() const { return count_parameters(parameters()); }

    std::vector<Conv3x3> convs;
    Dense projection;

private:
    FeatureMap pool(const FeatureMap& in) const;
    FeatureMap unpool(const Matrix& d_pooled, const FeatureMap& like) const;

    Geometry input_;
    BackboneConfig config_;
    int pool_factor_ = 1;
};

struct HeadConfig {
    int hidden = 32;
};

/// Classification head: dense -> ReLU -> dense to class logits.
class Head {
public:
    Head() = default;
    Head(int embedding_dim, int classes, const HeadConfig& config);

    void init(Rng& rng);

    int classes() const { return output.out(); }

    struct Tape {
        Matrix input;
        Matrix pre;
        Matrix hidden;
    };

    Matrix forward(const Matrix& embedding, Tape* tape) const;
    Matrix backward(const Tape& tape, const Matrix& dlogits, bool need_dx);

    ParameterRefs parameters();
    std::vector<const Parameter*> parameters() const;
    std::size_t parameter_count() const { return count_parameters(parameters()); }

    Dense hidden;
    Dense output;
};

struct VaeConfig {
    int hidden = 512;
    int latent = 16;
    double observation_variance = 1.0;
};

/// Gaussian VAE on flat predictors: tanh MLP encoder to (mu, logvar), tanh
/// MLP decoder to the reconstruction mean, fixed observation variance.
class Vae {
public:
    Vae() = default;
    Vae(int input_dim, const VaeConfig& config);

    void init(Rng& rng);

    int input_dim() const { return encoder.in(); }
    int latent_dim() const { return config_.latent; }
    const VaeConfig& config() const { return config_; }

    struct Posterior {
        Matrix mu;
        Matrix logvar;
    };

    Posterior encode(const Matrix& x) const;
    Matrix decode(const Matrix& z) const;

    /// Per-row ELBO (nats) with the deterministic z = mu pass.
    Vector elbo(const Matrix& x) const;
    double elbo(const Vector& x) const;

    /// Mean negative ELBO of a batch using z = mu + exp(logvar / 2) * eps;
    /// gradients accumulate into the parameters.
    double loss_and_grad(const Matrix& x, const Matrix& eps);
    /// Same loss without gradients.
    double loss(const Matrix& x, const Matrix& eps) const;

    ParameterRefs parameters();
    std::vector<const Parameter*> parameters() const;
    std::size_t parameter_count() const { return count_parameters(parameters()); }

    Dense encoder;
    Dense mu_head;
    Dense logvar_head;
    Dense decoder;
    Dense reconstruction;

private:
    VaeConfig config_;
};

/// KL(N(mu, diag exp(logvar)) || N(0, I)) in closed form.
double kl_to_standard_normal(const Eigen::Ref<const Eigen::RowVectorXd>& mu,
                             const Eigen::Ref<const Eigen::RowVectorXd>& logvar);

/// log N(x; mean, variance * I).
double gaussian_log_likelihood(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                               const Eigen::Ref<const Eigen::RowVectorXd>& mean, double variance);

}  // namespace sdr::nets
