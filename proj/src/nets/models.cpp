#include "sdr/nets/models.hpp"

#include "sdr/error.hpp"

#include <cmath>
#include <numbers>

namespace sdr::nets {

namespace {

constexpr Eigen::Index kInferenceChunk = 256;

FeatureMap to_feature_map(const Matrix& x, const Geometry& g) {
    FeatureMap fm{Matrix(), static_cast<int>(x.rows()), g.height, g.width};
    // Row-major (B, H*W*C) and (B*H*W, C) share the same memory layout.
    fm.data = Eigen::Map<const Matrix>(x.data(), x.rows() * g.height * g.width, g.channels);
    return fm;
}

}  // namespace

Backbone::Backbone(const Geometry& input, const BackboneConfig& config) : input_(input), config_(config) {
    require(input.height > 0 && input.width > 0 && input.channels > 0, ErrorCode::ShapeMismatch,
            "Backbone: empty input geometry");
    require(!config.channels.empty(), ErrorCode::InvalidArgument, "Backbone: no conv layers");
    require(config.pooled_size > 0 && input.height % config.pooled_size == 0 &&
                input.width % config.pooled_size == 0 && input.height == input.width,
            ErrorCode::ShapeMismatch, "Backbone: input side must be a multiple of pooled_size");
    pool_factor_ = input.height / config.pooled_size;
    int in = input.channels;
    for (std::size_t l = 0; l < config.channels.size(); ++l) {
        convs.emplace_back("backbone.conv" + std::to_string(l), in, config.channels[l]);
        in = config.channels[l];
    }
    projection = Dense("backbone.projection", config.pooled_size * config.pooled_size * in, config.embedding_dim);
}

void Backbone::init(Rng& rng) {
    for (auto& conv : convs) conv.init_he(rng);
    projection.init_he(rng, 1.0);
}

FeatureMap Backbone::pool(const FeatureMap& in) const {
    if (pool_factor_ == 1) return in;
    const int f = pool_factor_;
    const int ph = in.height / f;
    const int pw = in.width / f;
    FeatureMap out{Matrix::Zero(static_cast<Eigen::Index>(in.batch) * ph * pw, in.channels()), in.batch, ph, pw};
    const double inv = 1.0 / (f * f);
    for (int b = 0; b < in.batch; ++b)
        for (int y = 0; y < in.height; ++y)
            for (int x = 0; x < in.width; ++x) {
                const Eigen::Index src = (static_cast<Eigen::Index>(b) * in.height + y) * in.width + x;
                const Eigen::Index dst = (static_cast<Eigen::Index>(b) * ph + y / f) * pw + x / f;
                out.data.row(dst) += inv * in.data.row(src);
            }
    return out;
}

FeatureMap Backbone::unpool(const Matrix& d_pooled, const FeatureMap& like) const {
    if (pool_factor_ == 1) return FeatureMap{d_pooled, like.batch, like.height, like.width};
    const int f = pool_factor_;
    const int ph = like.height / f;
    const int pw = like.width / f;
    FeatureMap out{Matrix(like.data.rows(), like.channels()), like.batch, like.height, like.width};
    const double inv = 1.0 / (f * f);
    for (int b = 0; b < like.batch; ++b)
        for (int y = 0; y < like.height; ++y)
            for (int x = 0; x < like.width; ++x) {
                const Eigen::Index dst = (static_cast<Eigen::Index>(b) * like.height + y) * like.width + x;
                const Eigen::Index src = (static_cast<Eigen::Index>(b) * ph + y / f) * pw + x / f;
                out.data.row(dst) = inv * d_pooled.row(src);
            }
    return out;
}

Matrix Backbone::forward(const Matrix& x, const EftAdapter* adapter, Tape* tape) const {
    require(x.cols() == input_.flat_size(), ErrorCode::ShapeMismatch, "Backbone: predictor dimension mismatch");
    require(!adapter || adapter->layers.size() == convs.size(), ErrorCode::ShapeMismatch,
            "Backbone: adapter layer count mismatch");
    if (tape) *tape = Tape{};
    FeatureMap act = to_feature_map(x, input_);
    for (std::size_t l = 0; l < convs.size(); ++l) {
        FeatureMap z = convs[l].forward(act);
        FeatureMap w = adapter ? adapter->layers[l].forward(z) : z;
        if (tape) {
            tape->conv_in.push_back(std::move(act));
            tape->pre_relu.push_back(w.data);
            tape->conv_out.push_back(std::move(z));
        }
        act = FeatureMap{relu(w.data), w.batch, w.height, w.width};
    }
    FeatureMap pooled = pool(act);
    const Eigen::Index batch = x.rows();
    Matrix flat = Eigen::Map<const Matrix>(pooled.data.data(), batch, pooled.data.size() / std::max<Eigen::Index>(batch, 1));
    Matrix e = projection.forward(flat);
    if (tape) tape->flat = std::move(flat);
    return e;
}

Matrix Backbone::embed(const Matrix& x, const EftAdapter* adapter) const {
    Matrix out(x.rows(), config_.embedding_dim);
    for (Eigen::Index start = 0; start < x.rows(); start += kInferenceChunk) {
        const Eigen::Index len = std::min(kInferenceChunk, x.rows() - start);
        out.middleRows(start, len) = forward(x.middleRows(start, len), adapter, nullptr);
    }
    return out;
}

void Backbone::backward(const Tape& tape, const Matrix& d_embedding, EftAdapter* adapter, bool train_backbone) {
    const Matrix d_flat = projection.backward(tape.flat, d_embedding, train_backbone, true);
    const FeatureMap& last = tape.conv_out.back();
    const Eigen::Index pooled_rows = d_flat.rows() * config_.pooled_size * config_.pooled_size;
    Matrix d_pooled = Eigen::Map<const Matrix>(d_flat.data(), pooled_rows, last.channels());
    FeatureMap d_act = unpool(d_pooled, last);
    for (std::size_t l = convs.size(); l-- > 0;) {
        Matrix d_w = relu_backward(tape.pre_relu[l], d_act.data);
        const bool need_below = l > 0;
        Matrix d_z;
        if (adapter) {
            FeatureMap dz = adapter->layers[l].backward(tape.conv_out[l], d_w, train_backbone || need_below);
            d_z = std::move(dz.data);
        } else {
            d_z = std::move(d_w);
        }
        if (!train_backbone && !need_below) break;
        d_act = convs[l].backward(tape.conv_in[l], d_z, train_backbone, need_below);
    }
}

EftAdapter Backbone::make_adapter(const EftConfig& config, Rng& rng) const {
    EftAdapter adapter;
    for (std::size_t l = 0; l < convs.size(); ++l) {
        adapter.layers.emplace_back("adapter.layer" + std::to_string(l), convs[l].out_channels(), config);
        adapter.layers.back().init_near_identity(rng);
    }
    return adapter;
}

ParameterRefs Backbone::parameters() {
    ParameterRefs out;
    for (auto& conv : convs) {
        out.push_back(&conv.weight);
        out.push_back(&conv.bias);
    }
    out.push_back(&projection.weight);
    out.push_back(&projection.bias);
    return out;
}

std::vector<const Parameter*> Backbone::parameters() const {
    std::vector<const Parameter*> out;
    for (const auto& conv : convs) {
        out.push_back(&conv.weight);
        out.push_back(&conv.bias);
    }
    out.push_back(&projection.weight);
    out.push_back(&projection.bias);
    return out;
}

Head::Head(int embedding_dim, int classes, const HeadConfig& config)
    : hidden("head.hidden", embedding_dim, config.hidden), output("head.output", config.hidden, classes) {
    require(classes >= 1, ErrorCode::InvalidArgument, "Head: class count must be >= 1");
}

void Head::init(Rng& rng) {
    hidden.init_he(rng);
    output.init_he(rng, 1.0);
}

Matrix Head::forward(const Matrix& embedding, Tape* tape) const {
    Matrix pre = hidden.forward(embedding);
    Matrix h = relu(pre);
    Matrix logits = output.forward(h);
    if (tape) *tape = Tape{embedding, std::move(pre), std::move(h)};
    return logits;
}

Matrix Head::backward(const Tape& tape, const Matrix& dlogits, bool need_dx) {
    const Matrix dh = output.backward(tape.hidden, dlogits, true, true);
    return hidden.backward(tape.input, relu_backward(tape.pre, dh), true, need_dx);
}

ParameterRefs Head::parameters() { return {&hidden.weight, &hidden.bias, &output.weight, &output.bias}; }

std::vector<const Parameter*> Head::parameters() const {
    return {&hidden.weight, &hidden.bias, &output.weight, &output.bias};
}

double kl_to_standard_normal(const Eigen::Ref<const Eigen::RowVectorXd>& mu,
                             const Eigen::Ref<const Eigen::RowVectorXd>& logvar) {
    return 0.5 * (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array()).sum();
}

double gaussian_log_likelihood(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                               const Eigen::Ref<const Eigen::RowVectorXd>& mean, double variance) {
    const double d = static_cast<double>(x.size());
    return -0.5 * (x - mean).squaredNorm() / variance - 0.5 * d * std::log(2.0 * std::numbers::pi * variance);
}

Vae::Vae(int input_dim, const VaeConfig& config)
    : encoder("vae.encoder", input_dim, config.hidden),
      mu_head("vae.mu", config.hidden, config.latent),
      logvar_head("vae.logvar", config.hidden, config.latent),
      decoder("vae.decoder", config.latent, config.hidden),
      reconstruction("vae.reconstruction", config.hidden, input_dim),
      config_(config) {
    require(config.observation_variance > 0.0, ErrorCode::InvalidArgument, "Vae: observation variance must be > 0");
}

void Vae::init(Rng& rng) {
    encoder.init_he(rng, 1.0);
    mu_head.init_he(rng, 1.0);
    logvar_head.init_he(rng, 1.0);
    logvar_head.weight.value *= 0.1;
    decoder.init_he(rng, 1.0);
    reconstruction.init_he(rng, 1.0);
}

Vae::Posterior Vae::encode(const Matrix& x) const {
    const Matrix h = encoder.forward(x).array().tanh().matrix();
    return {mu_head.forward(h), logvar_head.forward(h)};
}

Matrix Vae::decode(const Matrix& z) const {
    return reconstruction.forward(decoder.forward(z).array().tanh().matrix());
}

Vector Vae::elbo(const Matrix& x) const {
    require(x.cols() == input_dim(), ErrorCode::ShapeMismatch, "Vae::elbo: input dimension mismatch");
    const Posterior q = encode(x);
    const Matrix mean = decode(q.mu);
    Vector out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out[i] = gaussian_log_likelihood(x.row(i), mean.row(i), config_.observation_variance) -
                 kl_to_standard_normal(q.mu.row(i), q.logvar.row(i));
    }
    require_finite(out, "Vae::elbo");
    return out;
}

double Vae::elbo(const Vector& x) const {
    Matrix row = x.transpose();
    return elbo(row)[0];
}

namespace {

struct VaeForward {
    Matrix h_pre, h, mu, logvar, std, z, g_pre, g, mean;
};

VaeForward vae_forward(const Vae& vae, const Matrix& x, const Matrix& eps) {
    VaeForward f;
    f.h_pre = vae.encoder.forward(x);
    f.h = f.h_pre.array().tanh().matrix();
    f.mu = vae.mu_head.forward(f.h);
    f.logvar = vae.logvar_head.forward(f.h);
    f.std = (0.5 * f.logvar.array()).exp().matrix();
    f.z = f.mu + f.std.cwiseProduct(eps);
    f.g_pre = vae.decoder.forward(f.z);
    f.g = f.g_pre.array().tanh().matrix();
    f.mean = vae.reconstruction.forward(f.g);
    return f;
}

double vae_loss(const VaeForward& f, const Matrix& x, double variance) {
    const double n = static_cast<double>(x.rows());
    const double d = static_cast<double>(x.cols());
    const double recon = 0.5 * (x - f.mean).squaredNorm() / variance +
                         0.5 * n * d * std::log(2.0 * std::numbers::pi * variance);
    const double kl = 0.5 * (f.mu.array().square() + f.logvar.array().exp() - 1.0 - f.logvar.array()).sum();
    return (recon + kl) / n;
}

}  // namespace

double Vae::loss(const Matrix& x, const Matrix& eps) const {
    return vae_loss(vae_forward(*this, x, eps), x, config_.observation_variance);
}

double Vae::loss_and_grad(const Matrix& x, const Matrix& eps) {
    require(x.cols() == input_dim() && eps.rows() == x.rows() && eps.cols() == latent_dim(),
            ErrorCode::ShapeMismatch, "Vae::loss_and_grad: shape mismatch");
    const VaeForward f = vae_forward(*this, x, eps);
    const double n = static_cast<double>(x.rows());
    const double loss_value = vae_loss(f, x, config_.observation_variance);

    const Matrix d_mean = (f.mean - x) / (config_.observation_variance * n);
    const Matrix d_g = reconstruction.backward(f.g, d_mean, true, true);
    const Matrix d_gpre = d_g.cwiseProduct((1.0 - f.g.array().square()).matrix());
    const Matrix d_z = decoder.backward(f.z, d_gpre, true, true);
    const Matrix d_mu = d_z + f.mu / n;
    const Matrix d_logvar = (0.5 * d_z.array() * eps.array() * f.std.array() +
                             0.5 * (f.logvar.array().exp() - 1.0) / n).matrix();
    Matrix d_h = mu_head.backward(f.h, d_mu, true, true);
    d_h += logvar_head.backward(f.h, d_logvar, true, true);
    const Matrix d_hpre = d_h.cwiseProduct((1.0 - f.h.array().square()).matrix());
    encoder.backward(x, d_hpre, true, false);
    return loss_value;
}

ParameterRefs Vae::parameters() {
    return {&encoder.weight,     &encoder.bias,  &mu_head.weight,        &mu_head.bias,
            &logvar_head.weight, &logvar_head.bias, &decoder.weight,     &decoder.bias,
            &reconstruction.weight, &reconstruction.bias};
}

std::vector<const Parameter*> Vae::parameters() const {
    return {&encoder.weight,     &encoder.bias,  &mu_head.weight,        &mu_head.bias,
            &logvar_head.weight, &logvar_head.bias, &decoder.weight,     &decoder.bias,
            &reconstruction.weight, &reconstruction.bias};
}

}  // namespace sdr::nets
