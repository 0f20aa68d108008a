#include "sdr/nets/layers.hpp"

#include "sdr/error.hpp"

#include <cmath>
#include <numeric>

namespace sdr::nets {

Parameter::Parameter(std::string name_, std::vector<std::size_t> shape_)
    : name(std::move(name_)), shape(std::move(shape_)) {
    const std::size_t n =
        std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    value = Vector::Zero(static_cast<Eigen::Index>(n));
    grad = Vector::Zero(static_cast<Eigen::Index>(n));
}

std::size_t count_parameters(const std::vector<const Parameter*>& params) {
    std::size_t total = 0;
    for (const auto* p : params) total += p->size();
    return total;
}

void round_to_storage(const ParameterRefs& params) {
    for (auto* p : params) {
        for (Eigen::Index i = 0; i < p->value.size(); ++i) {
            p->value[i] = static_cast<double>(static_cast<float>(p->value[i]));
        }
    }
}

Eigen::Map<const Matrix> as_matrix(const Parameter& p, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const Matrix>(p.value.data(), rows, cols);
}

Eigen::Map<Matrix> as_matrix(Parameter& p, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<Matrix>(p.value.data(), rows, cols);
}

namespace {

Eigen::Map<Matrix> grad_matrix(Parameter& p, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<Matrix>(p.grad.data(), rows, cols);
}

}  // namespace

Matrix im2col3x3(const FeatureMap& in, int first, int count) {
    const int h = in.height;
    const int w = in.width;
    Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(in.batch) * h * w, 9 * count);
    for (int b = 0; b < in.batch; ++b) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const Eigen::Index row = (static_cast<Eigen::Index>(b) * h + y) * w + x;
                for (int ky = 0; ky < 3; ++ky) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int sx = x + kx - 1;
                        if (sx < 0 || sx >= w) continue;
                        const Eigen::Index src = (static_cast<Eigen::Index>(b) * h + sy) * w + sx;
                        cols.row(row).segment((ky * 3 + kx) * count, count) =
                            in.data.row(src).segment(first, count);
                    }
                }
            }
        }
    }
    return cols;
}

void col2im3x3_add(const Matrix& cols, FeatureMap& grad, int first, int count) {
    const int h = grad.height;
    const int w = grad.width;
    for (int b = 0; b < grad.batch; ++b) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const Eigen::Index row = (static_cast<Eigen::Index>(b) * h + y) * w + x;
                for (int ky = 0; ky < 3; ++ky) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int sx = x + kx - 1;
                        if (sx < 0 || sx >= w) continue;
                        const Eigen::Index dst = (static_cast<Eigen::Index>(b) * h + sy) * w + sx;
                        grad.data.row(dst).segment(first, count) +=
                            cols.row(row).segment((ky * 3 + kx) * count, count);
                    }
                }
            }
        }
    }
}

Dense::Dense(const std::string& name, int in, int out)
    : weight(name + ".weight", {static_cast<std::size_t>(in), static_cast<std::size_t>(out)}),
      bias(name + ".bias", {static_cast<std::size_t>(out)}),
      in_(in),
      out_(out) {}

void Dense::init_he(Rng& rng, double gain) {
    const double scale = std::sqrt(gain / static_cast<double>(in_));
    for (Eigen::Index i = 0; i < weight.value.size(); ++i) weight.value[i] = scale * rng.normal();
    bias.value.setZero();
}

Matrix Dense::forward(const Matrix& x) const {
    require(x.cols() == in_, ErrorCode::ShapeMismatch, "Dense: input width mismatch for " + weight.name);
    Matrix y = x * as_matrix(weight, in_, out_);
    y.rowwise() += bias.value.transpose();
    return y;
}

Matrix Dense::backward(const Matrix& x, const Matrix& dy, bool accumulate, bool need_dx) {
    if (accumulate) {
        grad_matrix(weight, in_, out_).noalias() += x.transpose() * dy;
        bias.grad += dy.colwise().sum().transpose();
    }
    if (!need_dx) return {};
    return dy * as_matrix(weight, in_, out_).transpose();
}

Conv3x3::Conv3x3(const std::string& name, int in_channels, int out_channels)
    : weight(name + ".weight",
             {3, 3, static_cast<std::size_t>(in_channels), static_cast<std::size_t>(out_channels)}),
      bias(name + ".bias", {static_cast<std::size_t>(out_channels)}),
      in_(in_channels),
      out_(out_channels) {}

void Conv3x3::init_he(Rng& rng) {
    const double scale = std::sqrt(2.0 / (9.0 * in_));
    for (Eigen::Index i = 0; i < weight.value.size(); ++i) weight.value[i] = scale * rng.normal();
    bias.value.setZero();
}

FeatureMap Conv3x3::forward(const FeatureMap& x) const {
    require(x.channels() == in_, ErrorCode::ShapeMismatch, "Conv3x3: channel mismatch for " + weight.name);
    FeatureMap out{Matrix(), x.batch, x.height, x.width};
    out.data = im2col3x3(x, 0, in_) * as_matrix(weight, 9 * in_, out_);
    out.data.rowwise() += bias.value.transpose();
    return out;
}

FeatureMap Conv3x3::backward(const FeatureMap& x, const Matrix& dy, bool accumulate, bool need_dx) {
    FeatureMap dx{Matrix(), x.batch, x.height, x.width};
    if (!accumulate && !need_dx) return dx;
    const Matrix cols = im2col3x3(x, 0, in_);
    if (accumulate) {
        grad_matrix(weight, 9 * in_, out_).noalias() += cols.transpose() * dy;
        bias.grad += dy.colwise().sum().transpose();
    }
    if (need_dx) {
        dx.data = Matrix::Zero(x.data.rows(), in_);
        const Matrix dcols = dy * as_matrix(weight, 9 * in_, out_).transpose();
        col2im3x3_add(dcols, dx, 0, in_);
    }
    return dx;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
    return (x.array() > 0.0).select(dy, 0.0);
}

double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels, Matrix* dlogits) {
    require(static_cast<std::size_t>(logits.rows()) == labels.size(), ErrorCode::ShapeMismatch,
            "softmax_cross_entropy: label count mismatch");
    const Eigen::Index n = logits.rows();
    const Eigen::Index c = logits.cols();
    double loss = 0.0;
    if (dlogits) dlogits->resize(n, c);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int label = labels[static_cast<std::size_t>(i)];
        require(label >= 0 && label < c, ErrorCode::InvalidArgument, "softmax_cross_entropy: label out of range");
        const double peak = logits.row(i).maxCoeff();
        const Eigen::RowVectorXd shifted = logits.row(i).array() - peak;
        const double log_norm = std::log(shifted.array().exp().sum());
        loss += log_norm - shifted[label];
        if (dlogits) {
            dlogits->row(i) = (shifted.array() - log_norm).exp();
            (*dlogits)(i, label) -= 1.0;
        }
    }
    if (dlogits) *dlogits /= static_cast<double>(n);
    return loss / static_cast<double>(n);
}

std::vector<int> argmax_rows(const Matrix& m) {
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Eigen::Index best = 0;
        m.row(i).maxCoeff(&best);
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

}  // namespace sdr::nets
