#pragma once

#include "sdr/numerics.hpp"
#include "sdr/rng.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace sdr::nets {

/// A named trainable tensor with its gradient accumulator.
struct Parameter {
    std::string name;
    std::vector<std::size_t> shape;
    Vector value;
    Vector grad;

    Parameter() = default;
    Parameter(std::string name, std::vector<std::size_t> shape);

    std::size_t size() const { return static_cast<std::size_t>(value.size()); }
    void zero_grad() { grad.setZero(); }
};

using ParameterRefs = std::vector<Parameter*>;

std::size_t count_parameters(const std::vector<const Parameter*>& params);

/// Rounds every value to the nearest 32-bit float. Trained models are
/// finalized this way so that serialization round-trips bit-exactly.
void round_to_storage(const ParameterRefs& params);

/// Batch of feature maps. Rows are (sample, y, x) in row-major order and
/// columns are channels.
struct FeatureMap {
    Matrix data;
    int batch = 0;
    int height = 0;
    int width = 0;

    int channels() const { return static_cast<int>(data.cols()); }
};

/// Patch matrix for a 3x3 same-padded convolution over channels
/// [first, first + count). Column index is (ky * 3 + kx) * count + c.
Matrix im2col3x3(const FeatureMap& in, int first, int count);

/// Adjoint of im2col3x3: accumulates patch gradients into `grad`.
void col2im3x3_add(const Matrix& cols, FeatureMap& grad, int first, int count);

Eigen::Map<const Matrix> as_matrix(const Parameter& p, Eigen::Index rows, Eigen::Index cols);
Eigen::Map<Matrix> as_matrix(Parameter& p, Eigen::Index rows, Eigen::Index cols);

class Dense {
public:
    Dense() = default;
    Dense(const std::string& name, int in, int out);

    void init_he(Rng& rng, double gain = 2.0);

    int in() const { return in_; }
    int out() const { return out_; }

    Matrix forward(const Matrix& x) const;
    /// `x` is the input seen by forward. Returns d loss / d x when need_dx.
    Matrix backward(const Matrix& x, const Matrix& dy, bool accumulate, bool need_dx);

    Parameter weight;  // in x out
    Parameter bias;    // out

private:
    int in_ = 0;
    int out_ = 0;
};

class Conv3x3 {
public:
    Conv3x3() = default;
    Conv3x3(const std::string& name, int in_channels, int out_channels);

    void init_he(Rng& rng);

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }

    FeatureMap forward(const FeatureMap& x) const;
    FeatureMap backward(const FeatureMap& x, const Matrix& dy, bool accumulate, bool need_dx);

    Parameter weight;  // (9 * in) x out
    Parameter bias;    // out

private:
    int in_ = 0;
    int out_ = 0;
};

Matrix relu(const Matrix& x);
/// dy masked by x > 0.
Matrix relu_backward(const Matrix& x, const Matrix& dy);

/// Mean cross-entropy of softmax(logits) against labels; writes d loss / d
/// logits into `dlogits` when given.
double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels,
                             Matrix* dlogits);

std::vector<int> argmax_rows(const Matrix& m);

}  // namespace sdr::nets
