#pragma once

#include "sdr/nets/layers.hpp"

namespace sdr::nets {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment accumulators for one flat parameter vector.
struct AdamState {
    AdamConfig config;
    std::size_t step = 0;
    Vector first_moment;
    Vector second_moment;
};

/// One bias-corrected Adam update of `params` in place. Moments are sized on
/// first use; afterwards any size disagreement is a ShapeMismatch.
void adam_update(AdamState& state, Vector& params, const Vector& grads);

/// Adam over a fixed set of parameters, reading their accumulated gradients.
class Adam {
public:
    Adam(ParameterRefs params, const AdamConfig& config);

    void zero_grad();
    void step();
    void set_learning_rate(double lr);
    double learning_rate() const { return learning_rate_; }

private:
    ParameterRefs params_;
    std::vector<AdamState> states_;
    double learning_rate_;
};

}  // namespace sdr::nets
