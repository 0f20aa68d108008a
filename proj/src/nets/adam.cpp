#include "sdr/nets/adam.hpp"

#include "sdr/error.hpp"

#include <cmath>

namespace sdr::nets {

void adam_update(AdamState& state, Vector& params, const Vector& grads) {
    require(params.size() == grads.size(), ErrorCode::ShapeMismatch, "adam_update: params/grads size mismatch");
    if (state.step == 0 && state.first_moment.size() == 0) {
        state.first_moment = Vector::Zero(params.size());
        state.second_moment = Vector::Zero(params.size());
    }
    require(state.first_moment.size() == params.size() && state.second_moment.size() == params.size(),
            ErrorCode::ShapeMismatch, "adam_update: moment shape mismatch");

    const auto& c = state.config;
    ++state.step;
    state.first_moment = c.beta1 * state.first_moment + (1.0 - c.beta1) * grads;
    state.second_moment = c.beta2 * state.second_moment + (1.0 - c.beta2) * grads.cwiseAbs2();
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    params.array() -= c.learning_rate * (state.first_moment.array() / correction1) /
                      ((state.second_moment.array() / correction2).sqrt() + c.epsilon);
}

Adam::Adam(ParameterRefs params, const AdamConfig& config)
    : params_(std::move(params)), learning_rate_(config.learning_rate) {
    states_.reserve(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) states_.push_back(AdamState{config, 0, {}, {}});
}

void Adam::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        states_[i].config.learning_rate = learning_rate_;
        adam_update(states_[i], params_[i]->value, params_[i]->grad);
    }
}

void Adam::set_learning_rate(double lr) { learning_rate_ = lr; }

}  // namespace sdr::nets
