#include "crnn/nn/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace crnn::nn {

AdamState make_adam(std::size_t n_params, double lr) {
    AdamState s;
    s.lr = lr;
    s.m.assign(n_params, 0.0);
    s.v.assign(n_params, 0.0);
    return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: params/grads size mismatch");
    if (state.m.empty() && state.v.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw std::invalid_argument("adam_step: moment shape does not match parameters");
    for (std::size_t i = 0; i < grads.size(); ++i)
        if (!std::isfinite(grads[i]))
            throw std::domain_error("adam_step: non-finite gradient at parameter " + std::to_string(i));

    ++state.t;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

}  // namespace crnn::nn
