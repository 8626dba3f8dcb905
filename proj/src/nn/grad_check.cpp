#include "crnn/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crnn::nn {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-5});
    return std::abs(analytic - numeric) / denom;
}

std::vector<double> numeric_gradient(std::span<double> values, const std::function<double()>& loss, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("numeric_gradient: eps must be > 0");
    std::vector<double> g(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + eps;
        const double up = loss();
        values[i] = saved - eps;
        const double down = loss();
        values[i] = saved;
        g[i] = (up - down) / (2.0 * eps);
    }
    return g;
}

GradCheckReport grad_check(const Network& net, std::span<const double> window, double target, double eps) {
    auto pred = forward(net, window);
    const double dl = 2.0 * (pred.value - target);
    const Gradients analytic = backward(net, pred.cache, std::span<const double>(&dl, 1));

    Network probe = net;
    std::vector<double> input(window.begin(), window.end());
    auto loss = [&] {
        const double p = forward(probe, input, 1).front();
        return (p - target) * (p - target);
    };
    const auto num_params = numeric_gradient(probe.params(), loss, eps);
    const auto num_inputs = numeric_gradient(input, loss, eps);

    GradCheckReport r;
    for (const TensorView& t : net.tensors()) {
        TensorError e{t.name, 0.0};
        for (std::size_t k = t.offset; k < t.offset + t.size(); ++k)
            e.max_rel_error = std::max(e.max_rel_error, relative_error(analytic.params[k], num_params[k]));
        r.max_rel_error = std::max(r.max_rel_error, e.max_rel_error);
        r.tensors.push_back(std::move(e));
    }
    TensorError in{"inputs", 0.0};
    for (std::size_t k = 0; k < input.size(); ++k)
        in.max_rel_error = std::max(in.max_rel_error, relative_error(analytic.inputs[k], num_inputs[k]));
    r.max_rel_error = std::max(r.max_rel_error, in.max_rel_error);
    r.tensors.push_back(std::move(in));
    return r;
}

}  // namespace crnn::nn
