#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace crnn::nn {

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t t = 0;
    std::vector<double> m;  // first moment
    std::vector<double> v;  // second moment
};

AdamState make_adam(std::size_t n_params, double lr);

/// Bias-corrected Adam update in place. Moments are lazily sized on the
/// first call. Throws (leaving everything untouched) on shape mismatch or a
/// non-finite gradient.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

}  // namespace crnn::nn
