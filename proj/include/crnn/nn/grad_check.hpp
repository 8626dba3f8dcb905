// Central finite-difference verification of analytic gradients.
#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "crnn/nn/network.hpp"

namespace crnn::nn {

/// |a - n| / max(|a|, |n|, 1e-5). Below the floor this is an absolute test
/// at 1e-9, about ten times the central-difference round-off of an O(10)
/// loss at eps = 1e-5.
double relative_error(double analytic, double numeric);

struct TensorError {
    std::string name;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;       // over every parameter and input
    std::vector<TensorError> tensors;  // one entry per parameter tensor, plus "inputs"
};

/// Checks d/dθ and d/dwindow of the squared error (pred - target)^2 on one
/// window (normalized units).
GradCheckReport grad_check(const Network& net, std::span<const double> window, double target, double eps = 1e-5);

/// Generic helper: compares `analytic` against central differences of
/// `loss` with respect to `values` (perturbed in place and restored).
std::vector<double> numeric_gradient(std::span<double> values, const std::function<double()>& loss, double eps);

}  // namespace crnn::nn
