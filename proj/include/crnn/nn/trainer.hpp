// Mini-batch Adam training of a Network on normalized windows.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "crnn/dataset.hpp"
#include "crnn/nn/network.hpp"

namespace crnn::nn {

/// Raised when a loss or gradient turns non-finite; training stops there.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainOptions {
    std::size_t epochs = 0;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double lr_decay = 1.0;  // multiplied into the learning rate after each epoch
    std::uint64_t seed = 0;
    bool shuffle = true;
};

struct TrainHistory {
    std::vector<double> train_loss;  // running mean of batch MSE over the epoch
    std::vector<double> test_loss;   // MSE on the held-out set after the epoch
};

/// Predictions for every window of a (normalized) sample set.
std::vector<double> predict_all(const Network& net, const SampleSet& samples);
double evaluate_mse(const Network& net, const SampleSet& samples);

/// Minimizes the batch-mean MSE. Both sets must already be normalized.
TrainHistory train_regressor(Network& net, const SampleSet& train, const SampleSet& test, const TrainOptions& opts);

}  // namespace crnn::nn
