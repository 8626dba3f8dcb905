// Plant emulator: learns PWM window -> next RPM from logged traces.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crnn/dataset.hpp"
#include "crnn/nn/network.hpp"
#include "crnn/nn/trainer.hpp"

namespace crnn {

struct Rnn2Config {
    std::size_t window = 3;
    nn::NetworkShape shape{{8, 8}, {1}, nn::Activation::tanh};
    std::size_t epochs = 40;
    std::size_t batch_size = 32;
    double learning_rate = 3e-3;
    double lr_decay = 1.0;
    std::uint64_t seed = 0;
};

struct Rnn2Result {
    nn::Network model;
    nn::TrainHistory history;
};

/// Fits normalization on `train` only, stores it in the model and trains.
/// Both sets must be raw pwm->rpm windows of length cfg.window.
Rnn2Result train_rnn2(const SampleSet& train, const SampleSet& test, const Rnn2Config& cfg);

/// Freshly initialized network with the normalization `train` would yield,
/// i.e. what train_rnn2 returns for zero epochs.
nn::Network init_rnn2(const SampleSet& train, const Rnn2Config& cfg);

/// Streamed prediction in raw units. Index k >= x-1 holds the model output
/// for the window ending at k; the first x-1 entries are zero and flagged.
struct StreamPrediction {
    std::vector<double> values;
    std::vector<bool> warmup;
};

StreamPrediction predict_trace(const nn::Network& model, std::span<const double> input);

/// Shift s in [0, L/4] maximizing the Pearson correlation between
/// actual[t] and pred[t + s]; ties go to the smaller shift.
int measure_lag(std::span<const double> pred, std::span<const double> actual);

struct FidelityMetrics {
    double nmse = 0.0;  // mse(prediction, truth) / var(truth)
    double max_abs_err = 0.0;
};

/// Evaluates a model on raw (unnormalized) pwm->rpm windows.
FidelityMetrics evaluate_rnn2(const nn::Network& model, const SampleSet& test);

/// mse / variance of the reference; throws if the reference is constant.
double nmse(std::span<const double> pred, std::span<const double> reference);
double variance(std::span<const double> v);

}  // namespace crnn
