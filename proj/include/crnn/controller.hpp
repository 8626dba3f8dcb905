// Inverse controller (RNN1) trained through a frozen plant emulator (RNN2).
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "crnn/dataset.hpp"
#include "crnn/nn/grad_check.hpp"
#include "crnn/nn/network.hpp"
#include "crnn/nn/trainer.hpp"

namespace crnn {

struct Rnn1Config {
    std::size_t window = 1;  // x1
    nn::NetworkShape shape{{16, 16}, {16, 1}, nn::Activation::tanh};
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 3e-3;
    double lr_decay = 1.0;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;        // init and shuffling
    std::uint64_t split_seed = 0;  // position of the held-out block
};

/// RNN1 maps a target-RPM window to a PWM command; RNN1's output is read
/// in RNN2's raw input units so the two networks chain directly.
/// RNN2 is shared read-only.
struct CompositeModel {
    nn::Network rnn1;
    std::shared_ptr<const nn::Network> rnn2;

    std::size_t x1() const { return rnn1.window(); }
    std::size_t x2() const { return rnn2->window(); }
    /// Shortest target sequence that yields one emulated speed.
    std::size_t min_length() const { return x1() + x2() - 1; }
    /// First index of a streamed trace at which v is defined.
    std::size_t first_valid() const { return x1() + x2() - 2; }
};

/// Activations of a batched composite pass over target windows of length
/// min_length(), kept for composite_backward.
struct CompositeBatch {
    std::size_t batch = 0;
    std::vector<double> w;  // raw PWM, [batch][x2]
    std::vector<double> v;  // raw RPM, [batch]
    nn::ForwardCache rnn1_cache;
    nn::ForwardCache rnn2_cache;
};

/// `windows` holds `batch` raw target windows row-major. Throws if the
/// windows are not exactly x1 + x2 - 1 long.
CompositeBatch composite_forward_batch(const CompositeModel& m, std::span<const double> windows, std::size_t batch);

/// Chains dL/dv through RNN2's input gradients into RNN1 and returns the
/// gradient for RNN1's parameters only.
std::vector<double> composite_backward(const CompositeModel& m, const CompositeBatch& fwd,
                                       std::span<const double> dloss_dv);

struct CompositeTrace {
    std::vector<double> w;  // RNN1 command, zero for t < x1 - 1
    std::vector<double> v;  // RNN2 speed, zero for t < x1 + x2 - 2
    std::vector<bool> w_warmup;
    std::vector<bool> v_warmup;
};

/// Streams a whole target sequence through the cascade.
CompositeTrace composite_forward(const CompositeModel& m, std::span<const double> target);

/// Mean of (v - i)^2. Throws on empty or mismatched sequences.
double custom_loss(std::span<const double> v, std::span<const double> i);

/// Sliding windows of length x1 + x2 - 1 whose target is the window's own
/// last sample, stored raw.
SampleSet composite_windows(std::span<const std::vector<double>> targets, std::size_t length);

/// Raised when RNN2's checksum changes during RNN1 training.
class FrozenModelViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct Rnn1Result {
    nn::Network model;
    nn::TrainHistory history;
    std::string rnn2_checksum;
};

/// Freshly initialized RNN1 with the normalization train_rnn1 would fit.
nn::Network init_rnn1(const SampleSet& train_windows, const nn::Network& rnn2, const Rnn1Config& cfg);

/// Trains RNN1 alone on the custom loss (in RPM normalized by the target
/// scale), gradients flowing through the frozen RNN2.
Rnn1Result train_rnn1(std::span<const std::vector<double>> targets, std::shared_ptr<const nn::Network> rnn2,
                      const Rnn1Config& cfg);

/// Composite loss on normalized speed for one raw target window.
double composite_sample_loss(const CompositeModel& m, std::span<const double> window);

/// Analytic RNN1 gradients of composite_sample_loss against central
/// differences; one entry per RNN1 tensor.
nn::GradCheckReport composite_grad_check(const CompositeModel& m, std::span<const double> window, double eps = 1e-5);

}  // namespace crnn
