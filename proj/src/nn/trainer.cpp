#include "crnn/nn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "crnn/nn/adam.hpp"

namespace crnn::nn {

std::vector<double> predict_all(const Network& net, const SampleSet& samples) {
    if (samples.x != net.window()) throw std::invalid_argument("predict_all: window length mismatch");
    constexpr std::size_t kChunk = 1024;
    std::vector<double> out;
    out.reserve(samples.size());
    for (std::size_t first = 0; first < samples.size(); first += kChunk) {
        const std::size_t n = std::min(kChunk, samples.size() - first);
        const auto part = forward(net, std::span(samples.inputs).subspan(first * samples.x, n * samples.x), n);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

double evaluate_mse(const Network& net, const SampleSet& samples) {
    return mse(predict_all(net, samples), samples.targets);
}

TrainHistory train_regressor(Network& net, const SampleSet& train, const SampleSet& test, const TrainOptions& opts) {
    if (!train.normalized || (test.size() > 0 && !test.normalized))
        throw std::invalid_argument("train_regressor: sample sets must be normalized");
    if (train.x != net.window()) throw std::invalid_argument("train_regressor: window length mismatch");
    if (opts.batch_size == 0) throw std::invalid_argument("train_regressor: batch_size must be > 0");

    TrainHistory hist;
    if (opts.epochs == 0) return hist;
    if (train.size() == 0) throw std::invalid_argument("train_regressor: empty training set");

    AdamState adam = make_adam(net.param_count(), opts.learning_rate);
    std::mt19937_64 rng(opts.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    const std::size_t x = train.x;
    std::vector<double> windows, targets, dloss;
    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        if (opts.shuffle) std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t first = 0; first < order.size(); first += opts.batch_size) {
            const std::size_t n = std::min(opts.batch_size, order.size() - first);
            windows.resize(n * x);
            targets.resize(n);
            for (std::size_t b = 0; b < n; ++b) {
                const auto w = train.window(order[first + b]);
                std::copy(w.begin(), w.end(), windows.begin() + static_cast<std::ptrdiff_t>(b * x));
                targets[b] = train.targets[order[first + b]];
            }
            ForwardCache cache;
            const auto pred = forward(net, windows, n, &cache);
            dloss.resize(n);
            double batch_loss = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                const double e = pred[b] - targets[b];
                batch_loss += e * e;
                dloss[b] = 2.0 * e / static_cast<double>(n);
            }
            if (!std::isfinite(batch_loss))
                throw TrainingError("training diverged: non-finite loss in epoch " + std::to_string(epoch));
            loss_sum += batch_loss;
            const Gradients g = backward(net, cache, dloss);
            try {
                adam_step(net.params(), g.params, adam);
            } catch (const std::domain_error& e) {
                throw TrainingError(std::string("training diverged: ") + e.what());
            }
        }
        hist.train_loss.push_back(loss_sum / static_cast<double>(train.size()));
        hist.test_loss.push_back(test.size() > 0 ? evaluate_mse(net, test) : 0.0);
        adam.lr *= opts.lr_decay;
    }
    return hist;
}

}  // namespace crnn::nn
