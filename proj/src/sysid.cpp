#include "crnn/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace crnn {

namespace {

void check_rnn2_samples(const SampleSet& s, const Rnn2Config& cfg, const char* which) {
    if (s.direction != Direction::pwm_to_rpm)
        throw std::invalid_argument(std::string("train_rnn2: ") + which + " samples are windowed rpm->pwm");
    if (s.x != cfg.window)
        throw std::invalid_argument(std::string("train_rnn2: ") + which + " window length " + std::to_string(s.x) +
                                    " differs from config window " + std::to_string(cfg.window));
    if (s.normalized) throw std::invalid_argument(std::string("train_rnn2: ") + which + " samples must be raw");
}

}  // namespace

nn::Network init_rnn2(const SampleSet& train, const Rnn2Config& cfg) {
    check_rnn2_samples(train, cfg, "train");
    nn::Network net = nn::make_network(cfg.shape, cfg.window, cfg.seed);
    net.set_norm(fit_norm_stats(train));
    return net;
}

Rnn2Result train_rnn2(const SampleSet& train, const SampleSet& test, const Rnn2Config& cfg) {
    Rnn2Result r{init_rnn2(train, cfg), {}};
    if (test.size() > 0) check_rnn2_samples(test, cfg, "test");
    const NormStats stats = r.model.norm();
    const SampleSet train_n = normalize(train, stats);
    const SampleSet test_n = test.size() > 0 ? normalize(test, stats) : SampleSet{};
    nn::TrainOptions opts;
    opts.epochs = cfg.epochs;
    opts.batch_size = cfg.batch_size;
    opts.learning_rate = cfg.learning_rate;
    opts.lr_decay = cfg.lr_decay;
    opts.seed = cfg.seed;
    r.history = nn::train_regressor(r.model, train_n, test_n, opts);
    return r;
}

StreamPrediction predict_trace(const nn::Network& model, std::span<const double> input) {
    const std::size_t x = model.window();
    if (input.size() < x)
        throw std::invalid_argument("predict_trace: trace of length " + std::to_string(input.size()) +
                                    " is shorter than the window " + std::to_string(x));
    const std::size_t n = input.size() - x + 1;
    std::vector<double> windows(n * x);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < x; ++j) windows[k * x + j] = model.norm().input.apply(input[k + j]);
    const auto raw = nn::forward(model, windows, n);

    StreamPrediction out;
    out.values.assign(input.size(), 0.0);
    out.warmup.assign(input.size(), true);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k + x - 1] = model.norm().target.invert(raw[k]);
        out.warmup[k + x - 1] = false;
    }
    return out;
}

double variance(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("variance: empty input");
    double mean = 0.0;
    for (double a : v) mean += a;
    mean /= static_cast<double>(v.size());
    double s = 0.0;
    for (double a : v) s += (a - mean) * (a - mean);
    return s / static_cast<double>(v.size());
}

double nmse(std::span<const double> pred, std::span<const double> reference) {
    const double var = variance(reference);
    if (!(var > 0.0)) throw std::invalid_argument("nmse: reference signal has zero variance");
    return nn::mse(pred, reference) / var;
}

namespace {

// Pearson correlation of a[0..n) and b[0..n); NaN if either is constant.
double pearson(const double* a, const double* b, std::size_t n) {
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

int measure_lag(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size()) throw std::invalid_argument("measure_lag: length mismatch");
    const std::size_t L = pred.size();
    if (L < 32) throw std::invalid_argument("measure_lag: need at least 32 samples");
    if (!(variance(pred) > 0.0) || !(variance(actual) > 0.0))
        throw std::invalid_argument("measure_lag: constant signal");

    int best = 0;
    double best_corr = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s <= L / 4; ++s) {
        const double c = pearson(actual.data(), pred.data() + s, L - s);
        if (std::isnan(c)) continue;
        if (c > best_corr) {
            best_corr = c;
            best = static_cast<int>(s);
        }
    }
    return best;
}

FidelityMetrics evaluate_rnn2(const nn::Network& model, const SampleSet& test) {
    if (test.size() == 0) throw std::invalid_argument("evaluate_rnn2: empty test set");
    if (test.normalized) throw std::invalid_argument("evaluate_rnn2: expects raw samples");
    const SampleSet test_n = normalize(test, model.norm());
    auto pred = nn::predict_all(model, test_n);
    for (double& v : pred) v = model.norm().target.invert(v);

    FidelityMetrics m;
    m.nmse = nmse(pred, test.targets);
    for (std::size_t i = 0; i < pred.size(); ++i) m.max_abs_err = std::max(m.max_abs_err, std::abs(pred[i] - test.targets[i]));
    return m;
}

}  // namespace crnn
