#include "crnn/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "crnn/nn/adam.hpp"
#include "crnn/nn/serialize.hpp"
#include "crnn/sysid.hpp"

namespace crnn {

namespace {

void check_model(const CompositeModel& m) {
    if (!m.rnn2) throw std::invalid_argument("composite: RNN2 is missing");
    if (m.rnn1.layers().empty()) throw std::invalid_argument("composite: RNN1 has no layers");
}

// Scale used to express the custom loss in normalized speed.
double speed_scale(const CompositeModel& m) { return m.rnn1.norm().input.scale; }

}  // namespace

CompositeBatch composite_forward_batch(const CompositeModel& m, std::span<const double> windows, std::size_t batch) {
    check_model(m);
    const std::size_t x1 = m.x1(), x2 = m.x2(), len = m.min_length();
    if (windows.size() != batch * len)
        throw std::invalid_argument("composite_forward: target windows must be x1 + x2 - 1 = " + std::to_string(len) +
                                    " samples long");
    const Affine& in1 = m.rnn1.norm().input;
    const Affine& out1 = m.rnn1.norm().target;
    const Affine& in2 = m.rnn2->norm().input;
    const Affine& out2 = m.rnn2->norm().target;

    // RNN2 window j of sample b is fed by RNN1 over target[j .. j + x1 - 1].
    std::vector<double> sub(batch * x2 * x1);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < x2; ++j)
            for (std::size_t k = 0; k < x1; ++k) sub[(b * x2 + j) * x1 + k] = in1.apply(windows[b * len + j + k]);

    CompositeBatch out;
    out.batch = batch;
    const auto cmd = nn::forward(m.rnn1, sub, batch * x2, &out.rnn1_cache);
    out.w.resize(batch * x2);
    std::vector<double> pwm_n(batch * x2);
    for (std::size_t k = 0; k < cmd.size(); ++k) {
        out.w[k] = out1.invert(cmd[k]);
        pwm_n[k] = in2.apply(out.w[k]);
    }
    const auto speed = nn::forward(*m.rnn2, pwm_n, batch, &out.rnn2_cache);
    out.v.resize(batch);
    for (std::size_t b = 0; b < batch; ++b) out.v[b] = out2.invert(speed[b]);
    return out;
}

std::vector<double> composite_backward(const CompositeModel& m, const CompositeBatch& fwd,
                                       std::span<const double> dloss_dv) {
    check_model(m);
    if (dloss_dv.size() != fwd.batch) throw std::invalid_argument("composite_backward: gradient size mismatch");
    const double s1 = m.rnn1.norm().target.scale;
    const double s_in2 = m.rnn2->norm().input.scale;
    const double s_out2 = m.rnn2->norm().target.scale;

    std::vector<double> dv_n(fwd.batch);
    for (std::size_t b = 0; b < fwd.batch; ++b) dv_n[b] = dloss_dv[b] * s_out2;
    // Only the input gradients of RNN2 are used; its parameters stay untouched.
    const nn::Gradients g2 = nn::backward(*m.rnn2, fwd.rnn2_cache, dv_n);

    std::vector<double> dcmd(g2.inputs.size());
    for (std::size_t k = 0; k < dcmd.size(); ++k) dcmd[k] = g2.inputs[k] / s_in2 * s1;
    return nn::backward(m.rnn1, fwd.rnn1_cache, dcmd).params;
}

CompositeTrace composite_forward(const CompositeModel& m, std::span<const double> target) {
    check_model(m);
    const std::size_t len = m.min_length();
    if (target.size() < len)
        throw std::invalid_argument("composite_forward: target of length " + std::to_string(target.size()) +
                                    " is shorter than the required minimum x1 + x2 - 1 = " + std::to_string(len));
    CompositeTrace out;
    auto w = predict_trace(m.rnn1, target);
    out.w = std::move(w.values);
    out.w_warmup = std::move(w.warmup);

    // v is recomputed window by window through the batched composite path
    // rather than by re-streaming w.
    const std::size_t n = target.size() - len + 1;
    std::vector<double> windows(n * len);
    for (std::size_t k = 0; k < n; ++k)
        std::copy_n(target.begin() + static_cast<std::ptrdiff_t>(k), len,
                    windows.begin() + static_cast<std::ptrdiff_t>(k * len));
    const CompositeBatch fwd = composite_forward_batch(m, windows, n);
    out.v.assign(target.size(), 0.0);
    out.v_warmup.assign(target.size(), true);
    for (std::size_t k = 0; k < n; ++k) {
        out.v[k + len - 1] = fwd.v[k];
        out.v_warmup[k + len - 1] = false;
    }
    return out;
}

double custom_loss(std::span<const double> v, std::span<const double> i) {
    if (v.empty()) throw std::invalid_argument("custom_loss: empty valid region");
    if (v.size() != i.size()) throw std::invalid_argument("custom_loss: length mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) s += (v[k] - i[k]) * (v[k] - i[k]);
    return s / static_cast<double>(v.size());
}

SampleSet composite_windows(std::span<const std::vector<double>> targets, std::size_t length) {
    if (length == 0) throw std::invalid_argument("composite_windows: length must be >= 1");
    SampleSet s;
    s.x = length;
    s.direction = Direction::rpm_to_pwm;
    for (const auto& tr : targets) {
        if (tr.size() < length) continue;
        for (std::size_t t = length - 1; t < tr.size(); ++t) {
            s.inputs.insert(s.inputs.end(), tr.begin() + static_cast<std::ptrdiff_t>(t + 1 - length),
                            tr.begin() + static_cast<std::ptrdiff_t>(t + 1));
            s.targets.push_back(tr[t]);
        }
    }
    return s;
}

nn::Network init_rnn1(const SampleSet& train_windows, const nn::Network& rnn2, const Rnn1Config& cfg) {
    nn::Network net = nn::make_network(cfg.shape, cfg.window, cfg.seed);
    NormStats stats;
    stats.input = fit_norm_stats(train_windows).input;
    stats.target = rnn2.norm().input;
    net.set_norm(stats);
    return net;
}

double composite_sample_loss(const CompositeModel& m, std::span<const double> window) {
    const CompositeBatch f = composite_forward_batch(m, window, 1);
    const double s = speed_scale(m);
    const double vn = f.v[0] / s, in = window.back() / s;
    return custom_loss(std::span<const double>(&vn, 1), std::span<const double>(&in, 1));
}

namespace {

// Mean composite loss over `set` in normalized speed, evaluated in chunks.
double composite_set_loss(const CompositeModel& m, const SampleSet& set) {
    if (set.size() == 0) return 0.0;
    constexpr std::size_t kChunk = 1024;
    const double s = speed_scale(m);
    double sum = 0.0;
    for (std::size_t first = 0; first < set.size(); first += kChunk) {
        const std::size_t n = std::min(kChunk, set.size() - first);
        const auto f = composite_forward_batch(m, std::span(set.inputs).subspan(first * set.x, n * set.x), n);
        for (std::size_t b = 0; b < n; ++b) {
            const double e = (f.v[b] - set.targets[first + b]) / s;
            sum += e * e;
        }
    }
    return sum / static_cast<double>(set.size());
}

}  // namespace

Rnn1Result train_rnn1(std::span<const std::vector<double>> targets, std::shared_ptr<const nn::Network> rnn2,
                      const Rnn1Config& cfg) {
    if (!rnn2) throw std::invalid_argument("train_rnn1: RNN2 is missing");
    if (cfg.window == 0) throw std::invalid_argument("train_rnn1: window must be >= 1");
    if (cfg.batch_size == 0) throw std::invalid_argument("train_rnn1: batch_size must be > 0");
    const std::string frozen = nn::model_checksum(*rnn2);

    const std::size_t len = cfg.window + rnn2->window() - 1;
    const SampleSet all = composite_windows(targets, len);
    if (all.size() < 2) throw std::invalid_argument("train_rnn1: fewer than two composite windows in the targets");
    const SplitResult parts = split(all, cfg.test_fraction, cfg.split_seed);

    CompositeModel m{init_rnn1(parts.train, *rnn2, cfg), rnn2};
    Rnn1Result result{m.rnn1, {}, frozen};
    if (cfg.epochs == 0) return result;

    const double s = speed_scale(m);
    nn::AdamState adam = nn::make_adam(m.rnn1.param_count(), cfg.learning_rate);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(parts.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> windows, dloss;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - first);
            windows.resize(n * len);
            for (std::size_t b = 0; b < n; ++b) {
                const auto w = parts.train.window(order[first + b]);
                std::copy(w.begin(), w.end(), windows.begin() + static_cast<std::ptrdiff_t>(b * len));
            }
            const CompositeBatch f = composite_forward_batch(m, windows, n);
            dloss.resize(n);
            double batch_loss = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                const double e = (f.v[b] - parts.train.targets[order[first + b]]) / s;
                batch_loss += e * e;
                dloss[b] = 2.0 * e / (s * static_cast<double>(n));
            }
            if (!std::isfinite(batch_loss))
                throw nn::TrainingError("RNN1 training diverged: non-finite loss in epoch " + std::to_string(epoch));
            loss_sum += batch_loss;
            const auto grads = composite_backward(m, f, dloss);
            try {
                nn::adam_step(m.rnn1.params(), grads, adam);
            } catch (const std::domain_error& e) {
                throw nn::TrainingError(std::string("RNN1 training diverged: ") + e.what());
            }
        }
        result.history.train_loss.push_back(loss_sum / static_cast<double>(parts.train.size()));
        result.history.test_loss.push_back(composite_set_loss(m, parts.test));
        adam.lr *= cfg.lr_decay;
    }

    if (nn::model_checksum(*rnn2) != frozen)
        throw FrozenModelViolation("train_rnn1: RNN2 parameters changed during controller training");
    result.model = std::move(m.rnn1);
    return result;
}

nn::GradCheckReport composite_grad_check(const CompositeModel& m, std::span<const double> window, double eps) {
    const CompositeBatch f = composite_forward_batch(m, window, 1);
    const double s = speed_scale(m);
    const double dl = 2.0 * (f.v[0] - window.back()) / (s * s);
    const auto analytic = composite_backward(m, f, std::span<const double>(&dl, 1));

    CompositeModel probe = m;
    const auto numeric =
        nn::numeric_gradient(probe.rnn1.params(), [&] { return composite_sample_loss(probe, window); }, eps);

    nn::GradCheckReport r;
    for (const nn::TensorView& t : m.rnn1.tensors()) {
        nn::TensorError e{t.name, 0.0};
        for (std::size_t k = t.offset; k < t.offset + t.size(); ++k)
            e.max_rel_error = std::max(e.max_rel_error, nn::relative_error(analytic[k], numeric[k]));
        r.max_rel_error = std::max(r.max_rel_error, e.max_rel_error);
        r.tensors.push_back(std::move(e));
    }
    return r;
}

}  // namespace crnn
