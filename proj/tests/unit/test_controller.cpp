#include <catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "crnn/controller.hpp"
#include "crnn/nn/serialize.hpp"
#include "crnn/sysid.hpp"

using namespace crnn;

namespace {

std::shared_ptr<const nn::Network> random_rnn2(std::size_t x2, std::uint64_t seed) {
    auto net = nn::make_network(nn::NetworkShape{{6}, {4, 1}, nn::Activation::tanh}, x2, seed);
    net.set_norm({{0.0, 0.3}, {0.0, 30.0}});
    return std::make_shared<const nn::Network>(std::move(net));
}

nn::Network random_rnn1(std::size_t x1, std::uint64_t seed) {
    auto net = nn::make_network(nn::NetworkShape{{5}, {3, 1}, nn::Activation::tanh}, x1, seed);
    net.set_norm({{0.0, 30.0}, {0.0, 0.3}});
    return net;
}

std::vector<double> target_signal(std::size_t n, double amplitude, double period, double phase) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k)
        v[k] = amplitude * std::sin(2 * std::numbers::pi * static_cast<double>(k) / period + phase);
    return v;
}

}  // namespace

TEST_CASE("custom loss") {
    REQUIRE(custom_loss(std::vector<double>{1}, std::vector<double>{3}) == 4.0);
    REQUIRE(custom_loss(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);
    REQUIRE(custom_loss(std::vector<double>{0, 0}, std::vector<double>{1, 2}) == 2.5);
    REQUIRE_THROWS(custom_loss(std::vector<double>{}, std::vector<double>{}));
    REQUIRE_THROWS(custom_loss(std::vector<double>{1}, std::vector<double>{1, 2}));
}

TEST_CASE("loss is non-negative and zero only on equality") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> d;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(1 + rng() % 20), i(v.size());
        for (std::size_t k = 0; k < v.size(); ++k) {
            v[k] = d(rng);
            i[k] = d(rng);
        }
        REQUIRE(custom_loss(v, i) > 0.0);
        REQUIRE(custom_loss(v, v) == 0.0);
    }
}

TEST_CASE("composite window geometry") {
    CompositeModel m{random_rnn1(4, 1), random_rnn2(3, 2)};
    REQUIRE(m.min_length() == 6);
    REQUIRE(m.first_valid() == 5);
    CompositeModel one{random_rnn1(1, 1), random_rnn2(1, 2)};
    REQUIRE(one.min_length() == 1);
    REQUIRE(one.first_valid() == 0);

    const std::vector<std::vector<double>> targets{{1, 2, 3, 4, 5}, {9}};
    const auto s = composite_windows(targets, 3);
    REQUIRE(s.size() == 3);
    REQUIRE(s.inputs == std::vector<double>{1, 2, 3, 2, 3, 4, 3, 4, 5});
    REQUIRE(s.targets == std::vector<double>{3, 4, 5});
}

TEST_CASE("streamed composite equals RNN2 applied to RNN1's streamed command") {
    for (auto [x1, x2] : {std::pair<std::size_t, std::size_t>{1, 3}, {3, 3}, {5, 2}, {1, 1}}) {
        const CompositeModel m{random_rnn1(x1, 10 + x1), random_rnn2(x2, 20 + x2)};
        const auto i = target_signal(120, 40.0, 37.0, 0.3);
        const auto tr = composite_forward(m, i);
        const auto w = predict_trace(m.rnn1, i);
        REQUIRE(tr.w == w.values);
        const auto v = predict_trace(*m.rnn2, std::span<const double>(tr.w).subspan(x1 - 1));
        for (std::size_t k = 0; k < i.size(); ++k) {
            REQUIRE(tr.w_warmup[k] == (k < x1 - 1));
            REQUIRE(tr.v_warmup[k] == (k < m.first_valid()));
            if (k < m.first_valid()) {
                REQUIRE(tr.v[k] == 0.0);
            } else {
                REQUIRE(tr.v[k] == v.values[k - (x1 - 1)]);
            }
        }
    }
}

TEST_CASE("composite batch rejects wrong window length") {
    const CompositeModel m{random_rnn1(2, 1), random_rnn2(3, 2)};
    REQUIRE_NOTHROW(composite_forward_batch(m, std::vector<double>(4 * 2, 0.0), 2));
    REQUIRE_THROWS(composite_forward_batch(m, std::vector<double>(5 * 2, 0.0), 2));
    REQUIRE_THROWS(composite_forward_batch(m, std::vector<double>(3 * 2, 0.0), 2));
}

TEST_CASE("composite gradients agree with central differences") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> d(0.0, 30.0);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const std::size_t x1 = 1 + seed % 3;
        const CompositeModel m{random_rnn1(x1, seed + 100), random_rnn2(3, seed + 200)};
        std::vector<double> window(m.min_length());
        for (double& v : window) v = d(rng);
        const auto report = composite_grad_check(m, window, 1e-5);
        INFO("seed " << seed << " x1 " << x1);
        REQUIRE(report.max_rel_error < 1e-4);
        REQUIRE(report.tensors.size() == m.rnn1.tensors().size());
    }
}

TEST_CASE("batched composite backward sums per-sample gradients") {
    const CompositeModel m{random_rnn1(2, 5), random_rnn2(3, 6)};
    std::vector<double> windows;
    for (int b = 0; b < 5; ++b)
        for (double v : target_signal(m.min_length(), 30.0, 7.0, b)) windows.push_back(v);
    const std::vector<double> dl{1.0, -0.5, 0.25, 2.0, -1.0};
    const auto batched = composite_backward(m, composite_forward_batch(m, windows, 5), dl);
    std::vector<double> summed(batched.size(), 0.0);
    for (std::size_t b = 0; b < 5; ++b) {
        const auto one = std::span<const double>(windows).subspan(b * m.min_length(), m.min_length());
        const auto g = composite_backward(m, composite_forward_batch(m, one, 1), std::vector<double>{dl[b]});
        for (std::size_t k = 0; k < g.size(); ++k) summed[k] += g[k];
    }
    for (std::size_t k = 0; k < summed.size(); ++k)
        REQUIRE(batched[k] == Catch::Approx(summed[k]).epsilon(1e-10).margin(1e-14));
}

TEST_CASE("controller inverts a linear emulator") {
    // Emulator doubles its single input, so the ideal command is half the target.
    nn::Network doubler({{nn::LayerKind::dense, 1, 1, nn::Activation::linear}}, 1);
    doubler.params()[0] = 2.0;
    auto rnn2 = std::make_shared<const nn::Network>(doubler);

    std::vector<std::vector<double>> targets;
    for (int p = 0; p < 6; ++p) targets.push_back(target_signal(400, 1.0, 50.0 + 13 * p, p));
    Rnn1Config cfg;
    cfg.window = 1;
    cfg.shape = {{}, {8, 1}, nn::Activation::tanh};
    cfg.epochs = 40;
    cfg.seed = 4;
    cfg.split_seed = 2;
    const auto r = train_rnn1(targets, rnn2, cfg);
    REQUIRE(r.history.test_loss.back() < r.history.test_loss.front());

    const auto i = target_signal(300, 0.9, 71.0, 0.5);
    const auto w = predict_trace(r.model, i);
    double err = 0.0, ref = 0.0;
    for (std::size_t k = 0; k < i.size(); ++k) {
        err += (w.values[k] - i[k] / 2) * (w.values[k] - i[k] / 2);
        ref += (i[k] / 2) * (i[k] / 2);
    }
    REQUIRE(std::sqrt(err / ref) < 0.05);
}

TEST_CASE("controller training leaves the emulator untouched and is deterministic") {
    const auto rnn2 = random_rnn2(3, 8);
    const std::string before = nn::model_checksum(*rnn2);
    std::vector<std::vector<double>> targets{target_signal(200, 30.0, 40.0, 0.0), target_signal(200, 20.0, 25.0, 1.0)};
    Rnn1Config cfg;
    cfg.window = 2;
    cfg.shape = {{4}, {1}, nn::Activation::tanh};
    cfg.epochs = 3;
    cfg.seed = 1;
    const auto a = train_rnn1(targets, rnn2, cfg);
    REQUIRE(nn::model_checksum(*rnn2) == before);
    REQUIRE(a.rnn2_checksum == before);
    REQUIRE(a.model.norm().target == rnn2->norm().input);
    const auto b = train_rnn1(targets, rnn2, cfg);
    REQUIRE(a.model == b.model);
    REQUIRE(a.history.test_loss == b.history.test_loss);

    cfg.epochs = 0;
    const auto untrained = train_rnn1(targets, rnn2, cfg);
    REQUIRE(untrained.history.train_loss.empty());
}

TEST_CASE("controller training validates its inputs") {
    const auto rnn2 = random_rnn2(3, 8);
    Rnn1Config cfg;
    std::vector<std::vector<double>> tiny{{1.0, 2.0}};
    REQUIRE_THROWS_AS(train_rnn1(tiny, rnn2, cfg), std::invalid_argument);
    REQUIRE_THROWS_AS(train_rnn1(tiny, nullptr, cfg), std::invalid_argument);
    cfg.window = 0;
    REQUIRE_THROWS_AS(train_rnn1(tiny, rnn2, cfg), std::invalid_argument);
}
