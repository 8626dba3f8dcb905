#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "crnn/dataset.hpp"
#include "crnn/plant.hpp"
#include "crnn/sysid.hpp"

using namespace crnn;

namespace {

std::vector<Trace> small_corpus(const PlantParams& plant, std::size_t n_profiles, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(0.1, 0.8), period(4.0, 10.0);
    const ProfileKind kinds[] = {ProfileKind::sinusoid, ProfileKind::trapezoid, ProfileKind::sinusoid};
    std::vector<Trace> out;
    for (std::size_t i = 0; i < n_profiles; ++i) {
        ProfileSpec s;
        s.kind = kinds[i % 3];
        s.amplitude = amp(rng);
        s.period_or_width = period(rng);
        s.slope = 0.3;
        s.length = 1000;
        s.seed = rng();
        Trace t;
        t.pwm = gen_profile(s);
        t.rpm = simulate(plant, t.pwm, rng());
        out.push_back(std::move(t));
    }
    return augment_signflip(out);
}

// A three-sample window only resolves dynamics a few samples long, so the
// unit tests use a fast plant whose memory fits inside the window.
PlantParams fast_plant() {
    PlantParams p;
    p.tau = 0.03;
    p.dead_time_steps = 1;
    return p;
}

std::vector<double> sine(std::size_t n, double period, double phase = 0.0) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = std::sin(2 * std::numbers::pi * static_cast<double>(k) / period + phase);
    return v;
}

}  // namespace

TEST_CASE("variance and nmse") {
    REQUIRE(variance(std::vector<double>{1, 2, 3, 4}) == 1.25);
    REQUIRE(nmse(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 4}) == 0.0);
    // mse 1, variance 1.25
    REQUIRE(nmse(std::vector<double>{2, 3, 4, 5}, std::vector<double>{1, 2, 3, 4}) == Catch::Approx(0.8));
    REQUIRE_THROWS(nmse(std::vector<double>{1, 2}, std::vector<double>{3, 3}));
    REQUIRE_THROWS(variance(std::vector<double>{}));
}

TEST_CASE("measure_lag recovers a known shift") {
    // Smoothed random walk: aperiodic, so no shift aliases another.
    std::mt19937_64 rng(17);
    std::normal_distribution<double> d;
    std::vector<double> base(600);
    double x = 0.0, y = 0.0;
    for (double& v : base) {
        x += d(rng);
        y = 0.9 * y + 0.1 * x;
        v = y;
    }
    const std::vector<double> actual(base.begin() + 100, base.begin() + 500);
    for (int s : {0, 1, 3, 18, 60, 100}) {
        // pred[t + s] = actual[t]
        const std::vector<double> pred(base.begin() + 100 - s, base.begin() + 500 - s);
        REQUIRE(measure_lag(pred, actual) == s);
    }
    REQUIRE(measure_lag(actual, actual) == 0);
}

TEST_CASE("measure_lag validates input") {
    const auto a = sine(100, 20.0);
    REQUIRE_THROWS(measure_lag(std::vector<double>(100, 1.0), a));
    REQUIRE_THROWS(measure_lag(sine(20, 5.0), sine(20, 5.0)));
    REQUIRE_THROWS(measure_lag(sine(99, 5.0), a));
}

TEST_CASE("predict_trace aligns outputs with the last sample of each window") {
    Trace t;
    t.pwm = sine(50, 13.0);
    t.rpm = simulate(PlantParams{}, t.pwm, 1);
    const auto raw = windowize(t, {4, Direction::pwm_to_rpm});
    Rnn2Config cfg;
    cfg.window = 4;
    cfg.seed = 9;
    const auto net = init_rnn2(raw, cfg);
    REQUIRE(net.norm() == fit_norm_stats(raw));

    const auto stream = predict_trace(net, t.pwm);
    REQUIRE(stream.values.size() == 50);
    for (std::size_t k = 0; k < 3; ++k) {
        REQUIRE(stream.warmup[k]);
        REQUIRE(stream.values[k] == 0.0);
    }
    for (std::size_t k = 3; k < 50; ++k) {
        REQUIRE_FALSE(stream.warmup[k]);
        std::vector<double> w;
        for (std::size_t j = 0; j < 4; ++j) w.push_back(net.norm().input.apply(t.pwm[k - 3 + j]));
        REQUIRE(stream.values[k] == net.norm().target.invert(nn::forward(net, w).value));
    }
    REQUIRE_THROWS(predict_trace(net, std::vector<double>{0.1, 0.2}));
}

TEST_CASE("emulator learns the plant and normalizes from training data only") {
    const auto corpus = small_corpus(fast_plant(), 12, 77);
    const auto parts = split(windowize(corpus, {3, Direction::pwm_to_rpm}), 0.2, 5);
    Rnn2Config cfg;
    cfg.window = 3;
    cfg.shape = {{8}, {1}, nn::Activation::tanh};
    cfg.epochs = 12;
    cfg.seed = 2;
    const auto r = train_rnn2(parts.train, parts.test, cfg);
    REQUIRE(r.model.norm() == fit_norm_stats(parts.train));
    REQUIRE(r.history.test_loss.size() == 12);
    REQUIRE(r.history.test_loss.back() < r.history.test_loss.front());
    const auto m = evaluate_rnn2(r.model, parts.test);
    REQUIRE(m.nmse < 0.05);
    REQUIRE(m.max_abs_err > 0.0);

    const auto again = train_rnn2(parts.train, parts.test, cfg);
    REQUIRE(again.model == r.model);
    REQUIRE(again.history.train_loss == r.history.train_loss);
}

TEST_CASE("evaluate_rnn2 rejects normalized samples") {
    Trace t;
    t.pwm = sine(40, 10.0);
    t.rpm = simulate(PlantParams{}, t.pwm, 1);
    const auto raw = windowize(t, {3, Direction::pwm_to_rpm});
    Rnn2Config cfg;
    const auto net = init_rnn2(raw, cfg);
    REQUIRE_THROWS(evaluate_rnn2(net, normalize(raw)));
}

TEST_CASE("zero epochs returns the seeded initialization") {
    const auto corpus = small_corpus(PlantParams{}, 3, 5);
    const auto parts = split(windowize(corpus, {3, Direction::pwm_to_rpm}), 0.2, 1);
    Rnn2Config cfg;
    cfg.epochs = 0;
    cfg.seed = 6;
    REQUIRE(train_rnn2(parts.train, parts.test, cfg).model == init_rnn2(parts.train, cfg));
}

TEST_CASE("predicting the mean scores nmse one") {
    const std::vector<double> ref{1, 5, 2, 8, 4};
    REQUIRE(nmse(std::vector<double>(5, 4.0), ref) == Catch::Approx(1.0));
}

TEST_CASE("linear plant is learned to high fidelity") {
    PlantParams plant = fast_plant();
    plant.nonlinearity = Nonlinearity::linear;
    plant.deadband = 0.0;
    plant.noise_std = 0.0;
    const auto corpus = small_corpus(plant, 12, 31);
    const auto parts = split(windowize(corpus, {3, Direction::pwm_to_rpm}), 0.2, 2);
    Rnn2Config cfg;
    cfg.shape = {{8}, {1}, nn::Activation::tanh};
    cfg.epochs = 60;
    cfg.seed = 3;
    const auto r = train_rnn2(parts.train, parts.test, cfg);
    REQUIRE(evaluate_rnn2(r.model, parts.test).nmse < 0.01);
}

TEST_CASE("sign-flip augmentation imprints antisymmetry") {
    PlantParams plant = fast_plant();
    plant.deadband = 0.0;
    plant.noise_std = 0.0;
    const auto corpus = small_corpus(plant, 12, 53);
    const auto parts = split(windowize(corpus, {3, Direction::pwm_to_rpm}), 0.2, 3);
    Rnn2Config cfg;
    cfg.shape = {{8}, {1}, nn::Activation::tanh};
    cfg.epochs = 30;
    cfg.seed = 4;
    const auto net = train_rnn2(parts.train, parts.test, cfg).model;

    auto f = [&](std::span<const double> w) {
        std::vector<double> n;
        for (double v : w) n.push_back(net.norm().input.apply(v));
        return net.norm().target.invert(nn::forward(net, n).value);
    };
    double asym = 0.0, power = 0.0;
    for (std::size_t k = 0; k < parts.test.size(); ++k) {
        const auto w = parts.test.window(k);
        std::vector<double> neg(w.begin(), w.end());
        for (double& v : neg) v = -v;
        const double fw = f(w);
        asym += std::abs(f(neg) + fw);
        power += fw * fw;
    }
    const double n = static_cast<double>(parts.test.size());
    REQUIRE(asym / n < 0.05 * std::sqrt(power / n));
}
