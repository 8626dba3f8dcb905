#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <utility>

#include "crnn/dataset.hpp"

using namespace crnn;

namespace {

Trace make_trace(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Trace t;
    for (std::size_t k = 0; k < n; ++k) {
        t.pwm.push_back(d(rng));
        t.rpm.push_back(100.0 * d(rng));
    }
    return t;
}

ProfileSpec spec(ProfileKind kind, double amplitude, std::size_t length = 1000, std::uint64_t seed = 3) {
    ProfileSpec s;
    s.kind = kind;
    s.amplitude = amplitude;
    s.length = length;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("step profile is zero before the onset and the amplitude after") {
    const auto s = spec(ProfileKind::step, 0.5);
    const auto u = gen_profile(s);
    const std::size_t onset = profile_onset(s);
    REQUIRE(onset >= s.length / 10);
    REQUIRE(onset <= s.length / 4);
    for (std::size_t k = 0; k < u.size(); ++k) REQUIRE(u[k] == (k < onset ? 0.0 : 0.5));
}

TEST_CASE("sinusoid peaks at plus and minus the amplitude") {
    auto s = spec(ProfileKind::sinusoid, 0.7, 5000);
    s.period_or_width = 2.0;
    const auto u = gen_profile(s);
    const auto [lo, hi] = std::minmax_element(u.begin(), u.end());
    // 200 samples per period: the sampled extreme is within 1 - cos(pi/200).
    REQUIRE(*hi == Catch::Approx(0.7).margin(0.7 * 1.3e-4));
    REQUIRE(*lo == Catch::Approx(-0.7).margin(0.7 * 1.3e-4));
}

TEST_CASE("trapezoid ramp reaches the peak after ceil(a / (s dt)) samples") {
    for (double slope : {0.13, 0.25, 0.4, 1.7}) {
        auto s = spec(ProfileKind::trapezoid, 0.6, 3000);
        s.slope = slope;
        s.period_or_width = 2.0;
        const auto u = gen_profile(s);
        const std::size_t onset = profile_onset(s);
        const auto ramp = static_cast<std::size_t>(std::ceil(0.6 / (slope * s.dt)));
        REQUIRE(u[onset + ramp] == 0.6);
        REQUIRE(u[onset + ramp - 1] < 0.6);
        for (std::size_t j = 1; j < ramp; ++j) {
            // Every ramp increment is exactly the configured slope.
            REQUIRE(u[onset + j] - u[onset + j - 1] == Catch::Approx(slope * s.dt).epsilon(1e-9));
        }
        // Hold for period_or_width seconds, then descend and stay at zero.
        REQUIRE(u[onset + ramp + 200] == 0.6);
        REQUIRE(u[onset + ramp + 201] < 0.6);
        REQUIRE(u.back() == 0.0);
    }
}

TEST_CASE("impulse train is single-sample pulses returning to zero") {
    auto s = spec(ProfileKind::impulse, 0.4);
    s.period_or_width = 1.0;
    const auto u = gen_profile(s);
    const std::size_t onset = profile_onset(s);
    for (std::size_t k = 0; k < u.size(); ++k) {
        const bool pulse = k >= onset && (k - onset) % 100 == 0;
        REQUIRE(u[k] == (pulse ? 0.4 : 0.0));
    }
}

TEST_CASE("profiles are deterministic per spec and validated") {
    for (auto kind : {ProfileKind::sinusoid, ProfileKind::step, ProfileKind::impulse, ProfileKind::trapezoid}) {
        const auto s = spec(kind, -0.3, 700, 9);
        REQUIRE(gen_profile(s) == gen_profile(s));
        REQUIRE(parse_profile_kind(to_string(kind)) == kind);
    }
    REQUIRE_THROWS_AS(parse_profile_kind("chirp"), std::invalid_argument);
    REQUIRE_THROWS(gen_profile(spec(ProfileKind::step, 0.5, 0)));
    REQUIRE_THROWS(gen_profile(spec(ProfileKind::step, 1.5)));
}

TEST_CASE("sign-flip augmentation doubles traces and points") {
    SECTION("35,000 points become 70,000") {
        std::vector<Trace> in;
        for (int i = 0; i < 35; ++i) in.push_back(make_trace(1000, static_cast<std::uint64_t>(i)));
        const auto out = augment_signflip(in);
        REQUIRE(total_points(in) == 35000);
        REQUIRE(total_points(out) == 70000);
        REQUIRE(out.size() == 70);
    }
    SECTION("empty in, empty out") { REQUIRE(augment_signflip(std::vector<Trace>{}).empty()); }
    SECTION("single point gains its negation") {
        Trace t;
        t.pwm = {0.2};
        t.rpm = {20.0};
        const auto out = augment_signflip(std::vector<Trace>{t});
        REQUIRE(out.size() == 2);
        REQUIRE(out[1].pwm == std::vector<double>{-0.2});
        REQUIRE(out[1].rpm == std::vector<double>{-20.0});
    }
    SECTION("any N doubles and every point has its mirror") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<Trace> in;
            const int n = static_cast<int>(rng() % 7);
            for (int i = 0; i < n; ++i) in.push_back(make_trace(1 + rng() % 50, rng()));
            const auto out = augment_signflip(in);
            REQUIRE(total_points(out) == 2 * total_points(in));
            std::set<std::pair<double, double>> pts;
            for (const auto& t : out)
                for (std::size_t k = 0; k < t.size(); ++k) pts.insert({t.pwm[k], t.rpm[k]});
            for (const auto& [u, r] : pts) REQUIRE(pts.count({-u, -r}) == 1);
        }
    }
}

TEST_CASE("augmenting twice adds no new distinct points") {
    std::vector<Trace> in{make_trace(30, 1), make_trace(12, 2)};
    auto points = [](const std::vector<Trace>& ts) {
        std::set<std::pair<double, double>> s;
        for (const auto& t : ts)
            for (std::size_t k = 0; k < t.size(); ++k) s.insert({t.pwm[k], t.rpm[k]});
        return s;
    };
    const auto once = augment_signflip(in);
    const auto twice = augment_signflip(once);
    REQUIRE(points(once) == points(twice));
    REQUIRE(total_points(twice) == 4 * total_points(in));  // duplicates are kept
}

TEST_CASE("windowize indexing in both directions") {
    Trace t;
    t.pwm = {1, 2, 3, 4};
    t.rpm = {10, 20, 30, 40};
    const auto fwd = windowize(t, {3, Direction::pwm_to_rpm});
    REQUIRE(fwd.size() == 1);
    REQUIRE(fwd.inputs == std::vector<double>{1, 2, 3});
    REQUIRE(fwd.targets == std::vector<double>{40});
    const auto inv = windowize(t, {3, Direction::rpm_to_pwm});
    REQUIRE(inv.inputs == std::vector<double>{10, 20, 30});
    REQUIRE(inv.targets == std::vector<double>{4});

    Trace five;
    five.pwm = {1, 2, 3, 4, 5};
    five.rpm = {1, 2, 3, 4, 5};
    REQUIRE(windowize(five, {3, Direction::pwm_to_rpm}).size() == 2);

    Trace three;
    three.pwm = {1, 2, 3};
    three.rpm = {1, 2, 3};
    REQUIRE_THROWS_AS(windowize(three, {3, Direction::pwm_to_rpm}), std::invalid_argument);
}

TEST_CASE("window count is L - x for random L > x >= 1") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t L = 2 + rng() % 200;
        const std::size_t x = 1 + rng() % (L - 1);
        const Trace t = make_trace(L, rng());
        const auto s = windowize(t, {x, Direction::pwm_to_rpm});
        REQUIRE(s.size() == L - x);
        REQUIRE(s.inputs.size() == (L - x) * x);
        const std::size_t k = rng() % s.size();
        for (std::size_t j = 0; j < x; ++j) REQUIRE(s.window(k)[j] == t.pwm[k + j]);
        REQUIRE(s.targets[k] == t.rpm[k + x]);
    }
}

TEST_CASE("split sizes, partition and determinism") {
    auto numbered = [](std::size_t n) {
        SampleSet s;
        s.x = 1;
        for (std::size_t k = 0; k < n; ++k) {
            s.inputs.push_back(static_cast<double>(k));
            s.targets.push_back(static_cast<double>(k));
        }
        return s;
    };
    const auto hundred = split(numbered(100), 0.2, 7);
    REQUIRE(hundred.train.size() == 80);
    REQUIRE(hundred.test.size() == 20);
    const auto ten = split(numbered(10), 0.2, 7);
    REQUIRE(ten.train.size() == 8);
    REQUIRE(ten.test.size() == 2);

    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto r = split(numbered(57), 0.2, seed);
        std::multiset<double> all(r.train.targets.begin(), r.train.targets.end());
        all.insert(r.test.targets.begin(), r.test.targets.end());
        REQUIRE(all.size() == 57);
        REQUIRE(std::set<double>(all.begin(), all.end()).size() == 57);
        // The held-out rows form one contiguous block.
        for (std::size_t k = 1; k < r.test.size(); ++k) REQUIRE(r.test.targets[k] == r.test.targets[k - 1] + 1);
        REQUIRE(r.test.targets.front() == static_cast<double>(r.test_begin));

        const auto again = split(numbered(57), 0.2, seed);
        REQUIRE(again.test.targets == r.test.targets);
    }
    REQUIRE_THROWS(split(numbered(1), 0.2, 0));
    REQUIRE_THROWS(split(numbered(10), 0.0, 0));
    REQUIRE_THROWS(split(numbered(10), 1.0, 0));
}

TEST_CASE("normalization round-trips and handles constant channels") {
    Trace t = make_trace(200, 4);
    const auto raw = windowize(t, {3, Direction::pwm_to_rpm});
    const auto stats = fit_norm_stats(raw);
    const auto n = normalize(raw, stats);
    for (std::size_t k = 0; k < raw.targets.size(); ++k)
        REQUIRE(denormalize(n.targets[k], stats.target) == Catch::Approx(raw.targets[k]).epsilon(1e-12));

    SampleSet flat;
    flat.x = 1;
    flat.inputs = {4.0, 4.0, 4.0};
    flat.targets = {2.0, 2.0, 2.0};
    const auto fs = fit_norm_stats(flat);
    REQUIRE(fs.input.scale == 1.0);
    REQUIRE(fs.input.offset == 4.0);
    const auto fn = normalize(flat, fs);
    for (double v : fn.inputs) REQUIRE(v == 0.0);
    REQUIRE_THROWS(normalize(fn, fs));
}

TEST_CASE("norm stats come from the training split only") {
    const Trace t = make_trace(500, 8);
    const auto parts = split(windowize(t, {3, Direction::pwm_to_rpm}), 0.2, 1);
    const auto train_stats = fit_norm_stats(parts.train);
    const auto test_n = normalize(parts.test, train_stats);
    REQUIRE(test_n.norm_stats == train_stats);
    REQUIRE_FALSE(fit_norm_stats(parts.test) == train_stats);
}

TEST_CASE("trace CSV round-trips exactly") {
    Trace t = make_trace(300, 6);
    t.dt = 0.01;
    const auto path = std::filesystem::temp_directory_path() / "crnn_trace_roundtrip.csv";
    write_trace_csv(path, t);
    const Trace back = read_trace_csv(path);
    REQUIRE(back.pwm == t.pwm);
    REQUIRE(back.rpm == t.rpm);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "t,pwm,rpm");
    std::filesystem::remove(path);
}
