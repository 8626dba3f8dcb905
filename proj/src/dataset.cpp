#include "crnn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace crnn {

void Trace::validate() const {
    if (pwm.size() != rpm.size()) throw std::invalid_argument("Trace: pwm and rpm lengths differ");
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(pwm.begin(), pwm.end(), finite) || !std::all_of(rpm.begin(), rpm.end(), finite))
        throw std::invalid_argument("Trace: non-finite value");
}

std::string_view to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::sinusoid: return "sinusoid";
        case ProfileKind::step: return "step";
        case ProfileKind::impulse: return "impulse";
        case ProfileKind::trapezoid: return "trapezoid";
    }
    return "?";
}

ProfileKind parse_profile_kind(std::string_view s) {
    if (s == "sinusoid") return ProfileKind::sinusoid;
    if (s == "step") return ProfileKind::step;
    if (s == "impulse") return ProfileKind::impulse;
    if (s == "trapezoid") return ProfileKind::trapezoid;
    throw std::invalid_argument("unknown profile kind '" + std::string(s) + "'");
}

void ProfileSpec::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid ProfileSpec: " + what); };
    if (length == 0) fail("length must be > 0");
    if (!(std::abs(amplitude) <= 1.0)) fail("amplitude must lie in [-1, 1]");
    if (!(dt > 0.0)) fail("dt must be > 0");
    if (kind != ProfileKind::step && !(period_or_width > 0.0)) fail("period_or_width must be > 0");
    if (kind == ProfileKind::trapezoid && !(slope > 0.0)) fail("trapezoid slope must be > 0");
}

std::size_t profile_onset(const ProfileSpec& spec) {
    if (spec.kind == ProfileKind::sinusoid) return 0;
    const std::size_t lo = spec.length / 10;
    const std::size_t hi = std::max(lo, spec.length / 4);
    std::mt19937_64 rng(spec.seed);
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

namespace {

std::size_t samples_for(double seconds, double dt) {
    return static_cast<std::size_t>(std::llround(seconds / dt));
}

}  // namespace

std::vector<double> gen_profile(const ProfileSpec& spec) {
    spec.validate();
    std::vector<double> u(spec.length, 0.0);
    const double a = spec.amplitude;
    const std::size_t onset = profile_onset(spec);

    switch (spec.kind) {
        case ProfileKind::sinusoid: {
            std::mt19937_64 rng(spec.seed);
            const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
            const double w = 2.0 * std::numbers::pi * spec.dt / spec.period_or_width;
            for (std::size_t n = 0; n < u.size(); ++n) u[n] = a * std::sin(w * static_cast<double>(n) + phase);
            break;
        }
        case ProfileKind::step:
            std::fill(u.begin() + static_cast<std::ptrdiff_t>(onset), u.end(), a);
            break;
        case ProfileKind::impulse: {
            const std::size_t spacing = std::max<std::size_t>(1, samples_for(spec.period_or_width, spec.dt));
            for (std::size_t n = onset; n < u.size(); n += spacing) u[n] = a;
            break;
        }
        case ProfileKind::trapezoid: {
            const double peak = std::abs(a);
            const double sign = a < 0.0 ? -1.0 : 1.0;
            const double per_sample = spec.slope * spec.dt;
            const auto ramp = static_cast<std::size_t>(std::ceil(peak / per_sample));
            const std::size_t hold = samples_for(spec.period_or_width, spec.dt);
            std::size_t n = onset;
            for (std::size_t j = 0; j <= ramp && n < u.size(); ++j, ++n)
                u[n] = sign * std::min(peak, per_sample * static_cast<double>(j));
            for (std::size_t j = 0; j < hold && n < u.size(); ++j, ++n) u[n] = a;
            for (std::size_t j = 1; j <= ramp && n < u.size(); ++j, ++n)
                u[n] = sign * std::max(0.0, peak - per_sample * static_cast<double>(j));
            break;
        }
    }
    return u;
}

std::vector<Trace> augment_signflip(std::span<const Trace> traces) {
    std::vector<Trace> out;
    out.reserve(traces.size() * 2);
    for (const Trace& t : traces) {
        out.push_back(t);
        Trace flipped = t;
        for (double& v : flipped.pwm) v = -v;
        for (double& v : flipped.rpm) v = -v;
        out.push_back(std::move(flipped));
    }
    return out;
}

std::size_t total_points(std::span<const Trace> traces) {
    std::size_t n = 0;
    for (const Trace& t : traces) n += t.size();
    return n;
}

std::string_view to_string(Direction d) {
    return d == Direction::pwm_to_rpm ? "pwm->rpm" : "rpm->pwm";
}

void SampleSet::append(const SampleSet& other) {
    if (other.size() == 0) return;
    if (size() == 0 && inputs.empty()) {
        x = other.x;
        direction = other.direction;
        norm_stats = other.norm_stats;
        normalized = other.normalized;
    }
    if (other.x != x || other.direction != direction || other.normalized != normalized)
        throw std::invalid_argument("SampleSet::append: incompatible window shape");
    inputs.insert(inputs.end(), other.inputs.begin(), other.inputs.end());
    targets.insert(targets.end(), other.targets.begin(), other.targets.end());
}

SampleSet SampleSet::slice(std::size_t first, std::size_t count) const {
    if (first + count > size()) throw std::out_of_range("SampleSet::slice out of range");
    SampleSet s;
    s.x = x;
    s.direction = direction;
    s.norm_stats = norm_stats;
    s.normalized = normalized;
    s.inputs.assign(inputs.begin() + static_cast<std::ptrdiff_t>(first * x),
                    inputs.begin() + static_cast<std::ptrdiff_t>((first + count) * x));
    s.targets.assign(targets.begin() + static_cast<std::ptrdiff_t>(first),
                     targets.begin() + static_cast<std::ptrdiff_t>(first + count));
    return s;
}

SampleSet windowize(const Trace& trace, const WindowConfig& cfg) {
    if (cfg.x < 1) throw std::invalid_argument("windowize: x must be >= 1");
    trace.validate();
    if (trace.size() < cfg.x + 1)
        throw std::invalid_argument("windowize: trace of length " + std::to_string(trace.size()) +
                                    " is shorter than x + 1 = " + std::to_string(cfg.x + 1));
    const auto& in = cfg.direction == Direction::pwm_to_rpm ? trace.pwm : trace.rpm;
    const auto& out = cfg.direction == Direction::pwm_to_rpm ? trace.rpm : trace.pwm;

    SampleSet s;
    s.x = cfg.x;
    s.direction = cfg.direction;
    const std::size_t n = trace.size() - cfg.x;
    s.inputs.reserve(n * cfg.x);
    s.targets.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        s.inputs.insert(s.inputs.end(), in.begin() + static_cast<std::ptrdiff_t>(k),
                        in.begin() + static_cast<std::ptrdiff_t>(k + cfg.x));
        s.targets.push_back(out[k + cfg.x]);
    }
    return s;
}

SampleSet windowize(std::span<const Trace> traces, const WindowConfig& cfg) {
    SampleSet all;
    all.x = cfg.x;
    all.direction = cfg.direction;
    for (const Trace& t : traces) all.append(windowize(t, cfg));
    return all;
}

SplitResult split(const SampleSet& samples, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("split: test_fraction must lie in (0, 1)");
    const std::size_t n = samples.size();
    if (n < 2) throw std::invalid_argument("split: need at least 2 samples");

    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

    std::mt19937_64 rng(seed);
    const std::size_t begin = std::uniform_int_distribution<std::size_t>(0, n - n_test)(rng);

    SplitResult r;
    r.test_begin = begin;
    r.test = samples.slice(begin, n_test);
    r.train = samples.slice(0, begin);
    r.train.append(samples.slice(begin + n_test, n - begin - n_test));
    return r;
}

namespace {

Affine fit_affine(std::span<const double> values) {
    if (values.empty()) return {};
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    const double sd = std::sqrt(var);
    return {mean, sd > 0.0 ? sd : 1.0};
}

}  // namespace

NormStats fit_norm_stats(const SampleSet& samples) {
    return {fit_affine(samples.inputs), fit_affine(samples.targets)};
}

SampleSet normalize(const SampleSet& samples, const NormStats& stats) {
    if (samples.normalized) throw std::invalid_argument("normalize: samples are already normalized");
    SampleSet s = samples;
    for (double& v : s.inputs) v = stats.input.apply(v);
    for (double& v : s.targets) v = stats.target.apply(v);
    s.norm_stats = stats;
    s.normalized = true;
    return s;
}

SampleSet normalize(const SampleSet& samples) { return normalize(samples, fit_norm_stats(samples)); }

double denormalize(double value, const Affine& stats) { return stats.invert(value); }

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_trace_csv(const std::filesystem::path& path, const Trace& trace) {
    trace.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "t,pwm,rpm\n";
    for (std::size_t n = 0; n < trace.size(); ++n)
        os << format_double(static_cast<double>(n) * trace.dt) << ',' << format_double(trace.pwm[n]) << ','
           << format_double(trace.rpm[n]) << '\n';
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

Trace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != "t,pwm,rpm")
        throw std::runtime_error(path.string() + ": expected header 't,pwm,rpm'");

    auto parse = [&](std::string_view field) {
        double v = 0.0;
        auto res = std::from_chars(field.data(), field.data() + field.size(), v);
        if (res.ec != std::errc() || res.ptr != field.data() + field.size())
            throw std::runtime_error(path.string() + ": bad number '" + std::string(field) + "'");
        return v;
    };

    Trace t;
    std::vector<double> times;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
        std::string_view sv(line);
        times.push_back(parse(sv.substr(0, c1)));
        t.pwm.push_back(parse(sv.substr(c1 + 1, c2 - c1 - 1)));
        t.rpm.push_back(parse(sv.substr(c2 + 1)));
    }
    if (times.size() >= 2) t.dt = times[1] - times[0];
    t.validate();
    return t;
}

}  // namespace crnn
