#include "crnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace crnn {

void ClosedLoopRecord::validate() const {
    const std::size_t n = target.size();
    if (pwm_cmd.size() != n || rpm_actual.size() != n || warmup.size() != n ||
        (!rpm_emulated.empty() && rpm_emulated.size() != n))
        throw std::invalid_argument("ClosedLoopRecord: channel lengths differ");
}

namespace {

std::vector<bool> warmup_mask(std::size_t n, std::size_t first_valid) {
    std::vector<bool> m(n, false);
    std::fill_n(m.begin(), std::min(n, first_valid), true);
    return m;
}

}  // namespace

ClosedLoopRecord closed_loop_cascade(const nn::Network& rnn1, const PlantOrEmulator& loop,
                                     std::span<const double> target, std::uint64_t seed,
                                     std::shared_ptr<const nn::Network> shadow) {
    const auto* emulator = std::get_if<std::shared_ptr<const nn::Network>>(&loop);
    if (emulator && !*emulator) throw std::invalid_argument("closed_loop_cascade: emulator is null");
    const nn::Network* rnn2 = emulator ? emulator->get() : shadow.get();

    const std::size_t x1 = rnn1.window();
    const std::size_t first_valid = rnn2 ? x1 + rnn2->window() - 2 : x1 - 1;
    if (target.size() < first_valid + 1)
        throw std::invalid_argument("closed_loop_cascade: target of length " + std::to_string(target.size()) +
                                    " is shorter than the warmup requirement " + std::to_string(first_valid + 1));

    ClosedLoopRecord rec;
    rec.target.assign(target.begin(), target.end());
    rec.pwm_cmd = predict_trace(rnn1, target).values;
    rec.warmup = warmup_mask(target.size(), first_valid);

    if (rnn2) {
        rec.rpm_emulated = predict_trace(*rnn2, rec.pwm_cmd).values;
        // Windows that still contain RNN1 warmup commands are not defined.
        std::fill_n(rec.rpm_emulated.begin(), first_valid, 0.0);
    }
    if (emulator) {
        rec.rpm_actual = rec.rpm_emulated;
    } else {
        const auto& plant = std::get<PlantParams>(loop);
        rec.dt = plant.dt;
        rec.rpm_actual = simulate(plant, rec.pwm_cmd, seed);
    }
    return rec;
}

ClosedLoopRecord closed_loop_pid_record(const PlantParams& plant, const PidGains& gains,
                                        std::span<const double> target, std::uint64_t seed,
                                        DerivativeSource derivative) {
    Trace t = closed_loop_pid(plant, gains, target, seed, derivative);
    ClosedLoopRecord rec;
    rec.dt = t.dt;
    rec.target.assign(target.begin(), target.end());
    rec.pwm_cmd = std::move(t.pwm);
    rec.rpm_actual = std::move(t.rpm);
    rec.warmup.assign(target.size(), false);
    return rec;
}

TrackingMetrics tracking_metrics(const ClosedLoopRecord& rec) {
    rec.validate();
    std::vector<double> i, wo, v;
    for (std::size_t t = 0; t < rec.size(); ++t) {
        if (rec.warmup[t]) continue;
        i.push_back(rec.target[t]);
        wo.push_back(rec.rpm_actual[t]);
        if (rec.has_emulated()) v.push_back(rec.rpm_emulated[t]);
    }
    if (i.empty()) throw std::invalid_argument("tracking_metrics: no valid indices");

    TrackingMetrics m;
    m.nmse_tracking = nmse(wo, i);
    for (std::size_t k = 0; k < i.size(); ++k) m.max_abs_err = std::max(m.max_abs_err, std::abs(wo[k] - i[k]));
    // A flat response has nothing to align; it is reported as zero lag.
    m.lag_steps = variance(wo) > 0.0 ? measure_lag(wo, i) : 0;
    if (!v.empty() && variance(wo) > 0.0) m.emulator_gap = nmse(v, wo);
    return m;
}

std::string_view to_string(ControllerKind k) {
    switch (k) {
        case ControllerKind::cascade: return "cascade";
        case ControllerKind::pid: return "pid";
        case ControllerKind::pi: return "pi";
    }
    return "?";
}

RunReport make_report(std::string scenario, ControllerKind kind, ClosedLoopRecord record) {
    RunReport r;
    r.scenario = std::move(scenario);
    r.controller = kind;
    r.metrics = tracking_metrics(record);
    r.record = std::move(record);
    return r;
}

std::string ComparisonReport::winner() const {
    switch (verdict) {
        case Verdict::first: return std::string(to_string(first_kind));
        case Verdict::second: return std::string(to_string(second_kind));
        case Verdict::tie: return "tie";
    }
    return "tie";
}

ComparisonReport compare(const RunReport& a, const RunReport& b) {
    if (a.scenario != b.scenario)
        throw std::invalid_argument("compare: scenarios differ ('" + a.scenario + "' vs '" + b.scenario + "')");
    if (a.record.target != b.record.target) throw std::invalid_argument("compare: target traces differ");

    ComparisonReport c;
    c.scenario = a.scenario;
    c.first_kind = a.controller;
    c.second_kind = b.controller;
    c.first = a.metrics;
    c.second = b.metrics;
    if (a.metrics.nmse_tracking < b.metrics.nmse_tracking)
        c.verdict = Verdict::first;
    else if (b.metrics.nmse_tracking < a.metrics.nmse_tracking)
        c.verdict = Verdict::second;
    const std::size_t n = a.record.size();
    c.diff_pwm.resize(n);
    c.diff_rpm.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        c.diff_pwm[t] = a.record.pwm_cmd[t] - b.record.pwm_cmd[t];
        c.diff_rpm[t] = a.record.rpm_actual[t] - b.record.rpm_actual[t];
    }
    return c;
}

std::string_view to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::trapezoid: return "trapezoid";
        case ScenarioKind::staircase: return "staircase";
        case ScenarioKind::sinusoid: return "sinusoid";
        case ScenarioKind::impulse_train: return "impulse_train";
    }
    return "?";
}

ScenarioKind parse_scenario_kind(std::string_view s) {
    for (auto k : {ScenarioKind::trapezoid, ScenarioKind::staircase, ScenarioKind::sinusoid,
                   ScenarioKind::impulse_train})
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown scenario kind '" + std::string(s) + "'");
}

void Scenario::validate() const {
    if (length == 0) throw std::invalid_argument("Scenario '" + id + "': length must be > 0");
    if (!std::isfinite(amplitude)) throw std::invalid_argument("Scenario '" + id + "': amplitude must be finite");
    if (!(period_s > 0.0) || !(ramp_s > 0.0) || !(hold_s >= 0.0) || !(onset_s >= 0.0))
        throw std::invalid_argument("Scenario '" + id + "': timing parameters out of range");
}

std::vector<double> scenario_target(const Scenario& s, double dt) {
    s.validate();
    const auto samples = [dt](double seconds) { return static_cast<std::size_t>(std::llround(seconds / dt)); };
    const std::size_t onset = samples(s.onset_s);
    std::vector<double> y(s.length, 0.0);

    switch (s.kind) {
        case ScenarioKind::trapezoid: {
            const std::size_t ramp = std::max<std::size_t>(1, samples(s.ramp_s));
            const std::size_t hold = samples(s.hold_s);
            for (std::size_t k = onset; k < s.length; ++k) {
                const std::size_t j = k - onset;
                if (j < ramp)
                    y[k] = s.amplitude * static_cast<double>(j) / static_cast<double>(ramp);
                else if (j < ramp + hold)
                    y[k] = s.amplitude;
                else if (j < 2 * ramp + hold)
                    y[k] = s.amplitude * (1.0 - static_cast<double>(j - ramp - hold) / static_cast<double>(ramp));
            }
            break;
        }
        case ScenarioKind::staircase: {
            static constexpr double kLevels[] = {0.25, 0.5, 0.75, 1.0, 0.5};
            const std::size_t step = std::max<std::size_t>(1, samples(s.period_s));
            for (std::size_t k = onset; k < s.length; ++k) {
                const std::size_t j = (k - onset) / step;
                if (j < std::size(kLevels)) y[k] = s.amplitude * kLevels[j];
            }
            break;
        }
        case ScenarioKind::sinusoid:
            for (std::size_t k = 0; k < s.length; ++k)
                y[k] = s.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(k) * dt / s.period_s);
            break;
        case ScenarioKind::impulse_train: {
            const std::size_t spacing = std::max<std::size_t>(1, samples(s.period_s));
            const std::size_t width = std::max<std::size_t>(1, samples(s.hold_s));
            for (std::size_t k = onset; k < s.length; ++k)
                if ((k - onset) % spacing < width) y[k] = s.amplitude;
            break;
        }
    }
    return y;
}

std::vector<Scenario> default_scenarios() {
    return {
        {"trapezoid", ScenarioKind::trapezoid, 50.0, 2.0, 2.0, 3.0, 1.0, 1000},
        {"staircase", ScenarioKind::staircase, 60.0, 1.5, 1.0, 0.0, 0.5, 1000},
        {"sinusoid", ScenarioKind::sinusoid, 40.0, 2.0, 1.0, 0.0, 0.0, 1000},
        {"impulse_train", ScenarioKind::impulse_train, 40.0, 2.0, 1.0, 0.2, 0.5, 1000},
    };
}

Trace lag_step_response(const PlantParams& plant, const LagStudyOptions& opts) {
    ProfileSpec spec;
    spec.kind = ProfileKind::step;
    spec.amplitude = opts.step_amplitude;
    spec.length = opts.step_length;
    spec.seed = opts.step_seed;
    spec.dt = plant.dt;
    Trace t;
    t.dt = plant.dt;
    t.pwm = gen_profile(spec);
    t.rpm = simulate(plant, t.pwm, opts.noise_seed);
    return t;
}

int step_lag(const nn::Network& model, const Trace& step) {
    const auto pred = predict_trace(model, step.pwm);
    const std::size_t skip = model.window() - 1;
    return measure_lag(std::span(pred.values).subspan(skip), std::span(step.rpm).subspan(skip));
}

std::vector<LagRow> lag_study(std::span<const Trace> corpus, const PlantParams& plant, const Rnn2Config& base,
                              const LagStudyOptions& opts) {
    for (std::size_t x : opts.windows)
        if (x == 0) throw std::invalid_argument("lag_study: window lengths must be >= 1");
    const Trace step = lag_step_response(plant, opts);

    std::vector<LagRow> rows(opts.windows.size());
    auto run = [&](std::size_t idx) {
        const std::size_t x = opts.windows[idx];
        const SplitResult parts = split(windowize(corpus, {x, Direction::pwm_to_rpm}), opts.test_fraction, opts.split_seed);
        Rnn2Config cfg = base;
        cfg.window = x;
        const Rnn2Result r = train_rnn2(parts.train, parts.test, cfg);
        rows[idx] = {x, step_lag(r.model, step), evaluate_rnn2(r.model, parts.test).nmse};
    };

    const unsigned jobs = std::max(1u, opts.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < rows.size(); ++i) run(i);
        return rows;
    }
    std::vector<std::exception_ptr> errors(rows.size());
    for (std::size_t first = 0; first < rows.size(); first += jobs) {
        std::vector<std::thread> pool;
        for (std::size_t i = first; i < std::min(rows.size(), first + jobs); ++i)
            pool.emplace_back([&, i] {
                try {
                    run(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return rows;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace

void write_record_csv(const std::filesystem::path& path, const ClosedLoopRecord& rec) {
    rec.validate();
    auto out = open_out(path);
    out << "t,target,pwm_cmd,rpm_actual,rpm_emulated,warmup\n";
    for (std::size_t k = 0; k < rec.size(); ++k) {
        out << format_double(static_cast<double>(k) * rec.dt) << ',' << format_double(rec.target[k]) << ','
            << format_double(rec.pwm_cmd[k]) << ',' << format_double(rec.rpm_actual[k]) << ','
            << (rec.has_emulated() ? format_double(rec.rpm_emulated[k]) : std::string()) << ','
            << (rec.warmup[k] ? 1 : 0) << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_comparison_csv(const std::filesystem::path& path, const RunReport& a, const RunReport& b,
                          const ComparisonReport& c) {
    auto out = open_out(path);
    out << "t,target,pwm_a,rpm_a,pwm_b,rpm_b,diff_pwm,diff_rpm\n";
    for (std::size_t k = 0; k < a.record.size(); ++k) {
        out << format_double(static_cast<double>(k) * a.record.dt) << ',' << format_double(a.record.target[k]) << ','
            << format_double(a.record.pwm_cmd[k]) << ',' << format_double(a.record.rpm_actual[k]) << ','
            << format_double(b.record.pwm_cmd[k]) << ',' << format_double(b.record.rpm_actual[k]) << ','
            << format_double(c.diff_pwm[k]) << ',' << format_double(c.diff_rpm[k]) << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

nlohmann::json to_json(const TrackingMetrics& m) {
    nlohmann::json j{{"nmse_tracking", m.nmse_tracking}, {"max_abs_err", m.max_abs_err}, {"lag_steps", m.lag_steps}};
    j["emulator_gap"] = m.emulator_gap ? nlohmann::json(*m.emulator_gap) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const RunReport& r) {
    return {{"scenario", r.scenario}, {"controller", to_string(r.controller)}, {"metrics", to_json(r.metrics)}};
}

nlohmann::json to_json(const ComparisonReport& c) {
    return {{"scenario", c.scenario},
            {"a", {{"controller", to_string(c.first_kind)}, {"metrics", to_json(c.first)}}},
            {"b", {{"controller", to_string(c.second_kind)}, {"metrics", to_json(c.second)}}},
            {"verdict", c.winner()}};
}

nlohmann::json to_json(std::span<const LagRow> rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) j.push_back({{"x", r.x}, {"lag_steps", r.lag_steps}, {"nmse", r.nmse}});
    return j;
}

}  // namespace crnn
