#include "crnn/pid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace crnn {

namespace {

constexpr double kDiscardFraction = 0.3;
constexpr double kSustainLow = 0.98;
constexpr double kSustainHigh = 1.02;
constexpr std::size_t kSustainCycles = 5;
constexpr std::size_t kPeriodCycles = 5;
constexpr double kMinPeriodSamples = 6.0;
// Cycles smaller than this fraction of the signal level are rounding noise.
constexpr double kSettledAmplitude = 1e-12;

}  // namespace

void PidGains::validate() const {
    if (!std::isfinite(kp)) throw std::invalid_argument("PidGains: Kp must be finite");
    if (!(ti > 0.0)) throw std::invalid_argument("PidGains: Ti must be positive (use +inf to disable)");
    if (!(td >= 0.0) || !std::isfinite(td)) throw std::invalid_argument("PidGains: Td must be finite and >= 0");
}

double integral_limit(const PidGains& gains, const PidOptions& opts) {
    if (!gains.integral_enabled() || gains.kp == 0.0) return std::numeric_limits<double>::infinity();
    return opts.output_limit * gains.ti / std::abs(gains.kp);
}

double pid_step(const PidGains& gains, PidState& state, double error, double dt, const PidOptions& opts,
                double measurement) {
    if (!std::isfinite(error)) throw std::invalid_argument("pid_step: non-finite error " + std::to_string(error));
    if (!(dt > 0.0)) throw std::invalid_argument("pid_step: dt must be positive");

    double i_term = 0.0;
    if (gains.integral_enabled()) {
        const double limit = integral_limit(gains, opts);
        state.integral = std::clamp(state.integral + error * dt, -limit, limit);
        i_term = state.integral / gains.ti;
    }

    double derivative = 0.0;
    if (state.has_prev && gains.td != 0.0) {
        derivative = opts.derivative == DerivativeSource::error ? (error - state.prev_error) / dt
                                                                : -(measurement - state.prev_measurement) / dt;
    }
    state.prev_error = error;
    state.prev_measurement = measurement;
    state.has_prev = true;

    return gains.kp * (error + i_term + gains.td * derivative);
}

OscillationReport detect_oscillation(std::span<const double> y, double dt) {
    OscillationReport report;
    const auto begin = static_cast<std::size_t>(std::ceil(kDiscardFraction * static_cast<double>(y.size())));
    if (y.size() < begin + 3) return report;

    double level = 0.0;
    for (std::size_t k = begin; k < y.size(); ++k) level = std::max(level, std::abs(y[k]));
    const double floor = kSettledAmplitude * std::max(level, 1.0);

    std::vector<std::size_t> peaks;
    for (std::size_t k = begin + 1; k + 1 < y.size(); ++k) {
        if (y[k] > y[k - 1] && y[k] >= y[k + 1]) peaks.push_back(k);
    }

    // Amplitude of cycle c: peak c minus the lowest point before peak c+1.
    std::vector<double> amplitude;
    std::vector<double> spacing;
    for (std::size_t c = 0; c + 1 < peaks.size(); ++c) {
        const double trough = *std::min_element(y.begin() + static_cast<std::ptrdiff_t>(peaks[c]),
                                                y.begin() + static_cast<std::ptrdiff_t>(peaks[c + 1]));
        const double a = y[peaks[c]] - trough;
        if (a <= floor) break;
        amplitude.push_back(a);
        spacing.push_back(static_cast<double>(peaks[c + 1] - peaks[c]));
    }
    if (amplitude.size() < 2) {
        // Either no oscillation at all or one that died out inside the window.
        if (!amplitude.empty()) report.kind = OscillationClass::decaying;
        return report;
    }

    const std::size_t n_period = std::min(kPeriodCycles, spacing.size());
    const double mean_spacing =
        std::accumulate(spacing.end() - static_cast<std::ptrdiff_t>(n_period), spacing.end(), 0.0) /
        static_cast<double>(n_period);
    if (mean_spacing < kMinPeriodSamples) return report;  // sample-rate alternation, not a loop oscillation
    report.period = mean_spacing * dt;

    for (std::size_t c = 0; c + 1 < amplitude.size(); ++c) report.ratios.push_back(amplitude[c + 1] / amplitude[c]);

    std::size_t run = 0;
    for (double r : report.ratios) {
        run = (r >= kSustainLow && r <= kSustainHigh) ? run + 1 : 0;
        if (run >= kSustainCycles) {
            report.kind = OscillationClass::sustained;
            return report;
        }
    }
    double log_sum = 0.0;
    for (double r : report.ratios) log_sum += std::log(r);
    report.kind = log_sum > 0.0 ? OscillationClass::growing : OscillationClass::decaying;
    return report;
}

std::vector<double> p_only_response(const PlantParams& plant, double kp, double sim_seconds) {
    PlantParams quiet = plant;
    quiet.noise_std = 0.0;
    quiet.validate();
    const auto n = static_cast<std::size_t>(std::llround(sim_seconds / quiet.dt));
    // Half of the reachable speed keeps the loop away from the deadband and
    // the clamp, and scales with gain_K so Ku scales as 1/gain_K.
    const double setpoint = 0.5 * quiet.max_rpm();

    PlantState state = initial_state(quiet);
    Rng rng(0);
    std::vector<double> y(n);
    double measured = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double u = std::clamp(kp * (setpoint - measured), -quiet.sat_pwm, quiet.sat_pwm);
        measured = plant_step(quiet, state, u, rng);
        y[k] = measured;
    }
    return y;
}

ZnResult zn_tune(const PlantParams& plant, double kp_min, double kp_max, double kp_step, double sim_seconds) {
    if (!(kp_step > 0.0) || !(kp_max >= kp_min) || !(sim_seconds > 0.0))
        throw std::invalid_argument("zn_tune: need kp_step > 0, kp_max >= kp_min and sim_seconds > 0");
    plant.validate();

    const auto n_grid = static_cast<std::size_t>(std::floor((kp_max - kp_min) / kp_step + 1e-9)) + 1;
    for (std::size_t g = 0; g < n_grid; ++g) {
        const double kp = kp_min + static_cast<double>(g) * kp_step;
        if (kp <= 0.0) continue;
        const auto report = detect_oscillation(p_only_response(plant, kp, sim_seconds), plant.dt);
        // Just above the boundary the oscillation may still be growing
        // toward its saturated limit cycle when the run ends.
        if (report.kind != OscillationClass::sustained && report.kind != OscillationClass::growing) continue;

        ZnResult r;
        r.ku = kp;
        r.tu = report.period;
        r.gains = {0.6 * r.ku, r.tu / 2.0, r.tu / 8.0};
        r.pi_gains = {0.45 * r.ku, r.tu / 1.2, 0.0};
        return r;
    }
    throw UltimateGainNotFound("no ultimate gain: ultimate gain not in range, no non-decaying oscillation for Kp in [" +
                               std::to_string(kp_min) + ", " + std::to_string(kp_max) + "]");
}

Trace closed_loop_pid(const PlantParams& plant, const PidGains& gains, std::span<const double> target,
                      std::uint64_t seed, DerivativeSource derivative) {
    plant.validate();
    gains.validate();
    PidOptions opts;
    opts.output_limit = plant.sat_pwm;
    opts.derivative = derivative;

    Trace out;
    out.dt = plant.dt;
    out.pwm.resize(target.size());
    out.rpm.resize(target.size());
    PlantState state = initial_state(plant);
    PidState pid;
    Rng rng(seed);
    double measured = 0.0;
    for (std::size_t k = 0; k < target.size(); ++k) {
        const double u = std::clamp(pid_step(gains, pid, target[k] - measured, plant.dt, opts, measured),
                                    -plant.sat_pwm, plant.sat_pwm);
        measured = plant_step(plant, state, u, rng);
        out.pwm[k] = u;
        out.rpm[k] = measured;
    }
    return out;
}

}  // namespace crnn
