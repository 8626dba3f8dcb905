// Discrete PID (positional form) and Ziegler-Nichols ultimate-gain tuning.
#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "crnn/dataset.hpp"
#include "crnn/plant.hpp"

namespace crnn {

/// u = Kp (e + ∫e/Ti + Td de/dt). Ti = +inf disables the integral term.
struct PidGains {
    double kp = 0.0;
    double ti = std::numeric_limits<double>::infinity();
    double td = 0.0;

    void validate() const;
    bool integral_enabled() const { return ti != std::numeric_limits<double>::infinity(); }
};

enum class DerivativeSource { error, measurement };

struct PidOptions {
    // Anti-windup: |Kp * integral / Ti| is kept within this bound.
    double output_limit = std::numeric_limits<double>::infinity();
    DerivativeSource derivative = DerivativeSource::error;
};

struct PidState {
    double integral = 0.0;  // error * seconds
    double prev_error = 0.0;
    double prev_measurement = 0.0;
    bool has_prev = false;  // no derivative kick on the first call
};

/// One controller update; returns the unclamped command. `measurement` is
/// only read when the derivative acts on the measurement.
double pid_step(const PidGains& gains, PidState& state, double error, double dt, const PidOptions& opts = {},
                double measurement = 0.0);

/// Bound on |integral| implied by the anti-windup rule.
double integral_limit(const PidGains& gains, const PidOptions& opts);

class UltimateGainNotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ZnResult {
    double ku = 0.0;
    double tu = 0.0;
    PidGains gains;     // classic table: 0.6 Ku, Tu/2, Tu/8
    PidGains pi_gains;  // classic PI row: 0.45 Ku, Tu/1.2
};

enum class OscillationClass { none, decaying, sustained, growing };

struct OscillationReport {
    OscillationClass kind = OscillationClass::none;
    double period = 0.0;               // seconds, mean over the last 5 cycles
    std::vector<double> ratios;        // successive cycle amplitude ratios
};

/// Classifies the tail (after the first 30%) of a closed-loop response.
/// Sustained: >= 5 consecutive cycle ratios in [0.98, 1.02]. Alternation
/// faster than 6 samples per cycle is not counted as an oscillation.
OscillationReport detect_oscillation(std::span<const double> y, double dt);

/// P-only closed loop around a step to half the plant's reachable speed,
/// noise disabled. Used by the tuner and its tests.
std::vector<double> p_only_response(const PlantParams& plant, double kp, double sim_seconds);

/// Sweeps Kp from kp_min to kp_max; Ku is the first gain whose response
/// does not decay (sustained or growing). Throws UltimateGainNotFound
/// otherwise.
ZnResult zn_tune(const PlantParams& plant, double kp_min, double kp_max, double kp_step, double sim_seconds);

/// Tracks `target` with the plant in the loop; error uses the previous
/// measured output. Commands are clamped to ±sat_pwm.
Trace closed_loop_pid(const PlantParams& plant, const PidGains& gains, std::span<const double> target,
                      std::uint64_t seed, DerivativeSource derivative = DerivativeSource::error);

}  // namespace crnn
