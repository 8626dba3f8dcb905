// Discrete-time first-order-plus-dead-time motor model (PWM in, RPM out).
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace crnn {

enum class Nonlinearity { linear, saturating, deadband_saturating };

std::string_view to_string(Nonlinearity n);
Nonlinearity parse_nonlinearity(std::string_view s);

struct PlantParams {
    double gain_k = 100.0;     // RPM per unit PWM
    double tau = 0.5;          // inertial time constant [s]
    double dt = 0.01;          // sample period [s]
    int dead_time_steps = 3;   // transport delay [samples]
    double sat_pwm = 0.8;      // symmetric input clamp
    double deadband = 0.05;    // |pwm| below this produces no drive
    double noise_std = 0.5;    // measurement noise [RPM]
    Nonlinearity nonlinearity = Nonlinearity::deadband_saturating;

    /// Throws std::invalid_argument if any invariant is violated
    /// (tau > 0, dt > 0, dt < tau, sat_pwm > 0, dead time >= 0, noise >= 0).
    void validate() const;

    /// Largest steady-state speed the plant can reach.
    double max_rpm() const { return gain_k * sat_pwm; }
};

/// Ring buffer of the last `dead_time_steps` commands plus the noiseless speed.
struct PlantState {
    double rpm = 0.0;
    std::vector<double> delay_buffer;
    std::size_t head = 0;
};

using Rng = std::mt19937_64;

PlantState initial_state(const PlantParams& params);

/// Effective drive after deadband and saturation, as seen by the inertia.
double shape_input(const PlantParams& params, double pwm);

/// Advances the plant by one sample. The state keeps the noiseless speed;
/// the returned value is the measured speed (noise added on output only).
double plant_step(const PlantParams& params, PlantState& state, double pwm, Rng& rng);

/// Runs a fresh plant over a whole command sequence.
std::vector<double> simulate(const PlantParams& params, std::span<const double> pwm, std::uint64_t seed);

}  // namespace crnn
