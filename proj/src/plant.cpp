#include "crnn/plant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace crnn {

std::string_view to_string(Nonlinearity n) {
    switch (n) {
        case Nonlinearity::linear: return "linear";
        case Nonlinearity::saturating: return "saturating";
        case Nonlinearity::deadband_saturating: return "deadband+saturating";
    }
    return "?";
}

Nonlinearity parse_nonlinearity(std::string_view s) {
    if (s == "linear") return Nonlinearity::linear;
    if (s == "saturating") return Nonlinearity::saturating;
    if (s == "deadband+saturating" || s == "deadband_saturating") return Nonlinearity::deadband_saturating;
    throw std::invalid_argument("unknown plant nonlinearity '" + std::string(s) + "'");
}

void PlantParams::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid PlantParams: " + what); };
    if (!(tau > 0.0)) fail("tau must be > 0");
    if (!(dt > 0.0)) fail("dt must be > 0");
    if (!(dt < tau)) fail("dt must be < tau");
    if (!(sat_pwm > 0.0)) fail("sat_pwm must be > 0");
    if (dead_time_steps < 0) fail("dead_time_steps must be >= 0");
    if (!(noise_std >= 0.0)) fail("noise_std must be >= 0");
    if (!(deadband >= 0.0)) fail("deadband must be >= 0");
    if (!std::isfinite(gain_k)) fail("gain_k must be finite");
}

PlantState initial_state(const PlantParams& params) {
    params.validate();
    PlantState s;
    s.delay_buffer.assign(static_cast<std::size_t>(params.dead_time_steps), 0.0);
    return s;
}

double shape_input(const PlantParams& params, double pwm) {
    double u = pwm;
    if (params.nonlinearity == Nonlinearity::deadband_saturating && std::abs(u) < params.deadband) u = 0.0;
    if (params.nonlinearity != Nonlinearity::linear) u = std::clamp(u, -params.sat_pwm, params.sat_pwm);
    return u;
}

double plant_step(const PlantParams& params, PlantState& state, double pwm, Rng& rng) {
    if (!std::isfinite(pwm)) throw std::invalid_argument("plant_step: non-finite pwm input");
    if (state.delay_buffer.size() != static_cast<std::size_t>(params.dead_time_steps))
        throw std::invalid_argument("plant_step: state not initialized for these params");

    double delayed = pwm;
    if (!state.delay_buffer.empty()) {
        delayed = state.delay_buffer[state.head];
        state.delay_buffer[state.head] = pwm;
        state.head = (state.head + 1) % state.delay_buffer.size();
    }

    const double u = shape_input(params, delayed);
    state.rpm += (params.dt / params.tau) * (params.gain_k * u - state.rpm);

    if (params.noise_std > 0.0) {
        std::normal_distribution<double> noise(0.0, params.noise_std);
        return state.rpm + noise(rng);
    }
    return state.rpm;
}

std::vector<double> simulate(const PlantParams& params, std::span<const double> pwm, std::uint64_t seed) {
    PlantState state = initial_state(params);
    Rng rng(seed);
    std::vector<double> rpm;
    rpm.reserve(pwm.size());
    for (double u : pwm) rpm.push_back(plant_step(params, state, u, rng));
    return rpm;
}

}  // namespace crnn
