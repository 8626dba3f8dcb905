// Closed-loop runs, tracking metrics, cascade-vs-PID comparison, lag study.
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "crnn/dataset.hpp"
#include "crnn/nn/network.hpp"
#include "crnn/pid.hpp"
#include "crnn/plant.hpp"
#include "crnn/sysid.hpp"

namespace crnn {

/// One run of a controller against a plant or emulator. `rpm_emulated` is
/// empty unless RNN2 ran in the loop or in shadow mode.
struct ClosedLoopRecord {
    double dt = 0.01;
    std::vector<double> target;      // i(t)
    std::vector<double> pwm_cmd;     // w_i(t)
    std::vector<double> rpm_actual;  // w_o(t)
    std::vector<double> rpm_emulated;  // v(t)
    std::vector<bool> warmup;

    std::size_t size() const { return target.size(); }
    bool has_emulated() const { return !rpm_emulated.empty(); }
    void validate() const;
};

/// What the cascade drives: the simulated plant or a frozen RNN2.
using PlantOrEmulator = std::variant<PlantParams, std::shared_ptr<const nn::Network>>;

/// w_i(t) = RNN1(target window ending at t). Against the plant, w_i is
/// applied with noise drawn from `seed`; a non-null `shadow` RNN2 also
/// records v. Against an emulator, w_o and v are both the emulator output.
/// Indices before the first defined output are flagged warmup.
ClosedLoopRecord closed_loop_cascade(const nn::Network& rnn1, const PlantOrEmulator& loop,
                                     std::span<const double> target, std::uint64_t seed,
                                     std::shared_ptr<const nn::Network> shadow = nullptr);

/// PID run in record form (no warmup, no emulated channel).
ClosedLoopRecord closed_loop_pid_record(const PlantParams& plant, const PidGains& gains,
                                        std::span<const double> target, std::uint64_t seed,
                                        DerivativeSource derivative = DerivativeSource::error);

struct TrackingMetrics {
    double nmse_tracking = 0.0;  // mse(w_o, i) / var(i) over valid indices
    double max_abs_err = 0.0;
    int lag_steps = 0;
    std::optional<double> emulator_gap;  // nmse(v, w_o) when v was recorded
};

TrackingMetrics tracking_metrics(const ClosedLoopRecord& rec);

enum class ControllerKind { cascade, pid, pi };
std::string_view to_string(ControllerKind k);

struct RunReport {
    std::string scenario;
    ControllerKind controller = ControllerKind::cascade;
    TrackingMetrics metrics;
    ClosedLoopRecord record;
};

RunReport make_report(std::string scenario, ControllerKind kind, ClosedLoopRecord record);

enum class Verdict { first, second, tie };

struct ComparisonReport {
    std::string scenario;
    ControllerKind first_kind = ControllerKind::cascade;
    ControllerKind second_kind = ControllerKind::pid;
    TrackingMetrics first;
    TrackingMetrics second;
    Verdict verdict = Verdict::tie;
    std::vector<double> diff_pwm;  // first - second
    std::vector<double> diff_rpm;

    /// Name of the winning controller kind, or "tie".
    std::string winner() const;
};

/// Lower nmse_tracking wins; exactly equal values tie. Throws when the
/// reports belong to different scenarios or targets.
ComparisonReport compare(const RunReport& a, const RunReport& b);

enum class ScenarioKind { trapezoid, staircase, sinusoid, impulse_train };
std::string_view to_string(ScenarioKind k);
ScenarioKind parse_scenario_kind(std::string_view s);

/// Target-RPM profile. amplitude in RPM; period_s is the sinusoid period,
/// the staircase step duration or the pulse spacing; ramp_s and hold_s
/// shape the trapezoid (hold_s is also the pulse width of the train).
struct Scenario {
    std::string id;
    ScenarioKind kind = ScenarioKind::trapezoid;
    double amplitude = 50.0;
    double period_s = 2.0;
    double ramp_s = 2.0;
    double hold_s = 3.0;
    double onset_s = 1.0;
    std::size_t length = 1000;

    void validate() const;
};

std::vector<double> scenario_target(const Scenario& s, double dt);
std::vector<Scenario> default_scenarios();

struct LagStudyOptions {
    std::vector<std::size_t> windows{1, 3, 18};
    double step_amplitude = 0.5;  // PWM
    std::size_t step_length = 800;
    std::uint64_t step_seed = 5;   // onset position
    std::uint64_t noise_seed = 9;  // plant noise on the step response
    double test_fraction = 0.2;
    std::uint64_t split_seed = 0;
    unsigned jobs = 1;
};

struct LagRow {
    std::size_t x = 0;
    int lag_steps = 0;
    double nmse = 0.0;  // held-out emulator fidelity
};

/// PWM step used by the lag study and its measured plant response.
Trace lag_step_response(const PlantParams& plant, const LagStudyOptions& opts);

/// Lag of a model's streamed prediction against the plant on the step
/// response, warmup indices excluded.
int step_lag(const nn::Network& model, const Trace& step);

/// Trains one RNN2 per window length (same base config and seed) on the
/// given corpus and reports lag on the step response plus fidelity.
std::vector<LagRow> lag_study(std::span<const Trace> corpus, const PlantParams& plant, const Rnn2Config& base,
                              const LagStudyOptions& opts);

// Output formats.
void write_record_csv(const std::filesystem::path& path, const ClosedLoopRecord& rec);
void write_comparison_csv(const std::filesystem::path& path, const RunReport& a, const RunReport& b,
                          const ComparisonReport& c);
nlohmann::json to_json(const TrackingMetrics& m);
nlohmann::json to_json(const RunReport& r);  // metrics only, no trace
nlohmann::json to_json(const ComparisonReport& c);
nlohmann::json to_json(std::span<const LagRow> rows);

}  // namespace crnn
