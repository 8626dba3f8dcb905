// Excitation profiles, logged traces, sign-flip augmentation and windowing.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crnn {

/// Paired PWM/RPM log sampled at a fixed period.
struct Trace {
    double dt = 0.01;
    std::vector<double> pwm;
    std::vector<double> rpm;

    std::size_t size() const { return pwm.size(); }
    /// Throws if channel lengths differ or any value is non-finite.
    void validate() const;
};

enum class ProfileKind { sinusoid, step, impulse, trapezoid };

std::string_view to_string(ProfileKind k);
/// Throws std::invalid_argument on an unknown name.
ProfileKind parse_profile_kind(std::string_view s);

struct ProfileSpec {
    ProfileKind kind = ProfileKind::step;
    double amplitude = 0.5;
    // sinusoid: period; impulse: spacing between pulses; trapezoid: hold
    // time at the peak. Unused for step. Seconds.
    double period_or_width = 1.0;
    double slope = 1.0;  // trapezoid ramp rate, units per second
    std::size_t length = 1000;
    std::uint64_t seed = 0;
    double dt = 0.01;

    void validate() const;
};

/// Sample index at which a step/trapezoid/impulse train begins. Seeded,
/// within the first quarter of the profile.
std::size_t profile_onset(const ProfileSpec& spec);

std::vector<double> gen_profile(const ProfileSpec& spec);

/// Returns every input trace followed immediately by its negated copy.
std::vector<Trace> augment_signflip(std::span<const Trace> traces);

std::size_t total_points(std::span<const Trace> traces);

enum class Direction { pwm_to_rpm, rpm_to_pwm };

std::string_view to_string(Direction d);

struct WindowConfig {
    std::size_t x = 3;
    Direction direction = Direction::pwm_to_rpm;
};

/// Affine map value -> (value - offset) / scale.
struct Affine {
    double offset = 0.0;
    double scale = 1.0;

    double apply(double v) const { return (v - offset) / scale; }
    double invert(double v) const { return v * scale + offset; }
    bool operator==(const Affine&) const = default;
};

struct NormStats {
    Affine input;
    Affine target;
    bool operator==(const NormStats&) const = default;
};

/// Supervised windows: row k of `inputs` holds x consecutive samples of the
/// input channel, `targets[k]` the following sample of the other channel.
struct SampleSet {
    std::size_t x = 0;
    Direction direction = Direction::pwm_to_rpm;
    std::vector<double> inputs;  // row-major, size() * x
    std::vector<double> targets;
    NormStats norm_stats;
    bool normalized = false;

    std::size_t size() const { return targets.size(); }
    std::span<const double> window(std::size_t k) const { return {inputs.data() + k * x, x}; }

    /// Appends another set with the same window shape.
    void append(const SampleSet& other);
    /// Rows [first, first + count).
    SampleSet slice(std::size_t first, std::size_t count) const;
};

/// Throws if the trace has fewer than x + 1 samples.
SampleSet windowize(const Trace& trace, const WindowConfig& cfg);
SampleSet windowize(std::span<const Trace> traces, const WindowConfig& cfg);

struct SplitResult {
    SampleSet train;
    SampleSet test;
    std::size_t test_begin = 0;  // index of the held-out block in the input
};

/// Holds out one contiguous block of round(n * test_fraction) windows whose
/// position is drawn from `seed`; everything else is training data.
SplitResult split(const SampleSet& samples, double test_fraction, std::uint64_t seed);

/// Mean and standard deviation per channel. A zero-variance channel keeps
/// scale 1 with the mean as offset.
NormStats fit_norm_stats(const SampleSet& samples);
SampleSet normalize(const SampleSet& samples, const NormStats& stats);
SampleSet normalize(const SampleSet& samples);
double denormalize(double value, const Affine& stats);

// CSV with header `t,pwm,rpm`.
void write_trace_csv(const std::filesystem::path& path, const Trace& trace);
Trace read_trace_csv(const std::filesystem::path& path);

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace crnn
