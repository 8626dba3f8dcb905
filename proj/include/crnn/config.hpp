// Declarative run configuration (JSON, schema-versioned).
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crnn/controller.hpp"
#include "crnn/dataset.hpp"
#include "crnn/eval.hpp"
#include "crnn/pid.hpp"
#include "crnn/plant.hpp"
#include "crnn/sysid.hpp"

namespace crnn {

inline constexpr int kConfigSchemaVersion = 1;

/// Malformed, incomplete or incompatible configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One logged excitation: the profile plus the seed of its plant noise.
struct CorpusEntry {
    ProfileSpec profile;
    std::uint64_t noise_seed = 0;
};

struct CorpusConfig {
    std::vector<CorpusEntry> profiles;
    double test_fraction = 0.2;
    std::uint64_t split_seed = 0;
};

struct PidTuningConfig {
    double kp_min = 0.005;
    double kp_max = 1.0;
    double kp_step = 0.005;
    double sim_seconds = 60.0;
    DerivativeSource derivative = DerivativeSource::error;
};

struct GradCheckConfig {
    std::size_t seeds = 20;
    std::uint64_t first_seed = 0;
    double eps = 1e-5;
    double tolerance = 1e-4;
};

struct RunConfig {
    int schema_version = kConfigSchemaVersion;
    std::uint64_t seed = 0;  // evaluation noise and run-directory naming
    std::filesystem::path output_dir = "runs";
    PlantParams plant;
    CorpusConfig corpus;
    Rnn2Config rnn2;
    Rnn1Config rnn1;
    // Checksum of the RNN2 file RNN1 must be trained against; empty skips
    // the check.
    std::string rnn2_checksum;
    PidTuningConfig pid;
    std::vector<Scenario> scenarios;
    LagStudyOptions lag_study;
    std::size_t lag_study_epochs = 0;
    GradCheckConfig grad_check;
};

/// The shipped default: FOPDT plant, 20 x 1000-sample corpus, x = 3 RNN2,
/// x1 = 1 RNN1, the four-scenario suite.
RunConfig default_run_config();

nlohmann::json to_json(const RunConfig& cfg);
/// Throws ConfigError on missing seeds, unknown keys, wrong schema version
/// or invalid values.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Raw corpus traces (before augmentation), generated and logged from the
/// configured plant.
std::vector<Trace> generate_corpus(const RunConfig& cfg);

}  // namespace crnn
