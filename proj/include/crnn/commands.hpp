// Pipeline stages behind the CLI. Each returns a process exit code.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "crnn/config.hpp"
#include "crnn/nn/grad_check.hpp"

namespace crnn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerification = 1;
inline constexpr int kExitConfig = 2;

struct CommandContext {
    RunConfig config;
    unsigned jobs = 1;
    std::ostream* log = nullptr;  // progress messages; nullptr silences them
};

/// Artifact layout under the run's output directory.
struct RunPaths {
    std::filesystem::path root;
    std::filesystem::path data() const { return root / "data"; }
    std::filesystem::path models() const { return root / "models"; }
    std::filesystem::path rnn2() const { return models() / "rnn2.json"; }
    std::filesystem::path rnn1() const { return models() / "rnn1.json"; }
    std::filesystem::path pid() const { return root / "pid" / "zn.json"; }
    std::filesystem::path runs() const { return root / "runs"; }
    /// Directory of one scenario run, named by scenario and seed.
    std::filesystem::path run_dir(const std::string& scenario, std::uint64_t seed) const;
};

int cmd_gen_data(const CommandContext& ctx);
int cmd_train_plant_model(const CommandContext& ctx);
int cmd_train_controller(const CommandContext& ctx);
int cmd_tune_pid(const CommandContext& ctx);
int cmd_evaluate(const CommandContext& ctx);
int cmd_compare(const CommandContext& ctx);
int cmd_grad_check(const CommandContext& ctx);
int cmd_lag_study(const CommandContext& ctx);

/// Sign-flip-augmented corpus as used by every training stage.
std::vector<Trace> training_corpus(const RunConfig& cfg);

struct NetGradCheck {
    std::string name;  // e.g. "rnn2/seed3" or "composite/seed3"
    nn::GradCheckReport report;
};

/// Gradient checks on `cfg.grad_check.seeds` random RNN2-shaped nets and
/// as many random RNN1 -> RNN2 composites.
std::vector<NetGradCheck> grad_check_suite(const RunConfig& cfg);

}  // namespace crnn
