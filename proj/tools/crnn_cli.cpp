// Command-line front end: crnn <command> --config <path> [--out <dir>] [--seed <u64>] [--jobs <n>]
#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crnn/commands.hpp"
#include "crnn/config.hpp"

namespace {

struct Common {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "Output directory (overrides output_dir)");
    cmd->add_option("--seed", c.seed, "Run seed (overrides seed)");
    cmd->add_option("--jobs", c.jobs, "Parallel scenarios / lag-study configs")->check(CLI::PositiveNumber);
    cmd->add_flag("--quiet", c.quiet, "Suppress progress messages");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Consecutive-RNN control pipeline: plant emulator, inverse controller and PID baseline"};
    app.require_subcommand(1);

    Common common;
    using Handler = std::function<int(const crnn::CommandContext&)>;
    const std::vector<std::tuple<const char*, const char*, Handler>> commands{
        {"gen-data", "Generate and log the excitation corpus", crnn::cmd_gen_data},
        {"train-plant-model", "Train the plant emulator (RNN2)", crnn::cmd_train_plant_model},
        {"train-controller", "Train the inverse controller (RNN1) through the frozen RNN2", crnn::cmd_train_controller},
        {"tune-pid", "Ziegler-Nichols ultimate-gain tuning", crnn::cmd_tune_pid},
        {"evaluate", "Closed-loop runs of cascade, PID and PI on every scenario", crnn::cmd_evaluate},
        {"compare", "Evaluate and compare cascade against PID / PI", crnn::cmd_compare},
        {"grad-check", "Finite-difference gradient verification", crnn::cmd_grad_check},
        {"lag-study", "Train RNN2 for several window lengths and measure lag", crnn::cmd_lag_study},
    };
    std::vector<std::pair<CLI::App*, Handler>> handlers;
    for (const auto& [name, help, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        add_common(sub, common);
        handlers.emplace_back(sub, fn);
    }
    CLI::App* print_cfg = app.add_subcommand("print-default-config", "Print the built-in default configuration");

    CLI11_PARSE(app, argc, argv);

    if (print_cfg->parsed()) {
        std::cout << crnn::to_json(crnn::default_run_config()).dump(2) << '\n';
        return crnn::kExitOk;
    }

    crnn::CommandContext ctx;
    try {
        ctx.config = crnn::load_run_config(common.config);
    } catch (const crnn::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return crnn::kExitConfig;
    }
    if (common.out) ctx.config.output_dir = *common.out;
    if (common.seed) ctx.config.seed = *common.seed;
    ctx.jobs = common.jobs;
    ctx.log = common.quiet ? nullptr : &std::cerr;

    for (const auto& [sub, fn] : handlers)
        if (sub->parsed()) return fn(ctx);
    return crnn::kExitConfig;
}
