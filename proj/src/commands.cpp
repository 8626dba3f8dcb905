#include "crnn/commands.hpp"

#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <random>
#include <thread>

#include "crnn/controller.hpp"
#include "crnn/eval.hpp"
#include "crnn/nn/serialize.hpp"
#include "crnn/nn/trainer.hpp"

namespace crnn {

using nlohmann::json;
namespace fs = std::filesystem;

std::filesystem::path RunPaths::run_dir(const std::string& scenario, std::uint64_t seed) const {
    return runs() / (scenario + "_seed" + std::to_string(seed));
}

namespace {

void note(const CommandContext& ctx, const std::string& msg) {
    if (ctx.log) *ctx.log << msg << '\n';
}

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_history_csv(const fs::path& path, const nn::TrainHistory& h) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "epoch,train_loss,test_loss\n";
    for (std::size_t e = 0; e < h.train_loss.size(); ++e)
        out << e << ',' << format_double(h.train_loss[e]) << ',' << format_double(h.test_loss[e]) << '\n';
}

// Model files that fail to load are an incompatibility, not a crash.
nn::Network load_model(const fs::path& path, json* meta = nullptr) {
    if (!fs::exists(path)) throw ConfigError("model file " + path.string() + " does not exist; run the training stage first");
    try {
        return nn::load_network(path, meta);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

template <class Fn>
int guarded(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::cerr << name << ": " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << name << ": " << e.what() << '\n';
        return kExitConfig;
    } catch (const nn::TrainingError& e) {
        std::cerr << name << ": " << e.what() << '\n';
        return kExitVerification;
    } catch (const UltimateGainNotFound& e) {
        std::cerr << name << ": " << e.what() << '\n';
        return kExitVerification;
    } catch (const std::exception& e) {
        std::cerr << name << ": " << e.what() << '\n';
        return kExitVerification;
    }
}

PidGains gains_from_json(const json& j) {
    return {j.at("Kp").get<double>(), j.at("Ti").get<double>(), j.at("Td").get<double>()};
}

json zn_json(const ZnResult& z) {
    return {{"Ku", z.ku},
            {"Tu", z.tu},
            {"Kp", z.gains.kp},
            {"Ti", z.gains.ti},
            {"Td", z.gains.td},
            {"pi", {{"Kp", z.pi_gains.kp}, {"Ti", z.pi_gains.ti}, {"Td", 0.0}}}};
}

ZnResult tune(const RunConfig& cfg) {
    return zn_tune(cfg.plant, cfg.pid.kp_min, cfg.pid.kp_max, cfg.pid.kp_step, cfg.pid.sim_seconds);
}

// ZN result from the tune-pid artifact if present, else tuned in process.
ZnResult load_or_tune(const CommandContext& ctx, const RunPaths& paths) {
    if (!fs::exists(paths.pid())) {
        note(ctx, "no " + paths.pid().string() + ", tuning PID in process");
        return tune(ctx.config);
    }
    std::ifstream in(paths.pid());
    json j;
    in >> j;
    ZnResult z;
    z.ku = j.at("Ku").get<double>();
    z.tu = j.at("Tu").get<double>();
    z.gains = gains_from_json(j);
    z.pi_gains = gains_from_json(j.at("pi"));
    return z;
}

struct Models {
    nn::Network rnn1;
    std::shared_ptr<const nn::Network> rnn2;
};

Models load_models(const RunPaths& paths) {
    json meta;
    Models m;
    m.rnn1 = load_model(paths.rnn1(), &meta);
    m.rnn2 = std::make_shared<const nn::Network>(load_model(paths.rnn2()));
    const std::string expected = meta.value("rnn2_checksum", "");
    const std::string actual = nn::model_checksum(*m.rnn2);
    if (expected != actual)
        throw ConfigError("RNN2 checksum mismatch: " + paths.rnn1().string() + " was trained against " + expected +
                          " but " + paths.rnn2().string() + " has " + actual);
    return m;
}

struct ScenarioRuns {
    RunReport cascade;
    RunReport pid;
    RunReport pi;
    RunReport emulator;  // cascade driving RNN2 instead of the plant
};

ScenarioRuns run_scenario(const RunConfig& cfg, const Models& m, const ZnResult& z, const Scenario& s) {
    const auto target = scenario_target(s, cfg.plant.dt);
    ScenarioRuns r;
    r.cascade = make_report(s.id, ControllerKind::cascade,
                            closed_loop_cascade(m.rnn1, cfg.plant, target, cfg.seed, m.rnn2));
    r.pid = make_report(s.id, ControllerKind::pid,
                        closed_loop_pid_record(cfg.plant, z.gains, target, cfg.seed, cfg.pid.derivative));
    r.pi = make_report(s.id, ControllerKind::pi,
                       closed_loop_pid_record(cfg.plant, z.pi_gains, target, cfg.seed, cfg.pid.derivative));
    r.emulator = make_report(s.id, ControllerKind::cascade, closed_loop_cascade(m.rnn1, m.rnn2, target, cfg.seed));
    r.emulator.record.dt = cfg.plant.dt;
    return r;
}

// Runs every scenario, `jobs` at a time; results keep the config order.
std::vector<ScenarioRuns> run_all(const CommandContext& ctx, const Models& m, const ZnResult& z) {
    const auto& list = ctx.config.scenarios;
    std::vector<ScenarioRuns> out(list.size());
    const unsigned jobs = std::max(1u, ctx.jobs);
    for (std::size_t first = 0; first < list.size(); first += jobs) {
        std::vector<std::future<ScenarioRuns>> pending;
        for (std::size_t i = first; i < std::min(list.size(), first + jobs); ++i)
            pending.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async,
                                         [&, i] { return run_scenario(ctx.config, m, z, list[i]); }));
        for (std::size_t k = 0; k < pending.size(); ++k) out[first + k] = pending[k].get();
    }
    return out;
}

json scenario_json(const ScenarioRuns& r) {
    return {{"scenario", r.cascade.scenario},
            {"cascade", to_json(r.cascade.metrics)},
            {"pid", to_json(r.pid.metrics)},
            {"pi", to_json(r.pi.metrics)},
            {"cascade_on_emulator", to_json(r.emulator.metrics)}};
}

void write_scenario_records(const RunPaths& paths, std::uint64_t seed, const ScenarioRuns& r) {
    const fs::path dir = paths.run_dir(r.cascade.scenario, seed);
    write_record_csv(dir / "cascade.csv", r.cascade.record);
    write_record_csv(dir / "pid.csv", r.pid.record);
    write_record_csv(dir / "pi.csv", r.pi.record);
    write_record_csv(dir / "cascade_on_emulator.csv", r.emulator.record);
    write_json(dir / "report.json", scenario_json(r));
}

}  // namespace

std::vector<Trace> training_corpus(const RunConfig& cfg) {
    const auto raw = generate_corpus(cfg);
    return augment_signflip(raw);
}

int cmd_gen_data(const CommandContext& ctx) {
    return guarded("gen-data", [&] {
        const RunConfig& cfg = ctx.config;
        const RunPaths paths{cfg.output_dir};
        const auto raw = generate_corpus(cfg);
        const auto all = augment_signflip(raw);
        fs::create_directories(paths.data());

        json traces = json::array();
        char name[64];
        for (std::size_t i = 0; i < all.size(); ++i) {
            const std::size_t src = i / 2;
            const bool flipped = i % 2 == 1;
            std::snprintf(name, sizeof name, "trace_%03zu%s.csv", src, flipped ? "_flip" : "");
            write_trace_csv(paths.data() / name, all[i]);
            const auto& e = cfg.corpus.profiles[src];
            traces.push_back({{"file", name},
                              {"kind", to_string(e.profile.kind)},
                              {"seed", e.profile.seed},
                              {"noise_seed", e.noise_seed},
                              {"points", all[i].size()},
                              {"flipped", flipped}});
        }
        const json manifest{{"schema_version", kConfigSchemaVersion},
                            {"dt", cfg.plant.dt},
                            {"traces_pre_augmentation", raw.size()},
                            {"traces_post_augmentation", all.size()},
                            {"points_pre_augmentation", total_points(raw)},
                            {"points_post_augmentation", total_points(all)},
                            {"traces", traces}};
        write_json(paths.data() / "manifest.json", manifest);
        note(ctx, "wrote " + std::to_string(all.size()) + " traces (" + std::to_string(total_points(all)) +
                      " points) to " + paths.data().string());
        return kExitOk;
    });
}

int cmd_train_plant_model(const CommandContext& ctx) {
    return guarded("train-plant-model", [&] {
        const RunConfig& cfg = ctx.config;
        const RunPaths paths{cfg.output_dir};
        const auto corpus = training_corpus(cfg);
        const auto parts =
            split(windowize(corpus, {cfg.rnn2.window, Direction::pwm_to_rpm}), cfg.corpus.test_fraction, cfg.corpus.split_seed);
        note(ctx, "training RNN2 on " + std::to_string(parts.train.size()) + " windows, " +
                      std::to_string(parts.test.size()) + " held out");
        const Rnn2Result r = train_rnn2(parts.train, parts.test, cfg.rnn2);
        const FidelityMetrics fid = evaluate_rnn2(r.model, parts.test);

        const Trace step = lag_step_response(cfg.plant, cfg.lag_study);
        const auto pred = predict_trace(r.model, step.pwm);
        const int lag = step_lag(r.model, step);

        const json meta{{"role", "rnn2"}, {"epochs", cfg.rnn2.epochs}, {"test_nmse", fid.nmse}};
        nn::save_network(paths.rnn2(), r.model, meta);
        write_history_csv(paths.models() / "rnn2_history.csv", r.history);
        write_json(paths.models() / "rnn2_metrics.json", {{"nmse", fid.nmse},
                                                          {"max_abs_err", fid.max_abs_err},
                                                          {"step_lag_steps", lag},
                                                          {"param_count", r.model.param_count()},
                                                          {"checksum", nn::model_checksum(r.model)}});
        {
            std::ofstream out(paths.models() / "rnn2_step.csv", std::ios::binary);
            out << "t,pwm,rpm_actual,rpm_pred,warmup_flag\n";
            for (std::size_t k = 0; k < step.size(); ++k)
                out << format_double(static_cast<double>(k) * step.dt) << ',' << format_double(step.pwm[k]) << ','
                    << format_double(step.rpm[k]) << ',' << format_double(pred.values[k]) << ','
                    << (pred.warmup[k] ? 1 : 0) << '\n';
        }
        note(ctx, "RNN2 held-out NMSE " + format_double(fid.nmse) + ", checksum " + nn::model_checksum(r.model));
        return kExitOk;
    });
}

int cmd_train_controller(const CommandContext& ctx) {
    return guarded("train-controller", [&] {
        const RunConfig& cfg = ctx.config;
        const RunPaths paths{cfg.output_dir};
        auto rnn2 = std::make_shared<const nn::Network>(load_model(paths.rnn2()));
        const std::string checksum = nn::model_checksum(*rnn2);
        if (!cfg.rnn2_checksum.empty() && cfg.rnn2_checksum != checksum)
            throw ConfigError("RNN2 checksum mismatch: config expects " + cfg.rnn2_checksum + " but " +
                              paths.rnn2().string() + " has " + checksum);

        const auto corpus = training_corpus(cfg);
        std::vector<std::vector<double>> targets;
        for (const auto& t : corpus) targets.push_back(t.rpm);
        note(ctx, "training RNN1 (x1 = " + std::to_string(cfg.rnn1.window) + ") through RNN2 " + checksum);
        const Rnn1Result r = train_rnn1(targets, rnn2, cfg.rnn1);

        nn::save_network(paths.rnn1(), r.model,
                         {{"role", "rnn1"}, {"rnn2_checksum", r.rnn2_checksum}, {"epochs", cfg.rnn1.epochs}});
        write_history_csv(paths.models() / "rnn1_history.csv", r.history);
        note(ctx, "RNN1 final held-out composite loss " +
                      (r.history.test_loss.empty() ? std::string("n/a") : format_double(r.history.test_loss.back())));
        return kExitOk;
    });
}

int cmd_tune_pid(const CommandContext& ctx) {
    return guarded("tune-pid", [&] {
        const RunPaths paths{ctx.config.output_dir};
        const ZnResult z = tune(ctx.config);
        write_json(paths.pid(), zn_json(z));
        note(ctx, "Ku " + format_double(z.ku) + ", Tu " + format_double(z.tu) + " s");
        return kExitOk;
    });
}

int cmd_evaluate(const CommandContext& ctx) {
    return guarded("evaluate", [&] {
        const RunConfig& cfg = ctx.config;
        const RunPaths paths{cfg.output_dir};
        const Models m = load_models(paths);
        const ZnResult z = load_or_tune(ctx, paths);
        json summary = json::array();
        for (const auto& r : run_all(ctx, m, z)) {
            write_scenario_records(paths, cfg.seed, r);
            summary.push_back(scenario_json(r));
        }
        write_json(paths.runs() / ("evaluate_seed" + std::to_string(cfg.seed) + ".json"), summary);
        return kExitOk;
    });
}

int cmd_compare(const CommandContext& ctx) {
    return guarded("compare", [&] {
        const RunConfig& cfg = ctx.config;
        const RunPaths paths{cfg.output_dir};
        const Models m = load_models(paths);
        const ZnResult z = load_or_tune(ctx, paths);
        json summary = json::array();
        for (const auto& r : run_all(ctx, m, z)) {
            write_scenario_records(paths, cfg.seed, r);
            const fs::path dir = paths.run_dir(r.cascade.scenario, cfg.seed);
            const ComparisonReport vs_pid = compare(r.cascade, r.pid);
            const ComparisonReport vs_pi = compare(r.cascade, r.pi);
            write_comparison_csv(dir / "comparison_pid.csv", r.cascade, r.pid, vs_pid);
            write_comparison_csv(dir / "comparison_pi.csv", r.cascade, r.pi, vs_pi);
            const json j{{"scenario", r.cascade.scenario}, {"vs_pid", to_json(vs_pid)}, {"vs_pi", to_json(vs_pi)}};
            write_json(dir / "comparison.json", j);
            summary.push_back(j);
            note(ctx, r.cascade.scenario + ": cascade " + format_double(r.cascade.metrics.nmse_tracking) + " vs pid " +
                          format_double(r.pid.metrics.nmse_tracking) + " -> " + vs_pid.winner());
        }
        write_json(paths.runs() / ("compare_seed" + std::to_string(cfg.seed) + ".json"), summary);
        return kExitOk;
    });
}

std::vector<NetGradCheck> grad_check_suite(const RunConfig& cfg) {
    std::vector<NetGradCheck> out;
    const auto& g = cfg.grad_check;
    for (std::size_t i = 0; i < g.seeds; ++i) {
        const std::uint64_t seed = g.first_seed + i;
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
        std::normal_distribution<double> normal(0.0, 1.0);

        const nn::Network rnn2 = nn::make_network(cfg.rnn2.shape, cfg.rnn2.window, seed);
        std::vector<double> window(cfg.rnn2.window);
        for (double& v : window) v = normal(rng);
        out.push_back({"rnn2/seed" + std::to_string(seed), nn::grad_check(rnn2, window, normal(rng), g.eps)});

        // Composite in raw units with realistic scales on both sides.
        auto emulator = std::make_shared<nn::Network>(nn::make_network(cfg.rnn2.shape, cfg.rnn2.window, seed + 1000));
        emulator->set_norm({{0.0, 0.3}, {0.0, 30.0}});
        CompositeModel m{nn::make_network(cfg.rnn1.shape, cfg.rnn1.window, seed + 2000), emulator};
        m.rnn1.set_norm({{0.0, 30.0}, emulator->norm().input});
        std::vector<double> targets(m.min_length());
        for (double& v : targets) v = 30.0 * normal(rng);
        out.push_back({"composite/seed" + std::to_string(seed), composite_grad_check(m, targets, g.eps)});
    }
    return out;
}

int cmd_grad_check(const CommandContext& ctx) {
    return guarded("grad-check", [&] {
        const RunConfig& cfg = ctx.config;
        const RunPaths paths{cfg.output_dir};
        const auto results = grad_check_suite(cfg);
        double worst = 0.0;
        json nets = json::array();
        for (const auto& r : results) {
            json tensors = json::array();
            for (const auto& t : r.report.tensors) tensors.push_back({{"name", t.name}, {"max_rel_error", t.max_rel_error}});
            nets.push_back({{"name", r.name}, {"max_rel_error", r.report.max_rel_error}, {"tensors", tensors}});
            worst = std::max(worst, r.report.max_rel_error);
        }
        const bool pass = worst < cfg.grad_check.tolerance;
        write_json(paths.root / "grad_check.json", {{"eps", cfg.grad_check.eps},
                                                    {"tolerance", cfg.grad_check.tolerance},
                                                    {"max_rel_error", worst},
                                                    {"pass", pass},
                                                    {"nets", nets}});
        note(ctx, "max relative error " + format_double(worst) + (pass ? " (pass)" : " (FAIL)"));
        return pass ? kExitOk : kExitVerification;
    });
}

int cmd_lag_study(const CommandContext& ctx) {
    return guarded("lag-study", [&] {
        const RunConfig& cfg = ctx.config;
        const RunPaths paths{cfg.output_dir};
        Rnn2Config base = cfg.rnn2;
        base.epochs = cfg.lag_study_epochs;
        LagStudyOptions opts = cfg.lag_study;
        opts.jobs = ctx.jobs;
        const auto rows = lag_study(training_corpus(cfg), cfg.plant, base, opts);
        write_json(paths.runs() / "lag_study.json", to_json(rows));
        for (const auto& r : rows)
            note(ctx, "x = " + std::to_string(r.x) + ": lag " + std::to_string(r.lag_steps) + ", nmse " + format_double(r.nmse));
        return kExitOk;
    });
}

}  // namespace crnn
