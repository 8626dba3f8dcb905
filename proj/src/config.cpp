#include "crnn/config.hpp"

#include <fstream>
#include <random>
#include <set>

namespace crnn {

using nlohmann::json;

RunConfig default_run_config() {
    RunConfig c;
    c.seed = 2024;
    c.output_dir = "runs/default";

    // Four excitation families, five traces each, with amplitudes and
    // timing drawn once from a fixed generator and then written out
    // explicitly so the config alone pins the corpus.
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        CorpusEntry e;
        ProfileSpec& s = e.profile;
        s.kind = static_cast<ProfileKind>(i % 4);
        s.length = 1000;
        s.seed = 100 + static_cast<std::uint64_t>(i);
        s.dt = c.plant.dt;
        s.amplitude = 0.2 + 0.6 * unit(rng);
        s.period_or_width = 1.0;
        s.slope = 1.0;
        if (s.kind == ProfileKind::sinusoid) s.period_or_width = 3.0 + 7.0 * unit(rng);
        if (s.kind == ProfileKind::impulse) s.period_or_width = 1.5 + unit(rng);
        if (s.kind == ProfileKind::trapezoid) {
            s.slope = 0.1 + 0.3 * unit(rng);
            s.period_or_width = 2.0 + 2.0 * unit(rng);
        }
        e.noise_seed = 1000 + static_cast<std::uint64_t>(i);
        c.corpus.profiles.push_back(e);
    }
    c.corpus.test_fraction = 0.2;
    c.corpus.split_seed = 42;

    c.rnn2.window = 3;
    c.rnn2.shape = {{16, 16}, {1}, nn::Activation::tanh};
    c.rnn2.epochs = 100;
    c.rnn2.batch_size = 32;
    c.rnn2.learning_rate = 3e-3;
    c.rnn2.lr_decay = 1.0;
    c.rnn2.seed = 1;

    c.rnn1.window = 1;
    c.rnn1.shape = {{16, 16}, {16, 1}, nn::Activation::tanh};
    c.rnn1.epochs = 20;
    c.rnn1.batch_size = 32;
    c.rnn1.learning_rate = 3e-3;
    c.rnn1.lr_decay = 1.0;
    c.rnn1.test_fraction = 0.2;
    c.rnn1.seed = 3;
    c.rnn1.split_seed = 4;

    c.scenarios = default_scenarios();
    c.lag_study = LagStudyOptions{};
    c.lag_study.split_seed = 42;
    c.lag_study_epochs = 40;
    return c;
}

namespace {

// Reads an object while recording which keys were consumed, so leftovers
// (typos, stale fields) can be reported.
class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <class T>
    T get(const char* key, const T& fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        return convert<T>(j_.at(key), key);
    }

    template <class T>
    T require(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(where_ + "." + key + " is required");
        return convert<T>(j_.at(key), key);
    }

    const json& child(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(where_ + "." + key + " is required");
        return j_.at(key);
    }

    bool has(const char* key) const { return j_.contains(key); }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }

private:
    template <class T>
    T convert(const json& v, const char* key) const {
        try {
            return v.get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

json shape_json(const nn::NetworkShape& s) {
    return {{"lstm_units", s.lstm_units},
            {"dense_units", s.dense_units},
            {"hidden_activation", nn::to_string(s.hidden_activation)}};
}

nn::NetworkShape read_shape(Reader& r, const nn::NetworkShape& d) {
    nn::NetworkShape s;
    s.lstm_units = r.get("lstm_units", d.lstm_units);
    s.dense_units = r.get("dense_units", d.dense_units);
    s.hidden_activation = nn::parse_activation(r.get<std::string>("hidden_activation",
                                                                   std::string(nn::to_string(d.hidden_activation))));
    return s;
}

json plant_json(const PlantParams& p) {
    return {{"gain_K", p.gain_k},       {"tau", p.tau},           {"dt", p.dt},
            {"dead_time_steps", p.dead_time_steps}, {"sat_pwm", p.sat_pwm}, {"deadband", p.deadband},
            {"noise_std", p.noise_std}, {"nonlinearity", to_string(p.nonlinearity)}};
}

PlantParams read_plant(const json& j) {
    Reader r(j, "plant");
    PlantParams d, p;
    p.gain_k = r.get("gain_K", d.gain_k);
    p.tau = r.get("tau", d.tau);
    p.dt = r.get("dt", d.dt);
    p.dead_time_steps = r.get("dead_time_steps", d.dead_time_steps);
    p.sat_pwm = r.get("sat_pwm", d.sat_pwm);
    p.deadband = r.get("deadband", d.deadband);
    p.noise_std = r.get("noise_std", d.noise_std);
    p.nonlinearity = parse_nonlinearity(r.get<std::string>("nonlinearity", std::string(to_string(d.nonlinearity))));
    r.finish();
    p.validate();
    return p;
}

json rnn2_json(const Rnn2Config& c) {
    return {{"window", c.window},         {"shape", shape_json(c.shape)}, {"epochs", c.epochs},
            {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate}, {"lr_decay", c.lr_decay},
            {"seed", c.seed}};
}

Rnn2Config read_rnn2(const json& j) {
    Reader r(j, "rnn2");
    Rnn2Config d, c;
    c.window = r.get("window", d.window);
    if (r.has("shape")) {
        Reader s(r.child("shape"), "rnn2.shape");
        c.shape = read_shape(s, d.shape);
        s.finish();
    }
    c.epochs = r.get("epochs", d.epochs);
    c.batch_size = r.get("batch_size", d.batch_size);
    c.learning_rate = r.get("learning_rate", d.learning_rate);
    c.lr_decay = r.get("lr_decay", d.lr_decay);
    c.seed = r.require<std::uint64_t>("seed");
    r.finish();
    if (c.window == 0) throw ConfigError("rnn2.window must be >= 1");
    return c;
}

json rnn1_json(const Rnn1Config& c, const std::string& checksum) {
    return {{"window", c.window},
            {"shape", shape_json(c.shape)},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"lr_decay", c.lr_decay},
            {"test_fraction", c.test_fraction},
            {"seed", c.seed},
            {"split_seed", c.split_seed},
            {"rnn2_checksum", checksum}};
}

Rnn1Config read_rnn1(const json& j, std::string& checksum) {
    Reader r(j, "rnn1");
    Rnn1Config d, c;
    c.window = r.get("window", d.window);
    if (r.has("shape")) {
        Reader s(r.child("shape"), "rnn1.shape");
        c.shape = read_shape(s, d.shape);
        s.finish();
    }
    c.epochs = r.get("epochs", d.epochs);
    c.batch_size = r.get("batch_size", d.batch_size);
    c.learning_rate = r.get("learning_rate", d.learning_rate);
    c.lr_decay = r.get("lr_decay", d.lr_decay);
    c.test_fraction = r.get("test_fraction", d.test_fraction);
    c.seed = r.require<std::uint64_t>("seed");
    c.split_seed = r.require<std::uint64_t>("split_seed");
    checksum = r.get<std::string>("rnn2_checksum", "");
    r.finish();
    if (c.window == 0) throw ConfigError("rnn1.window must be >= 1");
    return c;
}

json corpus_json(const CorpusConfig& c) {
    json profiles = json::array();
    for (const auto& e : c.profiles) {
        const ProfileSpec& s = e.profile;
        profiles.push_back({{"kind", to_string(s.kind)},
                            {"amplitude", s.amplitude},
                            {"period_or_width", s.period_or_width},
                            {"slope", s.slope},
                            {"length", s.length},
                            {"seed", s.seed},
                            {"noise_seed", e.noise_seed}});
    }
    return {{"profiles", profiles}, {"test_fraction", c.test_fraction}, {"split_seed", c.split_seed}};
}

CorpusConfig read_corpus(const json& j, double dt) {
    Reader r(j, "corpus");
    CorpusConfig c;
    const json& list = r.child("profiles");
    if (!list.is_array()) throw ConfigError("corpus.profiles must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
        Reader p(list[i], "corpus.profiles[" + std::to_string(i) + "]");
        CorpusEntry e;
        ProfileSpec d;
        e.profile.kind = parse_profile_kind(p.require<std::string>("kind"));
        e.profile.amplitude = p.get("amplitude", d.amplitude);
        e.profile.period_or_width = p.get("period_or_width", d.period_or_width);
        e.profile.slope = p.get("slope", d.slope);
        e.profile.length = p.get("length", d.length);
        e.profile.seed = p.require<std::uint64_t>("seed");
        e.profile.dt = dt;
        e.noise_seed = p.require<std::uint64_t>("noise_seed");
        p.finish();
        e.profile.validate();
        c.profiles.push_back(e);
    }
    c.test_fraction = r.get("test_fraction", c.test_fraction);
    c.split_seed = r.require<std::uint64_t>("split_seed");
    r.finish();
    return c;
}

json scenario_json(const Scenario& s) {
    return {{"id", s.id},           {"kind", to_string(s.kind)}, {"amplitude", s.amplitude},
            {"period_s", s.period_s}, {"ramp_s", s.ramp_s},    {"hold_s", s.hold_s},
            {"onset_s", s.onset_s}, {"length", s.length}};
}

Scenario read_scenario(const json& j, std::size_t i) {
    Reader r(j, "scenarios[" + std::to_string(i) + "]");
    Scenario d, s;
    s.id = r.require<std::string>("id");
    s.kind = parse_scenario_kind(r.require<std::string>("kind"));
    s.amplitude = r.get("amplitude", d.amplitude);
    s.period_s = r.get("period_s", d.period_s);
    s.ramp_s = r.get("ramp_s", d.ramp_s);
    s.hold_s = r.get("hold_s", d.hold_s);
    s.onset_s = r.get("onset_s", d.onset_s);
    s.length = r.get("length", d.length);
    r.finish();
    s.validate();
    return s;
}

}  // namespace

json to_json(const RunConfig& c) {
    json scenarios = json::array();
    for (const auto& s : c.scenarios) scenarios.push_back(scenario_json(s));
    const auto& L = c.lag_study;
    return {
        {"schema_version", c.schema_version},
        {"seed", c.seed},
        {"output_dir", c.output_dir.generic_string()},
        {"plant", plant_json(c.plant)},
        {"corpus", corpus_json(c.corpus)},
        {"rnn2", rnn2_json(c.rnn2)},
        {"rnn1", rnn1_json(c.rnn1, c.rnn2_checksum)},
        {"pid",
         {{"kp_min", c.pid.kp_min},
          {"kp_max", c.pid.kp_max},
          {"kp_step", c.pid.kp_step},
          {"sim_seconds", c.pid.sim_seconds},
          {"derivative", c.pid.derivative == DerivativeSource::error ? "error" : "measurement"}}},
        {"scenarios", scenarios},
        {"lag_study",
         {{"windows", L.windows},
          {"epochs", c.lag_study_epochs},
          {"step_amplitude", L.step_amplitude},
          {"step_length", L.step_length},
          {"step_seed", L.step_seed},
          {"noise_seed", L.noise_seed},
          {"split_seed", L.split_seed}}},
        {"grad_check",
         {{"seeds", c.grad_check.seeds},
          {"first_seed", c.grad_check.first_seed},
          {"eps", c.grad_check.eps},
          {"tolerance", c.grad_check.tolerance}}},
    };
}

RunConfig run_config_from_json(const json& j) {
    try {
        Reader r(j, "config");
        RunConfig c;
        c.schema_version = r.require<int>("schema_version");
        if (c.schema_version != kConfigSchemaVersion)
            throw ConfigError("config: schema_version " + std::to_string(c.schema_version) + " is not supported (expected " +
                              std::to_string(kConfigSchemaVersion) + ")");
        c.seed = r.require<std::uint64_t>("seed");
        c.output_dir = r.get<std::string>("output_dir", "runs");
        c.plant = read_plant(r.child("plant"));
        c.corpus = read_corpus(r.child("corpus"), c.plant.dt);
        c.rnn2 = read_rnn2(r.child("rnn2"));
        c.rnn1 = read_rnn1(r.child("rnn1"), c.rnn2_checksum);
        {
            Reader p(r.child("pid"), "pid");
            PidTuningConfig d;
            c.pid.kp_min = p.get("kp_min", d.kp_min);
            c.pid.kp_max = p.get("kp_max", d.kp_max);
            c.pid.kp_step = p.get("kp_step", d.kp_step);
            c.pid.sim_seconds = p.get("sim_seconds", d.sim_seconds);
            const auto src = p.get<std::string>("derivative", "error");
            if (src != "error" && src != "measurement")
                throw ConfigError("pid.derivative must be 'error' or 'measurement'");
            c.pid.derivative = src == "error" ? DerivativeSource::error : DerivativeSource::measurement;
            p.finish();
        }
        const json& scen = r.child("scenarios");
        if (!scen.is_array()) throw ConfigError("scenarios must be an array");
        for (std::size_t i = 0; i < scen.size(); ++i) c.scenarios.push_back(read_scenario(scen[i], i));
        {
            Reader l(r.child("lag_study"), "lag_study");
            LagStudyOptions d;
            c.lag_study.windows = l.get("windows", d.windows);
            c.lag_study_epochs = l.require<std::size_t>("epochs");
            c.lag_study.step_amplitude = l.get("step_amplitude", d.step_amplitude);
            c.lag_study.step_length = l.get("step_length", d.step_length);
            c.lag_study.step_seed = l.require<std::uint64_t>("step_seed");
            c.lag_study.noise_seed = l.require<std::uint64_t>("noise_seed");
            c.lag_study.split_seed = l.require<std::uint64_t>("split_seed");
            c.lag_study.test_fraction = c.corpus.test_fraction;
            l.finish();
        }
        if (r.has("grad_check")) {
            Reader g(r.child("grad_check"), "grad_check");
            GradCheckConfig d;
            c.grad_check.seeds = g.get("seeds", d.seeds);
            c.grad_check.first_seed = g.require<std::uint64_t>("first_seed");
            c.grad_check.eps = g.get("eps", d.eps);
            c.grad_check.tolerance = g.get("tolerance", d.tolerance);
            g.finish();
        }
        r.finish();
        return c;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

std::vector<Trace> generate_corpus(const RunConfig& cfg) {
    std::vector<Trace> traces;
    traces.reserve(cfg.corpus.profiles.size());
    for (const auto& e : cfg.corpus.profiles) {
        ProfileSpec spec = e.profile;
        spec.dt = cfg.plant.dt;
        Trace t;
        t.dt = cfg.plant.dt;
        t.pwm = gen_profile(spec);
        t.rpm = simulate(cfg.plant, t.pwm, e.noise_seed);
        traces.push_back(std::move(t));
    }
    return traces;
}

}  // namespace crnn
