#include "tacs/config.hpp"

#include <cstdlib>

#include "tacs/errors.hpp"
#include "tacs/io.hpp"
#include "tacs/parse.hpp"

using nlohmann::json;

namespace tacs {

namespace {

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
T get_or(const json& j, const std::string& where, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("key '" + std::string(key) + "' in " + where +
                          " has the wrong type");
    }
}

std::vector<int> get_hidden(const json& j, const std::string& where,
                            const std::vector<int>& fallback) {
    std::vector<int> hidden = get_or<std::vector<int>>(j, where, "hidden", fallback);
    if (hidden.empty()) throw ConfigError(where + ".hidden must not be empty");
    for (int h : hidden)
        if (h < 1) throw ConfigError(where + ".hidden sizes must be positive");
    return hidden;
}

// z may appear here as well as at the sampler level (the block is a
// complete guidance description on its own); conflicting values are an
// error, and a single occurrence wins wherever it sits.
void parse_guidance(const json& j, GuidanceConfig& g, double* z, bool z_set_outside) {
    require_object(j, "sampler.guidance");
    check_keys(j, "sampler.guidance", {"z", "m", "sigma", "kappa", "mode", "k", "h"});
    if (j.contains("z")) {
        double zg = get_or(j, "sampler.guidance", "z", *z);
        if (z_set_outside && zg != *z)
            throw ConfigError("sampler.z and sampler.guidance.z disagree");
        *z = zg;
    }
    g.m = get_or(j, "sampler.guidance", "m", g.m);
    g.sigma = get_or(j, "sampler.guidance", "sigma", g.sigma);
    g.kappa = get_or(j, "sampler.guidance", "kappa", g.kappa);
    if (j.contains("mode"))
        g.mode = parse_gradient_mode(get_or<std::string>(j, "sampler.guidance", "mode", ""));
    g.k = get_or(j, "sampler.guidance", "k", g.k);
    g.h = get_or(j, "sampler.guidance", "h", g.h);
}

std::uint64_t env_u64(const char* name, std::uint64_t fallback) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return fallback;
    try {
        return parse_u64(v);
    } catch (const ConfigError&) {
        throw ConfigError(std::string(name) + " is not an unsigned integer: '" + v + "'");
    }
}

} // namespace

ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    cfg.sampler = default_sampler_config(Method::Tacs, cfg.schedule.T);
    return cfg;
}

ExperimentConfig parse_experiment_config(const json& j) {
    require_object(j, "config");
    check_keys(j, "config",
               {"task", "schedule", "score_model", "time_predictor", "sampler", "eval",
                "seeds", "out"});
    ExperimentConfig cfg;

    if (j.contains("task")) {
        const json& t = j.at("task");
        require_object(t, "task");
        check_keys(t, "task", {"name", "n_train"});
        cfg.task.name = get_or<std::string>(t, "task", "name", cfg.task.name);
        cfg.task.n_train = get_or(t, "task", "n_train", cfg.task.n_train);
    }
    if (cfg.task.name != "sphere" && cfg.task.name != "ring")
        throw ConfigError("unknown task '" + cfg.task.name + "'");
    if (cfg.task.n_train < 1) throw ConfigError("task.n_train must be positive");

    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        require_object(s, "schedule");
        check_keys(s, "schedule", {"type", "T", "beta_min", "beta_max"});
        // "type" is accepted for forward compatibility; linear is the only
        // schedule family implemented.
        if (s.contains("type") &&
            get_or<std::string>(s, "schedule", "type", "linear") != "linear")
            throw ConfigError("schedule.type: only 'linear' is supported");
        cfg.schedule.T = get_or(s, "schedule", "T", cfg.schedule.T);
        cfg.schedule.beta_min = get_or(s, "schedule", "beta_min", cfg.schedule.beta_min);
        cfg.schedule.beta_max = get_or(s, "schedule", "beta_max", cfg.schedule.beta_max);
    }
    if (cfg.schedule.T < 1) throw ConfigError("schedule.T must be at least 1");

    if (j.contains("score_model")) {
        const json& m = j.at("score_model");
        require_object(m, "score_model");
        check_keys(m, "score_model",
                   {"hidden", "activation", "conditional", "p_drop", "epochs",
                    "batch_size", "lr"});
        cfg.score_model.hidden = get_hidden(m, "score_model", cfg.score_model.hidden);
        if (m.contains("activation"))
            cfg.score_model.activation =
                parse_activation(get_or<std::string>(m, "score_model", "activation", ""));
        cfg.score_model.conditional =
            get_or(m, "score_model", "conditional", cfg.score_model.conditional);
        cfg.score_model.p_drop = get_or(m, "score_model", "p_drop", cfg.score_model.p_drop);
        cfg.score_model.epochs = get_or(m, "score_model", "epochs", cfg.score_model.epochs);
        cfg.score_model.batch_size =
            get_or(m, "score_model", "batch_size", cfg.score_model.batch_size);
        cfg.score_model.lr = get_or(m, "score_model", "lr", cfg.score_model.lr);
    }
    if (cfg.score_model.p_drop < 0.0 || cfg.score_model.p_drop >= 1.0)
        throw ConfigError("score_model.p_drop must lie in [0, 1)");
    if (cfg.score_model.epochs < 1 || cfg.score_model.batch_size < 1)
        throw ConfigError("score_model epochs and batch_size must be positive");
    if (!(cfg.score_model.lr > 0.0)) throw ConfigError("score_model.lr must be positive");

    bool feature_mode_explicit = false;
    if (j.contains("time_predictor")) {
        const json& m = j.at("time_predictor");
        require_object(m, "time_predictor");
        check_keys(m, "time_predictor",
                   {"hidden", "activation", "feature_mode", "conditional", "epochs",
                    "batch_size", "lr", "holdout_fraction"});
        cfg.time_predictor.hidden =
            get_hidden(m, "time_predictor", cfg.time_predictor.hidden);
        if (m.contains("activation"))
            cfg.time_predictor.activation = parse_activation(
                get_or<std::string>(m, "time_predictor", "activation", ""));
        if (m.contains("feature_mode")) {
            cfg.time_predictor.feature_mode = parse_feature_mode(
                get_or<std::string>(m, "time_predictor", "feature_mode", ""));
            feature_mode_explicit = true;
        }
        cfg.time_predictor.conditional =
            get_or(m, "time_predictor", "conditional", cfg.time_predictor.conditional);
        cfg.time_predictor.epochs =
            get_or(m, "time_predictor", "epochs", cfg.time_predictor.epochs);
        cfg.time_predictor.batch_size =
            get_or(m, "time_predictor", "batch_size", cfg.time_predictor.batch_size);
        cfg.time_predictor.lr = get_or(m, "time_predictor", "lr", cfg.time_predictor.lr);
        cfg.time_predictor.holdout_fraction = get_or(
            m, "time_predictor", "holdout_fraction", cfg.time_predictor.holdout_fraction);
    }
    if (cfg.time_predictor.epochs < 1 || cfg.time_predictor.batch_size < 1)
        throw ConfigError("time_predictor epochs and batch_size must be positive");
    if (!(cfg.time_predictor.lr > 0.0))
        throw ConfigError("time_predictor.lr must be positive");
    if (cfg.time_predictor.holdout_fraction <= 0.0 ||
        cfg.time_predictor.holdout_fraction >= 1.0)
        throw ConfigError("time_predictor.holdout_fraction must lie in (0, 1)");

    // The ring task is 2-D, so the 3-D invariant featurizer cannot apply.
    // The default falls back quietly; an explicit request is an error.
    if (cfg.task.name == "ring" &&
        cfg.time_predictor.feature_mode == FeatureMode::Invariant3d) {
        if (feature_mode_explicit)
            throw ConfigError("feature_mode invariant3d needs a 3-D task");
        cfg.time_predictor.feature_mode = FeatureMode::RawVector;
    }

    cfg.sampler = default_sampler_config(Method::Tacs, cfg.schedule.T);
    if (j.contains("sampler")) {
        const json& s = j.at("sampler");
        require_object(s, "sampler");
        check_keys(s, "sampler",
                   {"method", "z", "delta", "t_tcs", "t_og", "t_og_end", "w",
                    "prediction_mode", "snapshot_stride", "guidance"});
        if (s.contains("method"))
            cfg.sampler.method =
                parse_method(get_or<std::string>(s, "sampler", "method", ""));
        cfg.sampler.z = get_or(s, "sampler", "z", cfg.sampler.z);
        int delta = get_or(s, "sampler", "delta", -1);
        int t_tcs = get_or(s, "sampler", "t_tcs", -1);
        int t_og = get_or(s, "sampler", "t_og", -1);
        int t_og_end = get_or(s, "sampler", "t_og_end", -1);
        if (delta >= 0) cfg.sampler.delta = delta;
        if (t_tcs >= 0) cfg.sampler.t_tcs = t_tcs;
        if (t_og >= 0) cfg.sampler.t_og = t_og;
        if (t_og_end >= 0) cfg.sampler.t_og_end = t_og_end;
        cfg.sampler.w = get_or(s, "sampler", "w", cfg.sampler.w);
        if (s.contains("prediction_mode"))
            cfg.sampler.prediction_mode = parse_prediction_mode(
                get_or<std::string>(s, "sampler", "prediction_mode", ""));
        cfg.sampler.snapshot_stride =
            get_or(s, "sampler", "snapshot_stride", cfg.sampler.snapshot_stride);
        if (s.contains("guidance"))
            parse_guidance(s.at("guidance"), cfg.sampler.guidance, &cfg.sampler.z,
                           s.contains("z"));
    }
    validate_sampler_config(cfg.sampler, cfg.schedule.T);

    if (j.contains("eval")) {
        const json& e = j.at("eval");
        require_object(e, "eval");
        check_keys(e, "eval", {"n_samples", "target"});
        cfg.eval.n_samples = get_or(e, "eval", "n_samples", cfg.eval.n_samples);
        if (e.contains("target")) {
            const json& t = e.at("target");
            if (t.is_number()) {
                cfg.eval.target = t.get<double>();
            } else if (t.is_string() && t.get<std::string>() == "dataset") {
                cfg.eval.target.reset();
            } else {
                throw ConfigError("eval.target must be a number or \"dataset\"");
            }
        }
    }
    if (cfg.eval.n_samples < 1) throw ConfigError("eval.n_samples must be positive");

    if (j.contains("seeds")) {
        const json& s = j.at("seeds");
        require_object(s, "seeds");
        check_keys(s, "seeds", {"data", "train", "sample"});
        cfg.seeds.data = get_or(s, "seeds", "data", cfg.seeds.data);
        cfg.seeds.train = get_or(s, "seeds", "train", cfg.seeds.train);
        cfg.seeds.sample = get_or(s, "seeds", "sample", cfg.seeds.sample);
    }

    cfg.out = get_or<std::string>(j, "config", "out", cfg.out);
    if (cfg.out.empty()) throw ConfigError("out must not be empty");

    build_schedule(cfg.schedule); // endpoint validation happens here
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    json j = json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded()) throw ConfigError(path + " is not valid JSON");
    try {
        return parse_experiment_config(j);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
    NoiseSchedule sched = build_schedule(cfg.schedule);
    json j;
    j["task"] = {{"name", cfg.task.name}, {"n_train", cfg.task.n_train}};
    j["schedule"] = {{"T", cfg.schedule.T},
                     {"beta_min", sched.betas(0)},
                     {"beta_max", sched.betas(sched.T - 1)}};
    j["score_model"] = {{"hidden", cfg.score_model.hidden},
                        {"activation", activation_name(cfg.score_model.activation)},
                        {"conditional", cfg.score_model.conditional},
                        {"p_drop", cfg.score_model.p_drop},
                        {"epochs", cfg.score_model.epochs},
                        {"batch_size", cfg.score_model.batch_size},
                        {"lr", cfg.score_model.lr}};
    j["time_predictor"] = {
        {"hidden", cfg.time_predictor.hidden},
        {"activation", activation_name(cfg.time_predictor.activation)},
        {"feature_mode", feature_mode_name(cfg.time_predictor.feature_mode)},
        {"conditional", cfg.time_predictor.conditional},
        {"epochs", cfg.time_predictor.epochs},
        {"batch_size", cfg.time_predictor.batch_size},
        {"lr", cfg.time_predictor.lr},
        {"holdout_fraction", cfg.time_predictor.holdout_fraction}};
    j["sampler"] = {{"method", method_name(cfg.sampler.method)},
                    {"z", cfg.sampler.z},
                    {"delta", cfg.sampler.delta},
                    {"t_tcs", cfg.sampler.t_tcs},
                    {"t_og", cfg.sampler.t_og},
                    {"t_og_end", cfg.sampler.t_og_end},
                    {"w", cfg.sampler.w},
                    {"prediction_mode", prediction_mode_name(cfg.sampler.prediction_mode)},
                    {"snapshot_stride", cfg.sampler.snapshot_stride},
                    {"guidance",
                     {{"m", cfg.sampler.guidance.m},
                      {"sigma", cfg.sampler.guidance.sigma},
                      {"kappa", cfg.sampler.guidance.kappa},
                      {"mode", gradient_mode_name(cfg.sampler.guidance.mode)},
                      {"k", cfg.sampler.guidance.k},
                      {"h", cfg.sampler.guidance.h}}}};
    if (cfg.eval.target.has_value())
        j["eval"] = {{"n_samples", cfg.eval.n_samples}, {"target", *cfg.eval.target}};
    else
        j["eval"] = {{"n_samples", cfg.eval.n_samples}, {"target", "dataset"}};
    j["seeds"] = {{"data", cfg.seeds.data},
                  {"train", cfg.seeds.train},
                  {"sample", cfg.seeds.sample}};
    j["out"] = cfg.out;
    return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
    // The output directory is plumbing, not an experiment setting: the same
    // experiment written elsewhere keeps its identity.
    nlohmann::json j = experiment_config_to_json(cfg);
    j.erase("out");
    return fnv1a64_hex(j.dump());
}

void apply_env_overrides(ExperimentConfig& cfg) {
    cfg.seeds.data = env_u64("TACS_SEED_DATA", cfg.seeds.data);
    cfg.seeds.train = env_u64("TACS_SEED_TRAIN", cfg.seeds.train);
    cfg.seeds.sample = env_u64("TACS_SEED_SAMPLE", cfg.seeds.sample);
    const char* out = std::getenv("TACS_OUT");
    if (out != nullptr && *out != '\0') cfg.out = out;
}

NoiseSchedule build_schedule(const ScheduleConfig& cfg) {
    if (cfg.T < 1) throw ConfigError("schedule.T must be at least 1");
    double lo = cfg.beta_min;
    double hi = cfg.beta_max;
    if (lo < 0.0) lo = 1e-4 * (1000.0 / cfg.T);
    if (hi < 0.0) hi = 2e-2 * (1000.0 / cfg.T);
    if (cfg.beta_min < 0.0 || cfg.beta_max < 0.0) {
        if (hi >= 1.0 || lo <= 0.0)
            throw ConfigError("derived beta endpoints leave (0, 1) at T = " +
                              std::to_string(cfg.T) + "; set them explicitly");
    }
    return build_linear_schedule(cfg.T, lo, hi);
}

} // namespace tacs
