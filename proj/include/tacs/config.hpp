#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tacs/samplers.hpp"

namespace tacs {

struct TaskConfig {
    std::string name = "sphere";
    int n_train = 5000;
};

struct ScheduleConfig {
    int T = 100;
    // Negative means "derive from T": endpoints 1e-4 and 2e-2 scaled by
    // 1000/T, which keeps bar_alpha_T at the same near-zero level the
    // T = 1000 schedule reaches. Derivation refuses T where the scaled
    // beta_max leaves (0, 1); such schedules need explicit endpoints.
    double beta_min = -1.0;
    double beta_max = -1.0;
};

struct ScoreModelConfig {
    std::vector<int> hidden = {128, 128};
    Activation activation = Activation::SmoothElu;
    bool conditional = true;
    double p_drop = 0.1;
    int epochs = 60;
    int batch_size = 64;
    double lr = 1e-3;
};

struct TimePredictorConfig {
    std::vector<int> hidden = {128, 128};
    Activation activation = Activation::SmoothElu;
    FeatureMode feature_mode = FeatureMode::Invariant3d;
    bool conditional = false;
    int epochs = 40;
    int batch_size = 64;
    double lr = 1e-3;
    double holdout_fraction = 0.2;
};

struct EvalBlockConfig {
    int n_samples = 500;
    // Empty: per-chain targets resampled from the dataset labels
    // ("target": "dataset"). Set: one fixed target for every chain.
    std::optional<double> target;
};

struct SeedConfig {
    std::uint64_t data = 1;
    std::uint64_t train = 2;
    std::uint64_t sample = 3;
};

struct ExperimentConfig {
    TaskConfig task;
    ScheduleConfig schedule;
    ScoreModelConfig score_model;
    TimePredictorConfig time_predictor;
    SamplerConfig sampler;
    EvalBlockConfig eval;
    SeedConfig seeds;
    std::string out = "out";
};

ExperimentConfig default_experiment_config();

// Strict: unknown keys anywhere are errors, as are out-of-range values.
// Sampler window fields given as -1 (or omitted) resolve to the
// default_sampler_config values for the configured T.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

// Fully resolved canonical form: every field present, defaults expanded.
// config_hash digests its compact dump (keys sorted) with the output
// directory removed, so relocating an experiment keeps its identity.
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

// TACS_SEED_DATA / TACS_SEED_TRAIN / TACS_SEED_SAMPLE / TACS_OUT. Seeds and
// the output directory are the only fields the environment may override;
// command-line flags still win over these.
void apply_env_overrides(ExperimentConfig& cfg);

NoiseSchedule build_schedule(const ScheduleConfig& cfg);

} // namespace tacs
