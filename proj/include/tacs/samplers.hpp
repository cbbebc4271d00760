#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tacs/guidance.hpp"
#include "tacs/timepred.hpp"

namespace tacs {

enum class Method { Ancestral, Cfg, Og, Tcs, Tacs };

const char* method_name(Method m);
Method parse_method(const std::string& name);

// Window semantics: time correction runs whenever t <= t_tcs; guidance
// additionally needs t_og_end <= t <= t_og (and z != 0). Outside the
// correction window the chain takes plain reverse steps.
struct SamplerConfig {
    Method method = Method::Ancestral;
    double w = 0.0; // CFG weight; only used when the model is conditional
    double z = 1.0; // guidance scale
    int delta = 1;  // time-prediction clip radius
    int t_tcs = 0;
    int t_og = 0;
    int t_og_end = 0;
    GuidanceConfig guidance;
    PredictionMode prediction_mode = PredictionMode::Argmax;
    int snapshot_stride = 0; // 0: no snapshots; s: record the state every s steps
};

// t_tcs = t_og = 0.6 T, t_og_end = 0.02 T, delta = 0.01 T (at least 1),
// z = 1, kappa = 1.
SamplerConfig default_sampler_config(Method method, int T);

void validate_sampler_config(const SamplerConfig& cfg, int T);

struct TrajectoryStep {
    int t = 0;
    std::optional<int> t_pred;           // clipped value actually used
    std::optional<double> guidance_norm; // after clipping; empty when unguided
    bool fallback = false;
    std::optional<PointSet> snapshot; // state after this step, when recorded
};

struct TrajectoryRecord {
    std::vector<TrajectoryStep> steps; // exactly T entries, t = T down to 1
    int fallback_count = 0;
    // Provenance, filled by the batch runner rather than the samplers.
    std::uint64_t seed = 0;
    std::string config_hash;
};

struct ChainResult {
    PointSet sample;
    TrajectoryRecord trajectory;
};

// One ancestral DDPM step: mu = (x_t + beta_t score) / sqrt(alpha_t), plus
// sqrt(beta_tilde_t) subspace noise, where beta_tilde_t =
// beta_t (1 - bar_alpha_{t-1}) / (1 - bar_alpha_t). No noise at t = 1.
PointSet reverse_step_from_score(const PointSet& x_t, int t, const PointSet& score,
                                 const NoiseSchedule& sched, Rng& rng);

// Score policy shared by every sampler here: cfg_score(condition, w) when a
// condition is given on a conditional model, plain score_at otherwise.
PointSet reverse_step(const ScoreModel& model, const PointSet& x_t, int t,
                      const NoiseSchedule& sched, Rng& rng,
                      const Eigen::VectorXd* condition = nullptr, double w = 0.0);

// Single reverse chain with a trajectory record: the ancestral sampler when
// condition is null (the null token on conditional models), the CFG sampler
// with weight cfg.w otherwise. Guidance and time-correction knobs are
// ignored.
ChainResult sample_plain(const ScoreModel& model, const NoiseSchedule& sched,
                         const SamplerConfig& cfg, Rng& rng,
                         const Eigen::VectorXd* condition = nullptr);

// n independent chains from x_T ~ subspace Gaussian. Chain seeds are drawn
// from rng up front, so results do not depend on evaluation order.
// conditions (n x condition_dim) turns this into the CFG sampler.
std::vector<PointSet> sample_ancestral(const ScoreModel& model,
                                       const NoiseSchedule& sched, int n, Rng& rng,
                                       const Eigen::MatrixXd* conditions = nullptr,
                                       double w = 0.0);

// Online-guidance chain: inside the guidance window the reverse update uses
// score + z * clip(og_gradient). A guidance failure (non-finite gradient,
// singular property) falls back to the unguided update for that step and is
// counted. z = 0 consumes randomness identically to sample_ancestral.
ChainResult sample_og(const ScoreModel& model, const NoiseSchedule& sched,
                      const PropertyEstimator& prop, const Eigen::VectorXd& target_c,
                      const SamplerConfig& cfg, Rng& rng);

// Time-corrected chain. Inside the correction window (t <= t_tcs):
//   g     = clip(og_gradient)        [guidance window only]
//   x'    = x_t + z g
//   t_hat = clip_time(predict_time(x'), t, delta)
//   x0'   = tweedie(x', t_hat, score(x', t_hat))
//   x_{t-1} = forward_perturb(x0', t-1, fresh eps)
// A fresh eps is drawn on every corrected step, including t = 1 where the
// forward map to t-1 = 0 ignores it. prop may be null when z = 0 (plain
// TCS). Method Tcs is exactly this with z forced to 0.
ChainResult sample_tacs(const ScoreModel& model, const TimePredictor& tp,
                        const NoiseSchedule& sched, const PropertyEstimator* prop,
                        const Eigen::VectorXd& target_c, const SamplerConfig& cfg,
                        Rng& rng);

struct DriftRow {
    int t = 0;
    double mean = 0.0;
    std::optional<double> stddev; // empty when fewer than 2 observations
    long n = 0;
};

// Predictor drift t_pred - t measured on the states of n unconditional
// reverse chains, one row per timestep. score_scale != 1 deliberately
// corrupts the sampler (e.g. 1.5 for the exposure-bias comparison).
std::vector<DriftRow> exposure_bias_probe(const ScoreModel& model,
                                          const TimePredictor& tp,
                                          const NoiseSchedule& sched, int n, Rng& rng,
                                          double score_scale = 1.0,
                                          PredictionMode mode = PredictionMode::Expectation);

// The same drift table on forward-noised data, i.e. with no sampler error:
// reps draws of (x0, eps) per timestep.
std::vector<DriftRow> forward_time_drift(const TimePredictor& tp,
                                         const std::vector<PointSet>& x0,
                                         const NoiseSchedule& sched, int reps, Rng& rng,
                                         PredictionMode mode = PredictionMode::Expectation);

} // namespace tacs
