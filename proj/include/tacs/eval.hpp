#pragma once

#include <optional>

#include "tacs/samplers.hpp"
#include "tacs/tasks.hpp"

namespace tacs {

struct MaeResult {
    double mae = 0.0; // NaN when no sample survived the validity check
    double invalid_rate = 0.0;
    int n_total = 0;
    int n_valid = 0;
};

// Mean absolute error of the true property against per-sample targets
// (componentwise mean for vector conditions). Samples on which the property
// is singular are excluded and counted, not fatal.
MaeResult mae_to_target(const std::vector<PointSet>& samples,
                        const Eigen::MatrixXd& targets, const PropertyEstimator& prop);

struct EvalReport {
    std::string method;
    std::string config_hash;
    int n = 0;
    double mae = 0.0;
    double manifold_l2 = 0.0;
    double invalid_rate = 0.0;
    double fallback_rate = 0.0; // fallback steps / all sampler steps
    std::string per_sample_path;
};

struct PerSampleRow {
    int sample_id = 0;
    std::optional<double> value; // empty when the property is singular there
    double target = 0.0;
    std::optional<double> abs_err;
    double manifold = 0.0;
};

// Everything a sampling run needs besides the sampler knobs: trained models,
// schedule, task, chain count, target policy, and the RNG root. seed_sample
// spawns two streams, one for targets and one for chain seeds, so a fixed
// target override leaves the chains untouched.
struct RunContext {
    const ScoreModel* model = nullptr;
    const TimePredictor* tp = nullptr; // tcs/tacs only
    const NoiseSchedule* sched = nullptr;
    const TaskSpec* task = nullptr;
    int n_chains = 0;
    std::uint64_t seed_sample = 0;
    int jobs = 1;
    std::optional<double> fixed_target;          // constant target when set
    const Eigen::VectorXd* label_pool = nullptr; // resampled otherwise
    std::string config_hash;
};

// n_chains x condition_dim target matrix under the context's target policy.
Eigen::MatrixXd draw_targets(const RunContext& ctx);

// Runs the configured sampler once per target row; chains may execute on
// ctx.jobs threads, results are indexed by chain id either way.
std::vector<ChainResult> run_chains(const RunContext& ctx, const SamplerConfig& cfg,
                                    const Eigen::MatrixXd& targets);

EvalReport evaluate_run(const RunContext& ctx, const SamplerConfig& cfg,
                        const std::vector<ChainResult>& chains,
                        const Eigen::MatrixXd& targets);

std::vector<PerSampleRow> per_sample_table(const TaskSpec& task,
                                           const std::vector<PointSet>& samples,
                                           const Eigen::MatrixXd& targets);

enum class SweepAxis { Z, Delta, M, Sigma, Mode, Target };

const char* sweep_axis_name(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& name);

// base with one knob replaced by the parsed value. A target value instead
// lands in target_override. Rejects values that do not parse for the axis.
SamplerConfig apply_axis_value(const SamplerConfig& base, SweepAxis axis,
                               const std::string& value,
                               std::optional<double>* target_override);

struct SweepCell {
    std::string axis_value;
    std::optional<EvalReport> report; // empty when the cell failed
    std::string error;
};

struct SweepResult {
    SweepAxis axis = SweepAxis::Z;
    std::vector<SweepCell> cells;
};

// One evaluated cell per value under common random numbers: every cell sees
// the same chain seeds and (except on the target axis) the same targets. A
// failing cell records its error and the sweep continues.
SweepResult run_sweep(const RunContext& ctx, const SamplerConfig& base, SweepAxis axis,
                      const std::vector<std::string>& values);

} // namespace tacs
