#include "tacs/eval.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "tacs/errors.hpp"
#include "tacs/parse.hpp"

namespace tacs {

MaeResult mae_to_target(const std::vector<PointSet>& samples,
                        const Eigen::MatrixXd& targets, const PropertyEstimator& prop) {
    int n = static_cast<int>(samples.size());
    if (n < 1) throw ConfigError("mae needs at least one sample");
    if (targets.rows() != n)
        throw ConfigError("target rows do not match the sample count");
    double sum = 0.0;
    int valid = 0;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v;
        try {
            v = prop.evaluate(samples[static_cast<std::size_t>(i)]);
        } catch (const SingularityError&) {
            continue;
        }
        if (v.size() != targets.cols())
            throw ConfigError("property width does not match the targets");
        sum += (v - targets.row(i).transpose()).cwiseAbs().mean();
        ++valid;
    }
    MaeResult r;
    r.n_total = n;
    r.n_valid = valid;
    r.invalid_rate = static_cast<double>(n - valid) / n;
    r.mae = valid > 0 ? sum / valid : std::numeric_limits<double>::quiet_NaN();
    return r;
}

Eigen::MatrixXd draw_targets(const RunContext& ctx) {
    if (ctx.task == nullptr) throw ConfigError("run context has no task");
    if (ctx.n_chains < 1) throw ConfigError("run context needs at least one chain");
    int cdim = ctx.task->property.condition_dim;
    Eigen::MatrixXd targets(ctx.n_chains, cdim);
    // seed_sample fans out into a target stream and a chain stream; cells of
    // a sweep re-derive both, so overriding targets never shifts the chains.
    Rng master(ctx.seed_sample);
    Rng target_rng(master.next_u64());
    if (ctx.fixed_target.has_value()) {
        if (cdim != 1)
            throw ConfigError("fixed scalar target needs a scalar condition");
        targets.setConstant(*ctx.fixed_target);
        return targets;
    }
    if (ctx.label_pool == nullptr || ctx.label_pool->size() == 0)
        throw ConfigError("no fixed target and no label pool to resample");
    if (cdim != 1)
        throw ConfigError("label-pool targets need a scalar condition");
    int pool = static_cast<int>(ctx.label_pool->size());
    for (int i = 0; i < ctx.n_chains; ++i)
        targets(i, 0) = (*ctx.label_pool)(target_rng.uniform_int(0, pool - 1));
    return targets;
}

std::vector<ChainResult> run_chains(const RunContext& ctx, const SamplerConfig& cfg,
                                    const Eigen::MatrixXd& targets) {
    if (ctx.model == nullptr || ctx.sched == nullptr || ctx.task == nullptr)
        throw ConfigError("run context is incomplete");
    validate_sampler_config(cfg, ctx.sched->T);
    int n = ctx.n_chains;
    if (n < 1) throw ConfigError("run context needs at least one chain");
    if (targets.rows() != n)
        throw ConfigError("target rows do not match the chain count");
    bool needs_tp = cfg.method == Method::Tcs || cfg.method == Method::Tacs;
    if (needs_tp && ctx.tp == nullptr)
        throw MissingPrerequisiteError("method '" + std::string(method_name(cfg.method)) +
                                       "' needs a trained time predictor");

    Rng master(ctx.seed_sample);
    master.next_u64(); // the target stream, drawn by draw_targets
    Rng chain_master(master.next_u64());
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n));
    for (auto& s : seeds) s = chain_master.next_u64();

    std::vector<ChainResult> out(static_cast<std::size_t>(n));
    auto run_one = [&](int i) {
        Rng chain_rng(seeds[static_cast<std::size_t>(i)]);
        Eigen::VectorXd target = targets.row(i).transpose();
        ChainResult res;
        switch (cfg.method) {
        case Method::Ancestral:
            res = sample_plain(*ctx.model, *ctx.sched, cfg, chain_rng, nullptr);
            break;
        case Method::Cfg:
            res = sample_plain(*ctx.model, *ctx.sched, cfg, chain_rng, &target);
            break;
        case Method::Og:
            res = sample_og(*ctx.model, *ctx.sched, ctx.task->property, target, cfg,
                            chain_rng);
            break;
        case Method::Tcs:
            res = sample_tacs(*ctx.model, *ctx.tp, *ctx.sched, nullptr, target, cfg,
                              chain_rng);
            break;
        case Method::Tacs:
            res = sample_tacs(*ctx.model, *ctx.tp, *ctx.sched, &ctx.task->property,
                              target, cfg, chain_rng);
            break;
        }
        res.trajectory.seed = seeds[static_cast<std::size_t>(i)];
        res.trajectory.config_hash = ctx.config_hash;
        out[static_cast<std::size_t>(i)] = std::move(res);
    };

    int workers = std::max(1, std::min(ctx.jobs, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) run_one(i);
        return out;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto loop = [&] {
        while (true) {
            int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                run_one(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int k = 0; k < workers; ++k) pool.emplace_back(loop);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

EvalReport evaluate_run(const RunContext& ctx, const SamplerConfig& cfg,
                        const std::vector<ChainResult>& chains,
                        const Eigen::MatrixXd& targets) {
    if (chains.empty()) throw ConfigError("evaluate_run needs at least one chain");
    EvalReport rep;
    rep.method = method_name(cfg.method);
    rep.config_hash = ctx.config_hash;
    rep.n = static_cast<int>(chains.size());

    std::vector<PointSet> samples;
    samples.reserve(chains.size());
    long fallback_steps = 0;
    long total_steps = 0;
    double manifold_sum = 0.0;
    for (const ChainResult& c : chains) {
        samples.push_back(c.sample);
        fallback_steps += c.trajectory.fallback_count;
        total_steps += static_cast<long>(c.trajectory.steps.size());
        manifold_sum += ctx.task->manifold_distance(c.sample);
    }
    MaeResult mr = mae_to_target(samples, targets, ctx.task->property);
    rep.mae = mr.mae;
    rep.invalid_rate = mr.invalid_rate;
    rep.manifold_l2 = manifold_sum / static_cast<double>(chains.size());
    rep.fallback_rate =
        total_steps > 0 ? static_cast<double>(fallback_steps) / total_steps : 0.0;
    return rep;
}

std::vector<PerSampleRow> per_sample_table(const TaskSpec& task,
                                           const std::vector<PointSet>& samples,
                                           const Eigen::MatrixXd& targets) {
    if (targets.rows() != static_cast<Eigen::Index>(samples.size()))
        throw ConfigError("target rows do not match the sample count");
    std::vector<PerSampleRow> rows;
    rows.reserve(samples.size());
    for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
        const PointSet& x = samples[static_cast<std::size_t>(i)];
        PerSampleRow row;
        row.sample_id = i;
        row.target = targets.row(i).mean();
        row.manifold = task.manifold_distance(x);
        try {
            Eigen::VectorXd v = task.property.evaluate(x);
            row.value = v.mean();
            row.abs_err = (v - targets.row(i).transpose()).cwiseAbs().mean();
        } catch (const SingularityError&) {
        }
        rows.push_back(row);
    }
    return rows;
}

const char* sweep_axis_name(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::Z: return "z";
    case SweepAxis::Delta: return "delta";
    case SweepAxis::M: return "m";
    case SweepAxis::Sigma: return "sigma";
    case SweepAxis::Mode: return "mode";
    case SweepAxis::Target: return "target";
    }
    throw ConfigError("unknown sweep axis");
}

SweepAxis parse_sweep_axis(const std::string& name) {
    if (name == "z") return SweepAxis::Z;
    if (name == "delta") return SweepAxis::Delta;
    if (name == "m") return SweepAxis::M;
    if (name == "sigma") return SweepAxis::Sigma;
    if (name == "mode") return SweepAxis::Mode;
    if (name == "target") return SweepAxis::Target;
    throw ConfigError("unknown sweep axis '" + name + "'");
}

SamplerConfig apply_axis_value(const SamplerConfig& base, SweepAxis axis,
                               const std::string& value,
                               std::optional<double>* target_override) {
    SamplerConfig cfg = base;
    switch (axis) {
    case SweepAxis::Z: cfg.z = parse_double(value); break;
    case SweepAxis::Delta: cfg.delta = parse_int(value); break;
    case SweepAxis::M: cfg.guidance.m = parse_int(value); break;
    case SweepAxis::Sigma: cfg.guidance.sigma = parse_double(value); break;
    case SweepAxis::Mode: cfg.prediction_mode = parse_prediction_mode(value); break;
    case SweepAxis::Target:
        if (target_override == nullptr)
            throw ConfigError("target axis needs a target override slot");
        *target_override = parse_double(value);
        break;
    }
    return cfg;
}

SweepResult run_sweep(const RunContext& ctx, const SamplerConfig& base, SweepAxis axis,
                      const std::vector<std::string>& values) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    SweepResult result;
    result.axis = axis;
    Eigen::MatrixXd base_targets = draw_targets(ctx);
    for (const std::string& value : values) {
        SweepCell cell;
        cell.axis_value = value;
        try {
            std::optional<double> target_override;
            SamplerConfig cfg = apply_axis_value(base, axis, value, &target_override);
            Eigen::MatrixXd targets = base_targets;
            if (target_override.has_value()) {
                if (targets.cols() != 1)
                    throw ConfigError("scalar target override needs a scalar condition");
                targets.setConstant(*target_override);
            }
            std::vector<ChainResult> chains = run_chains(ctx, cfg, targets);
            cell.report = evaluate_run(ctx, cfg, chains, targets);
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
        result.cells.push_back(std::move(cell));
    }
    return result;
}

} // namespace tacs
