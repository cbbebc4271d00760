#include "tacs/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "tacs/errors.hpp"

namespace tacs {

namespace {

void maybe_snapshot(TrajectoryStep& step, const PointSet& x, int t, int T, int stride) {
    if (stride > 0 && (T - t + 1) % stride == 0) step.snapshot = x;
}

PointSet policy_score(const ScoreModel& model, const PointSet& x, int t,
                      const NoiseSchedule& sched, const Eigen::VectorXd* condition,
                      double w) {
    if (condition != nullptr) return cfg_score(model, x, t, sched, *condition, w);
    return score_at(model, x, t, sched);
}

DriftRow finish_drift_row(int t, double sum, double sumsq, long n) {
    DriftRow row;
    row.t = t;
    row.n = n;
    row.mean = sum / static_cast<double>(n);
    if (n >= 2) {
        double var = (sumsq - static_cast<double>(n) * row.mean * row.mean) /
                     static_cast<double>(n - 1);
        row.stddev = std::sqrt(std::max(0.0, var));
    }
    return row;
}

} // namespace

const char* method_name(Method m) {
    switch (m) {
    case Method::Ancestral: return "ancestral";
    case Method::Cfg: return "cfg";
    case Method::Og: return "og";
    case Method::Tcs: return "tcs";
    case Method::Tacs: return "tacs";
    }
    throw ConfigError("unknown sampler method");
}

Method parse_method(const std::string& name) {
    if (name == "ancestral") return Method::Ancestral;
    if (name == "cfg") return Method::Cfg;
    if (name == "og") return Method::Og;
    if (name == "tcs") return Method::Tcs;
    if (name == "tacs") return Method::Tacs;
    throw ConfigError("unknown sampler method '" + name + "'");
}

SamplerConfig default_sampler_config(Method method, int T) {
    if (T < 1) throw ConfigError("sampler defaults need T >= 1");
    SamplerConfig cfg;
    cfg.method = method;
    cfg.t_tcs = static_cast<int>(std::lround(0.6 * T));
    cfg.t_og = cfg.t_tcs;
    cfg.t_og_end = static_cast<int>(std::lround(0.02 * T));
    cfg.delta = std::max(1, static_cast<int>(std::lround(0.01 * T)));
    cfg.z = 1.0;
    return cfg;
}

void validate_sampler_config(const SamplerConfig& cfg, int T) {
    if (!std::isfinite(cfg.w)) throw ConfigError("w must be finite");
    if (!std::isfinite(cfg.z)) throw ConfigError("z must be finite");
    if (cfg.delta < 0) throw ConfigError("delta must be nonnegative");
    if (cfg.t_tcs < 0 || cfg.t_tcs > T) throw ConfigError("t_tcs must lie in 0..T");
    if (cfg.t_og < 0 || cfg.t_og > T) throw ConfigError("t_og must lie in 0..T");
    if (cfg.t_og_end < 0 || cfg.t_og_end > T)
        throw ConfigError("t_og_end must lie in 0..T");
    if (cfg.snapshot_stride < 0) throw ConfigError("snapshot_stride must be nonnegative");
    if (cfg.guidance.m < 1) throw ConfigError("guidance m must be at least 1");
    if (!(cfg.guidance.sigma >= 0.0)) throw ConfigError("guidance sigma must be nonnegative");
    if (!(cfg.guidance.kappa > 0.0)) throw ConfigError("guidance kappa must be positive");
    if (!(cfg.guidance.h > 0.0)) throw ConfigError("guidance h must be positive");
    if (cfg.guidance.k < 0) throw ConfigError("guidance k must be nonnegative");
}

PointSet reverse_step_from_score(const PointSet& x_t, int t, const PointSet& score,
                                 const NoiseSchedule& sched, Rng& rng) {
    if (t < 1 || t > sched.T) throw ConfigError("reverse step needs t in 1..T");
    if (score.rows() != x_t.rows() || score.cols() != x_t.cols())
        throw ConfigError("score shape does not match the state");
    double beta = sched.beta(t);
    PointSet mean = (x_t + beta * score) / std::sqrt(sched.alpha(t));
    if (t == 1) return mean;
    double beta_tilde = beta * (1.0 - sched.bar(t - 1)) / (1.0 - sched.bar(t));
    PointSet eps = sample_subspace_gaussian(static_cast<int>(x_t.rows()),
                                            static_cast<int>(x_t.cols()), rng);
    return mean + std::sqrt(beta_tilde) * eps;
}

PointSet reverse_step(const ScoreModel& model, const PointSet& x_t, int t,
                      const NoiseSchedule& sched, Rng& rng,
                      const Eigen::VectorXd* condition, double w) {
    return reverse_step_from_score(x_t, t, policy_score(model, x_t, t, sched, condition, w),
                                   sched, rng);
}

ChainResult sample_plain(const ScoreModel& model, const NoiseSchedule& sched,
                         const SamplerConfig& cfg, Rng& rng,
                         const Eigen::VectorXd* condition) {
    validate_sampler_config(cfg, sched.T);
    ChainResult res;
    res.trajectory.steps.reserve(static_cast<std::size_t>(sched.T));
    PointSet x = sample_subspace_gaussian(model.atom_count, model.dim, rng);
    for (int t = sched.T; t >= 1; --t) {
        TrajectoryStep step;
        step.t = t;
        x = reverse_step(model, x, t, sched, rng, condition, cfg.w);
        maybe_snapshot(step, x, t, sched.T, cfg.snapshot_stride);
        res.trajectory.steps.push_back(std::move(step));
    }
    res.sample = std::move(x);
    return res;
}

std::vector<PointSet> sample_ancestral(const ScoreModel& model, const NoiseSchedule& sched,
                                       int n, Rng& rng, const Eigen::MatrixXd* conditions,
                                       double w) {
    if (n < 0) throw ConfigError("chain count must be nonnegative");
    if (conditions != nullptr) {
        if (conditions->rows() != n)
            throw ConfigError("condition rows must match the chain count");
        if (conditions->cols() != model.condition_dim)
            throw ConfigError("condition width does not match the model");
    }
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n));
    for (auto& s : seeds) s = rng.next_u64();

    std::vector<PointSet> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng chain_rng(seeds[static_cast<std::size_t>(i)]);
        Eigen::VectorXd c;
        const Eigen::VectorXd* cp = nullptr;
        if (conditions != nullptr) {
            c = conditions->row(i).transpose();
            cp = &c;
        }
        PointSet x = sample_subspace_gaussian(model.atom_count, model.dim, chain_rng);
        for (int t = sched.T; t >= 1; --t)
            x = reverse_step(model, x, t, sched, chain_rng, cp, w);
        out[static_cast<std::size_t>(i)] = std::move(x);
    }
    return out;
}

ChainResult sample_og(const ScoreModel& model, const NoiseSchedule& sched,
                      const PropertyEstimator& prop, const Eigen::VectorXd& target_c,
                      const SamplerConfig& cfg, Rng& rng) {
    validate_sampler_config(cfg, sched.T);
    const Eigen::VectorXd* cond = model.conditional ? &target_c : nullptr;

    ChainResult res;
    res.trajectory.steps.reserve(static_cast<std::size_t>(sched.T));
    PointSet x = sample_subspace_gaussian(model.atom_count, model.dim, rng);
    for (int t = sched.T; t >= 1; --t) {
        TrajectoryStep step;
        step.t = t;
        // z = 0 must take the exact code path of the unguided sampler, so the
        // gradient (and any randomness it would consume) is skipped outright.
        bool guided = cfg.z != 0.0 && t >= cfg.t_og_end && t <= cfg.t_og;
        if (guided) {
            PointSet g;
            try {
                g = clip_gradient(og_gradient(x, t, target_c, model, sched, prop,
                                              cfg.guidance, rng, cond, cfg.w),
                                  cfg.guidance.kappa);
            } catch (const NumericalError&) {
                step.fallback = true;
                ++res.trajectory.fallback_count;
            }
            if (step.fallback) {
                x = reverse_step(model, x, t, sched, rng, cond, cfg.w);
            } else {
                step.guidance_norm = g.norm();
                PointSet s = policy_score(model, x, t, sched, cond, cfg.w);
                x = reverse_step_from_score(x, t, s + cfg.z * g, sched, rng);
            }
        } else {
            x = reverse_step(model, x, t, sched, rng, cond, cfg.w);
        }
        maybe_snapshot(step, x, t, sched.T, cfg.snapshot_stride);
        res.trajectory.steps.push_back(std::move(step));
    }
    res.sample = std::move(x);
    return res;
}

ChainResult sample_tacs(const ScoreModel& model, const TimePredictor& tp,
                        const NoiseSchedule& sched, const PropertyEstimator* prop,
                        const Eigen::VectorXd& target_c, const SamplerConfig& cfg,
                        Rng& rng) {
    validate_sampler_config(cfg, sched.T);
    if (tp.T != sched.T)
        throw ConfigError("time predictor bins do not match the schedule");
    double z = cfg.method == Method::Tcs ? 0.0 : cfg.z;
    const Eigen::VectorXd* cond = model.conditional ? &target_c : nullptr;
    const Eigen::VectorXd* tp_cond = tp.conditional ? &target_c : nullptr;

    ChainResult res;
    res.trajectory.steps.reserve(static_cast<std::size_t>(sched.T));
    PointSet x = sample_subspace_gaussian(model.atom_count, model.dim, rng);
    for (int t = sched.T; t >= 1; --t) {
        TrajectoryStep step;
        step.t = t;
        if (t > cfg.t_tcs) {
            x = reverse_step(model, x, t, sched, rng, cond, cfg.w);
        } else {
            bool guided =
                z != 0.0 && prop != nullptr && t >= cfg.t_og_end && t <= cfg.t_og;
            PointSet x_in = x;
            if (guided) {
                try {
                    PointSet g =
                        clip_gradient(og_gradient(x, t, target_c, model, sched, *prop,
                                                  cfg.guidance, rng, cond, cfg.w),
                                      cfg.guidance.kappa);
                    step.guidance_norm = g.norm();
                    x_in = x + z * g;
                } catch (const NumericalError&) {
                    step.fallback = true;
                    ++res.trajectory.fallback_count;
                }
            }
            int t_hat = clip_time(predict_time(tp, x_in, cfg.prediction_mode, tp_cond), t,
                                  cfg.delta, sched.T);
            step.t_pred = t_hat;
            PointSet s = policy_score(model, x_in, t_hat, sched, cond, cfg.w);
            PointSet x0 = tweedie(x_in, t_hat, s, sched);
            // The fresh perturbation is drawn on every corrected step. At
            // t = 1 the forward map to level 0 multiplies it by zero, but the
            // draw still happens; chain reproducibility depends on it.
            PointSet eps = sample_subspace_gaussian(model.atom_count, model.dim, rng);
            x = forward_perturb(x0, t - 1, eps, sched);
        }
        maybe_snapshot(step, x, t, sched.T, cfg.snapshot_stride);
        res.trajectory.steps.push_back(std::move(step));
    }
    res.sample = std::move(x);
    return res;
}

std::vector<DriftRow> exposure_bias_probe(const ScoreModel& model, const TimePredictor& tp,
                                          const NoiseSchedule& sched, int n, Rng& rng,
                                          double score_scale, PredictionMode mode) {
    if (n < 1) throw ConfigError("probe needs at least one chain");
    if (tp.T != sched.T)
        throw ConfigError("time predictor bins do not match the schedule");
    if (!std::isfinite(score_scale)) throw ConfigError("score_scale must be finite");

    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n));
    for (auto& s : seeds) s = rng.next_u64();

    int T = sched.T;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(T + 1);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(T + 1);
    for (int i = 0; i < n; ++i) {
        Rng chain_rng(seeds[static_cast<std::size_t>(i)]);
        PointSet x = sample_subspace_gaussian(model.atom_count, model.dim, chain_rng);
        for (int t = T; t >= 1; --t) {
            double d = predict_time(tp, x, mode) - t;
            sum(t) += d;
            sumsq(t) += d * d;
            PointSet s = score_scale * score_at(model, x, t, sched);
            x = reverse_step_from_score(x, t, s, sched, chain_rng);
        }
    }

    std::vector<DriftRow> rows;
    rows.reserve(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t) rows.push_back(finish_drift_row(t, sum(t), sumsq(t), n));
    return rows;
}

std::vector<DriftRow> forward_time_drift(const TimePredictor& tp,
                                         const std::vector<PointSet>& x0,
                                         const NoiseSchedule& sched, int reps, Rng& rng,
                                         PredictionMode mode) {
    if (x0.empty()) throw ConfigError("drift table needs at least one sample");
    if (reps < 1) throw ConfigError("reps must be at least 1");
    if (tp.T != sched.T)
        throw ConfigError("time predictor bins do not match the schedule");

    int T = sched.T;
    long n = static_cast<long>(reps) * static_cast<long>(x0.size());
    std::vector<DriftRow> rows;
    rows.reserve(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t) {
        double sum = 0.0;
        double sumsq = 0.0;
        for (int r = 0; r < reps; ++r) {
            for (const PointSet& clean : x0) {
                PointSet eps = sample_subspace_gaussian(static_cast<int>(clean.rows()),
                                                        static_cast<int>(clean.cols()), rng);
                PointSet x_t = forward_perturb(clean, t, eps, sched);
                double d = predict_time(tp, x_t, mode) - t;
                sum += d;
                sumsq += d * d;
            }
        }
        rows.push_back(finish_drift_row(t, sum, sumsq, n));
    }
    return rows;
}

} // namespace tacs
