#include "tacs/timepred.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tacs/errors.hpp"

namespace tacs {

Eigen::VectorXd featurize_invariant(const PointSet& x) {
    if (x.cols() != 3) throw ConfigError("featurize_invariant: D = 3 required");
    if (x.rows() < 2) throw ConfigError("featurize_invariant: need at least 2 atoms");
    const int M = static_cast<int>(x.rows());
    PointSet y = project_zero_com(x);

    std::vector<double> dists;
    dists.reserve(M * (M - 1) / 2);
    for (int i = 0; i < M; ++i)
        for (int j = i + 1; j < M; ++j) dists.push_back((y.row(i) - y.row(j)).norm());
    std::sort(dists.begin(), dists.end());

    std::vector<double> norms(M);
    for (int i = 0; i < M; ++i) norms[i] = y.row(i).norm();
    std::sort(norms.begin(), norms.end());

    Eigen::VectorXd f(static_cast<int>(dists.size()) + M + 1);
    int k = 0;
    for (double d : dists) f(k++) = d;
    for (double n : norms) f(k++) = n;
    f(k) = y.squaredNorm() / M;
    return f;
}

int feature_count(FeatureMode mode, int atom_count, int dim) {
    if (mode == FeatureMode::Invariant3d) return atom_count * (atom_count - 1) / 2 + atom_count + 1;
    return atom_count * dim;
}

namespace {

Eigen::VectorXd features_for(const TimePredictor& tp, const PointSet& x,
                             const Eigen::VectorXd* condition) {
    if (x.rows() != tp.atom_count || x.cols() != tp.dim)
        throw ConfigError("time predictor: state shape mismatch");
    Eigen::VectorXd base = tp.feature_mode == FeatureMode::Invariant3d
                               ? featurize_invariant(x)
                               : flatten(x);
    if (!tp.conditional) {
        if (condition) throw ConfigError("time predictor: condition given to an unconditional predictor");
        return base;
    }
    if (!condition) throw ConfigError("time predictor: conditional predictor needs a condition");
    if (condition->size() != tp.condition_dim)
        throw ConfigError("time predictor: condition size mismatch");
    Eigen::VectorXd f(base.size() + tp.condition_dim);
    f << base, *condition;
    return f;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    Eigen::ArrayXd a = (logits.array() - logits.maxCoeff()).exp();
    return (a / a.sum()).matrix();
}

} // namespace

TimePredictor make_time_predictor(int T, int atom_count, int dim,
                                  const std::vector<int>& hidden, Activation act,
                                  FeatureMode mode, bool conditional,
                                  int condition_dim, Rng& rng) {
    if (T < 1) throw ConfigError("make_time_predictor: T >= 1 required");
    if (mode == FeatureMode::Invariant3d && dim != 3)
        throw ConfigError("make_time_predictor: invariant features need D = 3");
    TimePredictor tp;
    tp.T = T;
    tp.atom_count = atom_count;
    tp.dim = dim;
    tp.feature_mode = mode;
    tp.conditional = conditional;
    tp.condition_dim = conditional ? condition_dim : 0;
    std::vector<int> sizes;
    sizes.push_back(feature_count(mode, atom_count, dim) + tp.condition_dim);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(T);
    tp.net = make_mlp(sizes, act, rng);
    return tp;
}

Eigen::VectorXd time_logits(const TimePredictor& tp, const PointSet& x,
                            const Eigen::VectorXd* condition) {
    return forward(tp.net, features_for(tp, x, condition));
}

int predict_from_logits(const Eigen::VectorXd& logits, PredictionMode mode) {
    const int T = static_cast<int>(logits.size());
    if (T < 1) throw ConfigError("predict_from_logits: empty logits");
    if (mode == PredictionMode::Argmax) {
        int best = 0;
        for (int i = 1; i < T; ++i)
            if (logits(i) > logits(best)) best = i; // strict: ties keep the smaller t
        return best + 1;
    }
    Eigen::VectorXd p = softmax(logits);
    double mean = 0.0;
    for (int i = 0; i < T; ++i) mean += p(i) * (i + 1);
    const int rounded = static_cast<int>(std::floor(mean + 0.5)); // half rounds up
    return std::clamp(rounded, 1, T);
}

int predict_time(const TimePredictor& tp, const PointSet& x, PredictionMode mode,
                 const Eigen::VectorXd* condition) {
    return predict_from_logits(time_logits(tp, x, condition), mode);
}

int clip_time(int t_pred, int t, int delta, int T) {
    if (delta < 0) throw ConfigError("clip_time: delta >= 0 required");
    if (t < 1 || t > T) throw ConfigError("clip_time: t out of 1..T");
    return std::clamp(std::clamp(t_pred, t - delta, t + delta), 1, T);
}

namespace {

void check_tp_dataset(const TimePredictor& tp, const std::vector<PointSet>& x0,
                      const Eigen::MatrixXd* conditions) {
    if (x0.empty()) throw ConfigError("time predictor: empty dataset");
    if (tp.conditional) {
        if (!conditions) throw ConfigError("time predictor: conditional predictor needs conditions");
        if (conditions->rows() != static_cast<Eigen::Index>(x0.size()) ||
            conditions->cols() != tp.condition_dim)
            throw ConfigError("time predictor: conditions shape mismatch");
    } else if (conditions) {
        throw ConfigError("time predictor: conditions given to an unconditional predictor");
    }
}

} // namespace

TimePredictorTrainResult train_time_predictor(TimePredictor& tp,
                                              const std::vector<PointSet>& x0,
                                              const Eigen::MatrixXd* conditions,
                                              const NoiseSchedule& sched,
                                              const TimePredictorTrainConfig& cfg) {
    check_tp_dataset(tp, x0, conditions);
    if (sched.T != tp.T) throw ConfigError("train_time_predictor: schedule T != predictor T");
    if (cfg.epochs < 1 || cfg.batch_size < 1) throw ConfigError("train_time_predictor: bad budget");
    if (cfg.holdout_fraction < 0.0 || cfg.holdout_fraction >= 1.0)
        throw ConfigError("train_time_predictor: holdout_fraction out of [0,1)");

    Rng rng(cfg.seed);
    const int n = static_cast<int>(x0.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
    const int n_holdout = static_cast<int>(std::lround(cfg.holdout_fraction * n));
    std::vector<int> holdout(order.begin(), order.begin() + n_holdout);
    std::vector<int> train(order.begin() + n_holdout, order.end());
    if (train.empty()) throw ConfigError("train_time_predictor: holdout leaves no training data");

    AdamState adam = make_adam(tp.net, cfg.lr);
    const int n_train = static_cast<int>(train.size());
    TimePredictorTrainResult result;

    Eigen::MatrixXd X, G;
    std::vector<int> labels;
    Mlp last_good = tp.net;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = n_train - 1; i > 0; --i) std::swap(train[i], train[rng.uniform_int(0, i)]);
        double epoch_loss = 0.0;
        bool blew_up = false;
        for (int start = 0; start < n_train; start += cfg.batch_size) {
            const int B = std::min(cfg.batch_size, n_train - start);
            X.resize(B, tp.net.input_dim());
            labels.assign(B, 0);
            for (int b = 0; b < B; ++b) {
                const int i = train[start + b];
                const int t = rng.uniform_int(1, sched.T);
                PointSet eps = sample_subspace_gaussian(tp.atom_count, tp.dim, rng);
                PointSet x_t = forward_perturb(x0[i], t, eps, sched);
                Eigen::VectorXd cond_row;
                const Eigen::VectorXd* cond = nullptr;
                if (tp.conditional) {
                    cond_row = conditions->row(i).transpose();
                    cond = &cond_row;
                }
                X.row(b) = features_for(tp, x_t, cond).transpose();
                labels[b] = t;
            }
            ForwardCache cache;
            Eigen::MatrixXd logits = forward(tp.net, X, &cache);
            G.resize(B, tp.T);
            for (int b = 0; b < B; ++b) {
                Eigen::VectorXd p = softmax(logits.row(b).transpose());
                epoch_loss += -std::log(std::max(p(labels[b] - 1), 1e-300));
                p(labels[b] - 1) -= 1.0;
                G.row(b) = p.transpose() / B;
            }
            if (!std::isfinite(epoch_loss)) {
                blew_up = true;
                break;
            }
            MlpGrads grads = backward(tp.net, cache, G);
            adam_step(tp.net, grads, adam);
        }
        if (blew_up) {
            tp.net = last_good;
            result.aborted = true;
            break;
        }
        result.loss_curve.push_back(epoch_loss / n_train);
        last_good = tp.net;
    }

    if (!holdout.empty()) {
        std::vector<PointSet> hx;
        hx.reserve(holdout.size());
        Eigen::MatrixXd hc(holdout.size(), tp.condition_dim);
        for (size_t i = 0; i < holdout.size(); ++i) {
            hx.push_back(x0[holdout[i]]);
            if (tp.conditional) hc.row(i) = conditions->row(holdout[i]);
        }
        result.holdout_profile =
            accuracy_profile(tp, hx, tp.conditional ? &hc : nullptr, sched,
                             decile_bands(tp.T), 5, rng);
    }
    return result;
}

std::vector<BandAccuracy> accuracy_from_records(
    const std::vector<std::pair<int, int>>& records,
    const std::vector<std::pair<int, int>>& bands, int within_delta) {
    std::vector<BandAccuracy> out;
    for (auto [lo, hi] : bands) {
        if (lo > hi) throw ConfigError("accuracy_from_records: band lo > hi");
        BandAccuracy acc;
        acc.lo = lo;
        acc.hi = hi;
        long top1 = 0, within = 0;
        for (auto [t, pred] : records) {
            if (t < lo || t > hi) continue;
            acc.count += 1;
            if (pred == t) top1 += 1;
            if (std::abs(pred - t) <= within_delta) within += 1;
        }
        if (acc.count > 0) {
            acc.top1 = static_cast<double>(top1) / acc.count;
            acc.within_delta = static_cast<double>(within) / acc.count;
        }
        out.push_back(acc);
    }
    return out;
}

std::vector<BandAccuracy> accuracy_profile(const TimePredictor& tp,
                                           const std::vector<PointSet>& x0,
                                           const Eigen::MatrixXd* conditions,
                                           const NoiseSchedule& sched,
                                           const std::vector<std::pair<int, int>>& bands,
                                           int within_delta, Rng& rng) {
    check_tp_dataset(tp, x0, conditions);
    std::vector<std::pair<int, int>> records;
    records.reserve(x0.size() * sched.T);
    for (size_t i = 0; i < x0.size(); ++i) {
        Eigen::VectorXd cond_row;
        const Eigen::VectorXd* cond = nullptr;
        if (tp.conditional) {
            cond_row = conditions->row(i).transpose();
            cond = &cond_row;
        }
        for (int t = 1; t <= sched.T; ++t) {
            PointSet eps = sample_subspace_gaussian(tp.atom_count, tp.dim, rng);
            PointSet x_t = forward_perturb(x0[i], t, eps, sched);
            records.emplace_back(t, predict_time(tp, x_t, PredictionMode::Argmax, cond));
        }
    }
    return accuracy_from_records(records, bands, within_delta);
}

std::vector<std::pair<int, int>> decile_bands(int T) {
    if (T < 10) return {{1, T}};
    std::vector<std::pair<int, int>> bands;
    for (int d = 0; d < 10; ++d) {
        const int lo = d * T / 10 + 1;
        const int hi = (d + 1) * T / 10;
        bands.emplace_back(lo, hi);
    }
    return bands;
}

const char* feature_mode_name(FeatureMode mode) {
    switch (mode) {
    case FeatureMode::Invariant3d: return "invariant3d";
    case FeatureMode::RawVector: return "raw_vector";
    }
    throw ConfigError("unknown feature mode");
}

FeatureMode parse_feature_mode(const std::string& name) {
    if (name == "invariant3d") return FeatureMode::Invariant3d;
    if (name == "raw_vector") return FeatureMode::RawVector;
    throw ConfigError("unknown feature mode '" + name + "'");
}

const char* prediction_mode_name(PredictionMode mode) {
    switch (mode) {
    case PredictionMode::Argmax: return "argmax";
    case PredictionMode::Expectation: return "expectation";
    }
    throw ConfigError("unknown prediction mode");
}

PredictionMode parse_prediction_mode(const std::string& name) {
    if (name == "argmax") return PredictionMode::Argmax;
    if (name == "expectation") return PredictionMode::Expectation;
    throw ConfigError("unknown prediction mode '" + name + "'");
}

} // namespace tacs
