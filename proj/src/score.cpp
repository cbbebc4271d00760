#include "tacs/score.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tacs/errors.hpp"

namespace tacs {

namespace {

int input_width(bool conditional, int coord_dim, int condition_dim) {
    return coord_dim + kTimeFeatureCount + (conditional ? condition_dim + 1 : 0);
}

void check_state(const ScoreModel& m, const PointSet& x_t) {
    if (x_t.rows() != m.atom_count || x_t.cols() != m.dim)
        throw ConfigError("score model: state shape does not match the model");
}

// Writes one input row. condition == nullptr means: no condition block at
// all (unconditional model) or the null token (conditional model). The Ref
// must accept the stride of a column-major matrix row.
using RowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

void fill_input_row(const ScoreModel& m, RowRef row,
                    const PointSet& x_t, int t, const NoiseSchedule& sched,
                    const Eigen::VectorXd* condition) {
    row.segment(0, m.coord_dim()) = flatten(x_t).transpose();
    row.segment(m.coord_dim(), kTimeFeatureCount) = time_features(t, sched.T).transpose();
    if (m.conditional) {
        if (condition) {
            if (condition->size() != m.condition_dim)
                throw ConfigError("score model: condition size mismatch");
            row.segment(m.coord_dim() + kTimeFeatureCount, m.condition_dim) =
                condition->transpose();
            row(m.coord_dim() + kTimeFeatureCount + m.condition_dim) = 1.0;
        } else {
            row.segment(m.coord_dim() + kTimeFeatureCount, m.condition_dim + 1).setZero();
        }
    }
}

const Eigen::VectorXd* require_condition_or_null(const ScoreModel& m,
                                                 const Eigen::VectorXd* condition) {
    if (!m.conditional) {
        if (condition) throw ConfigError("score model: condition given to an unconditional model");
        return nullptr;
    }
    if (!condition && !m.null_token_trained)
        throw ConfigError(
            "score model: conditional model queried without a condition, and no "
            "null token was trained (p_drop was 0)");
    return condition;
}

} // namespace

ScoreModel make_score_model(int atom_count, int dim, const std::vector<int>& hidden,
                            Activation act, bool conditional, int condition_dim,
                            Rng& rng) {
    if (atom_count < 1 || dim < 1) throw ConfigError("make_score_model: bad shape");
    if (conditional && condition_dim < 1)
        throw ConfigError("make_score_model: conditional model needs condition_dim >= 1");
    ScoreModel m;
    m.atom_count = atom_count;
    m.dim = dim;
    m.conditional = conditional;
    m.condition_dim = conditional ? condition_dim : 0;
    std::vector<int> sizes;
    sizes.push_back(input_width(conditional, atom_count * dim, m.condition_dim));
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(atom_count * dim);
    m.net = make_mlp(sizes, act, rng);
    // The condition block (condition values and presence flag) starts at
    // zero: a conditional pathway that never receives training signal stays
    // exactly inert, so e.g. p_drop = 1 yields a model whose output is
    // invariant to the condition it was never shown.
    if (conditional)
        m.net.weights.front().rightCols(m.condition_dim + 1).setZero();
    return m;
}

PointSet eps_predict(const ScoreModel& m, const PointSet& x_t, int t,
                     const NoiseSchedule& sched, const Eigen::VectorXd* condition) {
    check_state(m, x_t);
    condition = require_condition_or_null(m, condition);
    Eigen::MatrixXd row(1, m.net.input_dim());
    fill_input_row(m, row.row(0), x_t, t, sched, condition);
    Eigen::MatrixXd out = forward(m.net, row);
    return unflatten(out.row(0).transpose(), m.atom_count, m.dim);
}

PointSet score_at(const ScoreModel& m, const PointSet& x_t, int t,
                  const NoiseSchedule& sched, const Eigen::VectorXd* condition) {
    if (t < 1 || t > sched.T) throw ConfigError("score_at: t out of 1..T");
    const double one_minus = 1.0 - sched.bar(t);
    PointSet eps = eps_predict(m, x_t, t, sched, condition);
    return project_zero_com(-eps / std::sqrt(one_minus));
}

PointSet cfg_score(const ScoreModel& m, const PointSet& x_t, int t,
                   const NoiseSchedule& sched, const Eigen::VectorXd& condition,
                   double w) {
    if (!m.conditional) throw ConfigError("cfg_score: model is unconditional");
    if (w == 0.0) return score_at(m, x_t, t, sched, &condition);
    if (w == -1.0) return score_at(m, x_t, t, sched, nullptr);
    PointSet s_u = score_at(m, x_t, t, sched, nullptr);
    PointSet s_c = score_at(m, x_t, t, sched, &condition);
    return -w * s_u + (1.0 + w) * s_c;
}

PointSet eps_input_vjp(const ScoreModel& m, const PointSet& x_t, int t,
                       const NoiseSchedule& sched, const PointSet& U,
                       const Eigen::VectorXd* condition) {
    check_state(m, x_t);
    if (U.rows() != m.atom_count || U.cols() != m.dim)
        throw ConfigError("eps_input_vjp: cotangent shape mismatch");
    condition = require_condition_or_null(m, condition);
    Eigen::MatrixXd row(1, m.net.input_dim());
    fill_input_row(m, row.row(0), x_t, t, sched, condition);
    ForwardCache cache;
    forward(m.net, row, &cache);
    Eigen::MatrixXd input_grad;
    backward(m.net, cache, Eigen::MatrixXd(flatten(U).transpose()), &input_grad);
    return unflatten(input_grad.row(0).segment(0, m.coord_dim()).transpose(),
                     m.atom_count, m.dim);
}

namespace {

// Assembles inputs and targets for one minibatch of the DSM objective.
// conditions rows are used verbatim; drop_mask (optional, same length as
// idx) replaces individual rows with the null token.
void build_dsm_batch(const ScoreModel& m, const std::vector<PointSet>& x0,
                     const Eigen::MatrixXd* conditions, const NoiseSchedule& sched,
                     const std::vector<int>& idx, const std::vector<char>* drop_mask,
                     Rng& rng, Eigen::MatrixXd& X, Eigen::MatrixXd& target) {
    const int B = static_cast<int>(idx.size());
    X.resize(B, m.net.input_dim());
    target.resize(B, m.coord_dim());
    for (int b = 0; b < B; ++b) {
        const PointSet& x = x0[idx[b]];
        if (x.rows() != m.atom_count || x.cols() != m.dim)
            throw ConfigError("dsm: dataset shape does not match the model");
        const int t = rng.uniform_int(1, sched.T);
        PointSet eps = sample_subspace_gaussian(m.atom_count, m.dim, rng);
        PointSet x_t = forward_perturb(x, t, eps, sched);
        const Eigen::VectorXd* cond = nullptr;
        Eigen::VectorXd cond_row;
        if (m.conditional && conditions) {
            cond_row = conditions->row(idx[b]).transpose();
            cond = &cond_row;
        }
        if (drop_mask && (*drop_mask)[b]) cond = nullptr;
        fill_input_row(m, X.row(b), x_t, t, sched, cond);
        target.row(b) = flatten(eps).transpose();
    }
}

void check_dataset(const ScoreModel& m, const std::vector<PointSet>& x0,
                   const Eigen::MatrixXd* conditions) {
    if (x0.empty()) throw ConfigError("dsm: empty dataset");
    if (m.conditional && conditions) {
        if (conditions->rows() != static_cast<Eigen::Index>(x0.size()) ||
            conditions->cols() != m.condition_dim)
            throw ConfigError("dsm: conditions shape mismatch");
    }
    if (!m.conditional && conditions)
        throw ConfigError("dsm: conditions given to an unconditional model");
}

} // namespace

double dsm_loss(const ScoreModel& m, const std::vector<PointSet>& x0,
                const Eigen::MatrixXd* conditions, const NoiseSchedule& sched,
                Rng& rng) {
    check_dataset(m, x0, conditions);
    if (m.conditional && !conditions && !m.null_token_trained)
        throw ConfigError("dsm_loss: conditional model without conditions or null token");
    std::vector<int> idx(x0.size());
    std::iota(idx.begin(), idx.end(), 0);
    Eigen::MatrixXd X, target;
    build_dsm_batch(m, x0, conditions, sched, idx, nullptr, rng, X, target);
    Eigen::MatrixXd pred = forward(m.net, X);
    return (pred - target).squaredNorm() / static_cast<double>(x0.size());
}

TrainResult train_score(ScoreModel& m, const std::vector<PointSet>& x0,
                        const Eigen::MatrixXd* conditions, const NoiseSchedule& sched,
                        const TrainConfig& cfg) {
    check_dataset(m, x0, conditions);
    if (cfg.epochs < 1 || cfg.batch_size < 1) throw ConfigError("train_score: bad budget");
    if (cfg.p_drop < 0.0 || cfg.p_drop > 1.0) throw ConfigError("train_score: p_drop out of [0,1]");
    if (m.conditional && !conditions)
        throw ConfigError("train_score: conditional model needs conditions");

    Rng rng(cfg.seed);
    AdamState adam = make_adam(m.net, cfg.lr);
    if (m.conditional && cfg.p_drop > 0.0) m.null_token_trained = true;

    const int n = static_cast<int>(x0.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    Mlp last_good = m.net;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the run's own stream; keeps epochs reproducible.
        for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);

        double epoch_loss = 0.0;
        bool blew_up = false;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int B = std::min(cfg.batch_size, n - start);
            std::vector<int> idx(order.begin() + start, order.begin() + start + B);
            std::vector<char> drop(B, 0);
            if (m.conditional && cfg.p_drop > 0.0)
                for (int b = 0; b < B; ++b) drop[b] = rng.uniform() < cfg.p_drop ? 1 : 0;

            Eigen::MatrixXd X, target;
            build_dsm_batch(m, x0, conditions, sched, idx,
                            m.conditional ? &drop : nullptr, rng, X, target);
            ForwardCache cache;
            Eigen::MatrixXd pred = forward(m.net, X, &cache);
            Eigen::MatrixXd diff = pred - target;
            const double batch_loss = diff.squaredNorm() / B;
            if (!std::isfinite(batch_loss)) {
                blew_up = true;
                break;
            }
            epoch_loss += diff.squaredNorm();
            MlpGrads grads = backward(m.net, cache, Eigen::MatrixXd(2.0 * diff / B));
            adam_step(m.net, grads, adam);
        }
        if (blew_up) {
            m.net = last_good;
            result.aborted = true;
            break;
        }
        result.loss_curve.push_back(epoch_loss / n);
        last_good = m.net;
    }
    return result;
}

} // namespace tacs
