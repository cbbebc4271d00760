#pragma once

#include <cstdint>
#include <vector>

#include "tacs/neural.hpp"
#include "tacs/schedule.hpp"

namespace tacs {

// eps-parameterized score network. Input layout, in order:
//   coords (M*D, flattened row-major) | time features (9)
//   | condition (condition_dim) | condition-present flag (1)   [conditional only]
// The null token is all-zeros condition with flag 0. It is a valid inference
// input only if the model saw it during training (conditioning dropout),
// tracked by null_token_trained.
struct ScoreModel {
    Mlp net;
    int atom_count = 0;
    int dim = 0;
    bool conditional = false;
    int condition_dim = 0;
    bool null_token_trained = false;

    int coord_dim() const { return atom_count * dim; }
};

ScoreModel make_score_model(int atom_count, int dim, const std::vector<int>& hidden,
                            Activation act, bool conditional, int condition_dim,
                            Rng& rng);

// Raw network output reshaped to M x D; no projection. condition == nullptr
// selects the null token on conditional models.
PointSet eps_predict(const ScoreModel& m, const PointSet& x_t, int t,
                     const NoiseSchedule& sched,
                     const Eigen::VectorXd* condition = nullptr);

// score = -eps_hat / sqrt(1 - bar_alpha_t), projected to the zero-CoM
// subspace. t in 1..T. Calling a conditional model without a condition is a
// usage error unless the null token was trained.
PointSet score_at(const ScoreModel& m, const PointSet& x_t, int t,
                  const NoiseSchedule& sched,
                  const Eigen::VectorXd* condition = nullptr);

// Classifier-free guidance combination -w * score(null) + (1+w) * score(c).
// w = 0 and w = -1 shortcut to the single branch they equal algebraically,
// so those settings are bit-exact by construction.
PointSet cfg_score(const ScoreModel& m, const PointSet& x_t, int t,
                   const NoiseSchedule& sched, const Eigen::VectorXd& condition,
                   double w);

// Cotangent pullback through the raw network output: returns
// (d eps_hat / d x)^T U restricted to the coords block, with U given as
// M x D. Guidance uses this to differentiate through the Tweedie map.
PointSet eps_input_vjp(const ScoreModel& m, const PointSet& x_t, int t,
                       const NoiseSchedule& sched, const PointSet& U,
                       const Eigen::VectorXd* condition = nullptr);

struct TrainConfig {
    int epochs = 100;
    int batch_size = 64;
    double lr = 1e-3;
    double p_drop = 0.0; // conditioning dropout; > 0 trains the null token
    std::uint64_t seed = 0;
    // The loss weight lambda(t) is constant 1: the simple eps-matching loss
    // already folds the usual weighting in.
};

struct TrainResult {
    std::vector<double> loss_curve; // per-epoch mean over examples
    bool aborted = false;           // non-finite loss; params restored to last good epoch
};

// Denoising score-matching loss of one batch draw: t ~ U{1..T}, eps from the
// zero-CoM subspace, loss = mean_i || eps_hat_i - eps_i ||_F^2. A model that
// outputs zero scores (M-1)*D in expectation. conditions is n x
// condition_dim, or nullptr for the null token / unconditional input.
double dsm_loss(const ScoreModel& m, const std::vector<PointSet>& x0,
                const Eigen::MatrixXd* conditions, const NoiseSchedule& sched,
                Rng& rng);

// Adam on the DSM loss. Deterministic given cfg.seed. If a non-finite batch
// loss appears, parameters are rolled back to the end of the last finite
// epoch and the result is marked aborted.
TrainResult train_score(ScoreModel& m, const std::vector<PointSet>& x0,
                        const Eigen::MatrixXd* conditions,
                        const NoiseSchedule& sched, const TrainConfig& cfg);

} // namespace tacs
