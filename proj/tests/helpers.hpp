#pragma once

// Shared fixtures for the unit tests. Trained models are built once per
// process and reused; tests that mutate state must copy.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tacs/config.hpp"
#include "tacs/errors.hpp"
#include "tacs/eval.hpp"
#include "tacs/io.hpp"
#include "tacs/tasks.hpp"

namespace tacs::testing {

inline double rel_err(double got, double want) {
    double scale = std::max(std::abs(want), 1e-12);
    return std::abs(got - want) / scale;
}

// Central finite difference of a scalar function along every coordinate of
// an M x D state.
inline PointSet fd_gradient(const std::function<double(const PointSet&)>& f,
                            const PointSet& x, double h) {
    PointSet g = PointSet::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            PointSet xp = x, xm = x;
            xp(i, j) += h;
            xm(i, j) -= h;
            g(i, j) = (f(xp) - f(xm)) / (2.0 * h);
        }
    return g;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

// Small sphere-task fixture: dataset plus a briefly trained conditional
// score model and time predictor. Deliberately tiny; tests that need real
// quality belong in the acceptance battery.
struct SphereFixture {
    NoiseSchedule sched;
    LabeledDataset data;
    TaskSpec task;
    ScoreModel model;
    TimePredictor tp;
};

inline const SphereFixture& sphere_fixture() {
    static const SphereFixture fx = [] {
        SphereFixture f;
        f.task = make_task("sphere");
        f.sched = build_linear_schedule(50, 2e-3, 0.4);
        Rng data_rng(401);
        f.data = generate_sphere_dataset(400, data_rng);

        Rng init(402);
        f.model = make_score_model(3, 3, {48, 48}, Activation::SmoothElu, true,
                                   1, init);
        TrainConfig tc;
        tc.epochs = 12;
        tc.batch_size = 64;
        tc.p_drop = 0.1;
        tc.seed = 403;
        Eigen::MatrixXd cond = f.data.labels;
        train_score(f.model, f.data.points, &cond, f.sched, tc);

        Rng tp_init(404);
        f.tp = make_time_predictor(f.sched.T, 3, 3, {48}, Activation::SmoothElu,
                                   FeatureMode::Invariant3d, false, 0, tp_init);
        TimePredictorTrainConfig tpc;
        tpc.epochs = 12;
        tpc.batch_size = 64;
        tpc.seed = 405;
        train_time_predictor(f.tp, f.data.points, nullptr, f.sched, tpc);
        return f;
    }();
    return fx;
}

// Untrained (random-init) unconditional model on the sphere geometry: enough
// for exactness tests that only need a deterministic differentiable score.
inline const ScoreModel& raw_sphere_model() {
    static const ScoreModel m = [] {
        Rng init(771);
        return make_score_model(3, 3, {24, 24}, Activation::SmoothElu, false, 0,
                                init);
    }();
    return m;
}

} // namespace tacs::testing
