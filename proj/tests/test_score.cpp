#include "doctest.h"

#include "helpers.hpp"

using namespace tacs;
using tacs::testing::max_abs_diff;
using tacs::testing::rel_err;
using tacs::testing::raw_sphere_model;
using tacs::testing::sphere_fixture;

TEST_CASE("score_at shape, projection, and parameterization identity") {
    const ScoreModel& m = raw_sphere_model();
    NoiseSchedule s = build_linear_schedule(50, 2e-3, 0.4);
    Rng rng(31);
    PointSet x = sample_subspace_gaussian(3, 3, rng);

    PointSet sc = score_at(m, x, 25, s);
    CHECK(sc.rows() == 3);
    CHECK(sc.cols() == 3);
    CHECK(sc.colwise().mean().cwiseAbs().maxCoeff() <= 1e-9);

    // score = -eps_hat / sqrt(1 - bar), projected; check against eps_predict.
    PointSet eps_hat = project_zero_com(eps_predict(m, x, 25, s));
    CHECK(max_abs_diff(sc, PointSet(-eps_hat / std::sqrt(1.0 - s.bar(25)))) <= 1e-12);

    // tweedie(x, t, score_at(...)) equals (x - sqrt(1-bar) eps_hat)/sqrt(bar).
    PointSet x0 = tweedie(x, 25, sc, s);
    PointSet want = (x - std::sqrt(1.0 - s.bar(25)) * eps_hat) / std::sqrt(s.bar(25));
    CHECK(max_abs_diff(x0, want) <= 1e-9);

    CHECK_THROWS_AS(score_at(m, x, 0, s), ConfigError);
    CHECK_THROWS_AS(score_at(m, x, 51, s), ConfigError);
}

TEST_CASE("exact-eps oracle: score_at equals the analytic per-sample score") {
    // A zero-weight net with bias set to the flattened true eps is an exact
    // eps-oracle for one fixed draw.
    NoiseSchedule s = build_linear_schedule(50, 2e-3, 0.4);
    Rng rng(32);
    PointSet x0 = sample_subspace_gaussian(3, 3, rng);
    PointSet eps = sample_subspace_gaussian(3, 3, rng);
    const int t = 20;
    PointSet xt = forward_perturb(x0, t, eps, s);

    Rng init(33);
    ScoreModel oracle = make_score_model(3, 3, {4}, Activation::Tanh, false, 0, init);
    for (auto& W : oracle.net.weights) W.setZero();
    oracle.net.biases.back() = flatten(eps);

    PointSet analytic = -(xt - std::sqrt(s.bar(t)) * x0) / (1.0 - s.bar(t));
    CHECK(max_abs_diff(score_at(oracle, xt, t, s), analytic) <= 1e-9);
    CHECK(max_abs_diff(tweedie(xt, t, score_at(oracle, xt, t, s), s), x0) <= 1e-9);
}

TEST_CASE("cfg_score shortcuts are bit-exact and the combination is linear") {
    ScoreModel m = sphere_fixture().model;
    m.null_token_trained = true;
    NoiseSchedule s = sphere_fixture().sched;
    Rng rng(34);
    PointSet x = sample_subspace_gaussian(3, 3, rng);
    Eigen::VectorXd c(1);
    c << 2.5;

    PointSet cond = score_at(m, x, 10, s, &c);
    PointSet uncond = score_at(m, x, 10, s, nullptr);
    CHECK(max_abs_diff(cfg_score(m, x, 10, s, c, 0.0), cond) == 0.0);
    CHECK(max_abs_diff(cfg_score(m, x, 10, s, c, -1.0), uncond) == 0.0);

    for (double w : {0.35, 1.0, 3.0}) {
        PointSet got = cfg_score(m, x, 10, s, c, w);
        PointSet want = cond + w * (cond - uncond);
        CHECK(max_abs_diff(got, want) <= 1e-12);
    }

    // The trained conditional model actually uses its condition.
    CHECK(max_abs_diff(cond, uncond) > 1e-8);
}

TEST_CASE("conditional model without trained null token rejects null queries") {
    Rng init(35);
    ScoreModel m = make_score_model(3, 3, {8}, Activation::Tanh, true, 1, init);
    NoiseSchedule s = build_linear_schedule(10, 1e-3, 0.3);
    Rng rng(36);
    PointSet x = sample_subspace_gaussian(3, 3, rng);
    CHECK_THROWS_AS(score_at(m, x, 5, s, nullptr), ConfigError);
    Eigen::VectorXd c(1);
    c << 1.0;
    CHECK_NOTHROW(score_at(m, x, 5, s, &c));

    const ScoreModel& uncond = raw_sphere_model();
    CHECK_THROWS_AS(score_at(uncond, x, 5, s, &c), ConfigError);
}

TEST_CASE("dsm loss: exact model zero, zero model (M-1)*D, seed determinism") {
    NoiseSchedule s = build_linear_schedule(50, 2e-3, 0.4);
    Rng data_rng(37);
    std::vector<PointSet> x0;
    for (int i = 0; i < 64; ++i) x0.push_back(sample_subspace_gaussian(3, 3, data_rng));

    Rng init(38);
    ScoreModel zero = make_score_model(3, 3, {4}, Activation::Tanh, false, 0, init);
    for (auto& W : zero.net.weights) W.setZero();
    for (auto& b : zero.net.biases) b.setZero();

    // Zero predictions: loss is E||eps||^2 = (M-1) D = 6 per sample.
    double acc = 0.0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) {
        Rng rng(1000 + r);
        acc += dsm_loss(zero, x0, nullptr, s, rng);
    }
    CHECK(acc / reps == doctest::Approx(6.0).epsilon(0.05));

    Rng a(39), b(39);
    CHECK(dsm_loss(zero, x0, nullptr, s, a) == dsm_loss(zero, x0, nullptr, s, b));

    // An eps-exact model needs eps known per draw; the zero-noise schedule
    // trick instead: with a dataset of a single point and t where bar is
    // essentially 1, eps_hat = 0 gives loss near E||eps||^2 still. The exact
    // check is algebraic: build the oracle for one fixed (x0, eps, t) and
    // verify the squared residual directly.
    Rng rng(40);
    PointSet point = sample_subspace_gaussian(3, 3, rng);
    PointSet eps = sample_subspace_gaussian(3, 3, rng);
    Rng init2(41);
    ScoreModel oracle = make_score_model(3, 3, {4}, Activation::Tanh, false, 0, init2);
    for (auto& W : oracle.net.weights) W.setZero();
    oracle.net.biases.back() = flatten(eps);
    PointSet xt = forward_perturb(point, 25, eps, s);
    PointSet eps_hat = eps_predict(oracle, xt, 25, s);
    CHECK((eps_hat - eps).squaredNorm() <= 1e-18);
}

TEST_CASE("train_score is deterministic and its smoothed loss curve decreases") {
    NoiseSchedule s = build_linear_schedule(30, 2e-3, 0.35);
    Rng data_rng(42);
    std::vector<PointSet> x0;
    for (int i = 0; i < 128; ++i) x0.push_back(sample_subspace_gaussian(2, 2, data_rng));

    auto run = [&] {
        Rng init(43);
        ScoreModel m = make_score_model(2, 2, {16, 16}, Activation::SmoothElu, false,
                                        0, init);
        TrainConfig tc;
        tc.epochs = 30;
        tc.batch_size = 32;
        tc.seed = 44;
        TrainResult r = train_score(m, x0, nullptr, s, tc);
        return std::make_pair(m, r);
    };
    auto [m1, r1] = run();
    auto [m2, r2] = run();
    CHECK(r1.loss_curve == r2.loss_curve);
    CHECK(max_abs_diff(m1.net.weights[0], m2.net.weights[0]) == 0.0);
    CHECK_FALSE(r1.aborted);

    // Smoothed (window 10) curve never increases from first to last window.
    const auto& curve = r1.loss_curve;
    auto window_mean = [&](size_t lo) {
        double sum = 0.0;
        for (size_t i = lo; i < lo + 10; ++i) sum += curve[i];
        return sum / 10.0;
    };
    CHECK(window_mean(curve.size() - 10) < window_mean(0));
}

TEST_CASE("p_drop = 1 trains a model that ignores its condition") {
    NoiseSchedule s = build_linear_schedule(30, 2e-3, 0.35);
    Rng data_rng(45);
    std::vector<PointSet> x0;
    Eigen::MatrixXd cond(64, 1);
    for (int i = 0; i < 64; ++i) {
        x0.push_back(sample_subspace_gaussian(2, 2, data_rng));
        cond(i, 0) = data_rng.normal();
    }
    Rng init(46);
    ScoreModel m = make_score_model(2, 2, {16}, Activation::Tanh, true, 1, init);
    TrainConfig tc;
    tc.epochs = 10;
    tc.batch_size = 32;
    tc.p_drop = 1.0;
    tc.seed = 47;
    train_score(m, x0, &cond, s, tc);
    CHECK(m.null_token_trained);

    // The condition-input weights start at zero and never received a
    // gradient, so the output is exactly invariant to the condition value.
    Rng rng(48);
    PointSet x = sample_subspace_gaussian(2, 2, rng);
    Eigen::VectorXd c1(1), c2(1);
    c1 << -3.0;
    c2 << 3.0;
    CHECK(max_abs_diff(score_at(m, x, 15, s, &c1), score_at(m, x, 15, s, &c2)) == 0.0);
    CHECK(max_abs_diff(score_at(m, x, 15, s, &c1), score_at(m, x, 15, s, nullptr)) ==
          0.0);
}

TEST_CASE("eps_input_vjp matches finite differences of a scalar probe") {
    const ScoreModel& m = raw_sphere_model();
    NoiseSchedule s = build_linear_schedule(50, 2e-3, 0.4);
    Rng rng(49);
    PointSet x = sample_subspace_gaussian(3, 3, rng);
    PointSet U = sample_subspace_gaussian(3, 3, rng);

    // f(x) = <U, eps_hat(x)>; vjp should equal its gradient.
    auto f = [&](const PointSet& xv) {
        return (U.array() * eps_predict(m, xv, 25, s).array()).sum();
    };
    PointSet got = eps_input_vjp(m, x, 25, s, U);
    PointSet fd = tacs::testing::fd_gradient(f, x, 1e-5);
    CHECK(max_abs_diff(got, fd) <= 1e-6 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
}
