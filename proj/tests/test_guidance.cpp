#include "doctest.h"

#include <limits>

#include "helpers.hpp"

using namespace tacs;
using tacs::testing::fd_gradient;
using tacs::testing::max_abs_diff;
using tacs::testing::raw_sphere_model;
using tacs::testing::sphere_fixture;

namespace {

// Linear property <B, x> + b0: its guidance loss is quadratic in x, which a
// complete central-difference basis resolves exactly.
PropertyEstimator linear_property(const PointSet& b, double b0) {
    PropertyEstimator p;
    p.name = "linear";
    p.condition_dim = 1;
    p.evaluate = [b, b0](const PointSet& x) {
        Eigen::VectorXd v(1);
        v(0) = (b.array() * x.array()).sum() + b0;
        return v;
    };
    p.gradient_vjp = [b](const PointSet&, const Eigen::VectorXd& u) {
        return PointSet(u(0) * b);
    };
    return p;
}

PropertyEstimator cubic_property() {
    PropertyEstimator p;
    p.name = "cubic";
    p.condition_dim = 1;
    p.evaluate = [](const PointSet& x) {
        Eigen::VectorXd v(1);
        v(0) = x.array().cube().sum();
        return v;
    };
    p.gradient_vjp = [](const PointSet& x, const Eigen::VectorXd& u) {
        return PointSet(u(0) * 3.0 * x.array().square().matrix());
    };
    return p;
}

} // namespace

TEST_CASE("clip_gradient: below, above, and disabled thresholds") {
    PointSet g(2, 2);
    g << 0.3, 0.0, 0.0, 0.4; // Frobenius norm 0.5
    CHECK(max_abs_diff(clip_gradient(g, 1.0), g) == 0.0);

    PointSet big = 8.0 * g; // norm 4
    PointSet clipped = clip_gradient(big, 1.0);
    CHECK(clipped.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(max_abs_diff(clipped, big / 4.0) <= 1e-15);

    double inf = std::numeric_limits<double>::infinity();
    CHECK(max_abs_diff(clip_gradient(big, inf), big) == 0.0);
    CHECK_THROWS_AS(clip_gradient(g, 0.0), ConfigError);
    CHECK_THROWS_AS(clip_gradient(g, -1.0), ConfigError);
}

TEST_CASE("zeroth_order_gradient: exact on a quadratic loss at k = dim") {
    Rng rng(71);
    PointSet b = randn_matrix(3, 3, rng);
    PropertyEstimator prop = linear_property(b, 0.2);
    PointSet x = randn_matrix(3, 3, rng);
    Eigen::VectorXd c(1);
    c << -0.4;

    double res = prop.evaluate(x)(0) - c(0);
    PointSet analytic = -res * b;
    Rng dirs(72);
    PointSet est = zeroth_order_gradient(x, c, prop, 9, 1e-4, dirs);
    CHECK(max_abs_diff(est, analytic) <= 1e-9);
}

TEST_CASE("zeroth_order_gradient: unbiased under partial direction blocks") {
    Rng rng(73);
    PointSet b = randn_matrix(3, 3, rng);
    PropertyEstimator prop = linear_property(b, 0.0);
    PointSet x = randn_matrix(3, 3, rng);
    Eigen::VectorXd c(1);
    c << 1.0;
    double res = prop.evaluate(x)(0) - c(0);
    PointSet analytic = -res * b;

    PointSet mean = PointSet::Zero(3, 3);
    Rng dirs(74);
    const int reps = 4000;
    for (int i = 0; i < reps; ++i)
        mean += zeroth_order_gradient(x, c, prop, 4, 1e-4, dirs);
    mean /= reps;
    CHECK((mean - analytic).norm() / analytic.norm() <= 0.05);
}

TEST_CASE("zeroth_order_gradient: bias shrinks quadratically in h") {
    PropertyEstimator prop = cubic_property();
    Rng rng(75);
    PointSet x = randn_matrix(3, 3, rng);
    Eigen::VectorXd c(1);
    c << 0.5;
    double res = prop.evaluate(x)(0) - c(0);
    PointSet truth = -res * 3.0 * x.array().square().matrix();

    // Same seed both times: identical direction basis, so the error ratio
    // isolates the h dependence.
    Rng d1(76), d2(76);
    double e_big = (zeroth_order_gradient(x, c, prop, 9, 2e-3, d1) - truth).norm();
    double e_small = (zeroth_order_gradient(x, c, prop, 9, 1e-3, d2) - truth).norm();
    double ratio = e_big / e_small;
    CHECK(ratio > 2.5);
    CHECK(ratio < 6.0);
}

TEST_CASE("zeroth_order_gradient: constant property gives the zero field") {
    PropertyEstimator prop;
    prop.name = "const";
    prop.condition_dim = 1;
    prop.evaluate = [](const PointSet&) {
        Eigen::VectorXd v(1);
        v << 2.0;
        return v;
    };
    Rng rng(77);
    PointSet x = randn_matrix(3, 3, rng);
    Eigen::VectorXd c(1);
    c << 5.0;
    Rng dirs(78);
    CHECK(zeroth_order_gradient(x, c, prop, 9, 1e-4, dirs).norm() == 0.0);
}

TEST_CASE("og_gradient DPS mode matches finite differences of the pullback loss") {
    const ScoreModel& m = raw_sphere_model();
    const NoiseSchedule& s = sphere_fixture().sched;
    PropertyEstimator prop = make_energy_property();
    Eigen::VectorXd c(1);
    c << 3.2;
    GuidanceConfig cfg; // m = 1, sigma = 5e-3 default; pin sigma = 0 for DPS
    cfg.sigma = 0.0;

    Rng rng(79);
    for (int rep = 0; rep < 3; ++rep) {
        int t = 5 + rep * 15;
        PointSet x = sample_subspace_gaussian(3, 3, rng);
        auto loss = [&](const PointSet& xq) {
            PointSet sc = score_at(m, xq, t, s, nullptr);
            PointSet x0 = tweedie(xq, t, sc, s);
            return 0.5 * (prop.evaluate(x0) - c).squaredNorm();
        };
        PointSet fd = project_zero_com(fd_gradient(loss, x, 1e-5));
        Rng unused(1);
        PointSet g = og_gradient(x, t, c, m, s, prop, cfg, unused);
        CHECK((g + fd).norm() / fd.norm() <= 1e-4);
    }
}

TEST_CASE("og_gradient CFG pathway matches finite differences") {
    ScoreModel m = sphere_fixture().model;
    m.null_token_trained = true;
    const NoiseSchedule& s = sphere_fixture().sched;
    PropertyEstimator prop = make_energy_property();
    Eigen::VectorXd c(1), cond(1);
    c << 3.0;
    cond << 4.1;
    GuidanceConfig cfg;
    cfg.sigma = 0.0;
    const double w = 0.35;
    const int t = 20;

    Rng rng(80);
    PointSet x = sample_subspace_gaussian(3, 3, rng);
    auto loss = [&](const PointSet& xq) {
        PointSet sc = cfg_score(m, xq, t, s, cond, w);
        PointSet x0 = tweedie(xq, t, sc, s);
        return 0.5 * (prop.evaluate(x0) - c).squaredNorm();
    };
    PointSet fd = project_zero_com(fd_gradient(loss, x, 1e-5));
    Rng unused(1);
    PointSet g = og_gradient(x, t, c, m, s, prop, cfg, unused, &cond, w);
    CHECK((g + fd).norm() / fd.norm() <= 1e-4);
}

TEST_CASE("og_gradient: deterministic and rng-free when m = 1, sigma = 0") {
    const ScoreModel& m = raw_sphere_model();
    const NoiseSchedule& s = sphere_fixture().sched;
    PropertyEstimator prop = make_energy_property();
    Eigen::VectorXd c(1);
    c << 2.8;
    GuidanceConfig cfg;
    cfg.sigma = 0.0;
    Rng rng(81);
    PointSet x = sample_subspace_gaussian(3, 3, rng);

    Rng r1(5), r2(999);
    PointSet g1 = og_gradient(x, 12, c, m, s, prop, cfg, r1);
    PointSet g2 = og_gradient(x, 12, c, m, s, prop, cfg, r2);
    CHECK(max_abs_diff(g1, g2) == 0.0);
    // The stream was not consumed: both generators still agree with a fresh
    // one on the next draw.
    CHECK(r1.next_u64() == Rng(5).next_u64());
}

TEST_CASE("og_gradient vanishes when the Tweedie estimate already hits the target") {
    const ScoreModel& m = raw_sphere_model();
    const NoiseSchedule& s = sphere_fixture().sched;
    PropertyEstimator prop = make_energy_property();
    GuidanceConfig cfg;
    cfg.sigma = 0.0;
    Rng rng(82);
    PointSet x = sample_subspace_gaussian(3, 3, rng);
    const int t = 9;
    PointSet x0 = tweedie(x, t, score_at(m, x, t, s, nullptr), s);
    Eigen::VectorXd c = prop.evaluate(x0);
    Rng unused(1);
    CHECK(og_gradient(x, t, c, m, s, prop, cfg, unused).norm() <= 1e-12);
}

TEST_CASE("og_gradient output is zero-CoM for both modes") {
    const ScoreModel& m = raw_sphere_model();
    const NoiseSchedule& s = sphere_fixture().sched;
    PropertyEstimator prop = make_energy_property();
    Eigen::VectorXd c(1);
    c << 3.5;
    Rng rng(83);
    PointSet x = sample_subspace_gaussian(3, 3, rng);

    GuidanceConfig first;
    first.m = 3;
    first.sigma = 1e-2;
    Rng r1(84);
    PointSet g = og_gradient(x, 15, c, m, s, prop, first, r1);
    CHECK(g.colwise().mean().cwiseAbs().maxCoeff() <= 1e-12);

    GuidanceConfig zeroth;
    zeroth.mode = GradientMode::ZerothOrder;
    Rng r2(85);
    PointSet gz = og_gradient(x, 15, c, m, s, prop, zeroth, r2);
    CHECK(gz.colwise().mean().cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("og_gradient zeroth-order path reduces to the estimator at m=1, sigma=0") {
    const ScoreModel& m = raw_sphere_model();
    const NoiseSchedule& s = sphere_fixture().sched;
    PropertyEstimator prop = make_energy_property();
    Eigen::VectorXd c(1);
    c << 3.1;
    GuidanceConfig cfg;
    cfg.mode = GradientMode::ZerothOrder;
    cfg.sigma = 0.0;
    cfg.k = 5;
    cfg.h = 2e-4;
    Rng rng(86);
    PointSet x = sample_subspace_gaussian(3, 3, rng);
    const int t = 11;

    Rng ra(87);
    PointSet g = og_gradient(x, t, c, m, s, prop, cfg, ra);
    PointSet x0 = tweedie(x, t, score_at(m, x, t, s, nullptr), s);
    Rng rb(87);
    PointSet direct = project_zero_com(zeroth_order_gradient(x0, c, prop, 5, 2e-4, rb));
    CHECK(max_abs_diff(g, direct) == 0.0);
}

TEST_CASE("small guided steps strictly decrease the property loss") {
    const ScoreModel& m = raw_sphere_model();
    const NoiseSchedule& s = sphere_fixture().sched;
    PropertyEstimator prop = make_energy_property();
    Eigen::VectorXd c(1);
    c << 3.0;
    GuidanceConfig cfg;
    cfg.sigma = 0.0;
    const int t = 25;
    const double z = 1e-3;

    auto loss = [&](const PointSet& xq) {
        PointSet x0 = tweedie(xq, t, score_at(m, xq, t, s, nullptr), s);
        return 0.5 * (prop.evaluate(x0) - c).squaredNorm();
    };

    Rng rng(88);
    int decreased = 0;
    for (int rep = 0; rep < 100; ++rep) {
        PointSet x = sample_subspace_gaussian(3, 3, rng);
        Rng unused(1);
        PointSet g = og_gradient(x, t, c, m, s, prop, cfg, unused); // unclipped
        if (loss(x + z * g) < loss(x)) ++decreased;
    }
    CHECK(decreased == 100);
}

TEST_CASE("og_gradient error handling") {
    const ScoreModel& m = raw_sphere_model();
    const NoiseSchedule& s = sphere_fixture().sched;
    Rng rng(89);
    PointSet x = sample_subspace_gaussian(3, 3, rng);
    Eigen::VectorXd c(1);
    c << 1.0;

    PropertyEstimator blackbox;
    blackbox.name = "bb";
    blackbox.condition_dim = 1;
    blackbox.evaluate = [](const PointSet& p) {
        Eigen::VectorXd v(1);
        v << p.norm();
        return v;
    };
    GuidanceConfig cfg; // first-order
    Rng r1(90);
    CHECK_THROWS_AS(og_gradient(x, 5, c, m, s, blackbox, cfg, r1), ConfigError);

    PropertyEstimator nan_prop = blackbox;
    nan_prop.gradient_vjp = [](const PointSet& p, const Eigen::VectorXd&) {
        return PointSet(PointSet::Constant(p.rows(), p.cols(),
                                           std::numeric_limits<double>::quiet_NaN()));
    };
    Rng r2(91);
    CHECK_THROWS_AS(og_gradient(x, 5, c, m, s, nan_prop, cfg, r2), GuidanceError);

    GuidanceConfig bad = cfg;
    bad.m = 0;
    PropertyEstimator energy = make_energy_property();
    Rng r3(92);
    CHECK_THROWS_AS(og_gradient(x, 5, c, m, s, energy, bad, r3), ConfigError);

    Eigen::VectorXd wrong(2);
    wrong << 1.0, 2.0;
    Rng r4(93);
    CHECK_THROWS_AS(og_gradient(x, 5, wrong, m, s, energy, cfg, r4), ConfigError);
}

TEST_CASE("gradient mode names round-trip") {
    CHECK(parse_gradient_mode("first_order") == GradientMode::FirstOrder);
    CHECK(parse_gradient_mode("zeroth_order") == GradientMode::ZerothOrder);
    CHECK(std::string(gradient_mode_name(GradientMode::ZerothOrder)) == "zeroth_order");
    CHECK_THROWS_AS(parse_gradient_mode("spsa"), ConfigError);
}
