#include "doctest.h"

#include "helpers.hpp"

using namespace tacs;
using tacs::testing::max_abs_diff;

TEST_CASE("project_zero_com centers and is idempotent") {
    PointSet two(2, 3);
    two << 1, 0, 0, -1, 0, 0;
    CHECK(max_abs_diff(project_zero_com(two), two) == 0.0);

    PointSet one(1, 3);
    one << 1, 2, 3;
    CHECK(project_zero_com(one).isZero(0));

    PointSet pair(2, 3);
    pair << 0, 0, 0, 2, 0, 0;
    PointSet want(2, 3);
    want << -1, 0, 0, 1, 0, 0;
    CHECK(max_abs_diff(project_zero_com(pair), want) == 0.0);

    Rng rng(1);
    for (int rep = 0; rep < 20; ++rep) {
        PointSet x = randn_matrix(5, 3, rng);
        PointSet p = project_zero_com(x);
        CHECK(p.colwise().mean().cwiseAbs().maxCoeff() <= 1e-9);
        CHECK(max_abs_diff(project_zero_com(p), p) <= 1e-12);
    }
}

TEST_CASE("projection is linear, symmetric, and commutes with rotations") {
    // P as an explicit (M*D x M*D) matrix, built column by column.
    const int M = 4, D = 2, n = M * D;
    Eigen::MatrixXd P(n, n);
    for (int j = 0; j < n; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        e(j) = 1.0;
        P.col(j) = flatten(project_zero_com(unflatten(e, M, D)));
    }
    CHECK(max_abs_diff(P * P, P) <= 1e-9);
    CHECK(max_abs_diff(P, P.transpose()) <= 1e-9);

    Rng rng(2);
    PointSet x = randn_matrix(M, D, rng);
    Eigen::MatrixXd R = random_rotation(D, rng);
    CHECK(max_abs_diff(project_zero_com(PointSet(x * R.transpose())),
                       PointSet(project_zero_com(x) * R.transpose())) <= 1e-9);
}

TEST_CASE("subspace gaussian: shape, determinism, and variance") {
    Rng a(7), b(7);
    PointSet x = sample_subspace_gaussian(3, 3, a);
    PointSet y = sample_subspace_gaussian(3, 3, b);
    CHECK(max_abs_diff(x, y) == 0.0);
    CHECK(x.colwise().mean().cwiseAbs().maxCoeff() <= 1e-9);

    // M=2, D=1: the projection of iid N(0,1) is (x, -x), x ~ N(0, 1/2).
    Rng c(8);
    double var = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        PointSet s = sample_subspace_gaussian(2, 1, c);
        CHECK(s(0, 0) == doctest::Approx(-s(1, 0)).epsilon(1e-12));
        var += s(0, 0) * s(0, 0);
    }
    CHECK(var / n == doctest::Approx(0.5).epsilon(0.05));

    // Per-coordinate variance is (M-1)/M: 2/3 for M=3.
    Rng d(9);
    double sumsq = 0.0;
    long count = 0;
    for (int i = 0; i < 100000; ++i) {
        PointSet s = sample_subspace_gaussian(3, 3, d);
        sumsq += s.squaredNorm();
        count += s.size();
    }
    CHECK(sumsq / count == doctest::Approx(2.0 / 3.0).epsilon(0.015));
}

TEST_CASE("random_rotation is special orthogonal") {
    Rng rng(3);
    for (int d : {2, 3}) {
        for (int rep = 0; rep < 25; ++rep) {
            Eigen::MatrixXd R = random_rotation(d, rng);
            Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
            CHECK(max_abs_diff(R.transpose() * R, I) <= 1e-9);
            CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("apply_rigid basics and isometry") {
    PointSet x(1, 3);
    x << 1, 0, 0;
    RigidTransform id{Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)};
    CHECK(max_abs_diff(apply_rigid(x, id), x) == 0.0);

    // 90 degree rotation about z sends (1,0,0) to (0,1,0).
    RigidTransform rz{Eigen::MatrixXd::Zero(3, 3), Eigen::VectorXd::Zero(3)};
    rz.rotation << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    PointSet want(1, 3);
    want << 0, 1, 0;
    CHECK(max_abs_diff(apply_rigid(x, rz), want) <= 1e-12);

    Rng rng(4);
    PointSet y = randn_matrix(5, 3, rng);
    RigidTransform g{random_rotation(3, rng),
                     Eigen::VectorXd::NullaryExpr(3, [&](Eigen::Index) { return rng.normal(); })};
    PointSet gy = apply_rigid(y, g);
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j)
            CHECK((y.row(i) - y.row(j)).norm() ==
                  doctest::Approx((gy.row(i) - gy.row(j)).norm()).epsilon(1e-9));
}

TEST_CASE("sphere_manifold_distance examples and rotation invariance") {
    PointSet on(2, 3);
    on << 1, 0, 0, 0, 1, 0;
    CHECK(sphere_manifold_distance(on) == doctest::Approx(0.0));

    PointSet origin = PointSet::Zero(1, 3);
    CHECK(sphere_manifold_distance(origin) == doctest::Approx(1.0));

    PointSet radii(2, 3);
    radii << 0.5, 0, 0, 0, 0, 1.5;
    CHECK(sphere_manifold_distance(radii) == doctest::Approx(0.5));

    Rng rng(5);
    PointSet x = randn_matrix(4, 3, rng);
    Eigen::MatrixXd R = random_rotation(3, rng);
    CHECK(sphere_manifold_distance(PointSet(x * R.transpose())) ==
          doctest::Approx(sphere_manifold_distance(x)).epsilon(1e-9));
}

TEST_CASE("flatten and unflatten are exact inverses in row-major order") {
    PointSet x(2, 3);
    x << 1, 2, 3, 4, 5, 6;
    Eigen::VectorXd v = flatten(x);
    for (int i = 0; i < 6; ++i) CHECK(v(i) == doctest::Approx(i + 1.0));
    CHECK(max_abs_diff(unflatten(v, 2, 3), x) == 0.0);
}
