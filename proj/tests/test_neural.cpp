#include "doctest.h"

#include "helpers.hpp"

using namespace tacs;
using tacs::testing::max_abs_diff;
using tacs::testing::rel_err;

namespace {

// Independent forward pass, coded separately from the library's batched
// implementation: per-sample loops, explicit activation formulas.
Eigen::VectorXd reference_forward(const Mlp& net, const Eigen::VectorXd& x) {
    Eigen::VectorXd a = x;
    for (int l = 0; l < net.layer_count(); ++l) {
        Eigen::VectorXd z = net.weights[l] * a + net.biases[l];
        if (l + 1 == net.layer_count()) return z;
        a.resize(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            if (net.activation == Activation::Tanh)
                a(i) = std::tanh(z(i));
            else
                a(i) = z(i) >= 0.0 ? z(i) : std::exp(z(i)) - 1.0;
        }
    }
    return a;
}

double scalar_loss(const Mlp& net, const Eigen::MatrixXd& X) {
    return 0.5 * forward(net, X).squaredNorm();
}

} // namespace

TEST_CASE("mlp construction and forward basics") {
    Rng rng(21);
    Mlp net = make_mlp({4, 8, 3}, Activation::Tanh, rng);
    CHECK(net.input_dim() == 4);
    CHECK(net.output_dim() == 3);
    CHECK(net.layer_count() == 2);
    for (const auto& W : net.weights) CHECK(W.allFinite());

    Eigen::MatrixXd X = randn_matrix(5, 4, rng);
    Eigen::MatrixXd Y1 = forward(net, X);
    Eigen::MatrixXd Y2 = forward(net, X);
    CHECK(Y1.rows() == 5);
    CHECK(Y1.cols() == 3);
    CHECK(max_abs_diff(Y1, Y2) == 0.0);

    CHECK_THROWS_AS(make_mlp({4}, Activation::Tanh, rng), ConfigError);
    CHECK_THROWS_AS(forward(net, Eigen::MatrixXd(randn_matrix(2, 5, rng))), ConfigError);
}

TEST_CASE("zero-weight net returns the last bias; identity layer echoes") {
    Rng rng(22);
    Mlp net = make_mlp({3, 4, 2}, Activation::SmoothElu, rng);
    for (auto& W : net.weights) W.setZero();
    net.biases.back() << 0.7, -0.3;
    Eigen::VectorXd y = forward(net, Eigen::VectorXd(Eigen::Vector3d(1, 2, 3)));
    CHECK(y(0) == doctest::Approx(0.7));
    CHECK(y(1) == doctest::Approx(-0.3));

    Mlp lin = make_mlp({3, 3}, Activation::Tanh, rng);
    lin.weights[0] = Eigen::MatrixXd::Identity(3, 3);
    lin.biases[0].setZero();
    Eigen::VectorXd x(3);
    x << -1.5, 0.25, 9.0;
    CHECK(max_abs_diff(forward(lin, x), x) == 0.0);
}

TEST_CASE("forward matches an independently coded reference") {
    Rng rng(23);
    for (Activation act : {Activation::Tanh, Activation::SmoothElu}) {
        Mlp net = make_mlp({5, 7, 6, 2}, act, rng);
        for (int rep = 0; rep < 10; ++rep) {
            Eigen::VectorXd x = flatten(randn_matrix(5, 1, rng));
            CHECK(max_abs_diff(forward(net, x), reference_forward(net, x)) <= 1e-12);
        }
    }
}

TEST_CASE("linear net input gradient is the transposed weight action") {
    Rng rng(24);
    Mlp lin = make_mlp({4, 3}, Activation::Tanh, rng);
    Eigen::MatrixXd X = randn_matrix(2, 4, rng);
    Eigen::MatrixXd G = randn_matrix(2, 3, rng);
    ForwardCache cache;
    forward(lin, X, &cache);
    Eigen::MatrixXd input_grad;
    backward(lin, cache, G, &input_grad);
    CHECK(max_abs_diff(input_grad, Eigen::MatrixXd(G * lin.weights[0])) <= 1e-12);
}

TEST_CASE("backward matches central finite differences") {
    Rng rng(25);
    const double h = 1e-4;
    for (Activation act : {Activation::Tanh, Activation::SmoothElu}) {
        Mlp net = make_mlp({4, 6, 5, 2}, act, rng);
        Eigen::MatrixXd X = randn_matrix(3, 4, rng);

        ForwardCache cache;
        Eigen::MatrixXd out = forward(net, X, &cache);
        Eigen::MatrixXd input_grad;
        MlpGrads grads = backward(net, cache, out, &input_grad);

        double worst = 0.0;
        for (int l = 0; l < net.layer_count(); ++l) {
            for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i)
                for (Eigen::Index j = 0; j < net.weights[l].cols(); ++j) {
                    Mlp p = net, m = net;
                    p.weights[l](i, j) += h;
                    m.weights[l](i, j) -= h;
                    double fd = (scalar_loss(p, X) - scalar_loss(m, X)) / (2 * h);
                    worst = std::max(worst, rel_err(grads.weights[l](i, j), fd));
                }
            for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) {
                Mlp p = net, m = net;
                p.biases[l](i) += h;
                m.biases[l](i) -= h;
                double fd = (scalar_loss(p, X) - scalar_loss(m, X)) / (2 * h);
                worst = std::max(worst, rel_err(grads.biases[l](i), fd));
            }
        }
        for (Eigen::Index r = 0; r < X.rows(); ++r)
            for (Eigen::Index c = 0; c < X.cols(); ++c) {
                Eigen::MatrixXd Xp = X, Xm = X;
                Xp(r, c) += h;
                Xm(r, c) -= h;
                double fd = (scalar_loss(net, Xp) - scalar_loss(net, Xm)) / (2 * h);
                worst = std::max(worst, rel_err(input_grad(r, c), fd));
            }
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("adam: zero gradient, closed-form first step, two-step recursion") {
    Rng rng(26);
    Mlp net = make_mlp({2, 2}, Activation::Tanh, rng);
    Mlp before = net;
    AdamState st = make_adam(net, 1e-3);

    adam_step(net, zero_grads(net), st);
    CHECK(st.step == 1);
    CHECK(max_abs_diff(net.weights[0], before.weights[0]) == 0.0);
    CHECK(max_abs_diff(net.biases[0], before.biases[0]) == 0.0);

    // Fresh state, one step with gradient g: bias correction makes
    // m_hat = g, v_hat = g^2, so the update is -lr * g/(|g| + eps').
    // The library divides by sqrt(v_hat) + eps, matching this recursion.
    Mlp net2 = before;
    AdamState st2 = make_adam(net2, 0.01);
    MlpGrads g = zero_grads(net2);
    g.weights[0] << 1.0, -2.0, 0.5, 0.0;
    g.biases[0] << 3.0, -0.25;
    adam_step(net2, g, st2);

    auto expected_update = [&](double gv, long step, double m_prev, double v_prev,
                               double* m_out, double* v_out) {
        double m = 0.9 * m_prev + 0.1 * gv;
        double v = 0.999 * v_prev + 0.001 * gv * gv;
        double mh = m / (1.0 - std::pow(0.9, step));
        double vh = v / (1.0 - std::pow(0.999, step));
        *m_out = m;
        *v_out = v;
        return -0.01 * mh / (std::sqrt(vh) + 1e-8);
    };
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) {
            double m, v;
            double up = expected_update(g.weights[0](i, j), 1, 0, 0, &m, &v);
            CHECK(net2.weights[0](i, j) ==
                  doctest::Approx(before.weights[0](i, j) + up).epsilon(1e-12));
        }

    // Second identical step continues the scalar recursion.
    Mlp net3 = net2;
    adam_step(net3, g, st2);
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) {
            double m1, v1, m2, v2;
            expected_update(g.weights[0](i, j), 1, 0, 0, &m1, &v1);
            double up2 = expected_update(g.weights[0](i, j), 2, m1, v1, &m2, &v2);
            CHECK(net3.weights[0](i, j) ==
                  doctest::Approx(net2.weights[0](i, j) + up2).epsilon(1e-10));
        }
}

TEST_CASE("two-layer net fits a linear map") {
    Rng rng(27);
    Mlp net = make_mlp({3, 16, 2}, Activation::Tanh, rng);
    Eigen::MatrixXd A(2, 3);
    A << 0.5, -1.0, 0.25, 1.5, 0.0, -0.75;
    Eigen::MatrixXd X = randn_matrix(256, 3, rng);
    Eigen::MatrixXd Y = X * A.transpose();

    AdamState st = make_adam(net, 1e-2);
    double mse = 0.0;
    for (int step = 0; step < 2000; ++step) {
        ForwardCache cache;
        Eigen::MatrixXd pred = forward(net, X, &cache);
        Eigen::MatrixXd diff = pred - Y;
        mse = diff.squaredNorm() / X.rows();
        MlpGrads grads = backward(net, cache, Eigen::MatrixXd(2.0 * diff / X.rows()));
        adam_step(net, grads, st);
    }
    CHECK(mse < 1e-3);

    // Same seed, same data: retraining reproduces identical parameters.
    Rng rng2(27);
    Mlp net2 = make_mlp({3, 16, 2}, Activation::Tanh, rng2);
    AdamState st2 = make_adam(net2, 1e-2);
    for (int step = 0; step < 2000; ++step) {
        ForwardCache cache;
        Eigen::MatrixXd pred = forward(net2, X, &cache);
        Eigen::MatrixXd diff = pred - Y;
        MlpGrads grads = backward(net2, cache, Eigen::MatrixXd(2.0 * diff / X.rows()));
        adam_step(net2, grads, st2);
    }
    CHECK(max_abs_diff(net.weights[0], net2.weights[0]) == 0.0);
    CHECK(max_abs_diff(net.weights[1], net2.weights[1]) == 0.0);
}

TEST_CASE("time features: size and range") {
    Eigen::VectorXd f = time_features(25, 100);
    CHECK(f.size() == kTimeFeatureCount);
    CHECK(f(0) == doctest::Approx(0.25));
    // k=1 pair at t/T = 1/4: sin(pi/2) = 1, cos(pi/2) = 0.
    CHECK(f(1) == doctest::Approx(1.0));
    CHECK(f(2) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(time_features(-1, 100), ConfigError);
    CHECK_THROWS_AS(time_features(101, 100), ConfigError);
}

TEST_CASE("activation names round-trip") {
    CHECK(parse_activation("tanh") == Activation::Tanh);
    CHECK(parse_activation("smooth_elu") == Activation::SmoothElu);
    CHECK(std::string(activation_name(Activation::Tanh)) == "tanh");
    CHECK(std::string(activation_name(Activation::SmoothElu)) == "smooth_elu");
    CHECK_THROWS_AS(parse_activation("relu"), ConfigError);
}
