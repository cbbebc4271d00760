#include "tacs/neural.hpp"

#include <cmath>

#include "tacs/errors.hpp"

namespace tacs {

namespace {

void activate_inplace(Eigen::MatrixXd& z, Activation act) {
    if (act == Activation::Tanh) {
        z = z.array().tanh();
    } else {
        // expm1 keeps the negative branch accurate near zero; the derivative
        // (exp(z) below, 1 above) is continuous at z = 0.
        z = z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
    }
}

// Derivative expressed through the post-activation value a = act(z):
// tanh' = 1 - a^2, smooth-ELU' = a + 1 on the negative branch and 1 above.
Eigen::MatrixXd activation_prime(const Eigen::MatrixXd& a, Activation act) {
    if (act == Activation::Tanh) return (1.0 - a.array().square()).matrix();
    return a.unaryExpr([](double v) { return v > 0.0 ? 1.0 : v + 1.0; });
}

} // namespace

Mlp make_mlp(const std::vector<int>& layer_sizes, Activation act, Rng& rng) {
    if (layer_sizes.size() < 2)
        throw ConfigError("make_mlp: need at least input and output sizes");
    for (int s : layer_sizes)
        if (s < 1) throw ConfigError("make_mlp: every layer size must be >= 1");
    Mlp net;
    net.layer_sizes = layer_sizes;
    net.activation = act;
    for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int i = 0; i < fan_out; ++i)
            for (int j = 0; j < fan_in; ++j)
                w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return net;
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& X, ForwardCache* cache) {
    if (X.cols() != net.input_dim())
        throw ConfigError("forward: input width does not match the net");
    Eigen::MatrixXd a = X;
    if (cache) {
        cache->acts.clear();
        cache->acts.push_back(a);
    }
    for (int l = 0; l < net.layer_count(); ++l) {
        Eigen::MatrixXd z = a * net.weights[l].transpose();
        z.rowwise() += net.biases[l].transpose();
        if (l + 1 < net.layer_count()) activate_inplace(z, net.activation);
        a = std::move(z);
        if (cache) cache->acts.push_back(a);
    }
    return a;
}

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& x) {
    return forward(net, Eigen::MatrixXd(x.transpose()), nullptr).row(0);
}

MlpGrads zero_grads(const Mlp& net) {
    MlpGrads g;
    for (int l = 0; l < net.layer_count(); ++l) {
        g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return g;
}

MlpGrads backward(const Mlp& net, const ForwardCache& cache,
                  const Eigen::MatrixXd& G, Eigen::MatrixXd* input_grad) {
    const int L = net.layer_count();
    if (static_cast<int>(cache.acts.size()) != L + 1)
        throw ConfigError("backward: cache does not match the net");
    if (G.rows() != cache.acts[0].rows() || G.cols() != net.output_dim())
        throw ConfigError("backward: G shape mismatch");

    MlpGrads grads = zero_grads(net);
    Eigen::MatrixXd g = G;
    for (int l = L - 1; l >= 0; --l) {
        if (l < L - 1) g = g.cwiseProduct(activation_prime(cache.acts[l + 1], net.activation));
        grads.weights[l].noalias() = g.transpose() * cache.acts[l];
        grads.biases[l] = g.colwise().sum();
        if (l > 0 || input_grad) g = g * net.weights[l];
    }
    if (input_grad) *input_grad = std::move(g);
    return grads;
}

AdamState make_adam(const Mlp& net, double lr) {
    if (!(lr > 0.0)) throw ConfigError("make_adam: lr must be positive");
    AdamState s;
    s.lr = lr;
    for (int l = 0; l < net.layer_count(); ++l) {
        s.m_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        s.v_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        s.m_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        s.v_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return s;
}

void adam_step(Mlp& net, const MlpGrads& grads, AdamState& s) {
    if (grads.weights.size() != net.weights.size())
        throw ConfigError("adam_step: grads do not match the net");
    s.step += 1;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (int l = 0; l < net.layer_count(); ++l) {
        s.m_w[l] = s.beta1 * s.m_w[l] + (1.0 - s.beta1) * grads.weights[l];
        s.v_w[l] = s.beta2 * s.v_w[l] + (1.0 - s.beta2) * grads.weights[l].cwiseProduct(grads.weights[l]);
        net.weights[l].array() -=
            s.lr * (s.m_w[l].array() / bc1) / ((s.v_w[l].array() / bc2).sqrt() + s.eps);

        s.m_b[l] = s.beta1 * s.m_b[l] + (1.0 - s.beta1) * grads.biases[l];
        s.v_b[l] = s.beta2 * s.v_b[l] + (1.0 - s.beta2) * grads.biases[l].cwiseProduct(grads.biases[l]);
        net.biases[l].array() -=
            s.lr * (s.m_b[l].array() / bc1) / ((s.v_b[l].array() / bc2).sqrt() + s.eps);
    }
}

Eigen::VectorXd time_features(int t, int T) {
    if (T < 1 || t < 0 || t > T) throw ConfigError("time_features: t out of 0..T");
    Eigen::VectorXd v(kTimeFeatureCount);
    const double u = static_cast<double>(t) / T;
    v(0) = u;
    for (int k = 1; k <= 4; ++k) {
        v(2 * k - 1) = std::sin(2.0 * M_PI * k * u);
        v(2 * k) = std::cos(2.0 * M_PI * k * u);
    }
    return v;
}

const char* activation_name(Activation act) {
    switch (act) {
    case Activation::Tanh: return "tanh";
    case Activation::SmoothElu: return "smooth_elu";
    }
    throw ConfigError("unknown activation");
}

Activation parse_activation(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "smooth_elu") return Activation::SmoothElu;
    throw ConfigError("unknown activation '" + name + "'");
}

} // namespace tacs
