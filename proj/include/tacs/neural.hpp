#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tacs/rng.hpp"

namespace tacs {

// Activations are C^1 on purpose: guidance differentiates through the
// network input, so kinks would break the finite-difference contracts.
enum class Activation { Tanh, SmoothElu };

// Fully connected net with a linear output layer. weights[l] is
// (fan_out x fan_in); layer_sizes includes input and output.
struct Mlp {
    std::vector<int> layer_sizes;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    Activation activation = Activation::Tanh;

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    int layer_count() const { return static_cast<int>(weights.size()); }
};

// Glorot-uniform weights (row-major draw order), zero biases.
Mlp make_mlp(const std::vector<int>& layer_sizes, Activation act, Rng& rng);

// Post-activation values per layer; acts[0] is the input batch, acts.back()
// the output. Enough to run backward without recomputing the forward pass.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> acts;
};

// Batched forward: X is (batch x input_dim), result (batch x output_dim).
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& X,
                        ForwardCache* cache = nullptr);
Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& x);

struct MlpGrads {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

MlpGrads zero_grads(const Mlp& net);

// Reverse-mode pass. G is dLoss/dOutput, (batch x output_dim); parameter
// grads come back as plain sums over the batch, so any averaging belongs in
// G. input_grad, when requested, receives dLoss/dX — guidance needs the
// gradient with respect to the network input, not just the parameters.
MlpGrads backward(const Mlp& net, const ForwardCache& cache,
                  const Eigen::MatrixXd& G, Eigen::MatrixXd* input_grad = nullptr);

// Bias-corrected Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
};

AdamState make_adam(const Mlp& net, double lr);
void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state);

// Timestep embedding fed to time-conditioned nets:
// (t/T, sin(2 pi k t/T), cos(2 pi k t/T)) for k = 1..4; 9 features, t in 0..T.
Eigen::VectorXd time_features(int t, int T);
inline constexpr int kTimeFeatureCount = 9;

const char* activation_name(Activation act);
Activation parse_activation(const std::string& name);

} // namespace tacs
