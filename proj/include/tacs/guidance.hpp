#pragma once

#include <functional>
#include <string>

#include "tacs/score.hpp"

namespace tacs {

// A property the sampler can steer toward. evaluate maps a point set to a
// condition vector; gradient_vjp(x, u) returns (d evaluate / d x)^T u as an
// M x D matrix and is left empty for black-box (zeroth-order only)
// properties.
struct PropertyEstimator {
    std::string name;
    int condition_dim = 1;
    std::function<Eigen::VectorXd(const PointSet&)> evaluate;
    std::function<PointSet(const PointSet&, const Eigen::VectorXd&)> gradient_vjp;

    bool differentiable() const { return static_cast<bool>(gradient_vjp); }
};

enum class GradientMode { FirstOrder, ZerothOrder };

struct GuidanceConfig {
    int m = 1;           // Monte Carlo samples around x0_hat
    double sigma = 5e-3; // MC perturbation scale (no noise drawn when 0)
    double kappa = 1.0;  // gradient clip threshold
    GradientMode mode = GradientMode::FirstOrder;
    int k = 0;           // zeroth-order direction count; 0 means ambient M*D
    double h = 1e-4;     // zeroth-order difference step
};

// Rescale g to Frobenius norm kappa when it exceeds kappa; otherwise
// untouched. kappa = +inf disables clipping.
PointSet clip_gradient(const PointSet& g, double kappa);

// Estimates -grad_x L(A(x), c), L = 1/2 ||A(x) - c||^2, by averaged
// random-direction central differences:
//   -(dim/k) sum_i d_i (L(x + h d_i) - L(x - h d_i)) / (2h)
// Directions come in orthonormal blocks (QR of Gaussian draws), so k = M*D
// uses one complete basis and the estimate is exact for quadratic L.
// Unbiased for any k under the Haar draw.
PointSet zeroth_order_gradient(const PointSet& x0_hat, const Eigen::VectorXd& target_c,
                               const PropertyEstimator& prop, int k, double h, Rng& rng);

// Zero-CoM projected gradient, with respect to x_t, of
//   log (1/m) sum_i exp(-L(A(x0_i), c)),   x0_i = x0_hat + sigma xi_i,
// where x0_hat is the Tweedie estimate at (x_t, t) and xi_i are subspace
// Gaussians. First-order mode differentiates through the Tweedie map and the
// score network's input gradient; m = 1, sigma = 0 is exactly the DPS chain
// rule. Zeroth-order mode instead takes zeroth_order_gradient estimates at
// the x0_i (softmax-weighted by the same log-sum-exp weights) and skips the
// Tweedie pullback, matching the estimator's black-box usage.
//
// condition and w select the same (possibly CFG-combined) score the sampler
// uses for its reverse updates. Non-finite output raises GuidanceError.
PointSet og_gradient(const PointSet& x_t, int t, const Eigen::VectorXd& target_c,
                     const ScoreModel& model, const NoiseSchedule& sched,
                     const PropertyEstimator& prop, const GuidanceConfig& cfg,
                     Rng& rng, const Eigen::VectorXd* condition = nullptr,
                     double w = 0.0);

const char* gradient_mode_name(GradientMode mode);
GradientMode parse_gradient_mode(const std::string& name);

} // namespace tacs
