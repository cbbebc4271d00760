#pragma once

#include <Eigen/Dense>

#include "tacs/geometry.hpp"

namespace tacs {

// Discrete variance-preserving diffusion over timesteps t in {0, ..., T}.
// Data sits at t = 0. beta is 1-based: beta(t) is the noise added going from
// t-1 to t. bar_alpha_t = prod_{s<=t} (1 - beta_s), so bar(0) = 1 and the
// sequence is strictly decreasing.
struct NoiseSchedule {
    int T = 0;
    Eigen::VectorXd betas;     // size T; betas[i] = beta_{i+1}
    Eigen::VectorXd bar_alpha; // size T+1

    double beta(int t) const;  // t in 1..T
    double alpha(int t) const { return 1.0 - beta(t); }
    double bar(int t) const;   // t in 0..T
};

// beta_t linear from beta_min (t=1) to beta_max (t=T). T = 1 collapses to the
// single value beta_min.
NoiseSchedule build_linear_schedule(int T, double beta_min, double beta_max);

// Arbitrary beta sequence, each in (0, 1); used by tests that need a specific
// bar_alpha value.
NoiseSchedule build_schedule_from_betas(const Eigen::VectorXd& betas);

// x_t = sqrt(bar_alpha_t) x0 + sqrt(1 - bar_alpha_t) eps, t in 0..T.
// t = 0 returns x0 untouched (eps is ignored up to the 0-weight multiply).
PointSet forward_perturb(const PointSet& x0, int t, const PointSet& eps,
                         const NoiseSchedule& sched);

// Posterior-mean estimate of x0 from a state and the score of the time-t
// marginal: (x_t + (1 - bar_alpha_t) score) / sqrt(bar_alpha_t), t in 1..T.
// The same map serves time correction when called with a predicted t.
PointSet tweedie(const PointSet& x_t, int t, const PointSet& score,
                 const NoiseSchedule& sched);

} // namespace tacs
