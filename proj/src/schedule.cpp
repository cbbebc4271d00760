#include "tacs/schedule.hpp"

#include <cmath>

#include "tacs/errors.hpp"

namespace tacs {

double NoiseSchedule::beta(int t) const {
    if (t < 1 || t > T) throw ConfigError("NoiseSchedule::beta: t out of 1..T");
    return betas(t - 1);
}

double NoiseSchedule::bar(int t) const {
    if (t < 0 || t > T) throw ConfigError("NoiseSchedule::bar: t out of 0..T");
    return bar_alpha(t);
}

NoiseSchedule build_schedule_from_betas(const Eigen::VectorXd& betas) {
    if (betas.size() < 1) throw ConfigError("schedule: need T >= 1");
    NoiseSchedule s;
    s.T = static_cast<int>(betas.size());
    s.betas = betas;
    s.bar_alpha.resize(s.T + 1);
    s.bar_alpha(0) = 1.0;
    for (int t = 1; t <= s.T; ++t) {
        const double b = betas(t - 1);
        if (!(b > 0.0 && b < 1.0))
            throw ConfigError("schedule: every beta must lie in (0, 1)");
        s.bar_alpha(t) = s.bar_alpha(t - 1) * (1.0 - b);
    }
    return s;
}

NoiseSchedule build_linear_schedule(int T, double beta_min, double beta_max) {
    if (T < 1) throw ConfigError("build_linear_schedule: T >= 1 required");
    if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
        throw ConfigError("build_linear_schedule: need 0 < beta_min <= beta_max < 1");
    Eigen::VectorXd betas(T);
    for (int t = 1; t <= T; ++t) {
        const double frac = (T == 1) ? 0.0 : static_cast<double>(t - 1) / (T - 1);
        betas(t - 1) = beta_min + (beta_max - beta_min) * frac;
    }
    return build_schedule_from_betas(betas);
}

PointSet forward_perturb(const PointSet& x0, int t, const PointSet& eps,
                         const NoiseSchedule& sched) {
    if (t < 0 || t > sched.T) throw ConfigError("forward_perturb: t out of 0..T");
    if (eps.rows() != x0.rows() || eps.cols() != x0.cols())
        throw ConfigError("forward_perturb: eps shape mismatch");
    const double ab = sched.bar(t);
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

PointSet tweedie(const PointSet& x_t, int t, const PointSet& score,
                 const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T) throw ConfigError("tweedie: t out of 1..T");
    if (score.rows() != x_t.rows() || score.cols() != x_t.cols())
        throw ConfigError("tweedie: score shape mismatch");
    const double ab = sched.bar(t);
    if (ab < 1e-12)
        throw NumericalError("tweedie: bar_alpha_t below 1e-12, estimate would blow up");
    return (x_t + (1.0 - ab) * score) / std::sqrt(ab);
}

} // namespace tacs
