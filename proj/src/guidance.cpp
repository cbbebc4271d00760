#include "tacs/guidance.hpp"

#include <cmath>

#include "tacs/errors.hpp"

namespace tacs {

namespace {

void check_property(const PropertyEstimator& prop, const Eigen::VectorXd& target_c) {
    if (!prop.evaluate) throw ConfigError("guidance: property has no evaluate");
    if (target_c.size() != prop.condition_dim)
        throw ConfigError("guidance: target size does not match the property");
}

double loss_at(const PropertyEstimator& prop, const PointSet& x,
               const Eigen::VectorXd& target_c) {
    Eigen::VectorXd v = prop.evaluate(x);
    if (v.size() != prop.condition_dim)
        throw ConfigError("guidance: property returned a wrong-sized value");
    return 0.5 * (v - target_c).squaredNorm();
}

void check_guidance_config(const GuidanceConfig& cfg) {
    if (cfg.m < 1) throw ConfigError("guidance: m >= 1 required");
    if (cfg.sigma < 0.0) throw ConfigError("guidance: sigma >= 0 required");
    if (!(cfg.kappa > 0.0)) throw ConfigError("guidance: kappa > 0 required");
    if (!(cfg.h > 0.0)) throw ConfigError("guidance: h > 0 required");
}

} // namespace

PointSet clip_gradient(const PointSet& g, double kappa) {
    if (!(kappa > 0.0)) throw ConfigError("clip_gradient: kappa > 0 required");
    const double n = g.norm();
    if (n > kappa) return g * (kappa / n);
    return g;
}

PointSet zeroth_order_gradient(const PointSet& x0_hat, const Eigen::VectorXd& target_c,
                               const PropertyEstimator& prop, int k, double h,
                               Rng& rng) {
    check_property(prop, target_c);
    if (!(h > 0.0)) throw ConfigError("zeroth_order_gradient: h > 0 required");
    const int dim = static_cast<int>(x0_hat.size());
    if (k <= 0) k = dim;

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
    int made = 0;
    while (made < k) {
        // Fresh orthonormal block; a full block of dim directions resolves a
        // quadratic loss exactly, partial blocks stay unbiased.
        const int b = std::min(dim, k - made);
        Eigen::MatrixXd gauss = randn_matrix(dim, b, rng);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, b);
        for (int i = 0; i < b; ++i) {
            const PointSet dir = unflatten(q.col(i), static_cast<int>(x0_hat.rows()),
                                           static_cast<int>(x0_hat.cols()));
            const double lp = loss_at(prop, x0_hat + h * dir, target_c);
            const double lm = loss_at(prop, x0_hat - h * dir, target_c);
            acc += q.col(i) * ((lp - lm) / (2.0 * h));
        }
        made += b;
    }
    Eigen::VectorXd est = -(static_cast<double>(dim) / k) * acc;
    return unflatten(est, static_cast<int>(x0_hat.rows()), static_cast<int>(x0_hat.cols()));
}

PointSet og_gradient(const PointSet& x_t, int t, const Eigen::VectorXd& target_c,
                     const ScoreModel& model, const NoiseSchedule& sched,
                     const PropertyEstimator& prop, const GuidanceConfig& cfg,
                     Rng& rng, const Eigen::VectorXd* condition, double w) {
    check_property(prop, target_c);
    check_guidance_config(cfg);
    if (cfg.mode == GradientMode::FirstOrder && !prop.differentiable())
        throw ConfigError("og_gradient: first-order mode needs a differentiable property");

    const int M = model.atom_count;
    const int D = model.dim;

    PointSet score = condition ? cfg_score(model, x_t, t, sched, *condition, w)
                               : score_at(model, x_t, t, sched, nullptr);
    PointSet x0_hat = tweedie(x_t, t, score, sched);

    // x0 cloud around the Tweedie estimate. sigma = 0 keeps the estimate
    // itself and draws nothing, so the DPS degeneracy consumes no extra
    // randomness.
    std::vector<PointSet> x0s;
    x0s.reserve(cfg.m);
    for (int i = 0; i < cfg.m; ++i) {
        if (cfg.sigma > 0.0)
            x0s.push_back(x0_hat + cfg.sigma * sample_subspace_gaussian(M, D, rng));
        else
            x0s.push_back(x0_hat);
    }

    // log-sum-exp weights over -L_i
    Eigen::VectorXd losses(cfg.m);
    std::vector<Eigen::VectorXd> residuals(cfg.m);
    for (int i = 0; i < cfg.m; ++i) {
        Eigen::VectorXd v = prop.evaluate(x0s[i]);
        if (v.size() != prop.condition_dim)
            throw ConfigError("og_gradient: property returned a wrong-sized value");
        residuals[i] = v - target_c;
        losses(i) = 0.5 * residuals[i].squaredNorm();
    }
    Eigen::ArrayXd weights = (-(losses.array() - losses.minCoeff())).exp();
    weights /= weights.sum();

    PointSet g(M, D);
    if (cfg.mode == GradientMode::FirstOrder) {
        // u = sum_i w_i * (-grad_{x0} L_i), then pulled back through the
        // Tweedie map: with eps-parameterization and the projected score,
        //   x0_hat(x) = (x - sqrt(1-ab) P eps_hat(x)) / sqrt(ab)
        //   (d x0_hat / d x)^T u = (u - sqrt(1-ab) J_eps^T (P u)) / sqrt(ab).
        PointSet u = PointSet::Zero(M, D);
        for (int i = 0; i < cfg.m; ++i)
            u += weights(i) * prop.gradient_vjp(x0s[i], -residuals[i]);

        const double ab = sched.bar(t);
        const double s1m = std::sqrt(1.0 - ab);
        PointSet pu = project_zero_com(u);
        PointSet vjp;
        if (condition && w != 0.0 && w != -1.0) {
            // CFG combination: eps_cfg = -w eps_null + (1+w) eps_c, same
            // branch shortcuts as cfg_score.
            vjp = -w * eps_input_vjp(model, x_t, t, sched, pu, nullptr) +
                  (1.0 + w) * eps_input_vjp(model, x_t, t, sched, pu, condition);
        } else if (condition && w != -1.0) {
            vjp = eps_input_vjp(model, x_t, t, sched, pu, condition);
        } else {
            vjp = eps_input_vjp(model, x_t, t, sched, pu, nullptr);
        }
        g = project_zero_com((u - s1m * vjp) / std::sqrt(ab));
    } else {
        const int k = cfg.k > 0 ? cfg.k : M * D;
        PointSet acc = PointSet::Zero(M, D);
        for (int i = 0; i < cfg.m; ++i)
            acc += weights(i) * zeroth_order_gradient(x0s[i], target_c, prop, k, cfg.h, rng);
        g = project_zero_com(acc);
    }

    if (!g.allFinite())
        throw GuidanceError("og_gradient: non-finite gradient at t = " + std::to_string(t));
    return g;
}

const char* gradient_mode_name(GradientMode mode) {
    switch (mode) {
    case GradientMode::FirstOrder: return "first_order";
    case GradientMode::ZerothOrder: return "zeroth_order";
    }
    throw ConfigError("unknown gradient mode");
}

GradientMode parse_gradient_mode(const std::string& name) {
    if (name == "first_order") return GradientMode::FirstOrder;
    if (name == "zeroth_order") return GradientMode::ZerothOrder;
    throw ConfigError("unknown gradient mode '" + name + "'");
}

} // namespace tacs
