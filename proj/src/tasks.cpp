#include "tacs/tasks.hpp"

#include <cmath>

#include "tacs/errors.hpp"

namespace tacs {

namespace {

constexpr double kSingularDistance = 1e-6;

} // namespace

double surrogate_energy(const PointSet& x) {
    int M = static_cast<int>(x.rows());
    if (M < 2) throw ConfigError("surrogate energy needs at least two atoms");
    double e = 0.0;
    for (int i = 0; i < M; ++i) {
        for (int j = i + 1; j < M; ++j) {
            double d = (x.row(i) - x.row(j)).norm();
            if (d < kSingularDistance)
                throw SingularityError("atoms " + std::to_string(i) + " and " +
                                       std::to_string(j) + " nearly coincide");
            e += 1.0 / d;
        }
    }
    return e;
}

PointSet surrogate_energy_gradient(const PointSet& x) {
    int M = static_cast<int>(x.rows());
    if (M < 2) throw ConfigError("surrogate energy needs at least two atoms");
    PointSet g = PointSet::Zero(x.rows(), x.cols());
    for (int i = 0; i < M; ++i) {
        for (int j = i + 1; j < M; ++j) {
            Eigen::RowVectorXd diff = x.row(i) - x.row(j);
            double d = diff.norm();
            if (d < kSingularDistance)
                throw SingularityError("atoms " + std::to_string(i) + " and " +
                                       std::to_string(j) + " nearly coincide");
            Eigen::RowVectorXd pull = diff / (d * d * d);
            g.row(i) -= pull;
            g.row(j) += pull;
        }
    }
    return g;
}

double signed_angle(const PointSet& x) {
    if (x.rows() < 1 || x.cols() != 2)
        throw ConfigError("signed angle expects a 2-D point set");
    double px = x(0, 0);
    double py = x(0, 1);
    if (std::hypot(px, py) < kSingularDistance)
        throw SingularityError("first atom is at the origin");
    return std::atan2(py, px);
}

PropertyEstimator make_energy_property() {
    PropertyEstimator prop;
    prop.name = "energy";
    prop.condition_dim = 1;
    prop.evaluate = [](const PointSet& x) {
        Eigen::VectorXd v(1);
        v(0) = surrogate_energy(x);
        return v;
    };
    prop.gradient_vjp = [](const PointSet& x, const Eigen::VectorXd& r) {
        if (r.size() != 1) throw ConfigError("energy cotangent must be scalar");
        return PointSet(r(0) * surrogate_energy_gradient(x));
    };
    return prop;
}

PropertyEstimator make_angle_property() {
    PropertyEstimator prop;
    prop.name = "angle";
    prop.condition_dim = 1;
    prop.evaluate = [](const PointSet& x) {
        Eigen::VectorXd v(1);
        v(0) = signed_angle(x);
        return v;
    };
    prop.gradient_vjp = [](const PointSet& x, const Eigen::VectorXd& r) {
        if (r.size() != 1) throw ConfigError("angle cotangent must be scalar");
        signed_angle(x); // reuse the shape and singularity checks
        double px = x(0, 0);
        double py = x(0, 1);
        double r2 = px * px + py * py;
        PointSet g = PointSet::Zero(x.rows(), x.cols());
        g(0, 0) = -py / r2 * r(0);
        g(0, 1) = px / r2 * r(0);
        return g;
    };
    return prop;
}

LabeledDataset generate_sphere_dataset(int n, Rng& rng) {
    if (n < 1) throw ConfigError("dataset size must be at least 1");
    const int M = 3;
    const int D = 3;
    LabeledDataset ds;
    ds.task = "sphere";
    ds.points.reserve(static_cast<std::size_t>(n));
    ds.raw_points.reserve(static_cast<std::size_t>(n));
    ds.labels.resize(n);
    for (int s = 0; s < n; ++s) {
        PointSet raw;
        double energy = 0.0;
        // Coincident-atom draws are rejected wholesale so every stored
        // sample has a well-defined label; the rejection itself is part of
        // the seeded stream.
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 100)
                throw NumericalError("sphere sampler kept drawing coincident atoms");
            PointSet dirs = randn_matrix(M, D, rng);
            if ((dirs.rowwise().norm().array() < 1e-12).any()) continue;
            dirs.rowwise().normalize();
            raw = dirs * random_rotation(D, rng).transpose();
            try {
                energy = surrogate_energy(raw);
            } catch (const SingularityError&) {
                continue;
            }
            break;
        }
        ds.raw_points.push_back(raw);
        ds.points.push_back(project_zero_com(raw));
        ds.labels(s) = energy;
    }
    return ds;
}

LabeledDataset generate_ring_dataset(int n, Rng& rng) {
    if (n < 1) throw ConfigError("dataset size must be at least 1");
    LabeledDataset ds;
    ds.task = "ring";
    ds.points.reserve(static_cast<std::size_t>(n));
    ds.raw_points.reserve(static_cast<std::size_t>(n));
    ds.labels.resize(n);
    for (int s = 0; s < n; ++s) {
        double theta = 2.0 * M_PI * rng.uniform() - M_PI;
        PointSet raw(2, 2);
        raw(0, 0) = std::cos(theta);
        raw(0, 1) = std::sin(theta);
        raw.row(1) = -raw.row(0);
        ds.raw_points.push_back(raw);
        ds.points.push_back(project_zero_com(raw));
        ds.labels(s) = signed_angle(raw);
    }
    return ds;
}

TaskSpec make_sphere_task() {
    TaskSpec task;
    task.name = "sphere";
    task.atom_count = 3;
    task.dim = 3;
    task.generate = generate_sphere_dataset;
    task.property = make_energy_property();
    task.manifold_distance = sphere_manifold_distance;
    return task;
}

TaskSpec make_ring_task() {
    TaskSpec task;
    task.name = "ring";
    task.atom_count = 2;
    task.dim = 2;
    task.generate = generate_ring_dataset;
    task.property = make_angle_property();
    task.manifold_distance = sphere_manifold_distance;
    return task;
}

TaskSpec make_task(const std::string& name) {
    if (name == "sphere") return make_sphere_task();
    if (name == "ring") return make_ring_task();
    throw ConfigError("unknown task '" + name + "'");
}

} // namespace tacs
