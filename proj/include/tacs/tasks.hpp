#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tacs/guidance.hpp"

namespace tacs {

// Coulomb-repulsion surrogate sum_{i<j} 1 / ||x_i - x_j||. Dimensionless,
// E(3)-invariant. Pairs closer than 1e-6 are treated as singular.
double surrogate_energy(const PointSet& x);

// dE/dx_i = -sum_{j != i} (x_i - x_j) / d_ij^3, same singularity guard.
PointSet surrogate_energy_gradient(const PointSet& x);

// Signed angle of the first atom, atan2(y, x), in (-pi, pi]. The gradient is
// singular at the origin (radius below 1e-6 is an error).
double signed_angle(const PointSet& x);

PropertyEstimator make_energy_property();
PropertyEstimator make_angle_property();

struct LabeledDataset {
    std::vector<PointSet> points;     // zero-CoM projected, what the models see
    std::vector<PointSet> raw_points; // as generated, before projection
    Eigen::VectorXd labels;
    std::string task;
};

struct TaskSpec {
    std::string name;
    int atom_count = 0;
    int dim = 0;
    std::function<LabeledDataset(int, Rng&)> generate;
    PropertyEstimator property;
    // Mean distance from each atom to the task manifold (unit sphere or
    // unit circle; both reduce to mean | ||x_i|| - 1 |).
    std::function<double(const PointSet&)> manifold_distance;
};

// Three atoms uniform on the unit sphere surface, randomly rotated (a no-op
// in distribution, kept as deliberate augmentation), labeled with
// surrogate_energy of the raw on-sphere coordinates, then projected. The
// rare near-coincident draw is rejected and resampled.
LabeledDataset generate_sphere_dataset(int n, Rng& rng);

// Two mirrored points (p, -p) on the unit circle, zero-CoM by construction,
// labeled with the signed angle of the first point.
LabeledDataset generate_ring_dataset(int n, Rng& rng);

TaskSpec make_sphere_task();
TaskSpec make_ring_task();
TaskSpec make_task(const std::string& name);

} // namespace tacs
