#pragma once

#include <Eigen/Dense>

#include "tacs/rng.hpp"

namespace tacs {

// A point set is an M x D matrix, one atom per row. Sampler states live in
// the zero-CoM subspace: every column sums to zero. The subspace has
// dimension (M-1)*D and the projection below is the canonical isometry-
// friendly way in and out of it.
using PointSet = Eigen::MatrixXd;

struct RigidTransform {
    Eigen::MatrixXd rotation;    // D x D orthogonal
    Eigen::VectorXd translation; // D
};

// Subtract the centroid from every row. Idempotent, linear, symmetric as an
// operator, and commutes with rotations about the origin.
template <typename Derived>
Eigen::MatrixXd project_zero_com(const Eigen::MatrixBase<Derived>& coords) {
    Eigen::RowVectorXd centroid = coords.colwise().mean();
    return coords.rowwise() - centroid;
}

// Gaussian matrix filled row by row; the draw order is part of the
// reproducibility contract.
Eigen::MatrixXd randn_matrix(int rows, int cols, Rng& rng);

// iid N(0,1) in the ambient M*D coordinates, then projected. Coordinates of
// the result are exchangeable with per-coordinate variance (M-1)/M; e.g.
// M=2, D=1 gives (x, -x) with x ~ N(0, 1/2).
PointSet sample_subspace_gaussian(int atom_count, int dim, Rng& rng);

PointSet apply_rigid(const PointSet& x, const RigidTransform& g);

// Rotation drawn via QR of a Gaussian matrix with the usual sign fix,
// reflected into det +1 if needed.
Eigen::MatrixXd random_rotation(int dim, Rng& rng);

// Mean absolute deviation of atom radii from the unit sphere (the distance
// from each atom to its radial projection): (1/M) sum_i | ||x_i|| - 1 |.
// Also serves the ring task, where the "sphere" is the unit circle.
double sphere_manifold_distance(const PointSet& x);

// Row-major flattening: atom 0's coordinates first. unflatten is its exact
// inverse. Network inputs and binary snapshots both use this order.
Eigen::VectorXd flatten(const PointSet& x);
PointSet unflatten(const Eigen::VectorXd& v, int atom_count, int dim);

} // namespace tacs
