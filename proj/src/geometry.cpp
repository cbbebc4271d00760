#include "tacs/geometry.hpp"

#include "tacs/errors.hpp"

namespace tacs {

Eigen::MatrixXd randn_matrix(int rows, int cols, Rng& rng) {
    Eigen::MatrixXd out(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out(i, j) = rng.normal();
    return out;
}

PointSet sample_subspace_gaussian(int atom_count, int dim, Rng& rng) {
    if (atom_count < 1 || dim < 1)
        throw ConfigError("sample_subspace_gaussian: need atom_count >= 1 and dim >= 1");
    return project_zero_com(randn_matrix(atom_count, dim, rng));
}

PointSet apply_rigid(const PointSet& x, const RigidTransform& g) {
    if (g.rotation.rows() != x.cols() || g.rotation.cols() != x.cols() ||
        g.translation.size() != x.cols())
        throw ConfigError("apply_rigid: transform dimension mismatch");
    return (x * g.rotation.transpose()).rowwise() + g.translation.transpose();
}

Eigen::MatrixXd random_rotation(int dim, Rng& rng) {
    if (dim < 1) throw ConfigError("random_rotation: dim >= 1 required");
    Eigen::MatrixXd a = randn_matrix(dim, dim, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    // Fix column signs against the R diagonal so Q is uniquely determined by
    // the Gaussian draw, then reflect into SO(dim).
    Eigen::VectorXd d = qr.matrixQR().diagonal();
    for (int i = 0; i < dim; ++i)
        if (d(i) < 0.0) q.col(i) = -q.col(i);
    if (q.determinant() < 0.0) q.col(0) = -q.col(0);
    return q;
}

double sphere_manifold_distance(const PointSet& x) {
    if (x.rows() < 1) throw ConfigError("sphere_manifold_distance: empty point set");
    return (x.rowwise().norm().array() - 1.0).abs().mean();
}

Eigen::VectorXd flatten(const PointSet& x) {
    Eigen::VectorXd v(x.size());
    const int d = static_cast<int>(x.cols());
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < d; ++j) v(i * d + j) = x(i, j);
    return v;
}

PointSet unflatten(const Eigen::VectorXd& v, int atom_count, int dim) {
    if (v.size() != static_cast<Eigen::Index>(atom_count) * dim)
        throw ConfigError("unflatten: size mismatch");
    PointSet x(atom_count, dim);
    for (int i = 0; i < atom_count; ++i)
        for (int j = 0; j < dim; ++j) x(i, j) = v(i * dim + j);
    return x;
}

} // namespace tacs
