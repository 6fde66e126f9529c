#include "cranioforge/registration.hpp"

#include <cmath>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "cranioforge/error.hpp"

namespace cranioforge {

SimilarityTransform SimilarityTransform::inverse() const {
    SimilarityTransform inv;
    inv.scale = 1.0 / scale;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.scale * (inv.rotation * translation));
    return inv;
}

void SimilarityTransform::validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw Error(ErrorKind::InvalidInput, "similarity transform scale must be positive");
    }
    const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho <= 1e-9) || !(std::abs(rotation.determinant() - 1.0) <= 1e-9)) {
        throw Error(ErrorKind::InvalidInput, "similarity transform rotation is not a proper rotation");
    }
    if (!translation.allFinite()) {
        throw Error(ErrorKind::InvalidInput, "similarity transform translation is not finite");
    }
}

SimilarityTransform compose(const SimilarityTransform& a, const SimilarityTransform& b) {
    SimilarityTransform c;
    c.scale = a.scale * b.scale;
    c.rotation = a.rotation * b.rotation;
    c.translation = a.scale * (a.rotation * b.translation) + a.translation;
    return c;
}

PointSet apply(const SimilarityTransform& t, const PointSet& points) {
    return ((t.scale * t.rotation) * points).colwise() + t.translation;
}

TriMesh apply(const SimilarityTransform& t, const TriMesh& mesh) {
    PointSet normals;
    if (mesh.has_normals()) normals = t.rotation * mesh.normals();
    return TriMesh(apply(t, mesh.vertices()), mesh.faces(), std::move(normals));
}

SimilarityTransform estimate_similarity(const PointSet& source, const PointSet& target) {
    if (source.cols() != target.cols()) {
        throw Error(ErrorKind::Schema, "Procrustes: source and target point counts differ");
    }
    const auto n = source.cols();
    if (n < 3) {
        throw Error(ErrorKind::Degenerate, "Procrustes needs at least 3 corresponding points");
    }
    const Eigen::Vector3d mu_x = source.rowwise().mean();
    const Eigen::Vector3d mu_y = target.rowwise().mean();
    const PointSet xc = source.colwise() - mu_x;
    const PointSet yc = target.colwise() - mu_y;

    const double var_x = xc.squaredNorm() / static_cast<double>(n);
    const Eigen::Matrix3d cov_x = xc * xc.transpose() / static_cast<double>(n);
    Eigen::JacobiSVD<Eigen::Matrix3d> shape(cov_x);
    const auto sx = shape.singularValues();
    if (!(var_x > 0.0) || !(sx[1] > 1e-12 * sx[0])) {
        throw Error(ErrorKind::Degenerate, "Procrustes source points are coincident or collinear");
    }

    const Eigen::Matrix3d sigma = yc * xc.transpose() / static_cast<double>(n);
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix3d& u = svd.matrixU();
    const Eigen::Matrix3d& v = svd.matrixV();
    Eigen::Vector3d s = Eigen::Vector3d::Ones();
    // Flip the weakest singular direction when the optimum would reflect.
    if (u.determinant() * v.determinant() < 0.0) s[2] = -1.0;

    SimilarityTransform t;
    t.rotation = u * s.asDiagonal() * v.transpose();
    t.scale = svd.singularValues().dot(s) / var_x;
    if (!(t.scale > 0.0)) {
        throw Error(ErrorKind::Degenerate, "Procrustes produced a non-positive scale");
    }
    t.translation = mu_y - t.scale * (t.rotation * mu_x);
    return t;
}

double alignment_residual(const SimilarityTransform& t, const PointSet& source, const PointSet& target) {
    return (apply(t, source) - target).squaredNorm();
}

}  // namespace cranioforge
