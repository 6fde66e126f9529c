#pragma once

#include <Eigen/Core>

#include "cranioforge/mesh.hpp"

namespace cranioforge {

/// x -> scale * rotation * x + translation, with a proper rotation.
struct SimilarityTransform {
    double scale = 1.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static SimilarityTransform identity() { return {}; }

    Point3 apply(const Point3& p) const { return scale * (rotation * p) + translation; }
    /// Rotation only; for direction vectors such as normals.
    Point3 apply_direction(const Point3& d) const { return rotation * d; }

    SimilarityTransform inverse() const;

    /// Throws unless R^T R = I and det R = +1 within 1e-9 and scale > 0.
    void validate() const;
};

/// (a . b)(x) = a(b(x))
SimilarityTransform compose(const SimilarityTransform& a, const SimilarityTransform& b);

PointSet apply(const SimilarityTransform& t, const PointSet& points);
TriMesh apply(const SimilarityTransform& t, const TriMesh& mesh);

/// Closed-form least-squares similarity mapping source onto target
/// (cross-covariance SVD with determinant correction, no reflections).
/// Throws Degenerate for fewer than 3 points or a collinear source.
SimilarityTransform estimate_similarity(const PointSet& source, const PointSet& target);

/// Sum of squared residuals |T(source_i) - target_i|^2.
double alignment_residual(const SimilarityTransform& t, const PointSet& source, const PointSet& target);

}  // namespace cranioforge
