#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace cranioforge {

using Point3 = Eigen::Vector3d;
/// Column-per-point 3xN matrix. Storage is xyz-innermost, point-major.
using PointSet = Eigen::Matrix3Xd;
using FaceIndices = Eigen::Matrix3Xi;

/// Triangle mesh in millimeters. Immutable once constructed.
class TriMesh {
public:
    TriMesh() = default;
    /// Validates face indices; normals (if non-empty) must be unit length.
    TriMesh(PointSet vertices, FaceIndices faces, PointSet normals = PointSet{});

    const PointSet& vertices() const noexcept { return vertices_; }
    const FaceIndices& faces() const noexcept { return faces_; }
    const PointSet& normals() const noexcept { return normals_; }
    bool has_normals() const noexcept { return normals_.cols() > 0; }

    Eigen::Index vertex_count() const noexcept { return vertices_.cols(); }
    Eigen::Index face_count() const noexcept { return faces_.cols(); }
    Point3 vertex(Eigen::Index i) const { return vertices_.col(i); }

    /// True when both meshes have the same vertex count and identical faces.
    bool same_topology(const TriMesh& other) const;

    /// Copy of this mesh with new vertex positions and the same faces.
    TriMesh with_vertices(PointSet vertices) const;

private:
    PointSet vertices_;
    FaceIndices faces_;
    PointSet normals_;
};

/// Oriented plane {x : normal.x + offset = 0}.
class Plane {
public:
    Plane(const Point3& normal, double offset);

    const Point3& normal() const noexcept { return normal_; }
    double offset() const noexcept { return offset_; }
    double signed_distance(const Point3& p) const { return normal_.dot(p) + offset_; }

private:
    Point3 normal_;
    double offset_;
};

struct NearestResult {
    Eigen::Index index = -1;
    double squared_distance = 0.0;
};

/// Linear scan; ties go to the lowest index.
NearestResult nearest_vertex(const TriMesh& mesh, const Point3& query);
NearestResult nearest_point(const PointSet& points, const Point3& query);

/// Mirror image of p across the plane.
Point3 reflect_point(const Point3& p, const Plane& plane);

/// Area-weighted vertex normals. Throws naming the first vertex with no
/// incident face (or a zero-area neighbourhood).
PointSet vertex_normals(const TriMesh& mesh);

/// Static kd-tree over a point set. Queries return exactly what the linear
/// scan returns, including the lowest-index tie-break.
class PointIndex {
public:
    explicit PointIndex(PointSet points);
    ~PointIndex();
    PointIndex(PointIndex&&) noexcept;
    PointIndex& operator=(PointIndex&&) noexcept;

    NearestResult nearest(const Point3& query) const;
    const PointSet& points() const noexcept { return points_; }

private:
    struct Node;
    PointSet points_;
    std::vector<Node> nodes_;
    std::vector<Eigen::Index> order_;
    int build(int begin, int end, int depth);
    void search(int node, const Point3& q, NearestResult& best) const;
};

// Wavefront OBJ (v/f records only).
TriMesh read_obj(std::istream& in);
TriMesh read_obj(const std::filesystem::path& path);
void write_obj(std::ostream& out, const TriMesh& mesh);
void write_obj(const std::filesystem::path& path, const TriMesh& mesh);
std::string to_obj_string(const TriMesh& mesh);

}  // namespace cranioforge
