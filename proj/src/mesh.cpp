#include "cranioforge/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Geometry>

#include "cranioforge/error.hpp"

namespace cranioforge {

namespace {

// Every nearest-neighbour path uses this exact expression so that the
// kd-tree and the linear scan agree bit-for-bit.
inline double squared_distance(const double* a, const Point3& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

inline bool better(double d, Eigen::Index i, const NearestResult& best) {
    return best.index < 0 || d < best.squared_distance ||
           (d == best.squared_distance && i < best.index);
}

}  // namespace

TriMesh::TriMesh(PointSet vertices, FaceIndices faces, PointSet normals)
    : vertices_(std::move(vertices)), faces_(std::move(faces)), normals_(std::move(normals)) {
    const auto n = vertices_.cols();
    for (Eigen::Index f = 0; f < faces_.cols(); ++f) {
        for (int k = 0; k < 3; ++k) {
            const int idx = faces_(k, f);
            if (idx < 0 || idx >= n) {
                throw Error(ErrorKind::InvalidInput, "face " + std::to_string(f) + " references vertex " +
                                                         std::to_string(idx) + " but mesh has " +
                                                         std::to_string(n) + " vertices");
            }
        }
    }
    if (normals_.cols() > 0) {
        if (normals_.cols() != n) {
            throw Error(ErrorKind::InvalidInput, "normal count does not match vertex count");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(normals_.col(i).norm() - 1.0) > 1e-6) {
                throw Error(ErrorKind::InvalidInput, "normal " + std::to_string(i) + " is not unit length");
            }
        }
    }
}

bool TriMesh::same_topology(const TriMesh& other) const {
    return vertex_count() == other.vertex_count() && faces_.cols() == other.faces_.cols() &&
           faces_ == other.faces_;
}

TriMesh TriMesh::with_vertices(PointSet vertices) const {
    if (vertices.cols() != vertices_.cols()) {
        throw Error(ErrorKind::InvalidInput, "with_vertices: vertex count mismatch");
    }
    TriMesh out;
    out.vertices_ = std::move(vertices);
    out.faces_ = faces_;
    return out;
}

Plane::Plane(const Point3& normal, double offset) : normal_(normal), offset_(offset) {
    if (!(std::abs(normal_.norm() - 1.0) <= 1e-9)) {
        throw Error(ErrorKind::InvalidInput, "plane normal must be unit length");
    }
}

NearestResult nearest_point(const PointSet& points, const Point3& query) {
    if (points.cols() == 0) {
        throw Error(ErrorKind::InvalidInput, "nearest vertex query on an empty point set");
    }
    NearestResult best;
    for (Eigen::Index i = 0; i < points.cols(); ++i) {
        const double d = squared_distance(points.col(i).data(), query);
        if (better(d, i, best)) {
            best.index = i;
            best.squared_distance = d;
        }
    }
    return best;
}

NearestResult nearest_vertex(const TriMesh& mesh, const Point3& query) {
    return nearest_point(mesh.vertices(), query);
}

Point3 reflect_point(const Point3& p, const Plane& plane) {
    return p - 2.0 * plane.signed_distance(p) * plane.normal();
}

PointSet vertex_normals(const TriMesh& mesh) {
    const auto& v = mesh.vertices();
    const auto& f = mesh.faces();
    PointSet acc = PointSet::Zero(3, v.cols());
    std::vector<bool> touched(static_cast<std::size_t>(v.cols()), false);
    for (Eigen::Index i = 0; i < f.cols(); ++i) {
        const int a = f(0, i), b = f(1, i), c = f(2, i);
        // |cross| is twice the triangle area, so summing it area-weights.
        const Point3 n = (v.col(b) - v.col(a)).cross(v.col(c) - v.col(a));
        acc.col(a) += n;
        acc.col(b) += n;
        acc.col(c) += n;
        touched[a] = touched[b] = touched[c] = true;
    }
    for (Eigen::Index i = 0; i < v.cols(); ++i) {
        if (!touched[static_cast<std::size_t>(i)]) {
            throw Error(ErrorKind::InvalidInput, "vertex " + std::to_string(i) + " has no incident face");
        }
        const double len = acc.col(i).norm();
        if (!(len > 0.0)) {
            throw Error(ErrorKind::Degenerate, "vertex " + std::to_string(i) + " has a zero-area neighbourhood");
        }
        acc.col(i) /= len;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// PointIndex

struct PointIndex::Node {
    Eigen::Index point = 0;
    int axis = 0;
    int left = -1;
    int right = -1;
};

PointIndex::PointIndex(PointSet points) : points_(std::move(points)) {
    if (points_.cols() == 0) {
        throw Error(ErrorKind::InvalidInput, "cannot index an empty point set");
    }
    order_.resize(static_cast<std::size_t>(points_.cols()));
    std::iota(order_.begin(), order_.end(), Eigen::Index{0});
    nodes_.reserve(order_.size());
    build(0, static_cast<int>(order_.size()), 0);
}

PointIndex::~PointIndex() = default;
PointIndex::PointIndex(PointIndex&&) noexcept = default;
PointIndex& PointIndex::operator=(PointIndex&&) noexcept = default;

int PointIndex::build(int begin, int end, int depth) {
    if (begin >= end) return -1;
    const int axis = depth % 3;
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](Eigen::Index a, Eigen::Index b) {
                         const double ca = points_(axis, a), cb = points_(axis, b);
                         return ca < cb || (ca == cb && a < b);
                     });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{order_[static_cast<std::size_t>(mid)], axis, -1, -1});
    const int l = build(begin, mid, depth + 1);
    const int r = build(mid + 1, end, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
}

void PointIndex::search(int node, const Point3& q, NearestResult& best) const {
    if (node < 0) return;
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    const double d = squared_distance(points_.col(n.point).data(), q);
    if (better(d, n.point, best)) {
        best.index = n.point;
        best.squared_distance = d;
    }
    const double diff = q[n.axis] - points_(n.axis, n.point);
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    search(near, q, best);
    // Equality keeps visiting so a lower-index tie on the far side is found.
    if (diff * diff <= best.squared_distance) search(far, q, best);
}

NearestResult PointIndex::nearest(const Point3& query) const {
    NearestResult best;
    search(0, query, best);
    return best;
}

// ---------------------------------------------------------------------------
// OBJ

TriMesh read_obj(std::istream& in) {
    std::vector<double> coords;
    std::vector<int> tris;
    std::string line;
    std::size_t line_no = 0;
    auto parse_index = [&](const std::string& token) {
        const std::string head = token.substr(0, token.find('/'));
        long idx = 0;
        try {
            idx = std::stol(head);
        } catch (const std::exception&) {
            throw Error(ErrorKind::Io, "OBJ line " + std::to_string(line_no) + ": bad face index '" + token + "'");
        }
        const long nv = static_cast<long>(coords.size() / 3);
        if (idx < 0) idx = nv + idx + 1;
        if (idx < 1 || idx > nv) {
            throw Error(ErrorKind::Io, "OBJ line " + std::to_string(line_no) + ": face index out of range");
        }
        return static_cast<int>(idx - 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ss >> x >> y >> z)) {
                throw Error(ErrorKind::Io, "OBJ line " + std::to_string(line_no) + ": malformed vertex");
            }
            coords.insert(coords.end(), {x, y, z});
        } else if (tag == "f") {
            std::vector<int> poly;
            std::string tok;
            while (ss >> tok) poly.push_back(parse_index(tok));
            if (poly.size() < 3) {
                throw Error(ErrorKind::Io, "OBJ line " + std::to_string(line_no) + ": face with fewer than 3 vertices");
            }
            for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
                tris.insert(tris.end(), {poly[0], poly[k], poly[k + 1]});
            }
        }
    }
    PointSet v = Eigen::Map<const PointSet>(coords.data(), 3, static_cast<Eigen::Index>(coords.size() / 3));
    FaceIndices f = Eigen::Map<const FaceIndices>(tris.data(), 3, static_cast<Eigen::Index>(tris.size() / 3));
    return TriMesh(std::move(v), std::move(f));
}

TriMesh read_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    return read_obj(in);
}

void write_obj(std::ostream& out, const TriMesh& mesh) {
    char buf[128];
    const auto& v = mesh.vertices();
    for (Eigen::Index i = 0; i < v.cols(); ++i) {
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v(0, i), v(1, i), v(2, i));
        out << buf;
    }
    const auto& f = mesh.faces();
    for (Eigen::Index i = 0; i < f.cols(); ++i) {
        std::snprintf(buf, sizeof buf, "f %d %d %d\n", f(0, i) + 1, f(1, i) + 1, f(2, i) + 1);
        out << buf;
    }
}

void write_obj(const std::filesystem::path& path, const TriMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    write_obj(out, mesh);
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

std::string to_obj_string(const TriMesh& mesh) {
    std::ostringstream ss;
    write_obj(ss, mesh);
    return ss.str();
}

}  // namespace cranioforge
