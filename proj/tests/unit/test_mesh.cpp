#include "doctest.h"

#include <sstream>

#include "cranioforge/error.hpp"
#include "cranioforge/mesh.hpp"
#include "support.hpp"

using namespace cranioforge;
using namespace cftest;

namespace {

TriMesh cloud_mesh(const PointSet& v) {
    // Faces are irrelevant to nearest-vertex queries; one triangle keeps it valid.
    FaceIndices f(3, 1);
    f << 0, 1, 2;
    return TriMesh(v, f);
}

// Unit cube whose faces at (0,0,0) and (1,1,1) are split through that
// corner, so each corner sees its three faces with equal area.
TriMesh corner_cube() {
    PointSet v(3, 8);
    for (int i = 0; i < 8; ++i) v.col(i) = Eigen::Vector3d(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    const int tris[12][3] = {{0, 2, 6}, {0, 6, 4}, {0, 4, 5}, {0, 5, 1}, {0, 1, 3}, {0, 3, 2},
                             {7, 5, 1}, {7, 1, 3}, {7, 3, 2}, {7, 2, 6}, {7, 6, 4}, {7, 4, 5}};
    FaceIndices f(3, 12);
    const Eigen::Vector3d center(0.5, 0.5, 0.5);
    for (int t = 0; t < 12; ++t) {
        int a = tris[t][0], b = tris[t][1], c = tris[t][2];
        const Eigen::Vector3d n = (v.col(b) - v.col(a)).cross(v.col(c) - v.col(a));
        const Eigen::Vector3d centroid = (v.col(a) + v.col(b) + v.col(c)) / 3.0;
        if (n.dot(centroid - center) < 0) std::swap(b, c);
        f.col(t) << a, b, c;
    }
    return TriMesh(v, f);
}

}  // namespace

TEST_SUITE("mesh") {
    TEST_CASE("nearest_vertex worked examples") {
        PointSet v(3, 2);
        v << 0, 5, 0, 5, 0, 5;
        PointSet v3(3, 3);
        v3 << 0, 5, 9, 0, 5, 9, 0, 5, 9;
        const auto r = nearest_vertex(cloud_mesh(v3), Eigen::Vector3d(0, 0, 1));
        CHECK(r.index == 0);
        CHECK(r.squared_distance == 1.0);
        CHECK(nearest_point(v, Eigen::Vector3d(0, 0, 1)).index == 0);

        PointSet tie(3, 3);
        tie << 1, -1, 0, 0, 0, 9, 0, 0, 9;
        const auto t = nearest_vertex(cloud_mesh(tie), Eigen::Vector3d::Zero());
        CHECK(t.index == 0);
        CHECK(t.squared_distance == 1.0);
    }

    TEST_CASE("nearest_vertex returns the coincident vertex") {
        std::mt19937_64 rng(11);
        const PointSet v = random_cloud(rng, 20);
        const TriMesh m = cloud_mesh(v);
        const auto r = nearest_vertex(m, v.col(7));
        CHECK(r.index == 7);
        CHECK(r.squared_distance == 0.0);
        for (Eigen::Index i = 0; i < v.cols(); ++i) CHECK(nearest_vertex(m, v.col(i)).squared_distance == 0.0);
    }

    TEST_CASE("nearest_vertex on an empty mesh is invalid input") {
        CHECK_THROWS_AS(nearest_vertex(TriMesh{}, Eigen::Vector3d::Zero()), Error);
    }

    TEST_CASE("kd-tree agrees with a linear scan on random clouds") {
        std::mt19937_64 rng(2024);
        for (int cloud = 0; cloud < 4; ++cloud) {
            const PointSet v = random_cloud(rng, 500);
            const PointIndex index(v);
            for (int q = 0; q < 1000; ++q) {
                const Eigen::Vector3d p = random_point(rng, -120.0, 120.0);
                const auto [bi, bd] = brute_nearest(v, p);
                const auto r = index.nearest(p);
                REQUIRE(r.index == bi);
                REQUIRE(r.squared_distance == bd);
            }
        }
    }

    TEST_CASE("kd-tree keeps the lowest-index tie-break on duplicated points") {
        PointSet v(3, 6);
        v << 1, 1, 1, -1, -1, 5, 0, 0, 0, 0, 0, 5, 0, 0, 0, 0, 0, 5;
        const PointIndex index(v);
        CHECK(index.nearest(Eigen::Vector3d(1, 0, 0)).index == 0);
        CHECK(index.nearest(Eigen::Vector3d(0, 0, 0)).index == 0);
        CHECK(index.nearest(Eigen::Vector3d(-1, 0, 0)).index == 3);
    }

    TEST_CASE("reflect_point worked examples") {
        const Plane x0(Eigen::Vector3d::UnitX(), 0.0);
        CHECK((reflect_point(Eigen::Vector3d(1, 0, 0), x0) - Eigen::Vector3d(-1, 0, 0)).norm() == 0.0);
        const Eigen::Vector3d on(0, 4, -2);
        CHECK((reflect_point(on, x0) - on).norm() == 0.0);
        const Plane x1(Eigen::Vector3d::UnitX(), -1.0);
        // p - 2 (n.p + offset) n = (2,3,0) - 2 * 1 * (1,0,0)
        CHECK((reflect_point(Eigen::Vector3d(2, 3, 0), x1) - Eigen::Vector3d(0, 3, 0)).norm() < 1e-15);
    }

    TEST_CASE("reflect_point is an involution") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> off(-50.0, 50.0);
        for (int i = 0; i < 1000; ++i) {
            Eigen::Vector3d n = random_point(rng, -1.0, 1.0).normalized();
            const Plane plane(n, off(rng));
            const Eigen::Vector3d p = random_point(rng, -100.0, 100.0);
            REQUIRE((reflect_point(reflect_point(p, plane), plane) - p).norm() < 1e-12);
        }
    }

    TEST_CASE("plane rejects non-unit normals") {
        CHECK_THROWS_AS(Plane(Eigen::Vector3d(2, 0, 0), 0.0), Error);
    }

    TEST_CASE("vertex_normals: cube corners") {
        const PointSet n = vertex_normals(corner_cube());
        const Eigen::Vector3d expect0 = Eigen::Vector3d(-1, -1, -1) / std::sqrt(3.0);
        const Eigen::Vector3d expect7 = Eigen::Vector3d(1, 1, 1) / std::sqrt(3.0);
        CHECK((n.col(0) - expect0).norm() < 1e-12);
        CHECK((n.col(7) - expect7).norm() < 1e-12);
        for (Eigen::Index i = 0; i < n.cols(); ++i) CHECK(std::abs(n.col(i).norm() - 1.0) < 1e-12);
    }

    TEST_CASE("vertex_normals: flat fan and winding flip") {
        PointSet v(3, 5);
        v << 0, 1, 0, -1, 0, 0, 0, 1, 0, -1, 0, 0, 0, 0, 0;
        FaceIndices f(3, 4);
        f << 0, 0, 0, 0, 1, 2, 3, 4, 2, 3, 4, 1;
        const PointSet n = vertex_normals(TriMesh(v, f));
        for (Eigen::Index i = 0; i < 5; ++i) CHECK((n.col(i) - Eigen::Vector3d::UnitZ()).norm() < 1e-12);

        FaceIndices flipped = f;
        flipped.row(1).swap(flipped.row(2));
        const PointSet m = vertex_normals(TriMesh(v, flipped));
        CHECK((m + n).norm() < 1e-12);
    }

    TEST_CASE("vertex_normals names an isolated vertex") {
        PointSet v(3, 4);
        v << 0, 1, 0, 7, 0, 0, 1, 7, 0, 0, 0, 7;
        FaceIndices f(3, 1);
        f << 0, 1, 2;
        try {
            vertex_normals(TriMesh(v, f));
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("vertex 3") != std::string::npos);
        }
    }

    TEST_CASE("TriMesh validates faces and normals") {
        PointSet v(3, 3);
        v << 0, 1, 0, 0, 0, 1, 0, 0, 0;
        FaceIndices bad(3, 1);
        bad << 0, 1, 3;
        CHECK_THROWS_AS(TriMesh(v, bad), Error);
        FaceIndices ok(3, 1);
        ok << 0, 1, 2;
        PointSet n = PointSet::Constant(3, 3, 1.0);
        CHECK_THROWS_AS(TriMesh(v, ok, n), Error);
    }

    TEST_CASE("OBJ round trip, slashes tolerated, 9 significant digits") {
        std::istringstream in(
            "# comment\nv 0 0 0\nv 1.5 0 0\nv 0 2.25 0\nvn 0 0 1\nvt 0 0\nf 1/1/1 2/2/1 3//1\n");
        const TriMesh m = read_obj(in);
        CHECK(m.vertex_count() == 3);
        CHECK(m.face_count() == 1);
        CHECK(m.faces()(2, 0) == 2);
        CHECK(m.vertex(2).y() == 2.25);

        PointSet v(3, 3);
        v << 1.0 / 3.0, 0, 0, 0, 123456.789012, 0, 0, 0, -2e-5;
        FaceIndices f(3, 1);
        f << 0, 1, 2;
        const std::string text = to_obj_string(TriMesh(v, f));
        CHECK(text.find("0.333333333 ") != std::string::npos);
        CHECK(text.find("123456.789") != std::string::npos);
        std::istringstream back(text);
        const TriMesh r = read_obj(back);
        CHECK((r.vertices() - v).cwiseAbs().maxCoeff() <= 1e-9 * 123456.789012);
        CHECK(r.faces() == f);
    }

    TEST_CASE("OBJ reader rejects out-of-range faces") {
        std::istringstream in("v 0 0 0\nv 1 0 0\nf 1 2 3\n");
        CHECK_THROWS_AS(read_obj(in), Error);
    }
}
