#include "doctest.h"

#include <Eigen/SVD>

#include "cranioforge/error.hpp"
#include "cranioforge/registration.hpp"
#include "support.hpp"

using namespace cranioforge;
using namespace cftest;

namespace {

// Best scale and translation for a fixed rotation (closed form given R).
double residual_for_rotation(const Eigen::Matrix3d& r, const PointSet& src, const PointSet& dst) {
    const Eigen::Vector3d ms = src.rowwise().mean(), md = dst.rowwise().mean();
    const PointSet a = src.colwise() - ms, b = dst.colwise() - md;
    const PointSet ra = r * a;
    const double s = std::max(0.0, (ra.array() * b.array()).sum() / a.squaredNorm());
    return (s * ra - b).squaredNorm();
}

// Oracle: every diagonal sign pattern in U diag(signs) V^T that yields a
// proper rotation, keeping the lowest residual.
double brute_sign_search(const PointSet& src, const PointSet& dst) {
    const PointSet a = src.colwise() - src.rowwise().mean();
    const PointSet b = dst.colwise() - dst.rowwise().mean();
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(b * a.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    double best = INFINITY;
    for (int mask = 0; mask < 8; ++mask) {
        Eigen::Vector3d s(mask & 1 ? -1 : 1, mask & 2 ? -1 : 1, mask & 4 ? -1 : 1);
        const Eigen::Matrix3d r = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
        if (r.determinant() < 0) continue;
        best = std::min(best, residual_for_rotation(r, src, dst));
    }
    return best;
}

SimilarityTransform random_transform(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> scale(0.5, 2.0);
    SimilarityTransform t;
    t.scale = scale(rng);
    t.rotation = random_rotation(rng);
    t.translation = random_point(rng, -100.0, 100.0);
    return t;
}

}  // namespace

TEST_SUITE("registration") {
    TEST_CASE("identity and scale+shift recovery") {
        std::mt19937_64 rng(1);
        const PointSet src = random_cloud(rng, 10);
        const auto id = estimate_similarity(src, src);
        CHECK(std::abs(id.scale - 1.0) < 1e-12);
        CHECK((id.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
        CHECK(id.translation.norm() < 1e-10);

        const PointSet dst = (2.0 * src).colwise() + Eigen::Vector3d(1, 0, 0);
        const auto t = estimate_similarity(src, dst);
        CHECK(std::abs(t.scale - 2.0) < 1e-12);
        CHECK((t.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
        CHECK((t.translation - Eigen::Vector3d(1, 0, 0)).norm() < 1e-10);
    }

    TEST_CASE("mirror target keeps a proper rotation and matches the sign-pattern oracle") {
        PointSet chiral(3, 4);
        chiral << 0, 10, 0, 0, 0, 0, 20, 0, 0, 0, 0, 30;
        PointSet mirror = chiral;
        mirror.row(0) *= -1.0;
        const auto t = estimate_similarity(chiral, mirror);
        CHECK(std::abs(t.rotation.determinant() - 1.0) < 1e-9);
        const double got = alignment_residual(t, chiral, mirror);
        CHECK(got > 1.0);
        CHECK(got <= brute_sign_search(chiral, mirror) * (1.0 + 1e-12) + 1e-12);

        // And no random proper rotation does better.
        std::mt19937_64 rng(3);
        for (int i = 0; i < 2000; ++i) CHECK(got <= residual_for_rotation(random_rotation(rng), chiral, mirror) + 1e-9);
    }

    TEST_CASE("degenerate inputs") {
        PointSet two(3, 2);
        two.setRandom();
        CHECK_THROWS_AS(estimate_similarity(two, two), Error);
        PointSet line(3, 5);
        for (int i = 0; i < 5; ++i) line.col(i) = Eigen::Vector3d(i, 2.0 * i, -i);
        try {
            estimate_similarity(line, line);
            FAIL("collinear source accepted");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Degenerate);
        }
        PointSet other(3, 4);
        other.setRandom();
        CHECK_THROWS_AS(estimate_similarity(line, other), Error);
    }

    TEST_CASE("apply: identity and composition") {
        std::mt19937_64 rng(7);
        const PointSet p = random_cloud(rng, 25);
        CHECK((apply(SimilarityTransform::identity(), p) - p).norm() == 0.0);
        for (int i = 0; i < 100; ++i) {
            const auto a = random_transform(rng), b = random_transform(rng);
            const PointSet lhs = apply(a, apply(b, p));
            const PointSet rhs = apply(compose(a, b), p);
            REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
            REQUIRE((apply(a.inverse(), apply(a, p)) - p).cwiseAbs().maxCoeff() < 1e-10);
        }
    }

    TEST_CASE("round trip recovers random transforms") {
        std::mt19937_64 rng(99);
        for (int i = 0; i < 1000; ++i) {
            const auto truth = random_transform(rng);
            const PointSet src = random_cloud(rng, 10);
            const auto est = estimate_similarity(src, apply(truth, src));
            REQUIRE(std::abs(est.scale - truth.scale) / truth.scale < 1e-9);
            REQUIRE((est.rotation - truth.rotation).norm() / std::sqrt(3.0) < 1e-9);
            REQUIRE((est.translation - truth.translation).norm() / truth.translation.norm() < 1e-9);
            REQUIRE(std::abs(est.rotation.determinant() - 1.0) < 1e-9);
        }
    }

    TEST_CASE("noisy fit beats random perturbed candidates") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> noise(0.0, 2.0), small(0.0, 0.02);
        const auto truth = random_transform(rng);
        const PointSet src = random_cloud(rng, 30);
        PointSet dst = apply(truth, src);
        for (Eigen::Index i = 0; i < dst.size(); ++i) dst.data()[i] += noise(rng);
        const auto best = estimate_similarity(src, dst);
        const double r0 = alignment_residual(best, src, dst);
        for (int i = 0; i < 10000; ++i) {
            SimilarityTransform c = best;
            c.scale *= 1.0 + small(rng);
            const Eigen::Vector3d axis = random_point(rng, -1.0, 1.0).normalized();
            c.rotation = Eigen::AngleAxisd(small(rng), axis).toRotationMatrix() * c.rotation;
            c.translation += Eigen::Vector3d(small(rng), small(rng), small(rng)) * 50.0;
            REQUIRE(alignment_residual(c, src, dst) >= r0);
        }
    }

    TEST_CASE("validate rejects reflections and non-positive scale") {
        SimilarityTransform t;
        t.rotation(0, 0) = -1.0;
        CHECK_THROWS_AS(t.validate(), Error);
        SimilarityTransform s;
        s.scale = 0.0;
        CHECK_THROWS_AS(s.validate(), Error);
    }
}
