#include "doctest.h"

#include <functional>
#include <set>

#include "cranioforge/dataset.hpp"
#include "cranioforge/error.hpp"
#include "cranioforge/metrics.hpp"
#include "support.hpp"

using namespace cranioforge;
using namespace cftest;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an exception");
    return ErrorKind::InvalidInput;
}

std::vector<std::string> make_ids(int n) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("id" + std::to_string(1000 + i));
    return ids;
}

}  // namespace

TEST_SUITE("dataset") {
    TEST_CASE("generated pairs: determinism and the skull/depth/face invariant") {
        const auto& m = shared_model();
        const auto a = generate_pairs(m, 6, 17);
        const auto b = generate_pairs(m, 6, 17);
        REQUIRE(a.size() == 6);
        CHECK(a[0].id == "pair_000");
        CHECK(a[5].id == "pair_005");
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].skull.positions() == b[i].skull.positions());
            CHECK(a[i].gt_depths == b[i].gt_depths);
            CHECK(a[i].face.vertices() == b[i].face.vertices());
            CHECK((a[i].gt_depths.array() > 0).all());
            const PointSet facial = extend_landmarks(a[i].skull, a[i].gt_depths);
            CHECK((extract_landmarks(m, a[i].face) - facial).cwiseAbs().maxCoeff() < 1e-9);
        }
        const auto c = generate_pairs(m, 6, 18);
        CHECK(c[0].gt_depths != a[0].gt_depths);

        for (const auto& p : shared_pairs()) {
            const PointSet facial = extend_landmarks(p.skull, p.gt_depths);
            REQUIRE((extract_landmarks(m, p.face) - facial).cwiseAbs().maxCoeff() < 1e-9);
            REQUIRE(std::abs(pair_ear_distance(p) - 200.0) < 1e-9);
        }

        CHECK(kind_of([&] { generate_pairs(m, 1, 1); }) == ErrorKind::InsufficientData);
        CHECK(kind_of([&] { generate_pairs(m, 0, 1); }) == ErrorKind::InsufficientData);
    }

    TEST_CASE("depth profile of the standard spec") {
        const auto prof = depth_profile(DepthSpec::standard());
        CHECK(prof.mean.size() == 78);
        CHECK((prof.mean.array() > 0).all());
        CHECK(std::abs(prof.axis.norm() - 1.0) < 1e-12);
        CHECK((prof.axis.array() >= 0).all());
        DepthSpec bad = DepthSpec::standard();
        bad.noise_sigma = -1.0;
        CHECK_THROWS_AS(depth_profile(bad), Error);
    }

    TEST_CASE("normalization: canonical frame, idempotence, similarity invariance, unit normals") {
        const auto& m = shared_model();
        const auto raw = generate_pairs(m, 3, 5);
        const auto& schema = LandmarkSchema::standard();
        const int le = schema.left_ear(), re = schema.right_ear();
        std::mt19937_64 rng(11);
        for (const auto& p : raw) {
            const auto n = normalize_pair(p);
            const PointSet facial = extend_landmarks(n.skull, n.gt_depths);
            CHECK((0.5 * (facial.col(le) + facial.col(re))).norm() < 1e-9);
            const Eigen::Vector3d axis = facial.col(re) - facial.col(le);
            CHECK(std::abs(axis.norm() - 200.0) < 1e-9);
            CHECK(std::abs(axis.normalized().x() - 1.0) < 1e-12);
            CHECK((n.skull.normals().colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);

            const auto twice = normalize_pair(n);
            CHECK((twice.skull.positions() - n.skull.positions()).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((twice.face.vertices() - n.face.vertices()).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((twice.gt_depths - n.gt_depths).cwiseAbs().maxCoeff() < 1e-9);

            SimilarityTransform t;
            t.scale = 3.0;
            t.rotation = random_rotation(rng);
            t.translation = random_point(rng, -500, 500);
            const auto moved = transform_pair(p, t);
            CHECK((moved.gt_depths - 3.0 * p.gt_depths).cwiseAbs().maxCoeff() < 1e-9);
            const auto back = normalize_pair(moved);
            CHECK((back.skull.positions() - n.skull.positions()).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((back.skull.normals() - n.skull.normals()).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((back.face.vertices() - n.face.vertices()).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((back.gt_depths - n.gt_depths).cwiseAbs().maxCoeff() < 1e-9);
        }
    }

    TEST_CASE("canonical_transform degenerate inputs") {
        const auto& schema = LandmarkSchema::standard();
        PointSet facial = shared_model().mean_landmarks();
        facial.col(schema.right_ear()) = facial.col(schema.left_ear());
        CHECK(kind_of([&] { canonical_transform(facial); }) == ErrorKind::Degenerate);
        CHECK(kind_of([&] { canonical_transform(PointSet::Zero(3, 5)); }) == ErrorKind::Schema);
    }

    TEST_CASE("kfold_split sizes, coverage, determinism and errors") {
        const auto ids = make_ids(100);
        const auto s = kfold_split(ids, 5, 3);
        REQUIRE(s.folds.size() == 5);
        std::set<std::string> all;
        for (const auto& f : s.folds) {
            CHECK(f.size() == 20);
            all.insert(f.begin(), f.end());
        }
        CHECK(all.size() == 100);
        CHECK(s.test == s.folds[0]);
        CHECK_NOTHROW(s.validate(ids));
        CHECK(kfold_split(ids, 5, 3).folds == s.folds);
        CHECK(kfold_split(ids, 5, 4).folds != s.folds);
        for (int i = 0; i < 5; ++i) {
            const auto tr = s.fold_train(i);
            CHECK(tr.size() == 80);
            for (const auto& id : s.folds[i]) CHECK(std::find(tr.begin(), tr.end(), id) == tr.end());
        }
        CHECK(kind_of([&] { s.fold_train(5); }) == ErrorKind::OutOfRange);

        const auto uneven = kfold_split(make_ids(23), 5, 1);
        std::size_t lo = 100, hi = 0;
        for (const auto& f : uneven.folds) {
            lo = std::min(lo, f.size());
            hi = std::max(hi, f.size());
        }
        CHECK(hi - lo <= 1);

        CHECK(kind_of([&] { kfold_split(make_ids(3), 5, 1); }) == ErrorKind::InsufficientData);
        CHECK(kind_of([&] { kfold_split(ids, 1, 1); }) == ErrorKind::InvalidInput);
        auto dup = ids;
        dup.push_back(ids[0]);
        CHECK_THROWS_AS(kfold_split(dup, 5, 1), Error);
    }

    TEST_CASE("holdout_split") {
        const auto ids = make_ids(100);
        const auto s = holdout_split(ids, 0.5, 5, 1);
        CHECK(s.train.size() == 50);
        CHECK(s.test.size() == 50);
        CHECK_NOTHROW(s.validate(ids));
        std::set<std::string> tr(s.train.begin(), s.train.end());
        for (const auto& id : s.test) CHECK(tr.count(id) == 0);
        CHECK(kind_of([&] { holdout_split(ids, 1.0, 5, 1); }) == ErrorKind::InvalidInput);
        CHECK(kind_of([&] { holdout_split(make_ids(2), 0.01, 2, 1); }) == ErrorKind::InsufficientData);

        DatasetSplit broken = s;
        broken.test.push_back(broken.train.front());
        CHECK(kind_of([&] { broken.validate(ids); }) == ErrorKind::Schema);
    }

    TEST_CASE("pair and split files round trip") {
        const auto dir = temp_dir("dataset_io");
        const auto& p = shared_pairs()[7];
        write_pair(dir / "pairs", p);
        const auto back = read_pair(dir / "pairs", p.id);
        CHECK(back.id == p.id);
        CHECK((back.skull.positions() - p.skull.positions()).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((back.skull.normals() - p.skull.normals()).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((back.gt_depths - p.gt_depths).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((back.face.vertices() - p.face.vertices()).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(back.face.faces() == p.face.faces());
        REQUIRE(back.gt_latent.has_value());
        CHECK((back.gt_latent->coefficients - p.gt_latent->coefficients).cwiseAbs().maxCoeff() < 1e-9);

        write_pair(dir / "pairs", shared_pairs()[2]);
        const auto all = read_pairs(dir / "pairs");
        REQUIRE(all.size() == 2);
        CHECK(all[0].id == shared_pairs()[2].id);
        CHECK(all[1].id == p.id);

        CHECK(kind_of([&] { read_pair(dir / "pairs", "pair_999"); }) == ErrorKind::NotFound);
        CHECK(kind_of([&] { read_pairs(dir / "nowhere"); }) == ErrorKind::NotFound);

        write_split(dir / "split.json", shared_split());
        const auto s = read_split(dir / "split.json");
        CHECK(s.train == shared_split().train);
        CHECK(s.test == shared_split().test);
        CHECK(s.folds == shared_split().folds);
    }
}
