#include "doctest.h"

#include <functional>

#include "cranioforge/error.hpp"
#include "cranioforge/json_io.hpp"
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

}  // namespace

TEST_SUITE("json_io") {
    TEST_CASE("points, vectors and skull landmarks") {
        std::mt19937_64 rng(1);
        const PointSet p = random_cloud(rng, 10);
        CHECK(points_from_json(json::parse(points_to_json(p).dump())) == p);
        const Eigen::VectorXd v = random_latent(rng, 12);
        CHECK(vector_from_json(json::parse(vector_to_json(v).dump())) == v);

        const auto& skull = shared_pairs()[0].skull;
        const auto back = skull_from_json(json::parse(to_json(skull).dump()), 78);
        CHECK(back.positions() == skull.positions());
        CHECK(back.normals() == skull.normals());

        CHECK(kind_of([] { points_from_json(json::parse("[[1, 2]]")); }) == ErrorKind::Schema);
        CHECK(kind_of([] { points_from_json(json::parse("[[1, 2, \"x\"]]")); }) == ErrorKind::Schema);
        CHECK(kind_of([] { points_from_json(json::parse("{}")); }) == ErrorKind::Schema);
        CHECK(kind_of([&] { skull_from_json(to_json(skull), 77); }) == ErrorKind::Schema);
        CHECK(kind_of([] { skull_from_json(json::parse("{\"positions\": []}")); }) == ErrorKind::Schema);
    }

    TEST_CASE("pairing, partition and schema") {
        const auto& schema = LandmarkSchema::standard();
        const auto pairing = pairing_from_json(to_json(schema.pairing()), 78);
        CHECK(pairing.left == schema.pairing().left);
        CHECK(pairing.mid == schema.pairing().mid);
        const auto part = partition_from_json(partition_to_json(schema.region_partition()));
        CHECK(part == schema.region_partition());
        CHECK(kind_of([] { partition_from_json(json::parse("[1, 2]")); }) == ErrorKind::Schema);

        const json s = to_json(schema);
        CHECK(s.dump().find("left_") != std::string::npos);
    }

    TEST_CASE("tdd models and transforms") {
        const auto& tdd = shared_tdd();
        const auto g = tdd_from_json(json::parse(to_json(tdd.global).dump()));
        CHECK((g.mean() - tdd.global.mean()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.c_range() == tdd.global.c_range());
        CHECK(sample_global(g, 0.3) == sample_global(tdd.global, 0.3));
        const auto r = regional_tdd_from_json(json::parse(to_json(tdd.regional).dump()));
        CHECK(r.indices("cheeks") == tdd.regional.indices("cheeks"));

        std::mt19937_64 rng(2);
        SimilarityTransform t;
        t.scale = 1.7;
        t.rotation = random_rotation(rng);
        t.translation = random_point(rng, -5, 5);
        const auto tb = transform_from_json(json::parse(to_json(t).dump()));
        CHECK(tb.scale == t.scale);
        CHECK(tb.rotation == t.rotation);
        CHECK(tb.translation == t.translation);
    }

    TEST_CASE("adaptation config: defaults, overrides and rejection") {
        const AdaptationConfig d;
        const auto back = config_from_json(to_json(d));
        CHECK(back.alpha_lmk == 5.0);
        CHECK(back.alpha_proj == 1.0);
        CHECK(back.alpha_sym == 1.0);
        CHECK(back.learning_rate == 1e-2);
        CHECK(back.decay_factor == 0.2);
        CHECK(back.decay_every == 200);
        CHECK(back.total_iterations == 1000);

        const auto partial = config_from_json(json::parse(R"({"alpha_sym": 0.5, "total_iterations": 50})"));
        CHECK(partial.alpha_sym == 0.5);
        CHECK(partial.total_iterations == 50);
        CHECK(partial.alpha_lmk == 5.0);

        CHECK_THROWS_AS(config_from_json(json::parse(R"({"alpha_smy": 0.5})")), Error);
        CHECK_THROWS_AS(config_from_json(json::parse(R"({"alpha_sym": "high"})")), Error);
    }

    TEST_CASE("split, latent, attributes and depth spec") {
        const auto s = split_from_json(json::parse(to_json(shared_split()).dump()));
        CHECK(s.folds == shared_split().folds);
        const FaceLatent f(Eigen::VectorXd::LinSpaced(5, -1, 1));
        CHECK(latent_from_json(to_json(f)).coefficients == f.coefficients);

        const auto table = attributes_from_json(json::parse(to_json(AttributeTable::standard()).dump()));
        CHECK(table.offsets({{"face_shape", "Fat"}}, 50) == AttributeTable::standard().offsets({{"face_shape", "Fat"}}, 50));

        const auto spec = depth_spec_from_json(json::parse(to_json(DepthSpec::standard()).dump()));
        CHECK(depth_profile(spec).mean == depth_profile(DepthSpec::standard()).mean);
        CHECK(depth_profile(spec).axis == depth_profile(DepthSpec::standard()).axis);
    }

    TEST_CASE("file helpers") {
        const auto dir = temp_dir("json_io");
        write_json(dir / "a.json", json{{"k", 1}});
        const std::string text = read_bytes(dir / "a.json");
        CHECK(text == "{\n  \"k\": 1\n}\n");
        CHECK(read_json(dir / "a.json").at("k") == 1);
        CHECK(kind_of([&] { read_json(dir / "missing.json"); }) == ErrorKind::Io);
        std::ofstream(dir / "bad.json") << "{not json";
        CHECK(kind_of([&] { read_json(dir / "bad.json"); }) == ErrorKind::Io);
    }
}
