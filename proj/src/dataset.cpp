#include "cranioforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include <Eigen/Geometry>
#include "cranioforge/error.hpp"
#include "cranioforge/json_io.hpp"

namespace cranioforge {

DepthSpec DepthSpec::standard() {
    DepthSpec s;
    s.region_mean = {{"forehead", 5.5}, {"middle", 6.0}, {"cheeks", 14.0}, {"mouth", 11.0}, {"chin", 10.0}};
    s.landmark_mean = {{"pronasale", 3.0}, {"rhinion", 3.5}, {"nasion", 6.5}};
    s.region_gain = {{"forehead", 0.6}, {"middle", 0.7}, {"cheeks", 1.5}, {"mouth", 1.2}, {"chin", 1.2}};
    return s;
}

DepthProfile depth_profile(const DepthSpec& spec, const LandmarkSchema& schema) {
    const int n = schema.size();
    DepthProfile p{DepthVector(n), DepthVector(n)};
    for (int i = 0; i < n; ++i) {
        const auto& def = schema.at(i);
        auto rm = spec.region_mean.find(def.region);
        auto lm = spec.landmark_mean.find(def.name);
        if (lm != spec.landmark_mean.end()) {
            p.mean[i] = lm->second;
        } else if (rm != spec.region_mean.end()) {
            p.mean[i] = rm->second;
        } else {
            throw Error(ErrorKind::InvalidInput, "depth spec has no mean for region '" + def.region + "'");
        }
        auto g = spec.region_gain.find(def.region);
        p.axis[i] = p.mean[i] * (g == spec.region_gain.end() ? 1.0 : g->second);
    }
    if (!(p.axis.norm() > 0.0)) throw Error(ErrorKind::InvalidInput, "depth spec axis is zero");
    p.axis.normalize();
    if (!(spec.c_sigma >= 0.0) || !(spec.noise_sigma >= 0.0)) {
        throw Error(ErrorKind::InvalidInput, "depth spec standard deviations must be >= 0");
    }
    return p;
}

SimilarityTransform canonical_transform(const PointSet& facial, const LandmarkSchema& schema, double ear_distance) {
    if (facial.cols() != schema.size()) {
        throw Error(ErrorKind::Schema, "canonical frame: " + std::to_string(facial.cols()) +
                                           " landmarks for a schema of " + std::to_string(schema.size()));
    }
    const Point3 left = facial.col(schema.left_ear());
    const Point3 right = facial.col(schema.right_ear());
    const double width = (right - left).norm();
    if (!(width > 1e-9)) throw Error(ErrorKind::Degenerate, "ear landmarks coincide");
    const Point3 mid = 0.5 * (left + right);
    const Point3 x = (right - left) / width;
    const Point3 to_nose = facial.col(schema.nose_tip()) - mid;
    Point3 z = to_nose - to_nose.dot(x) * x;
    if (!(z.norm() > 1e-9 * std::max(1.0, to_nose.norm()))) {
        throw Error(ErrorKind::Degenerate, "nose tip lies on the ear axis");
    }
    z.normalize();
    const Point3 y = z.cross(x);

    SimilarityTransform t;
    t.rotation.row(0) = x.transpose();
    t.rotation.row(1) = y.transpose();
    t.rotation.row(2) = z.transpose();
    t.scale = ear_distance / width;
    t.translation = -t.scale * (t.rotation * mid);
    return t;
}

SkullFacePair transform_pair(const SkullFacePair& pair, const SimilarityTransform& t) {
    SkullFacePair out;
    out.id = pair.id;
    out.skull = SkullLandmarkSet(apply(t, pair.skull.positions()), t.rotation * pair.skull.normals(), pair.skull.schema());
    out.face = apply(t, pair.face);
    out.gt_depths = t.scale * pair.gt_depths;
    out.gt_latent = pair.gt_latent;
    return out;
}

SkullFacePair normalize_pair(const SkullFacePair& pair, const LandmarkSchema& schema) {
    const PointSet facial = extend_landmarks_raw(pair.skull, pair.gt_depths);
    return transform_pair(pair, canonical_transform(facial, schema));
}

std::vector<SkullFacePair> generate_pairs(const MorphableFaceModel& model, int count, std::uint64_t seed,
                                          const DepthSpec& spec, const LandmarkSchema& schema) {
    if (count < 2) {
        throw Error(ErrorKind::InsufficientData, "need at least 2 pairs, got " + std::to_string(count));
    }
    if (model.landmark_count() != schema.size()) {
        throw Error(ErrorKind::Schema, "face model has " + std::to_string(model.landmark_count()) +
                                           " landmarks, schema has " + std::to_string(schema.size()));
    }
    const DepthProfile profile = depth_profile(spec, schema);
    const int n = schema.size();
    const int k = model.latent_size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<SkullFacePair> pairs;
    pairs.reserve(static_cast<std::size_t>(count));
    for (int p = 0; p < count; ++p) {
        Eigen::VectorXd f(k);
        for (int i = 0; i < k; ++i) f[i] = normal(rng);
        const double c = spec.c_sigma * normal(rng);
        DepthVector noise(n);
        for (int i = 0; i < n; ++i) noise[i] = spec.noise_sigma * normal(rng);
        noise -= noise.dot(profile.axis) * profile.axis;
        const DepthVector depths = profile.mean + c * profile.axis + noise;

        char id[32];
        std::snprintf(id, sizeof(id), "pair_%03d", p);
        for (int i = 0; i < n; ++i) {
            if (!(depths[i] > 0.0)) {
                throw Error(ErrorKind::InvalidInput, std::string("depth spec produced a non-positive depth for ") + id +
                                                         " landmark " + schema.at(i).name);
            }
        }

        const TriMesh raw = decode(model, FaceLatent(f));
        const SimilarityTransform t = canonical_transform(extract_landmarks(model, raw), schema);
        TriMesh face = apply(t, raw);
        const PointSet normals_all = vertex_normals(face);
        const PointSet facial = extract_landmarks(model, face);
        PointSet normals(3, n);
        const auto& idx = model.landmark_indices();
        for (int i = 0; i < n; ++i) normals.col(i) = normals_all.col(idx[static_cast<std::size_t>(i)]);

        SkullFacePair pair;
        pair.id = id;
        pair.skull = SkullLandmarkSet(facial - normals * depths.asDiagonal(), normals, schema.name());
        pair.face = std::move(face);
        pair.gt_depths = depths;
        pair.gt_latent = FaceLatent(f);
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Splits

namespace {

std::vector<std::string> shuffled(std::vector<std::string> ids, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = ids.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(ids[i - 1], ids[j]);
    }
    return ids;
}

void check_unique(const std::vector<std::string>& ids) {
    std::set<std::string> s(ids.begin(), ids.end());
    if (s.size() != ids.size()) throw Error(ErrorKind::InvalidInput, "dataset ids are not unique");
}

}  // namespace

void DatasetSplit::validate(const std::vector<std::string>& ids) const {
    const std::set<std::string> all(ids.begin(), ids.end());
    std::set<std::string> seen;
    for (const auto* list : {&train, &test}) {
        for (const auto& id : *list) {
            if (!all.count(id)) throw Error(ErrorKind::Schema, "split references unknown id '" + id + "'");
            if (!seen.insert(id).second) throw Error(ErrorKind::Schema, "split lists '" + id + "' twice");
        }
    }
    if (seen.size() != all.size()) throw Error(ErrorKind::Schema, "train/test split does not cover every id");
    if (!folds.empty()) {
        std::set<std::string> in_folds;
        std::size_t lo = ids.size(), hi = 0;
        for (const auto& fold : folds) {
            lo = std::min(lo, fold.size());
            hi = std::max(hi, fold.size());
            for (const auto& id : fold) {
                if (!all.count(id) || !in_folds.insert(id).second) {
                    throw Error(ErrorKind::Schema, "folds repeat or invent id '" + id + "'");
                }
            }
        }
        if (in_folds.size() != all.size()) throw Error(ErrorKind::Schema, "folds do not cover every id");
        if (hi - lo > 1) throw Error(ErrorKind::Schema, "fold sizes differ by more than one");
    }
}

std::vector<std::string> DatasetSplit::fold_train(int i) const {
    if (i < 0 || i >= static_cast<int>(folds.size())) {
        throw Error(ErrorKind::OutOfRange, "no fold " + std::to_string(i));
    }
    std::vector<std::string> out;
    for (int j = 0; j < static_cast<int>(folds.size()); ++j) {
        if (j != i) out.insert(out.end(), folds[static_cast<std::size_t>(j)].begin(), folds[static_cast<std::size_t>(j)].end());
    }
    return out;
}

DatasetSplit kfold_split(const std::vector<std::string>& ids, int k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorKind::InvalidInput, "k-fold split needs k >= 2");
    if (k > static_cast<int>(ids.size())) {
        throw Error(ErrorKind::InsufficientData, "cannot split " + std::to_string(ids.size()) + " ids into " +
                                                     std::to_string(k) + " folds");
    }
    check_unique(ids);
    const auto order = shuffled(ids, seed);
    DatasetSplit split;
    split.folds.resize(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < order.size(); ++i) split.folds[i % static_cast<std::size_t>(k)].push_back(order[i]);
    split.test = split.folds[0];
    split.train = split.fold_train(0);
    return split;
}

DatasetSplit holdout_split(const std::vector<std::string>& ids, double test_fraction, int k, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw Error(ErrorKind::InvalidInput, "test fraction must lie in (0, 1)");
    }
    DatasetSplit split = kfold_split(ids, k, seed);
    const auto order = shuffled(ids, seed ^ 0x9e3779b97f4a7c15ULL);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ids.size())));
    if (n_test == 0 || n_test >= ids.size()) {
        throw Error(ErrorKind::InsufficientData, "holdout split leaves an empty train or test set");
    }
    split.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_test));
    split.test.assign(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
    return split;
}

// ---------------------------------------------------------------------------
// Files

void write_pair(const std::filesystem::path& root, const SkullFacePair& pair) {
    const auto dir = root / pair.id;
    std::filesystem::create_directories(dir);
    write_json(dir / "skull_landmarks.json", to_json(pair.skull));
    write_obj(dir / "face.obj", pair.face);
    write_json(dir / "gt_depths.json", json{{"depths", vector_to_json(pair.gt_depths)}});
    if (pair.gt_latent) write_json(dir / "gt_latent.json", to_json(*pair.gt_latent));
}

SkullFacePair read_pair(const std::filesystem::path& root, const std::string& id) {
    const auto dir = root / id;
    if (!std::filesystem::is_directory(dir)) throw Error(ErrorKind::NotFound, "no pair directory " + dir.string());
    SkullFacePair pair;
    pair.id = id;
    pair.skull = skull_from_json(read_json(dir / "skull_landmarks.json"));
    pair.face = read_obj(dir / "face.obj");
    const json d = read_json(dir / "gt_depths.json");
    if (!d.contains("depths")) throw Error(ErrorKind::Schema, (dir / "gt_depths.json").string() + ": missing 'depths'");
    pair.gt_depths = vector_from_json(d.at("depths"), "depths");
    if (pair.gt_depths.size() != pair.skull.size()) {
        throw Error(ErrorKind::Schema, id + ": depth count does not match the skull landmarks");
    }
    if (std::filesystem::exists(dir / "gt_latent.json")) pair.gt_latent = latent_from_json(read_json(dir / "gt_latent.json"));
    return pair;
}

void write_split(const std::filesystem::path& path, const DatasetSplit& split) { write_json(path, to_json(split)); }

DatasetSplit read_split(const std::filesystem::path& path) { return split_from_json(read_json(path)); }

std::vector<SkullFacePair> read_pairs(const std::filesystem::path& root, const std::vector<std::string>& ids) {
    std::vector<std::string> names = ids;
    if (names.empty()) {
        if (!std::filesystem::is_directory(root)) throw Error(ErrorKind::NotFound, "no dataset at " + root.string());
        for (const auto& e : std::filesystem::directory_iterator(root)) {
            if (e.is_directory() && std::filesystem::exists(e.path() / "skull_landmarks.json")) {
                names.push_back(e.path().filename().string());
            }
        }
        std::sort(names.begin(), names.end());
    }
    std::vector<SkullFacePair> out;
    out.reserve(names.size());
    for (const auto& id : names) out.push_back(read_pair(root, id));
    return out;
}

}  // namespace cranioforge
