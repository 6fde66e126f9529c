#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cranioforge/face_model.hpp"
#include "cranioforge/landmarks.hpp"
#include "cranioforge/registration.hpp"

namespace cranioforge {

/// Synthetic tissue-depth generator settings. Depths are
/// mean + c * axis + noise, with c ~ N(0, c_sigma^2) and isotropic noise
/// projected off the axis.
struct DepthSpec {
    /// Base depth per region (mm), overridable per landmark name.
    std::map<std::string, double> region_mean;
    std::map<std::string, double> landmark_mean;
    /// The dominant axis is proportional to mean * gain (per region).
    std::map<std::string, double> region_gain;
    double c_sigma = 10.0;
    double noise_sigma = 0.5;

    static DepthSpec standard();
};

struct DepthProfile {
    DepthVector mean;
    /// Unit length.
    DepthVector axis;
};

DepthProfile depth_profile(const DepthSpec& spec, const LandmarkSchema& schema = LandmarkSchema::standard());

struct SkullFacePair {
    std::string id;
    SkullLandmarkSet skull;
    TriMesh face;
    DepthVector gt_depths;
    std::optional<FaceLatent> gt_latent;
};

/// Canonical frame: ear midpoint at the origin, left-to-right ear axis along
/// +x, nose direction (orthogonal part) along +z, ear distance scaled to
/// ear_distance. Throws Degenerate for coincident ears or a nose on the ear
/// axis.
SimilarityTransform canonical_transform(const PointSet& facial_landmarks,
                                        const LandmarkSchema& schema = LandmarkSchema::standard(),
                                        double ear_distance = 200.0);

/// Applies a similarity to every part of a pair; depths scale with it.
SkullFacePair transform_pair(const SkullFacePair& pair, const SimilarityTransform& t);

/// Moves the pair into the canonical frame computed from its facial
/// landmarks (skull + depths along normals).
SkullFacePair normalize_pair(const SkullFacePair& pair, const LandmarkSchema& schema = LandmarkSchema::standard());

/// Deterministic synthetic pairs in the canonical frame, ids pair_000...
std::vector<SkullFacePair> generate_pairs(const MorphableFaceModel& model, int count, std::uint64_t seed,
                                          const DepthSpec& spec = DepthSpec::standard(),
                                          const LandmarkSchema& schema = LandmarkSchema::standard());

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> test;
    std::vector<std::vector<std::string>> folds;

    /// Throws unless train/test are disjoint and cover ids, and the folds
    /// partition ids with sizes within one of each other.
    void validate(const std::vector<std::string>& ids) const;
    /// Training ids for cross-validation fold i (everything outside it).
    std::vector<std::string> fold_train(int i) const;
};

/// Seeded shuffle dealt round-robin into k folds; test = fold 0.
DatasetSplit kfold_split(const std::vector<std::string>& ids, int k, std::uint64_t seed);
/// kfold_split folds plus a shuffled holdout train/test split.
DatasetSplit holdout_split(const std::vector<std::string>& ids, double test_fraction, int k, std::uint64_t seed);

// Pair directories: {id}/skull_landmarks.json, face.obj, gt_depths.json,
// optional gt_latent.json.
void write_pair(const std::filesystem::path& root, const SkullFacePair& pair);
SkullFacePair read_pair(const std::filesystem::path& root, const std::string& id);
void write_split(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit read_split(const std::filesystem::path& path);

/// Loads the listed pairs (all pair directories when ids is empty, sorted).
std::vector<SkullFacePair> read_pairs(const std::filesystem::path& root, const std::vector<std::string>& ids = {});

}  // namespace cranioforge
