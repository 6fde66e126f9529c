#pragma once

// JSON conversions for the library types.

#include <filesystem>
#include <string>

#include "json.hpp"

#include "cranioforge/adaptation.hpp"
#include "cranioforge/dataset.hpp"
#include "cranioforge/face_model.hpp"
#include "cranioforge/landmarks.hpp"
#include "cranioforge/registration.hpp"
#include "cranioforge/tdd.hpp"

namespace cranioforge {

using json = nlohmann::json;

json points_to_json(const PointSet& points);
PointSet points_from_json(const json& j, const std::string& what = "points");
json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j, const std::string& what = "vector");

json to_json(const SkullLandmarkSet& skull);
SkullLandmarkSet skull_from_json(const json& j, int expected_count = -1);

json to_json(const SymmetryPairing& pairing);
SymmetryPairing pairing_from_json(const json& j, int landmark_count);

json partition_to_json(const RegionPartition& partition);
RegionPartition partition_from_json(const json& j);

json to_json(const LandmarkSchema& schema);

json to_json(const TddModel& model);
TddModel tdd_from_json(const json& j);
json to_json(const RegionalTddModel& model);
RegionalTddModel regional_tdd_from_json(const json& j);

json to_json(const SimilarityTransform& t);
SimilarityTransform transform_from_json(const json& j);

json to_json(const Plane& plane);

json to_json(const AdaptationConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
AdaptationConfig config_from_json(const json& j, AdaptationConfig base = {});

json to_json(const LossBreakdown& loss);
/// Diagnostics only (no mesh): latent, loss history, residuals, transform,
/// midplane.
json to_json(const AdaptationResult& result);

json to_json(const FaceLatent& latent);
FaceLatent latent_from_json(const json& j);

json to_json(const DatasetSplit& split);
DatasetSplit split_from_json(const json& j);

json to_json(const AttributeTable& table);
AttributeTable attributes_from_json(const json& j);

json to_json(const DepthSpec& spec);
DepthSpec depth_spec_from_json(const json& j);

/// Throws Io on open or parse failure.
json read_json(const std::filesystem::path& path);
/// Two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const json& j);

}  // namespace cranioforge
