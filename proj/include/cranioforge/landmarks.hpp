#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cranioforge/mesh.hpp"

namespace cranioforge {

/// Per-landmark tissue depths in millimeters.
using DepthVector = Eigen::VectorXd;

enum class Side { Left, Mid, Right };

/// One slot of the landmark schema. Angles place the landmark on the
/// canonical head: azimuth from +z toward +x, elevation toward +y (degrees).
struct LandmarkDef {
    std::string name;
    Side side = Side::Mid;
    std::string region;
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;
};

/// Left/right/mid split of the landmark indices; left[i] pairs with right[i].
struct SymmetryPairing {
    std::vector<int> left;
    std::vector<int> right;
    std::vector<int> mid;

    /// Throws unless left/right/mid partition [0, n) with |left| == |right|.
    void validate(int landmark_count) const;
};

/// Named landmark schema with side and region classification.
class LandmarkSchema {
public:
    LandmarkSchema(std::string name, std::vector<LandmarkDef> defs);

    const std::string& name() const noexcept { return name_; }
    int size() const noexcept { return static_cast<int>(defs_.size()); }
    const std::vector<LandmarkDef>& landmarks() const noexcept { return defs_; }
    const LandmarkDef& at(int i) const { return defs_.at(static_cast<std::size_t>(i)); }

    /// Index of a landmark by name; throws NotFound.
    int index_of(const std::string& name) const;

    /// Pairs are matched by name: "left_X" pairs with "right_X".
    SymmetryPairing pairing() const;

    /// region name -> sorted landmark indices.
    std::map<std::string, std::vector<int>> region_partition() const;

    int left_ear() const { return index_of("left_tragion"); }
    int right_ear() const { return index_of("right_tragion"); }
    int nose_tip() const { return index_of("pronasale"); }

    /// The shipped 78-slot schema (stand-in names and layout).
    static const LandmarkSchema& standard();

private:
    std::string name_;
    std::vector<LandmarkDef> defs_;
};

/// Skull landmarks p^s with outward unit normals.
class SkullLandmarkSet {
public:
    SkullLandmarkSet() = default;
    SkullLandmarkSet(PointSet positions, PointSet normals, std::string schema = "standard78");

    const PointSet& positions() const noexcept { return positions_; }
    const PointSet& normals() const noexcept { return normals_; }
    const std::string& schema() const noexcept { return schema_; }
    int size() const noexcept { return static_cast<int>(positions_.cols()); }

private:
    PointSet positions_;
    PointSet normals_;
    std::string schema_;
};

/// p^f_i = p^s_i + d_i n^s_i. Depths must be positive.
PointSet extend_landmarks(const SkullLandmarkSet& skull, const DepthVector& depths);
/// Same as extend_landmarks without the positivity check.
PointSet extend_landmarks_raw(const SkullLandmarkSet& skull, const DepthVector& depths);

struct ImpliedDepths {
    DepthVector depths;
    /// Indices whose implied depth is <= 0.
    std::vector<int> non_positive;
};

/// d_i = (p^f_i - p^s_i) . n^s_i
ImpliedDepths implied_depths(const SkullLandmarkSet& skull, const PointSet& facial);

/// Throws Schema unless every depth is finite and > 0 and the length is n.
void validate_depths(const DepthVector& depths, int expected_length);

}  // namespace cranioforge
