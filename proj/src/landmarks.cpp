#include "cranioforge/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cranioforge/error.hpp"

namespace cranioforge {

namespace {

struct MidDef {
    const char* name;
    const char* region;
    double elevation;
};

struct PairDef {
    const char* name;
    const char* region;
    double azimuth;  // right side; the left side mirrors it
    double elevation;
};

// Placements on the canonical head (degrees). Names follow common
// craniometric usage but the layout is our own stand-in.
constexpr MidDef kMid[] = {
    {"metopion", "forehead", 40.0},
    {"supraglabella", "forehead", 30.0},
    {"glabella", "forehead", 22.0},
    {"nasion", "middle", 15.0},
    {"rhinion", "middle", 5.0},
    {"pronasale", "middle", -3.0},
    {"subnasale", "middle", -10.0},
    {"labrale_superius", "mouth", -15.0},
    {"stomion", "mouth", -19.0},
    {"labrale_inferius", "mouth", -23.0},
    {"mentolabial_sulcus", "chin", -29.0},
    {"pogonion", "chin", -36.0},
    {"gnathion", "chin", -41.0},
    {"menton", "chin", -47.0},
};

constexpr PairDef kPairs[] = {
    {"frontal_eminence", "forehead", 25.0, 38.0},
    {"lateral_forehead", "forehead", 45.0, 32.0},
    {"supraorbital", "forehead", 18.0, 24.0},
    {"superciliary", "forehead", 34.0, 22.0},
    {"upper_temporal", "forehead", 62.0, 28.0},
    {"frontotemporale", "forehead", 52.0, 16.0},
    {"endocanthion", "middle", 12.0, 11.0},
    {"infraorbital", "middle", 22.0, 0.0},
    {"exocanthion", "middle", 32.0, 10.0},
    {"alare", "middle", 9.0, -4.0},
    {"nasal_dorsum", "middle", 6.0, 6.0},
    {"lateral_orbit", "middle", 42.0, 8.0},
    {"subalare", "middle", 10.0, -10.0},
    {"nasolabial", "middle", 17.0, -9.0},
    {"zygion", "cheeks", 62.0, 2.0},
    {"mid_zygomatic", "cheeks", 47.0, 0.0},
    {"tragion", "cheeks", 90.0, 0.0},
    {"buccal", "cheeks", 40.0, -15.0},
    {"mid_masseter", "cheeks", 60.0, -17.0},
    {"gonion", "cheeks", 70.0, -36.0},
    {"mandibular_angle", "cheeks", 50.0, -33.0},
    {"infrazygomatic", "cheeks", 52.0, -7.0},
    {"preauricular", "cheeks", 80.0, -6.0},
    {"mid_cheek", "cheeks", 30.0, -6.0},
    {"cheilion", "mouth", 13.0, -19.0},
    {"upper_lip_lateral", "mouth", 6.0, -15.0},
    {"lower_lip_lateral", "mouth", 6.0, -23.0},
    {"commissure_lateral", "mouth", 21.0, -20.0},
    {"mental_lateral", "chin", 12.0, -34.0},
    {"mandibular_body", "chin", 25.0, -37.0},
    {"submental_lateral", "chin", 14.0, -44.0},
    {"mentolabial_lateral", "chin", 11.0, -28.0},
};

LandmarkSchema make_standard() {
    std::vector<LandmarkDef> defs;
    for (const auto& m : kMid) {
        defs.push_back({m.name, Side::Mid, m.region, 0.0, m.elevation});
    }
    for (const auto& p : kPairs) {
        defs.push_back({std::string("left_") + p.name, Side::Left, p.region, -p.azimuth, p.elevation});
    }
    for (const auto& p : kPairs) {
        defs.push_back({std::string("right_") + p.name, Side::Right, p.region, p.azimuth, p.elevation});
    }
    return LandmarkSchema("standard78", std::move(defs));
}

}  // namespace

void SymmetryPairing::validate(int landmark_count) const {
    if (left.size() != right.size()) {
        throw Error(ErrorKind::Schema, "symmetry pairing: left and right lists differ in length");
    }
    std::vector<int> seen(static_cast<std::size_t>(landmark_count), 0);
    for (const auto* list : {&left, &right, &mid}) {
        for (int i : *list) {
            if (i < 0 || i >= landmark_count) {
                throw Error(ErrorKind::Schema, "symmetry pairing: index " + std::to_string(i) + " out of range");
            }
            ++seen[static_cast<std::size_t>(i)];
        }
    }
    for (int i = 0; i < landmark_count; ++i) {
        if (seen[static_cast<std::size_t>(i)] != 1) {
            throw Error(ErrorKind::Schema, "symmetry pairing: landmark " + std::to_string(i) +
                                               " appears " + std::to_string(seen[static_cast<std::size_t>(i)]) +
                                               " times");
        }
    }
}

LandmarkSchema::LandmarkSchema(std::string name, std::vector<LandmarkDef> defs)
    : name_(std::move(name)), defs_(std::move(defs)) {
    std::set<std::string> names;
    for (const auto& d : defs_) {
        if (!names.insert(d.name).second) {
            throw Error(ErrorKind::Schema, "duplicate landmark name '" + d.name + "'");
        }
    }
}

int LandmarkSchema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < defs_.size(); ++i) {
        if (defs_[i].name == name) return static_cast<int>(i);
    }
    throw Error(ErrorKind::NotFound, "schema '" + name_ + "' has no landmark '" + name + "'");
}

SymmetryPairing LandmarkSchema::pairing() const {
    SymmetryPairing p;
    for (int i = 0; i < size(); ++i) {
        const auto& d = defs_[static_cast<std::size_t>(i)];
        if (d.side == Side::Mid) {
            p.mid.push_back(i);
        } else if (d.side == Side::Left) {
            if (d.name.rfind("left_", 0) != 0) {
                throw Error(ErrorKind::Schema, "left landmark '" + d.name + "' lacks the left_ prefix");
            }
            p.left.push_back(i);
            p.right.push_back(index_of("right_" + d.name.substr(5)));
        }
    }
    p.validate(size());
    return p;
}

std::map<std::string, std::vector<int>> LandmarkSchema::region_partition() const {
    std::map<std::string, std::vector<int>> out;
    for (int i = 0; i < size(); ++i) out[defs_[static_cast<std::size_t>(i)].region].push_back(i);
    return out;
}

const LandmarkSchema& LandmarkSchema::standard() {
    static const LandmarkSchema schema = make_standard();
    return schema;
}

SkullLandmarkSet::SkullLandmarkSet(PointSet positions, PointSet normals, std::string schema)
    : positions_(std::move(positions)), normals_(std::move(normals)), schema_(std::move(schema)) {
    if (positions_.cols() != normals_.cols()) {
        throw Error(ErrorKind::Schema, "skull landmarks: " + std::to_string(positions_.cols()) + " positions but " +
                                           std::to_string(normals_.cols()) + " normals");
    }
    for (Eigen::Index i = 0; i < normals_.cols(); ++i) {
        if (!positions_.col(i).allFinite()) {
            throw Error(ErrorKind::Schema, "skull landmark " + std::to_string(i) + " is not finite");
        }
        if (!(std::abs(normals_.col(i).norm() - 1.0) <= 1e-6)) {
            throw Error(ErrorKind::Schema, "skull landmark normal " + std::to_string(i) + " is not unit length");
        }
    }
}

void validate_depths(const DepthVector& depths, int expected_length) {
    if (depths.size() != expected_length) {
        throw Error(ErrorKind::Schema, "expected " + std::to_string(expected_length) + " tissue depths, got " +
                                           std::to_string(depths.size()));
    }
    for (Eigen::Index i = 0; i < depths.size(); ++i) {
        if (!std::isfinite(depths[i]) || !(depths[i] > 0.0)) {
            throw Error(ErrorKind::Schema, "tissue depth " + std::to_string(i) + " must be positive");
        }
    }
}

PointSet extend_landmarks_raw(const SkullLandmarkSet& skull, const DepthVector& depths) {
    if (depths.size() != skull.size()) {
        throw Error(ErrorKind::Schema, "depth count " + std::to_string(depths.size()) + " does not match " +
                                           std::to_string(skull.size()) + " skull landmarks");
    }
    return skull.positions() + skull.normals() * depths.asDiagonal();
}

PointSet extend_landmarks(const SkullLandmarkSet& skull, const DepthVector& depths) {
    validate_depths(depths, skull.size());
    return extend_landmarks_raw(skull, depths);
}

ImpliedDepths implied_depths(const SkullLandmarkSet& skull, const PointSet& facial) {
    if (facial.cols() != skull.size()) {
        throw Error(ErrorKind::Schema, "facial landmark count " + std::to_string(facial.cols()) +
                                           " does not match " + std::to_string(skull.size()) + " skull landmarks");
    }
    ImpliedDepths out;
    out.depths = (skull.normals().array() * (facial - skull.positions()).array()).colwise().sum().transpose();
    for (Eigen::Index i = 0; i < out.depths.size(); ++i) {
        if (!(out.depths[i] > 0.0)) out.non_positive.push_back(static_cast<int>(i));
    }
    return out;
}

}  // namespace cranioforge
