#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cranioforge/landmarks.hpp"
#include "cranioforge/mesh.hpp"

namespace cranioforge {

/// Latent shape code; entries are in units of per-component standard deviations.
struct FaceLatent {
    Eigen::VectorXd coefficients;

    FaceLatent() = default;
    explicit FaceLatent(Eigen::VectorXd c) : coefficients(std::move(c)) {}
    static FaceLatent zero(int k) { return FaceLatent(Eigen::VectorXd::Zero(k)); }
    int size() const noexcept { return static_cast<int>(coefficients.size()); }
};

/// Linear morphable face model: vertices = template + basis * diag(scales) * f.
class MorphableFaceModel {
public:
    MorphableFaceModel() = default;
    /// basis is 3V x K with orthonormal columns (xyz innermost per vertex).
    MorphableFaceModel(TriMesh mean_face, Eigen::MatrixXd basis, Eigen::VectorXd basis_scales,
                       std::vector<int> landmark_indices);

    const TriMesh& mean_face() const noexcept { return template_; }
    const Eigen::MatrixXd& basis() const noexcept { return basis_; }
    const Eigen::VectorXd& basis_scales() const noexcept { return scales_; }
    const std::vector<int>& landmark_indices() const noexcept { return landmarks_; }
    int latent_size() const noexcept { return static_cast<int>(scales_.size()); }
    int landmark_count() const noexcept { return static_cast<int>(landmarks_.size()); }
    Eigen::Index vertex_count() const noexcept { return template_.vertex_count(); }

    /// basis * diag(scales): d(vertex coords)/d(f), 3V x K.
    const Eigen::MatrixXd& vertex_jacobian() const noexcept { return scaled_basis_; }
    /// Rows of vertex_jacobian() for the landmark vertices, 3n x K.
    const Eigen::MatrixXd& landmark_jacobian() const noexcept { return landmark_jacobian_; }
    /// Template landmark positions.
    PointSet mean_landmarks() const;

    /// Largest |B^T B - I| entry.
    double orthonormality_error() const;

private:
    TriMesh template_;
    Eigen::MatrixXd basis_;
    Eigen::VectorXd scales_;
    std::vector<int> landmarks_;
    Eigen::MatrixXd scaled_basis_;
    Eigen::MatrixXd landmark_jacobian_;
};

TriMesh decode(const MorphableFaceModel& model, const FaceLatent& f);
/// Vertex positions only (no TriMesh construction).
PointSet decode_vertices(const MorphableFaceModel& model, const Eigen::VectorXd& f);
/// Landmark positions of decode(f), computed from the landmark rows only.
PointSet decode_landmarks(const MorphableFaceModel& model, const Eigen::VectorXd& f);

/// Landmark vertices of a mesh sharing the model's topology, in schema order.
PointSet extract_landmarks(const MorphableFaceModel& model, const TriMesh& mesh);

/// attribute -> value -> {component index -> latent offset}.
class AttributeTable {
public:
    using Offsets = std::map<int, double>;
    using Table = std::map<std::string, std::map<std::string, Offsets>>;

    AttributeTable() = default;
    explicit AttributeTable(Table table) : table_(std::move(table)) {}

    const Table& table() const noexcept { return table_; }
    /// Sum of offsets for the chosen values. Throws InvalidInput with the
    /// allowed vocabulary for unknown names or values.
    Eigen::VectorXd offsets(const std::map<std::string, std::string>& attributes, int latent_size) const;

    /// Age, ancestry, gender and face-shape offsets shipped with the library.
    static const AttributeTable& standard();

private:
    Table table_;
};

/// Standard-normal draw keyed by seed, shifted by the attribute offsets.
FaceLatent sample_prior(const MorphableFaceModel& model, std::uint64_t seed,
                        const std::map<std::string, std::string>& attributes = {},
                        const AttributeTable& table = AttributeTable::standard());

struct SyntheticModelOptions {
    int longitudes = 72;
    int rings = 45;
    double ear_distance = 200.0;
    /// Kernel width (degrees) spreading landmark-sampled patterns over the
    /// surface, and the mass offset that fades them away from the landmarks.
    double anchor_sigma_deg = 9.0;
    double anchor_fade = 0.3;
    /// Per-region soft-tissue modes (uniform, lateral and vertical gradient).
    int regional_modes = 3;
    double regional_amplitude = 3.0;
    /// Candidate pool size as a multiple of the latent size.
    int pool_factor = 3;
    /// Peak displacement (mm) of the first rotated field, and its decay per slot.
    double rotated_amplitude = 5.0;
    double rotated_decay = 0.95;
};

/// Procedural head template with smooth orthonormalized displacement fields;
/// landmark vertices are the template vertices nearest the schema layout.
MorphableFaceModel build_synthetic_model(std::uint64_t seed, int latent_size = 50,
                                         const SyntheticModelOptions& options = {},
                                         const LandmarkSchema& schema = LandmarkSchema::standard());

/// Distance between the two ear landmark vertices of a mesh in model topology.
double ear_distance(const MorphableFaceModel& model, const TriMesh& mesh,
                    const LandmarkSchema& schema = LandmarkSchema::standard());

/// Writes <stem>.json, <stem>_template.obj and <stem>_basis.bin.
void save_face_model(const MorphableFaceModel& model, const std::filesystem::path& stem);
MorphableFaceModel load_face_model(const std::filesystem::path& json_path);

}  // namespace cranioforge
