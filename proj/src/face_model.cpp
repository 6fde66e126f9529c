#include "cranioforge/face_model.hpp"

#include <bit>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"

#include "cranioforge/error.hpp"

namespace cranioforge {

MorphableFaceModel::MorphableFaceModel(TriMesh mean_face, Eigen::MatrixXd basis, Eigen::VectorXd basis_scales,
                                       std::vector<int> landmark_indices)
    : template_(std::move(mean_face)),
      basis_(std::move(basis)),
      scales_(std::move(basis_scales)),
      landmarks_(std::move(landmark_indices)) {
    const auto v = template_.vertex_count();
    if (basis_.rows() != 3 * v) {
        throw Error(ErrorKind::Schema, "face model basis has " + std::to_string(basis_.rows()) + " rows, expected " +
                                           std::to_string(3 * v));
    }
    if (basis_.cols() != scales_.size() || scales_.size() < 1) {
        throw Error(ErrorKind::Schema, "face model basis and scales disagree on the latent size");
    }
    std::set<int> seen;
    for (int idx : landmarks_) {
        if (idx < 0 || idx >= v) {
            throw Error(ErrorKind::Schema, "landmark vertex index " + std::to_string(idx) + " out of range");
        }
        if (!seen.insert(idx).second) {
            throw Error(ErrorKind::Schema, "landmark vertex index " + std::to_string(idx) + " repeated");
        }
    }
    scaled_basis_ = basis_ * scales_.asDiagonal();
    landmark_jacobian_.resize(3 * static_cast<Eigen::Index>(landmarks_.size()), scales_.size());
    for (std::size_t i = 0; i < landmarks_.size(); ++i) {
        landmark_jacobian_.middleRows(3 * static_cast<Eigen::Index>(i), 3) = scaled_basis_.middleRows(3 * landmarks_[i], 3);
    }
}

PointSet MorphableFaceModel::mean_landmarks() const {
    PointSet out(3, landmark_count());
    for (int i = 0; i < landmark_count(); ++i) out.col(i) = template_.vertices().col(landmarks_[static_cast<std::size_t>(i)]);
    return out;
}

double MorphableFaceModel::orthonormality_error() const {
    const Eigen::MatrixXd gram = basis_.transpose() * basis_;
    return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

namespace {

void check_latent(const MorphableFaceModel& model, const Eigen::VectorXd& f) {
    if (f.size() != model.latent_size()) {
        throw Error(ErrorKind::Schema, "latent has " + std::to_string(f.size()) + " coefficients, model expects " +
                                           std::to_string(model.latent_size()));
    }
}

}  // namespace

PointSet decode_vertices(const MorphableFaceModel& model, const Eigen::VectorXd& f) {
    check_latent(model, f);
    PointSet v = model.mean_face().vertices();
    Eigen::Map<Eigen::VectorXd>(v.data(), v.size()).noalias() += model.vertex_jacobian() * f;
    return v;
}

PointSet decode_landmarks(const MorphableFaceModel& model, const Eigen::VectorXd& f) {
    check_latent(model, f);
    PointSet q = model.mean_landmarks();
    Eigen::Map<Eigen::VectorXd>(q.data(), q.size()).noalias() += model.landmark_jacobian() * f;
    return q;
}

TriMesh decode(const MorphableFaceModel& model, const FaceLatent& f) {
    return model.mean_face().with_vertices(decode_vertices(model, f.coefficients));
}

PointSet extract_landmarks(const MorphableFaceModel& model, const TriMesh& mesh) {
    if (!mesh.same_topology(model.mean_face())) {
        throw Error(ErrorKind::Schema, "mesh topology does not match the face model template");
    }
    PointSet out(3, model.landmark_count());
    const auto& idx = model.landmark_indices();
    for (int i = 0; i < model.landmark_count(); ++i) out.col(i) = mesh.vertices().col(idx[static_cast<std::size_t>(i)]);
    return out;
}

double ear_distance(const MorphableFaceModel& model, const TriMesh& mesh, const LandmarkSchema& schema) {
    const auto& idx = model.landmark_indices();
    if (static_cast<int>(idx.size()) != schema.size()) {
        throw Error(ErrorKind::Schema, "face model landmark table does not match the schema");
    }
    const auto l = idx[static_cast<std::size_t>(schema.left_ear())];
    const auto r = idx[static_cast<std::size_t>(schema.right_ear())];
    return (mesh.vertices().col(l) - mesh.vertices().col(r)).norm();
}

// ---------------------------------------------------------------------------
// Attribute offsets

Eigen::VectorXd AttributeTable::offsets(const std::map<std::string, std::string>& attributes, int latent_size) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(latent_size);
    for (const auto& [name, value] : attributes) {
        auto attr = table_.find(name);
        if (attr == table_.end()) {
            std::string vocab;
            for (const auto& [n, _] : table_) vocab += (vocab.empty() ? "" : ", ") + n;
            throw Error(ErrorKind::InvalidInput, "unknown attribute '" + name + "'; allowed: " + vocab);
        }
        auto val = attr->second.find(value);
        if (val == attr->second.end()) {
            std::string vocab;
            for (const auto& [v, _] : attr->second) vocab += (vocab.empty() ? "" : ", ") + v;
            throw Error(ErrorKind::InvalidInput,
                        "unknown value '" + value + "' for attribute '" + name + "'; allowed: " + vocab);
        }
        for (const auto& [component, offset] : val->second) {
            if (component >= 0 && component < latent_size) out[component] += offset;
        }
    }
    return out;
}

const AttributeTable& AttributeTable::standard() {
    // Invented stand-ins for biological-profile conditioning. Component 0 of
    // the synthetic model is the cheek/jaw fullness field, 1-3 are the x/y/z
    // proportions, 10 and 11 the two most landmark-visible free fields.
    static const AttributeTable table(Table{
        {"age",
         {{"10 to 20", {{2, -0.4}, {0, -0.3}}},
          {"20 to 30", {}},
          {"30 to 50", {{0, 0.2}}},
          {"50 to 70", {{0, 0.4}, {2, -0.2}}}}},
        {"ancestry",
         {{"African", {{1, 0.3}, {10, 0.4}}},
          {"Asian", {{1, 0.2}, {3, -0.3}, {10, -0.3}}},
          {"European", {{3, 0.3}, {10, 0.2}}},
          {"Latino", {{1, 0.1}, {11, 0.3}}}}},
        {"gender", {{"Female", {{1, -0.4}, {2, -0.3}}}, {"Male", {{1, 0.4}, {2, 0.3}}}}},
        {"face_shape", {{"Normal", {}}, {"Fat", {{0, 1.5}}}, {"Thin", {{0, -1.5}}}}},
    });
    return table;
}

FaceLatent sample_prior(const MorphableFaceModel& model, std::uint64_t seed,
                        const std::map<std::string, std::string>& attributes, const AttributeTable& table) {
    const int k = model.latent_size();
    Eigen::VectorXd offsets = table.offsets(attributes, k);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd f(k);
    for (int i = 0; i < k; ++i) f[i] = normal(rng);
    return FaceLatent(f + offsets);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr const char* kBasisLayout = "float64 little-endian; component-major, vertex-major, xyz innermost";

}  // namespace

void save_face_model(const MorphableFaceModel& model, const std::filesystem::path& stem) {
    static_assert(std::endian::native == std::endian::little, "basis blob is written in host order");
    const auto dir = stem.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    const std::string base = stem.filename().string();
    const auto obj_path = stem.parent_path() / (base + "_template.obj");
    const auto bin_path = stem.parent_path() / (base + "_basis.bin");

    nlohmann::json header;
    header["K"] = model.latent_size();
    header["vertex_count"] = model.vertex_count();
    header["landmark_indices"] = model.landmark_indices();
    header["basis_scales"] = std::vector<double>(model.basis_scales().data(),
                                                 model.basis_scales().data() + model.basis_scales().size());
    header["template"] = obj_path.filename().string();
    header["basis"] = bin_path.filename().string();
    header["basis_layout"] = kBasisLayout;

    write_obj(obj_path, model.mean_face());
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw Error(ErrorKind::Io, "cannot write " + bin_path.string());
    bin.write(reinterpret_cast<const char*>(model.basis().data()),
              static_cast<std::streamsize>(model.basis().size() * sizeof(double)));
    if (!bin) throw Error(ErrorKind::Io, "write failed: " + bin_path.string());

    std::ofstream js(stem.parent_path() / (base + ".json"));
    if (!js) throw Error(ErrorKind::Io, "cannot write model header for " + stem.string());
    js << header.dump(2) << '\n';
}

MorphableFaceModel load_face_model(const std::filesystem::path& json_path) {
    std::ifstream js(json_path);
    if (!js) throw Error(ErrorKind::Io, "cannot open " + json_path.string());
    nlohmann::json header;
    try {
        js >> header;
        const auto dir = json_path.parent_path();
        const int k = header.at("K").get<int>();
        auto mesh = read_obj(dir / header.at("template").get<std::string>());
        const auto rows = 3 * mesh.vertex_count();
        Eigen::MatrixXd basis(rows, k);
        const auto bin_path = dir / header.at("basis").get<std::string>();
        std::ifstream bin(bin_path, std::ios::binary);
        if (!bin) throw Error(ErrorKind::Io, "cannot open " + bin_path.string());
        bin.read(reinterpret_cast<char*>(basis.data()), static_cast<std::streamsize>(basis.size() * sizeof(double)));
        if (bin.gcount() != static_cast<std::streamsize>(basis.size() * sizeof(double))) {
            throw Error(ErrorKind::Io, "basis blob " + bin_path.string() + " is truncated");
        }
        const auto scales = header.at("basis_scales").get<std::vector<double>>();
        return MorphableFaceModel(std::move(mesh), std::move(basis),
                                  Eigen::Map<const Eigen::VectorXd>(scales.data(), static_cast<Eigen::Index>(scales.size())),
                                  header.at("landmark_indices").get<std::vector<int>>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Io, "malformed face model header " + json_path.string() + ": " + e.what());
    }
}

}  // namespace cranioforge
