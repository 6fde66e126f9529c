#include "cranioforge/json_io.hpp"

#include <fstream>
#include <set>

#include "cranioforge/error.hpp"

namespace cranioforge {

namespace {

[[noreturn]] void schema_error(const std::string& msg) { throw Error(ErrorKind::Schema, msg); }

const json& field(const json& j, const char* key, const std::string& what) {
    if (!j.is_object()) schema_error(what + ": expected a JSON object");
    auto it = j.find(key);
    if (it == j.end()) schema_error(what + ": missing '" + key + "'");
    return *it;
}

double number(const json& j, const std::string& what) {
    if (!j.is_number()) schema_error(what + ": expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& what) {
    if (!j.is_number_integer()) schema_error(what + ": expected an integer");
    return j.get<int>();
}

std::vector<int> int_list(const json& j, const std::string& what) {
    if (!j.is_array()) schema_error(what + ": expected an array of integers");
    std::vector<int> out;
    out.reserve(j.size());
    for (const auto& v : j) out.push_back(integer(v, what));
    return out;
}

std::vector<std::string> string_list(const json& j, const std::string& what) {
    if (!j.is_array()) schema_error(what + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto& v : j) {
        if (!v.is_string()) schema_error(what + ": expected an array of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

}  // namespace

json points_to_json(const PointSet& points) {
    json out = json::array();
    for (Eigen::Index i = 0; i < points.cols(); ++i) out.push_back({points(0, i), points(1, i), points(2, i)});
    return out;
}

PointSet points_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) schema_error(what + ": expected an array of [x, y, z]");
    PointSet out(3, static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& p = j[i];
        if (!p.is_array() || p.size() != 3) {
            schema_error(what + "[" + std::to_string(i) + "]: expected 3 coordinates");
        }
        for (int a = 0; a < 3; ++a) out(a, static_cast<Eigen::Index>(i)) = number(p[static_cast<std::size_t>(a)], what);
    }
    return out;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) schema_error(what + ": expected an array of numbers");
    Eigen::VectorXd out(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) out[static_cast<Eigen::Index>(i)] = number(j[i], what);
    return out;
}

json to_json(const SkullLandmarkSet& skull) {
    return {{"schema", skull.schema()}, {"positions", points_to_json(skull.positions())},
            {"normals", points_to_json(skull.normals())}};
}

SkullLandmarkSet skull_from_json(const json& j, int expected_count) {
    const std::string schema = j.is_object() && j.contains("schema") && j["schema"].is_string()
                                   ? j["schema"].get<std::string>()
                                   : std::string("standard78");
    PointSet pos = points_from_json(field(j, "positions", "landmarks"), "positions");
    PointSet nrm = points_from_json(field(j, "normals", "landmarks"), "normals");
    if (expected_count >= 0 && pos.cols() != expected_count) {
        schema_error("landmark file has " + std::to_string(pos.cols()) + " positions, schema expects " +
                     std::to_string(expected_count));
    }
    return SkullLandmarkSet(std::move(pos), std::move(nrm), schema);
}

json to_json(const SymmetryPairing& p) { return {{"left", p.left}, {"right", p.right}, {"mid", p.mid}}; }

SymmetryPairing pairing_from_json(const json& j, int landmark_count) {
    SymmetryPairing p;
    p.left = int_list(field(j, "left", "pairing"), "pairing.left");
    p.right = int_list(field(j, "right", "pairing"), "pairing.right");
    p.mid = int_list(field(j, "mid", "pairing"), "pairing.mid");
    p.validate(landmark_count);
    return p;
}

json partition_to_json(const RegionPartition& partition) {
    json out = json::object();
    for (const auto& [name, idx] : partition) out[name] = idx;
    return out;
}

RegionPartition partition_from_json(const json& j) {
    if (!j.is_object()) schema_error("partition: expected {region: [indices]}");
    RegionPartition out;
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = int_list(it.value(), "partition." + it.key());
    return out;
}

json to_json(const LandmarkSchema& schema) {
    json defs = json::array();
    for (const auto& d : schema.landmarks()) {
        const char* side = d.side == Side::Left ? "left" : d.side == Side::Right ? "right" : "mid";
        defs.push_back({{"name", d.name}, {"side", side}, {"region", d.region}, {"azimuth_deg", d.azimuth_deg},
                        {"elevation_deg", d.elevation_deg}});
    }
    return {{"name", schema.name()}, {"landmarks", defs}};
}

json to_json(const TddModel& m) {
    json comps = json::array();
    for (Eigen::Index c = 0; c < m.components().cols(); ++c) comps.push_back(vector_to_json(m.components().col(c)));
    return {{"landmark_count", m.landmark_count()},
            {"sample_count", m.sample_count()},
            {"mean", vector_to_json(m.mean())},
            {"components", comps},
            {"eigenvalues", vector_to_json(m.eigenvalues())},
            {"c_range", {m.c_range().first, m.c_range().second}}};
}

TddModel tdd_from_json(const json& j) {
    const int n = integer(field(j, "landmark_count", "tdd model"), "landmark_count");
    const Eigen::VectorXd mean = vector_from_json(field(j, "mean", "tdd model"), "mean");
    if (mean.size() != n) schema_error("tdd model: mean length differs from landmark_count");
    const json& comps = field(j, "components", "tdd model");
    if (!comps.is_array() || comps.empty()) schema_error("tdd model: components must be a non-empty array");
    Eigen::MatrixXd c(n, static_cast<Eigen::Index>(comps.size()));
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const Eigen::VectorXd v = vector_from_json(comps[k], "components");
        if (v.size() != n) schema_error("tdd model: component length differs from landmark_count");
        c.col(static_cast<Eigen::Index>(k)) = v;
    }
    const json& range = field(j, "c_range", "tdd model");
    if (!range.is_array() || range.size() != 2) schema_error("tdd model: c_range must have 2 entries");
    return TddModel(mean, c, vector_from_json(field(j, "eigenvalues", "tdd model"), "eigenvalues"),
                    integer(field(j, "sample_count", "tdd model"), "sample_count"),
                    {number(range[0], "c_range"), number(range[1], "c_range")});
}

json to_json(const RegionalTddModel& m) {
    json regions = json::object();
    for (const auto& [name, model] : m.regions()) regions[name] = to_json(model);
    return {{"partition", partition_to_json(m.partition())}, {"regions", regions}};
}

RegionalTddModel regional_tdd_from_json(const json& j) {
    RegionPartition partition = partition_from_json(field(j, "partition", "regional tdd model"));
    const json& regions = field(j, "regions", "regional tdd model");
    if (!regions.is_object()) schema_error("regional tdd model: regions must be an object");
    std::map<std::string, TddModel> models;
    for (auto it = regions.begin(); it != regions.end(); ++it) models.emplace(it.key(), tdd_from_json(it.value()));
    return RegionalTddModel(std::move(partition), std::move(models));
}

json to_json(const SimilarityTransform& t) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot.push_back(t.rotation(r, c));
    return {{"scale", t.scale},
            {"rotation", rot},
            {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

SimilarityTransform transform_from_json(const json& j) {
    SimilarityTransform t;
    t.scale = number(field(j, "scale", "transform"), "scale");
    const Eigen::VectorXd r = vector_from_json(field(j, "rotation", "transform"), "rotation");
    const Eigen::VectorXd tr = vector_from_json(field(j, "translation", "transform"), "translation");
    if (r.size() != 9 || tr.size() != 3) schema_error("transform: rotation needs 9 values and translation 3");
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) t.rotation(a, b) = r[3 * a + b];
    t.translation = tr;
    t.validate();
    return t;
}

json to_json(const Plane& plane) {
    return {{"normal", {plane.normal().x(), plane.normal().y(), plane.normal().z()}}, {"offset", plane.offset()}};
}

json to_json(const AdaptationConfig& c) {
    return {{"alpha_lmk", c.alpha_lmk},
            {"alpha_proj", c.alpha_proj},
            {"alpha_sym", c.alpha_sym},
            {"learning_rate", c.learning_rate},
            {"decay_factor", c.decay_factor},
            {"decay_every", c.decay_every},
            {"total_iterations", c.total_iterations},
            {"weight_decay", c.weight_decay},
            {"use_landmark", c.use_landmark},
            {"use_projection", c.use_projection},
            {"use_symmetry", c.use_symmetry},
            {"normalize_by_count", c.normalize_by_count},
            {"prealign", c.prealign},
            {"early_stop", c.early_stop},
            {"early_stop_tolerance", c.early_stop_tolerance},
            {"early_stop_window", c.early_stop_window}};
}

AdaptationConfig config_from_json(const json& j, AdaptationConfig c) {
    if (!j.is_object()) schema_error("adaptation config: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const json& v = it.value();
        auto flag = [&](bool& dst) {
            if (!v.is_boolean()) schema_error("adaptation config: '" + k + "' must be a boolean");
            dst = v.get<bool>();
        };
        if (k == "alpha_lmk") c.alpha_lmk = number(v, k);
        else if (k == "alpha_proj") c.alpha_proj = number(v, k);
        else if (k == "alpha_sym") c.alpha_sym = number(v, k);
        else if (k == "learning_rate") c.learning_rate = number(v, k);
        else if (k == "decay_factor") c.decay_factor = number(v, k);
        else if (k == "decay_every") c.decay_every = integer(v, k);
        else if (k == "total_iterations") c.total_iterations = integer(v, k);
        else if (k == "weight_decay") c.weight_decay = number(v, k);
        else if (k == "use_landmark") flag(c.use_landmark);
        else if (k == "use_projection") flag(c.use_projection);
        else if (k == "use_symmetry") flag(c.use_symmetry);
        else if (k == "normalize_by_count") flag(c.normalize_by_count);
        else if (k == "prealign") flag(c.prealign);
        else if (k == "early_stop") flag(c.early_stop);
        else if (k == "early_stop_tolerance") c.early_stop_tolerance = number(v, k);
        else if (k == "early_stop_window") c.early_stop_window = integer(v, k);
        else schema_error("adaptation config: unknown key '" + k + "'");
    }
    c.validate();
    return c;
}

json to_json(const LossBreakdown& l) {
    return {{"total", l.total}, {"landmark", l.landmark}, {"projection", l.projection}, {"symmetry", l.symmetry}};
}

json to_json(const AdaptationResult& r) {
    json history = json::array();
    for (const auto& l : r.loss_history) history.push_back({l.total, l.landmark, l.projection, l.symmetry});
    return {{"latent", vector_to_json(r.latent.coefficients)},
            {"loss_history_columns", {"total", "landmark", "projection", "symmetry"}},
            {"loss_history", history},
            {"final_loss", to_json(r.final_loss)},
            {"landmark_residuals", vector_to_json(r.landmark_residuals)},
            {"initial_residuals", vector_to_json(r.initial_residuals)},
            {"aligned_targets", points_to_json(r.aligned_targets)},
            {"transform", to_json(r.transform)},
            {"midplane", to_json(r.midplane)},
            {"iterations_run", r.iterations_run},
            {"cancelled", r.cancelled}};
}

json to_json(const FaceLatent& latent) { return {{"coefficients", vector_to_json(latent.coefficients)}}; }

FaceLatent latent_from_json(const json& j) {
    return FaceLatent(vector_from_json(field(j, "coefficients", "latent"), "coefficients"));
}

json to_json(const DatasetSplit& s) { return {{"train", s.train}, {"test", s.test}, {"folds", s.folds}}; }

DatasetSplit split_from_json(const json& j) {
    DatasetSplit s;
    s.train = string_list(field(j, "train", "split"), "split.train");
    s.test = string_list(field(j, "test", "split"), "split.test");
    if (j.contains("folds")) {
        if (!j["folds"].is_array()) schema_error("split.folds: expected an array of id lists");
        for (const auto& f : j["folds"]) s.folds.push_back(string_list(f, "split.folds"));
    }
    return s;
}

json to_json(const AttributeTable& table) {
    json out = json::object();
    for (const auto& [attr, values] : table.table()) {
        json vs = json::object();
        for (const auto& [value, offsets] : values) {
            json o = json::object();
            for (const auto& [comp, off] : offsets) o[std::to_string(comp)] = off;
            vs[value] = o;
        }
        out[attr] = vs;
    }
    return out;
}

AttributeTable attributes_from_json(const json& j) {
    if (!j.is_object()) schema_error("attribute table: expected an object");
    AttributeTable::Table table;
    for (auto a = j.begin(); a != j.end(); ++a) {
        if (!a.value().is_object()) schema_error("attribute table: '" + a.key() + "' must map values to offsets");
        for (auto v = a.value().begin(); v != a.value().end(); ++v) {
            auto& offsets = table[a.key()][v.key()];
            if (!v.value().is_object()) schema_error("attribute table: offsets must be {component: value}");
            for (auto o = v.value().begin(); o != v.value().end(); ++o) {
                int comp = 0;
                try {
                    comp = std::stoi(o.key());
                } catch (const std::exception&) {
                    schema_error("attribute table: component key '" + o.key() + "' is not an integer");
                }
                offsets[comp] = number(o.value(), "attribute offset");
            }
        }
    }
    return AttributeTable(std::move(table));
}

json to_json(const DepthSpec& s) {
    return {{"region_mean", s.region_mean},
            {"landmark_mean", s.landmark_mean},
            {"region_gain", s.region_gain},
            {"c_sigma", s.c_sigma},
            {"noise_sigma", s.noise_sigma}};
}

DepthSpec depth_spec_from_json(const json& j) {
    DepthSpec s = DepthSpec::standard();
    if (!j.is_object()) schema_error("depth spec: expected an object");
    auto table = [&](const char* key, std::map<std::string, double>& dst) {
        if (!j.contains(key)) return;
        const json& t = j[key];
        if (!t.is_object()) schema_error(std::string("depth spec: '") + key + "' must be an object");
        dst.clear();
        for (auto it = t.begin(); it != t.end(); ++it) dst[it.key()] = number(it.value(), key);
    };
    table("region_mean", s.region_mean);
    table("landmark_mean", s.landmark_mean);
    table("region_gain", s.region_gain);
    if (j.contains("c_sigma")) s.c_sigma = number(j["c_sigma"], "c_sigma");
    if (j.contains("noise_sigma")) s.noise_sigma = number(j["noise_sigma"], "noise_sigma");
    return s;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, "malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

}  // namespace cranioforge
