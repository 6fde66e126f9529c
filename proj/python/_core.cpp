#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cranioforge/adaptation.hpp"
#include "cranioforge/commands.hpp"
#include "cranioforge/dataset.hpp"
#include "cranioforge/error.hpp"
#include "cranioforge/face_model.hpp"
#include "cranioforge/json_io.hpp"
#include "cranioforge/metrics.hpp"
#include "cranioforge/pipeline.hpp"

namespace py = pybind11;
using namespace cranioforge;

namespace {

// Python sees point sets as (n, 3) arrays; C++ stores them column-per-point.
using RowPoints = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using RowFaces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

RowPoints rows(const PointSet& p) { return p.transpose(); }

PointSet cols(const Eigen::Ref<const RowPoints>& p) { return p.transpose(); }

py::dict mesh_dict(const TriMesh& m) {
    py::dict d;
    d["vertices"] = rows(m.vertices());
    d["faces"] = RowFaces(m.faces().transpose());
    return d;
}

py::dict loss_dict(const LossBreakdown& l) {
    py::dict d;
    d["total"] = l.total;
    d["landmark"] = l.landmark;
    d["projection"] = l.projection;
    d["symmetry"] = l.symmetry;
    return d;
}

py::dict result_dict(const AdaptationResult& r) {
    py::dict d;
    d["latent"] = r.latent.coefficients;
    d["vertices"] = rows(r.final_mesh.vertices());
    d["final_loss"] = loss_dict(r.final_loss);
    d["landmark_residuals"] = r.landmark_residuals;
    d["initial_residuals"] = r.initial_residuals;
    d["iterations"] = r.iterations_run;
    py::list history;
    for (const auto& l : r.loss_history) history.append(l.total);
    d["loss_history"] = history;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "cranioforge: skull landmarks to face meshes with tissue-depth control";

    static py::exception<Error> error(m, "CranioforgeError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = error;
            py::object instance = exc(std::string(e.what()));
            instance.attr("kind") = to_string(e.kind());
            PyErr_SetObject(error.ptr(), instance.ptr());
        }
    });

    m.def("version", &version_stamp);

    m.def("landmark_names", [] {
        std::vector<std::string> names;
        for (const auto& d : LandmarkSchema::standard().landmarks()) names.push_back(d.name);
        return names;
    });
    m.def("region_partition", [] { return LandmarkSchema::standard().region_partition(); });
    m.def("symmetry_pairing", [] {
        const SymmetryPairing s = LandmarkSchema::standard().pairing();
        py::dict d;
        d["left"] = s.left;
        d["right"] = s.right;
        d["mid"] = s.mid;
        return d;
    });

    py::class_<AdaptationConfig>(m, "AdaptationConfig")
        .def(py::init<>())
        .def_readwrite("alpha_lmk", &AdaptationConfig::alpha_lmk)
        .def_readwrite("alpha_proj", &AdaptationConfig::alpha_proj)
        .def_readwrite("alpha_sym", &AdaptationConfig::alpha_sym)
        .def_readwrite("learning_rate", &AdaptationConfig::learning_rate)
        .def_readwrite("decay_factor", &AdaptationConfig::decay_factor)
        .def_readwrite("decay_every", &AdaptationConfig::decay_every)
        .def_readwrite("total_iterations", &AdaptationConfig::total_iterations)
        .def_readwrite("weight_decay", &AdaptationConfig::weight_decay)
        .def_readwrite("use_landmark", &AdaptationConfig::use_landmark)
        .def_readwrite("use_projection", &AdaptationConfig::use_projection)
        .def_readwrite("use_symmetry", &AdaptationConfig::use_symmetry)
        .def_readwrite("prealign", &AdaptationConfig::prealign)
        .def("validate", &AdaptationConfig::validate)
        .def("learning_rate_at", &AdaptationConfig::learning_rate_at)
        .def("to_json", [](const AdaptationConfig& c) { return to_json(c).dump(); });

    py::class_<MorphableFaceModel, std::shared_ptr<MorphableFaceModel>>(m, "FaceModel")
        .def_property_readonly("latent_size", &MorphableFaceModel::latent_size)
        .def_property_readonly("landmark_count", &MorphableFaceModel::landmark_count)
        .def_property_readonly("vertex_count", &MorphableFaceModel::vertex_count)
        .def_property_readonly("landmark_indices", &MorphableFaceModel::landmark_indices)
        .def_property_readonly("mean_face", [](const MorphableFaceModel& fm) { return mesh_dict(fm.mean_face()); })
        .def_property_readonly("landmark_jacobian", &MorphableFaceModel::landmark_jacobian)
        .def("orthonormality_error", &MorphableFaceModel::orthonormality_error)
        .def(
            "decode",
            [](const MorphableFaceModel& fm, const Eigen::VectorXd& f) { return rows(decode_vertices(fm, f)); },
            py::arg("latent"), "Vertex positions (V, 3) for a latent code.")
        .def(
            "landmarks",
            [](const MorphableFaceModel& fm, const Eigen::VectorXd& f) { return rows(decode_landmarks(fm, f)); },
            py::arg("latent"))
        .def(
            "sample_prior",
            [](const MorphableFaceModel& fm, std::uint64_t seed, const std::map<std::string, std::string>& attrs) {
                return sample_prior(fm, seed, attrs).coefficients;
            },
            py::arg("seed"), py::arg("attributes") = std::map<std::string, std::string>{})
        .def("save", [](const MorphableFaceModel& fm, const std::filesystem::path& stem) {
            save_face_model(fm, stem);
        });

    m.def(
        "build_synthetic_model",
        [](std::uint64_t seed, int latent_size) {
            return std::make_shared<MorphableFaceModel>(build_synthetic_model(seed, latent_size));
        },
        py::arg("seed") = 1, py::arg("latent_size") = 50);
    m.def("load_face_model", [](const std::filesystem::path& path) {
        return std::make_shared<MorphableFaceModel>(load_face_model(path));
    });

    py::class_<SkullFacePair>(m, "SkullFacePair")
        .def_readonly("id", &SkullFacePair::id)
        .def_property_readonly("skull_positions", [](const SkullFacePair& p) { return rows(p.skull.positions()); })
        .def_property_readonly("skull_normals", [](const SkullFacePair& p) { return rows(p.skull.normals()); })
        .def_property_readonly("face_vertices", [](const SkullFacePair& p) { return rows(p.face.vertices()); })
        .def_readonly("gt_depths", &SkullFacePair::gt_depths)
        .def_property_readonly("gt_latent", [](const SkullFacePair& p) -> std::optional<Eigen::VectorXd> {
            if (!p.gt_latent) return std::nullopt;
            return p.gt_latent->coefficients;
        });

    m.def(
        "generate_pairs",
        [](const MorphableFaceModel& fm, int count, std::uint64_t seed, bool normalize) {
            auto pairs = generate_pairs(fm, count, seed);
            if (normalize)
                for (auto& p : pairs) p = normalize_pair(p);
            return pairs;
        },
        py::arg("model"), py::arg("count"), py::arg("seed") = 1, py::arg("normalize") = true);
    m.def("read_pairs", [](const std::filesystem::path& root) { return read_pairs(root); });

    py::class_<TddBundle>(m, "TissueDepthModel")
        .def_property_readonly("mean", [](const TddBundle& t) { return t.global.mean(); })
        .def_property_readonly("axis", [](const TddBundle& t) { return t.global.axis(); })
        .def_property_readonly("variance_ratios", [](const TddBundle& t) { return t.global.variance_ratios(); })
        .def_property_readonly("c_range", [](const TddBundle& t) { return t.global.c_range(); })
        .def_property_readonly("allowed_range", [](const TddBundle& t) { return t.global.allowed_range(); })
        .def("sample", [](const TddBundle& t, double c) { return sample_global(t.global, c); }, py::arg("c"))
        .def("project", [](const TddBundle& t, const DepthVector& d) { return project_c(t.global, d); })
        .def(
            "sample_regional",
            [](const TddBundle& t, const DepthVector& base, const std::string& region, double c_local) {
                return sample_regional(t.regional, base, region, c_local);
            },
            py::arg("base"), py::arg("region"), py::arg("c_local"))
        .def("depths_for_mode",
             [](const TddBundle& t, const std::string& mode) { return depths_for_mode(t, TissueMode::parse(mode)); })
        .def("save", [](const TddBundle& t, const std::filesystem::path& dir) { save_tdd(dir, t); });

    m.def(
        "fit_tdd",
        [](const std::vector<SkullFacePair>& training) {
            return fit_tdd(training, LandmarkSchema::standard().region_partition());
        },
        py::arg("training"));
    m.def("load_tdd", [](const std::filesystem::path& dir) { return load_tdd(dir); });

    m.def(
        "adapt_face",
        [](const MorphableFaceModel& fm, const Eigen::VectorXd& f_init, const Eigen::Ref<const RowPoints>& targets,
           const AdaptationConfig& config) {
            AdaptationResult r;
            {
                py::gil_scoped_release release;
                r = adapt_face(fm, FaceLatent(f_init), cols(targets), LandmarkSchema::standard().pairing(), config);
            }
            return result_dict(r);
        },
        py::arg("model"), py::arg("f_init"), py::arg("targets"), py::arg("config") = AdaptationConfig{});

    m.def(
        "reconstruct",
        [](const MorphableFaceModel& fm, const TddBundle& tdd, const Eigen::Ref<const RowPoints>& skull_positions,
           const Eigen::Ref<const RowPoints>& skull_normals, const std::string& mode, std::uint64_t seed,
           const AdaptationConfig& config, std::optional<Eigen::Ref<const RowPoints>> ground_truth) {
            ReconstructionRequest req;
            req.skull = SkullLandmarkSet(cols(skull_positions), cols(skull_normals));
            req.mode = TissueMode::parse(mode);
            req.seed = seed;
            req.config = config;
            std::optional<TriMesh> truth;
            if (ground_truth) {
                truth = fm.mean_face().with_vertices(cols(*ground_truth));
                req.ground_truth = &*truth;
            }
            Reconstruction r;
            {
                py::gil_scoped_release release;
                r = reconstruct(fm, tdd, LandmarkSchema::standard().pairing(), req);
            }
            py::dict d = result_dict(r.adaptation);
            d["mode"] = r.mode.name();
            d["depths"] = r.depths;
            d["targets"] = rows(r.targets);
            d["vertices"] = rows(r.mesh.vertices());
            d["nme"] = r.nme ? py::cast(*r.nme) : py::none();
            return d;
        },
        py::arg("model"), py::arg("tdd"), py::arg("skull_positions"), py::arg("skull_normals"),
        py::arg("mode") = "avg", py::arg("seed") = 0, py::arg("config") = AdaptationConfig{},
        py::arg("ground_truth") = py::none());

    m.def(
        "nme",
        [](const Eigen::Ref<const RowPoints>& a, const Eigen::Ref<const RowPoints>& b, double ear) {
            return nme(cols(a), cols(b), ear);
        },
        py::arg("reconstructed"), py::arg("ground_truth"), py::arg("ear_distance") = 200.0);
}
