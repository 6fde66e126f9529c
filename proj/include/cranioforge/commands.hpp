#pragma once

// Batch commands behind the CLI. Each writes its outputs plus a
// manifest.json and throws cranioforge::Error on failure.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cranioforge/pipeline.hpp"

namespace cranioforge {

/// Data-root layout:
///   model/face_model.json (+ _template.obj, _basis.bin)
///   pairs/<id>/...        split.json        depth_spec.json
///   tdd/tdd_global.json, tdd_regional.json, tdd_representatives.json
struct DataLayout {
    std::filesystem::path root;

    std::filesystem::path model_json() const { return root / "model" / "face_model.json"; }
    std::filesystem::path pairs_dir() const { return root / "pairs"; }
    std::filesystem::path split_json() const { return root / "split.json"; }
    std::filesystem::path tdd_dir() const { return root / "tdd"; }
};

/// $CRANIOFORGE_DATA when set, else ./data.
std::filesystem::path default_data_root();

MorphableFaceModel load_model(const DataLayout& data);
TddBundle load_tdd(const std::filesystem::path& dir);
void save_tdd(const std::filesystem::path& dir, const TddBundle& tdd);
/// Defaults, or the JSON file's keys applied over them.
AdaptationConfig load_config(const std::optional<std::filesystem::path>& path);

struct GenDataOptions {
    std::filesystem::path out;
    int count = 100;
    std::uint64_t seed = 1;
    int latent_size = 50;
    double test_fraction = 0.5;
    int folds = 5;
    std::optional<std::filesystem::path> depth_spec;
};
/// Face model, pairs, split and depth spec under out. Needs count >= 2.
std::vector<SkullFacePair> cmd_gen_data(const GenDataOptions& options);

struct FitTddOptions {
    std::filesystem::path data;
    /// Defaults to <data>/tdd.
    std::optional<std::filesystem::path> out;
    /// "train", "all" or "fold:<i>" (training side of fold i).
    std::string split = "train";
    std::optional<std::filesystem::path> partition;
};
struct FitTddReport {
    TddBundle tdd;
    std::string text;
};
FitTddReport cmd_fit_tdd(const FitTddOptions& options);

struct ReconstructOptions {
    std::filesystem::path data;
    std::filesystem::path out;
    /// Either one skull file or dataset pairs (ids, or a split name).
    std::optional<std::filesystem::path> skull;
    std::vector<std::string> pair_ids;
    std::string split;
    int limit = -1;
    std::string mode = "avg";
    std::uint64_t seed = 1;
    std::optional<std::filesystem::path> config;
    std::map<std::string, std::string> attributes;
    std::optional<std::filesystem::path> tdd;
    /// Score and select against the pair's ground-truth face when known.
    bool use_ground_truth = true;
};
struct ReconstructSummary {
    std::string id;
    std::string mode;
    std::optional<double> nme;
    double initial_residual = 0.0;
    double final_residual = 0.0;
    double final_loss = 0.0;
};
/// Dataset pairs use pair_seed(seed, id) for the initial face; a single
/// skull file uses seed directly.
std::vector<ReconstructSummary> cmd_reconstruct(const ReconstructOptions& options);

struct EvaluateOptions {
    std::filesystem::path data;
    std::filesystem::path out;
    std::vector<std::string> modes{"avg", "best"};
    std::uint64_t seed = 1;
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> partition;
};
CrossValidation cmd_evaluate(const EvaluateOptions& options);

struct AblateOptions {
    std::filesystem::path data;
    std::filesystem::path out;
    std::uint64_t seed = 1;
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> tdd;
    int limit = -1;
};
struct AblationReport {
    std::vector<AblationRow> rows;
    OrderingCheck ordering;
    std::string table;
};
AblationReport cmd_ablate(const AblateOptions& options);

/// Landmark schema, region partition, symmetry pairing, attribute table,
/// default adaptation config and depth spec as JSON files.
void cmd_export_schema(const std::filesystem::path& out);

struct ServeOptions {
    std::filesystem::path data;
    std::optional<std::filesystem::path> tdd;
    std::optional<std::filesystem::path> config;
    std::string host = "127.0.0.1";
    int port = 8080;
};
void cmd_serve(const ServeOptions& options);

/// 0 success, 2 usage, 3 data or validation, 4 numerical failure.
int exit_code_for(const std::exception& e);

}  // namespace cranioforge
