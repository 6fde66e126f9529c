#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cranioforge/adaptation.hpp"
#include "cranioforge/dataset.hpp"
#include "cranioforge/face_model.hpp"
#include "cranioforge/metrics.hpp"
#include "cranioforge/tdd.hpp"

namespace cranioforge {

/// Fitted tissue-depth statistics used by reconstruction and editing.
struct TddBundle {
    TddModel global;
    RegionalTddModel regional;
    RepresentativeDepths representatives;
};

TddBundle fit_tdd(const std::vector<SkullFacePair>& training, const RegionPartition& partition);
TddBundle fit_tdd(const std::vector<DepthVector>& training, const RegionPartition& partition);

/// avg | thin | normal | fat | best | c=<value>
struct TissueMode {
    enum class Kind { Avg, Thin, Normal, Fat, Best, Custom };
    Kind kind = Kind::Avg;
    double c = 0.0;

    /// Throws InvalidInput for anything else.
    static TissueMode parse(const std::string& text);
    std::string name() const;
};

/// Depths for a single (non-best) mode.
DepthVector depths_for_mode(const TddBundle& tdd, const TissueMode& mode);

struct ReconstructionRequest {
    SkullLandmarkSet skull;
    TissueMode mode;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> attributes;
    AdaptationConfig config;
    /// Selects the best mode by NME when present, else by final loss.
    const TriMesh* ground_truth = nullptr;
    double ear_distance = 200.0;
};

struct Reconstruction {
    /// The mode that produced this result (never Best).
    TissueMode mode;
    DepthVector depths;
    /// Facial-landmark constraints in the skull frame.
    PointSet targets;
    FaceLatent initial_latent;
    AdaptationResult adaptation;
    /// Adapted face mapped back into the skull frame by H^-1.
    TriMesh mesh;
    /// Initial face in the skull frame (same H^-1).
    TriMesh initial_mesh;
    std::optional<double> nme;
    /// Every candidate tried for Best: mode name -> (nme or NaN, final loss).
    std::vector<std::pair<std::string, std::pair<double, double>>> candidates;

    double initial_mean_residual() const { return adaptation.initial_residuals.mean(); }
    double final_mean_residual() const { return adaptation.landmark_residuals.mean(); }
};

Reconstruction reconstruct(const MorphableFaceModel& model, const TddBundle& tdd, const SymmetryPairing& pairing,
                           const ReconstructionRequest& request);

/// Stable per-pair prior seed from a run seed and a pair id (FNV-1a).
std::uint64_t pair_seed(std::uint64_t seed, const std::string& id);

struct AblationRow {
    std::string label;
    EvalReport report;
};

/// Before adaptation, L_proj only, L_lmk only, L_lmk + L_proj, full; avg
/// tissue depths; every pair uses pair_seed(seed, id).
std::vector<AblationRow> run_ablation(const MorphableFaceModel& model, const TddBundle& tdd,
                                      const SymmetryPairing& pairing, const std::vector<SkullFacePair>& test,
                                      std::uint64_t seed, const AdaptationConfig& base);

struct OrderingCheck {
    bool passed = false;
    std::vector<std::string> lines;
};
/// Before > proj-only > lmk-only > lmk+proj >= full with a relative
/// tolerance band, and full within the band of the row minimum.
OrderingCheck check_ablation_ordering(const std::vector<AblationRow>& rows, double tolerance = 0.05);

struct FoldResult {
    int fold = 0;
    std::map<std::string, EvalReport> by_mode;
};

struct CrossValidation {
    std::vector<FoldResult> folds;
    /// Pooled over all test pairs of all folds.
    std::map<std::string, EvalReport> overall;
};

CrossValidation cross_validate(const MorphableFaceModel& model, const std::vector<SkullFacePair>& pairs,
                               const DatasetSplit& split, const RegionPartition& partition,
                               const SymmetryPairing& pairing, const std::vector<TissueMode>& modes,
                               std::uint64_t seed, const AdaptationConfig& config);

/// Record of one batch run.
struct RunManifest {
    std::string command;
    nlohmann::json config = nlohmann::json::object();
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
};

/// Library version plus the git revision seen at configure time.
std::string version_stamp();
void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

}  // namespace cranioforge
