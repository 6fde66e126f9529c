#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "cranioforge/face_model.hpp"
#include "cranioforge/landmarks.hpp"
#include "cranioforge/mesh.hpp"
#include "cranioforge/registration.hpp"
#include "cranioforge/tdd.hpp"

namespace cranioforge {

struct AdaptationConfig {
    double alpha_lmk = 5.0;
    double alpha_proj = 1.0;
    double alpha_sym = 1.0;
    double learning_rate = 1e-2;
    double decay_factor = 0.2;
    int decay_every = 200;
    int total_iterations = 1000;
    double weight_decay = 0.0;

    // Ablation switches; a disabled term contributes with weight 0.
    bool use_landmark = true;
    bool use_projection = true;
    bool use_symmetry = true;

    /// Divide each loss by its number of summands.
    bool normalize_by_count = false;
    /// Estimate the similarity H before optimizing. Editing turns this off
    /// because its targets already live in the face frame.
    bool prealign = true;
    /// Stop once the total loss moved less than early_stop_tolerance over
    /// early_stop_window iterations.
    bool early_stop = false;
    double early_stop_tolerance = 1e-9;
    int early_stop_window = 20;

    double weight_lmk() const { return use_landmark ? alpha_lmk : 0.0; }
    double weight_proj() const { return use_projection ? alpha_proj : 0.0; }
    double weight_sym() const { return use_symmetry ? alpha_sym : 0.0; }

    /// Throws InvalidInput for negative weights, non-positive iteration
    /// counts or a decay factor outside (0, 1].
    void validate() const;
    /// Learning rate used at 0-based iteration t.
    double learning_rate_at(int t) const;
};

struct LossBreakdown {
    double total = 0.0;
    double landmark = 0.0;
    double projection = 0.0;
    double symmetry = 0.0;
};

struct AdaptationResult {
    FaceLatent latent;
    TriMesh final_mesh;
    /// H(targets): the constraints in the face-model frame.
    PointSet aligned_targets;
    /// H, mapping the caller's target frame to the face-model frame.
    SimilarityTransform transform;
    /// One entry per iteration, evaluated before that iteration's update.
    std::vector<LossBreakdown> loss_history;
    /// Loss at the returned latent.
    LossBreakdown final_loss;
    /// |q_i - p~_i| at the returned latent (mm).
    Eigen::VectorXd landmark_residuals;
    /// Same quantity at the initial latent.
    Eigen::VectorXd initial_residuals;
    Plane midplane{Point3::UnitX(), 0.0};
    int iterations_run = 0;
    bool cancelled = false;
};

/// sum_i |q_i - p_i|^2
double loss_landmark(const PointSet& q, const PointSet& p_tilde);
/// sum_p min_v |v - p|^2 over mesh vertices.
double loss_projection(const TriMesh& mesh, const PointSet& p_tilde);
double loss_projection(const PointSet& vertices, const PointSet& p_tilde);

/// Total-least-squares plane through the points; normal sign has positive x
/// (then y, then z on ties). Throws Degenerate for collinear input.
Plane fit_midplane(const PointSet& mid_points);

/// sum over left landmarks of |(q^p - refl(q)) / 2|^2 with the plane refit
/// from the mid landmarks.
double loss_symmetry(const PointSet& q, const SymmetryPairing& pairing);

/// Weighted sum of the three losses at decode(f). Components are reported
/// unweighted (but count-normalized when the config asks for it).
LossBreakdown total_loss(const MorphableFaceModel& model, const Eigen::VectorXd& f, const PointSet& p_tilde,
                         const SymmetryPairing& pairing, const AdaptationConfig& config);

/// d total_loss / d f. Nearest-vertex correspondences are held fixed; the
/// mid-plane is differentiated through its eigen-decomposition.
Eigen::VectorXd gradient(const MorphableFaceModel& model, const Eigen::VectorXd& f, const PointSet& p_tilde,
                         const SymmetryPairing& pairing, const AdaptationConfig& config);

struct AdaptationProgress {
    int iteration = 0;
    int total_iterations = 0;
    LossBreakdown loss;
};

struct AdaptationHooks {
    /// Called once per iteration on the optimizing thread.
    std::function<void(const AdaptationProgress&)> on_progress;
    /// Checked once per iteration; a set flag ends the run early with
    /// result.cancelled = true.
    const std::atomic<bool>* cancel = nullptr;
};

/// Similarity pre-alignment followed by AdamW on the latent code.
AdaptationResult adapt_face(const MorphableFaceModel& model, const FaceLatent& f_init, const PointSet& targets,
                            const SymmetryPairing& pairing, const AdaptationConfig& config,
                            const AdaptationHooks& hooks = {});

struct GlobalControl {
    double c = 0.0;
};
struct RegionalControl {
    std::string region;
    double c_local = 0.0;
};
using ShapeControl = std::variant<GlobalControl, RegionalControl>;

struct EditPlan {
    /// Skull used for the edit (given, or the proxy Q - D0 n).
    SkullLandmarkSet skull;
    /// Depths before and after the control change.
    DepthVector depths_before;
    DepthVector depths_after;
    /// Skull + depths_after along the normals.
    PointSet targets;
};

/// Depth bookkeeping of an edit without running the optimizer.
EditPlan plan_edit(const MorphableFaceModel& model, const FaceLatent& f_current, const TddModel& global,
                   const RegionalTddModel* regional, const ShapeControl& control,
                   const std::optional<SkullLandmarkSet>& skull);

/// Re-adapt the current face after a global or regional depth change.
/// Prealignment is disabled for the inner adaptation.
AdaptationResult edit_shape(const MorphableFaceModel& model, const FaceLatent& f_current, const TddModel& global,
                            const RegionalTddModel* regional, const ShapeControl& control,
                            const std::optional<SkullLandmarkSet>& skull, const SymmetryPairing& pairing,
                            AdaptationConfig config, const AdaptationHooks& hooks = {});

}  // namespace cranioforge
