#include "cranioforge/adaptation.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "cranioforge/error.hpp"

namespace cranioforge {

void AdaptationConfig::validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidInput, "adaptation config: " + what); };
    if (!(alpha_lmk >= 0.0) || !(alpha_proj >= 0.0) || !(alpha_sym >= 0.0)) bad("loss weights must be >= 0");
    if (!(learning_rate > 0.0)) bad("learning_rate must be > 0");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) bad("decay_factor must lie in (0, 1]");
    if (decay_every < 1) bad("decay_every must be >= 1");
    if (total_iterations < 1) bad("total_iterations must be >= 1");
    if (!(weight_decay >= 0.0)) bad("weight_decay must be >= 0");
    if (early_stop && early_stop_window < 1) bad("early_stop_window must be >= 1");
}

double AdaptationConfig::learning_rate_at(int t) const {
    return learning_rate * std::pow(decay_factor, t / decay_every);
}

namespace {

void check_same_count(const PointSet& a, const PointSet& b, const char* what) {
    if (a.cols() != b.cols()) {
        throw Error(ErrorKind::Schema, std::string(what) + ": " + std::to_string(a.cols()) + " vs " +
                                           std::to_string(b.cols()) + " points");
    }
}

struct MidplaneFit {
    Point3 centroid;
    Point3 normal;
    double offset = 0.0;
    Eigen::Vector3d eigenvalues;   // ascending
    Eigen::Matrix3d eigenvectors;  // columns match eigenvalues; col 0 is +-normal
};

MidplaneFit fit_plane(const PointSet& pts) {
    if (pts.cols() < 3) {
        throw Error(ErrorKind::Degenerate, "mid-plane fit needs at least 3 mid landmarks, got " +
                                               std::to_string(pts.cols()));
    }
    MidplaneFit fit;
    fit.centroid = pts.rowwise().mean();
    const PointSet centered = pts.colwise() - fit.centroid;
    const Eigen::Matrix3d cov = centered * centered.transpose() / static_cast<double>(pts.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::Numerical, "mid-plane eigen-decomposition failed");
    fit.eigenvalues = es.eigenvalues();
    fit.eigenvectors = es.eigenvectors();
    if (!(fit.eigenvalues[2] > 0.0) || fit.eigenvalues[1] <= 1e-12 * fit.eigenvalues[2]) {
        throw Error(ErrorKind::Degenerate, "mid landmarks are collinear or coincident; mid-plane undefined");
    }
    Point3 n = fit.eigenvectors.col(0).normalized();
    double sign = 1.0;
    if (std::abs(n.x()) > 1e-12) {
        sign = n.x() > 0 ? 1.0 : -1.0;
    } else if (std::abs(n.y()) > 1e-12) {
        sign = n.y() > 0 ? 1.0 : -1.0;
    } else {
        sign = n.z() >= 0 ? 1.0 : -1.0;
    }
    fit.normal = sign * n;
    fit.offset = -fit.normal.dot(fit.centroid);
    return fit;
}

PointSet gather(const PointSet& q, const std::vector<int>& idx) {
    PointSet out(3, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = q.col(idx[i]);
    return out;
}

// Symmetry loss and, optionally, its gradient with respect to every landmark.
double symmetry_term(const PointSet& q, const SymmetryPairing& pairing, PointSet* grad) {
    const MidplaneFit fit = fit_plane(gather(q, pairing.mid));
    const Point3& n = fit.normal;
    const double o = fit.offset;
    double loss = 0.0;
    Point3 g_n = Point3::Zero();
    double g_o = 0.0;
    for (std::size_t i = 0; i < pairing.left.size(); ++i) {
        const Point3 ql = q.col(pairing.left[i]);
        const Point3 qp = q.col(pairing.right[i]);
        const double s = n.dot(ql) + o;
        // (q^p - refl(q)) / 2 with refl(q) = q - 2 s n
        const Point3 r = 0.5 * (qp - ql) + s * n;
        loss += r.squaredNorm();
        if (grad) {
            grad->col(pairing.right[i]) += r;
            grad->col(pairing.left[i]) += -(r - 2.0 * r.dot(n) * n);
            g_n += 2.0 * (r.dot(n) * ql + s * r);
            g_o += 2.0 * r.dot(n);
        }
    }
    if (grad) {
        // Chain through offset = -n.c and the smallest eigenvector of the
        // mid-landmark covariance.
        const Point3 g_eff = g_n - g_o * fit.centroid;
        Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
        for (int k = 1; k < 3; ++k) {
            const Point3 e = fit.eigenvectors.col(k);
            a += e * e.transpose() / (fit.eigenvalues[0] - fit.eigenvalues[k]);
        }
        const Point3 w = a * g_eff;
        const double inv_m = 1.0 / static_cast<double>(pairing.mid.size());
        for (int j : pairing.mid) {
            const Point3 d = q.col(j) - fit.centroid;
            grad->col(j) += inv_m * (w * d.dot(n) + n * w.dot(d)) - g_o * inv_m * n;
        }
    }
    return loss;
}

struct Evaluation {
    LossBreakdown loss;
    Eigen::VectorXd grad;
};

Evaluation evaluate(const MorphableFaceModel& model, const Eigen::VectorXd& f, const PointSet& p_tilde,
                    const SymmetryPairing& pairing, const AdaptationConfig& config, bool want_grad) {
    if (p_tilde.cols() != model.landmark_count()) {
        throw Error(ErrorKind::Schema, "expected " + std::to_string(model.landmark_count()) + " targets, got " +
                                           std::to_string(p_tilde.cols()));
    }
    const PointSet vertices = decode_vertices(model, f);
    const auto& lm_idx = model.landmark_indices();
    const PointSet q = gather(vertices, lm_idx);
    const double n_lmk = config.normalize_by_count ? static_cast<double>(q.cols()) : 1.0;
    const double n_sym = config.normalize_by_count ? std::max<double>(1.0, static_cast<double>(pairing.left.size())) : 1.0;

    Evaluation ev;
    const double w_lmk = config.weight_lmk() / n_lmk;
    const double w_proj = config.weight_proj() / n_lmk;
    const double w_sym = config.weight_sym() / n_sym;

    PointSet lm_grad = PointSet::Zero(3, q.cols());

    const PointSet diff = q - p_tilde;
    ev.loss.landmark = diff.squaredNorm() / n_lmk;
    if (want_grad && w_lmk != 0.0) lm_grad += 2.0 * w_lmk * diff;

    if (want_grad) ev.grad = Eigen::VectorXd::Zero(model.latent_size());
    double proj = 0.0;
    const auto& jac = model.vertex_jacobian();
    for (Eigen::Index i = 0; i < p_tilde.cols(); ++i) {
        const NearestResult hit = nearest_point(vertices, p_tilde.col(i));
        proj += hit.squared_distance;
        if (want_grad && w_proj != 0.0) {
            const Point3 g = 2.0 * w_proj * (vertices.col(hit.index) - p_tilde.col(i));
            ev.grad.noalias() += jac.middleRows(3 * hit.index, 3).transpose() * g;
        }
    }
    ev.loss.projection = proj / n_lmk;

    const bool sym_grad_needed = want_grad && w_sym != 0.0;
    PointSet sym_grad = PointSet::Zero(3, q.cols());
    ev.loss.symmetry = symmetry_term(q, pairing, sym_grad_needed ? &sym_grad : nullptr) / n_sym;
    if (sym_grad_needed) lm_grad += w_sym * sym_grad;

    ev.loss.total = config.weight_lmk() * ev.loss.landmark + config.weight_proj() * ev.loss.projection +
                    config.weight_sym() * ev.loss.symmetry;
    if (want_grad) {
        ev.grad.noalias() += model.landmark_jacobian().transpose() *
                             Eigen::Map<const Eigen::VectorXd>(lm_grad.data(), lm_grad.size());
    }
    return ev;
}

Eigen::VectorXd residual_norms(const PointSet& q, const PointSet& p) { return (q - p).colwise().norm().transpose(); }

void check_targets(const PointSet& targets) {
    if (targets.cols() == 0) throw Error(ErrorKind::InvalidInput, "no target landmarks");
    if (!targets.allFinite()) throw Error(ErrorKind::InvalidInput, "target landmarks contain non-finite values");
    const Point3 c = targets.rowwise().mean();
    if ((targets.colwise() - c).colwise().norm().maxCoeff() < 1e-9) {
        throw Error(ErrorKind::Degenerate, "target landmarks are all coincident");
    }
}

}  // namespace

double loss_landmark(const PointSet& q, const PointSet& p_tilde) {
    check_same_count(q, p_tilde, "landmark loss");
    return (q - p_tilde).squaredNorm();
}

double loss_projection(const PointSet& vertices, const PointSet& p_tilde) {
    if (vertices.cols() == 0) throw Error(ErrorKind::InvalidInput, "projection loss: mesh has no vertices");
    double total = 0.0;
    for (Eigen::Index i = 0; i < p_tilde.cols(); ++i) total += nearest_point(vertices, p_tilde.col(i)).squared_distance;
    return total;
}

double loss_projection(const TriMesh& mesh, const PointSet& p_tilde) {
    return loss_projection(mesh.vertices(), p_tilde);
}

Plane fit_midplane(const PointSet& mid_points) {
    const MidplaneFit fit = fit_plane(mid_points);
    return Plane(fit.normal, fit.offset);
}

double loss_symmetry(const PointSet& q, const SymmetryPairing& pairing) {
    pairing.validate(static_cast<int>(q.cols()));
    return symmetry_term(q, pairing, nullptr);
}

LossBreakdown total_loss(const MorphableFaceModel& model, const Eigen::VectorXd& f, const PointSet& p_tilde,
                         const SymmetryPairing& pairing, const AdaptationConfig& config) {
    pairing.validate(model.landmark_count());
    return evaluate(model, f, p_tilde, pairing, config, false).loss;
}

Eigen::VectorXd gradient(const MorphableFaceModel& model, const Eigen::VectorXd& f, const PointSet& p_tilde,
                         const SymmetryPairing& pairing, const AdaptationConfig& config) {
    pairing.validate(model.landmark_count());
    return evaluate(model, f, p_tilde, pairing, config, true).grad;
}

AdaptationResult adapt_face(const MorphableFaceModel& model, const FaceLatent& f_init, const PointSet& targets,
                            const SymmetryPairing& pairing, const AdaptationConfig& config,
                            const AdaptationHooks& hooks) {
    config.validate();
    pairing.validate(model.landmark_count());
    if (f_init.size() != model.latent_size()) {
        throw Error(ErrorKind::Schema, "initial latent has " + std::to_string(f_init.size()) +
                                           " coefficients, model expects " + std::to_string(model.latent_size()));
    }
    if (targets.cols() != model.landmark_count()) {
        throw Error(ErrorKind::Schema, "expected " + std::to_string(model.landmark_count()) + " target landmarks, got " +
                                           std::to_string(targets.cols()));
    }
    check_targets(targets);

    AdaptationResult result;
    const PointSet q0 = decode_landmarks(model, f_init.coefficients);
    result.transform = config.prealign ? estimate_similarity(targets, q0) : SimilarityTransform::identity();
    result.aligned_targets = apply(result.transform, targets);
    // Surface a degenerate mid-plane before any iteration runs.
    fit_plane(gather(q0, pairing.mid));
    result.initial_residuals = residual_norms(q0, result.aligned_targets);

    const int k = model.latent_size();
    Eigen::VectorXd f = f_init.coefficients;
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(k);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double beta1_t = 1.0, beta2_t = 1.0;

    result.loss_history.reserve(static_cast<std::size_t>(config.total_iterations));
    for (int t = 0; t < config.total_iterations; ++t) {
        const Evaluation ev = evaluate(model, f, result.aligned_targets, pairing, config, true);
        if (!std::isfinite(ev.loss.total) || !ev.grad.allFinite()) {
            throw Error(ErrorKind::Numerical, "adaptation diverged at iteration " + std::to_string(t));
        }
        result.loss_history.push_back(ev.loss);
        if (hooks.on_progress) hooks.on_progress({t, config.total_iterations, ev.loss});
        if (hooks.cancel && hooks.cancel->load(std::memory_order_relaxed)) {
            result.cancelled = true;
            break;
        }

        const double lr = config.learning_rate_at(t);
        if (config.weight_decay != 0.0) f *= 1.0 - lr * config.weight_decay;
        m1 = beta1 * m1 + (1.0 - beta1) * ev.grad;
        m2 = beta2 * m2 + (1.0 - beta2) * ev.grad.cwiseAbs2();
        beta1_t *= beta1;
        beta2_t *= beta2;
        const Eigen::VectorXd m_hat = m1 / (1.0 - beta1_t);
        const Eigen::VectorXd v_hat = m2 / (1.0 - beta2_t);
        f.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + eps);
        result.iterations_run = t + 1;

        if (config.early_stop && t >= config.early_stop_window) {
            const double before = result.loss_history[static_cast<std::size_t>(t - config.early_stop_window)].total;
            if (std::abs(before - ev.loss.total) < config.early_stop_tolerance) break;
        }
    }

    result.latent = FaceLatent(f);
    result.final_loss = evaluate(model, f, result.aligned_targets, pairing, config, false).loss;
    result.final_mesh = decode(model, result.latent);
    const PointSet q = extract_landmarks(model, result.final_mesh);
    result.landmark_residuals = residual_norms(q, result.aligned_targets);
    result.midplane = fit_midplane(gather(q, pairing.mid));
    return result;
}

EditPlan plan_edit(const MorphableFaceModel& model, const FaceLatent& f_current, const TddModel& global,
                   const RegionalTddModel* regional, const ShapeControl& control,
                   const std::optional<SkullLandmarkSet>& skull) {
    const int n = model.landmark_count();
    if (global.landmark_count() != n) {
        throw Error(ErrorKind::Schema, "TDD model covers " + std::to_string(global.landmark_count()) +
                                           " landmarks, face model has " + std::to_string(n));
    }
    const TriMesh mesh = decode(model, f_current);
    const PointSet q = extract_landmarks(model, mesh);

    EditPlan plan;
    PointSet normals;
    if (skull) {
        if (skull->size() != n) {
            throw Error(ErrorKind::Schema, "skull has " + std::to_string(skull->size()) + " landmarks, expected " +
                                               std::to_string(n));
        }
        normals = skull->normals();
        plan.depths_before = implied_depths(*skull, q).depths;
    } else {
        const PointSet all_normals = vertex_normals(mesh);
        normals.resize(3, n);
        const auto& idx = model.landmark_indices();
        for (int i = 0; i < n; ++i) normals.col(i) = all_normals.col(idx[static_cast<std::size_t>(i)]);
        plan.depths_before = sample_global(global, 0.0);
    }
    // P^s = Q^f - D along the normals, so an unchanged depth reproduces Q^f.
    PointSet skull_pos = q;
    for (int i = 0; i < n; ++i) skull_pos.col(i) -= plan.depths_before[i] * normals.col(i);
    plan.skull = SkullLandmarkSet(skull_pos, normals, skull ? skull->schema() : std::string("standard78"));

    if (const auto* g = std::get_if<GlobalControl>(&control)) {
        plan.depths_after = sample_global(global, g->c);
    } else {
        const auto& r = std::get<RegionalControl>(control);
        if (!regional) throw Error(ErrorKind::InvalidInput, "regional control requires a regional TDD model");
        if (regional->landmark_count() != n) {
            throw Error(ErrorKind::Schema, "regional TDD model does not match the face model landmarks");
        }
        plan.depths_after = sample_regional(*regional, plan.depths_before, r.region, r.c_local);
    }
    plan.targets = extend_landmarks_raw(plan.skull, plan.depths_after);
    return plan;
}

AdaptationResult edit_shape(const MorphableFaceModel& model, const FaceLatent& f_current, const TddModel& global,
                            const RegionalTddModel* regional, const ShapeControl& control,
                            const std::optional<SkullLandmarkSet>& skull, const SymmetryPairing& pairing,
                            AdaptationConfig config, const AdaptationHooks& hooks) {
    const EditPlan plan = plan_edit(model, f_current, global, regional, control, skull);
    config.prealign = false;
    return adapt_face(model, f_current, plan.targets, pairing, config, hooks);
}

}  // namespace cranioforge
