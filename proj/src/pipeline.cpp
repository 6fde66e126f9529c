#include "cranioforge/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "cranioforge/error.hpp"
#include "cranioforge/json_io.hpp"

#ifndef CRANIOFORGE_VERSION
#define CRANIOFORGE_VERSION "0.0.0"
#endif
#ifndef CRANIOFORGE_GIT_REVISION
#define CRANIOFORGE_GIT_REVISION "unknown"
#endif

namespace cranioforge {

TddBundle fit_tdd(const std::vector<DepthVector>& training, const RegionPartition& partition) {
    TddBundle b;
    b.global = fit_tdd_global(training);
    b.regional = fit_tdd_regional(training, partition);
    b.representatives = representative_depths(b.global, training);
    return b;
}

TddBundle fit_tdd(const std::vector<SkullFacePair>& training, const RegionPartition& partition) {
    std::vector<DepthVector> depths;
    depths.reserve(training.size());
    for (const auto& p : training) depths.push_back(p.gt_depths);
    return fit_tdd(depths, partition);
}

TissueMode TissueMode::parse(const std::string& text) {
    TissueMode m;
    if (text == "avg") {
        m.kind = Kind::Avg;
    } else if (text == "thin") {
        m.kind = Kind::Thin;
    } else if (text == "normal") {
        m.kind = Kind::Normal;
    } else if (text == "fat") {
        m.kind = Kind::Fat;
    } else if (text == "best") {
        m.kind = Kind::Best;
    } else if (text.rfind("c=", 0) == 0) {
        m.kind = Kind::Custom;
        std::size_t used = 0;
        try {
            m.c = std::stod(text.substr(2), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != text.size() - 2 || !std::isfinite(m.c)) {
            throw Error(ErrorKind::InvalidInput, "bad tissue mode '" + text + "': expected c=<number>");
        }
    } else {
        throw Error(ErrorKind::InvalidInput,
                    "unknown tissue mode '" + text + "'; expected avg, thin, normal, fat, best or c=<value>");
    }
    return m;
}

std::string TissueMode::name() const {
    switch (kind) {
        case Kind::Avg: return "avg";
        case Kind::Thin: return "thin";
        case Kind::Normal: return "normal";
        case Kind::Fat: return "fat";
        case Kind::Best: return "best";
        case Kind::Custom: {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "c=%.17g", c);
            return buf;
        }
    }
    return "?";
}

DepthVector depths_for_mode(const TddBundle& tdd, const TissueMode& mode) {
    switch (mode.kind) {
        case TissueMode::Kind::Avg: return sample_global(tdd.global, 0.0);
        case TissueMode::Kind::Thin: return tdd.representatives.thin;
        case TissueMode::Kind::Normal: return tdd.representatives.normal;
        case TissueMode::Kind::Fat: return tdd.representatives.fat;
        case TissueMode::Kind::Custom: return sample_global(tdd.global, mode.c);
        case TissueMode::Kind::Best: break;
    }
    throw Error(ErrorKind::InvalidInput, "best mode has no single depth vector");
}

namespace {

Reconstruction reconstruct_single(const MorphableFaceModel& model, const TddBundle& tdd,
                                  const SymmetryPairing& pairing, const ReconstructionRequest& req,
                                  const TissueMode& mode) {
    Reconstruction r;
    r.mode = mode;
    r.depths = depths_for_mode(tdd, mode);
    r.targets = extend_landmarks(req.skull, r.depths);
    r.initial_latent = sample_prior(model, req.seed, req.attributes);
    r.adaptation = adapt_face(model, r.initial_latent, r.targets, pairing, req.config);
    const SimilarityTransform back = r.adaptation.transform.inverse();
    r.mesh = apply(back, r.adaptation.final_mesh);
    r.initial_mesh = apply(back, decode(model, r.initial_latent));
    if (req.ground_truth) r.nme = nme(r.mesh, *req.ground_truth, req.ear_distance);
    return r;
}

}  // namespace

Reconstruction reconstruct(const MorphableFaceModel& model, const TddBundle& tdd, const SymmetryPairing& pairing,
                           const ReconstructionRequest& req) {
    if (req.skull.size() != model.landmark_count()) {
        throw Error(ErrorKind::Schema, "skull has " + std::to_string(req.skull.size()) + " landmarks, model expects " +
                                           std::to_string(model.landmark_count()));
    }
    if (req.mode.kind != TissueMode::Kind::Best) {
        Reconstruction r = reconstruct_single(model, tdd, pairing, req, req.mode);
        r.candidates.push_back({r.mode.name(), {r.nme.value_or(std::nan("")), r.adaptation.final_loss.total}});
        return r;
    }
    // The average depths are part of the candidate set, so best never loses
    // to avg.
    using K = TissueMode::Kind;
    std::optional<Reconstruction> best;
    std::vector<std::pair<std::string, std::pair<double, double>>> tried;
    for (K kind : {K::Avg, K::Thin, K::Normal, K::Fat}) {
        TissueMode m;
        m.kind = kind;
        Reconstruction r = reconstruct_single(model, tdd, pairing, req, m);
        tried.push_back({m.name(), {r.nme.value_or(std::nan("")), r.adaptation.final_loss.total}});
        const double score = r.nme ? *r.nme : r.adaptation.final_loss.total;
        const double incumbent = best ? (best->nme ? *best->nme : best->adaptation.final_loss.total)
                                      : std::numeric_limits<double>::infinity();
        if (score < incumbent) best = std::move(r);
    }
    best->candidates = std::move(tried);
    return std::move(*best);
}

std::uint64_t pair_seed(std::uint64_t seed, const std::string& id) {
    std::uint64_t h = 1469598103934665603ULL ^ seed;
    for (unsigned char ch : id) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<AblationRow> run_ablation(const MorphableFaceModel& model, const TddBundle& tdd,
                                      const SymmetryPairing& pairing, const std::vector<SkullFacePair>& test,
                                      std::uint64_t seed, const AdaptationConfig& base) {
    struct Variant {
        const char* label;
        bool lmk, proj, sym;
    };
    const Variant variants[] = {{"L_proj only", false, true, false},
                                {"L_lmk only", true, false, false},
                                {"L_lmk + L_proj", true, true, false},
                                {"Full", true, true, true}};
    std::map<std::string, double> before;
    std::vector<std::map<std::string, double>> per_variant(std::size(variants));
    const DepthVector depths = sample_global(tdd.global, 0.0);
    double d_sum = 0.0;
    for (const auto& pair : test) {
        const double d = pair_ear_distance(pair);
        d_sum += d;
        const PointSet targets = extend_landmarks(pair.skull, depths);
        const FaceLatent f0 = sample_prior(model, pair_seed(seed, pair.id));
        const SimilarityTransform h = estimate_similarity(targets, decode_landmarks(model, f0.coefficients));
        before[pair.id] = nme(apply(h.inverse(), decode(model, f0)), pair.face, d);
        for (std::size_t v = 0; v < std::size(variants); ++v) {
            AdaptationConfig cfg = base;
            cfg.use_landmark = variants[v].lmk;
            cfg.use_projection = variants[v].proj;
            cfg.use_symmetry = variants[v].sym;
            const AdaptationResult r = adapt_face(model, f0, targets, pairing, cfg);
            per_variant[v][pair.id] = nme(apply(r.transform.inverse(), r.final_mesh), pair.face, d);
        }
    }
    const double d_mean = d_sum / static_cast<double>(test.size());
    std::vector<AblationRow> rows;
    rows.push_back({"Before adaptation", summarize(before, d_mean)});
    for (std::size_t v = 0; v < std::size(variants); ++v) {
        rows.push_back({variants[v].label, summarize(per_variant[v], d_mean)});
    }
    return rows;
}

OrderingCheck check_ablation_ordering(const std::vector<AblationRow>& rows, double tolerance) {
    OrderingCheck out;
    if (rows.size() != 5) {
        out.lines.push_back("expected 5 ablation rows, got " + std::to_string(rows.size()));
        return out;
    }
    const double before = rows[0].report.mean, proj = rows[1].report.mean, lmk = rows[2].report.mean,
                 lmk_proj = rows[3].report.mean, full = rows[4].report.mean;
    char buf[160];
    bool ok = true;
    // a > b holds when a is not below b by more than the band.
    auto greater = [&](const char* a_name, double a, const char* b_name, double b) {
        const bool pass = a >= (1.0 - tolerance) * b;
        std::snprintf(buf, sizeof(buf), "%-16s %.4f%% > %-16s %.4f%%  %s", a_name, 100 * a, b_name, 100 * b,
                      pass ? "ok" : "VIOLATED");
        out.lines.push_back(buf);
        ok = ok && pass;
    };
    greater("Before", before, "L_proj only", proj);
    greater("L_proj only", proj, "L_lmk only", lmk);
    greater("L_lmk only", lmk, "L_lmk + L_proj", lmk_proj);
    greater("L_lmk + L_proj", lmk_proj, "Full", full);
    double others = before;
    for (double v : {proj, lmk, lmk_proj}) others = std::min(others, v);
    const bool min_ok = full <= (1.0 + tolerance) * others;
    std::snprintf(buf, sizeof(buf), "Full %.4f%% is the minimum (others >= %.4f%%)  %s", 100 * full, 100 * others,
                  min_ok ? "ok" : "VIOLATED");
    out.lines.push_back(buf);
    out.passed = ok && min_ok;
    return out;
}

CrossValidation cross_validate(const MorphableFaceModel& model, const std::vector<SkullFacePair>& pairs,
                               const DatasetSplit& split, const RegionPartition& partition,
                               const SymmetryPairing& pairing, const std::vector<TissueMode>& modes,
                               std::uint64_t seed, const AdaptationConfig& config) {
    if (split.folds.empty()) throw Error(ErrorKind::InvalidInput, "split has no folds");
    std::map<std::string, const SkullFacePair*> by_id;
    for (const auto& p : pairs) by_id[p.id] = &p;
    auto lookup = [&](const std::vector<std::string>& ids) {
        std::vector<SkullFacePair> out;
        for (const auto& id : ids) {
            auto it = by_id.find(id);
            if (it == by_id.end()) throw Error(ErrorKind::NotFound, "split references missing pair '" + id + "'");
            out.push_back(*it->second);
        }
        return out;
    };

    CrossValidation cv;
    std::map<std::string, std::map<std::string, double>> pooled;
    double d_sum = 0.0;
    int d_count = 0;
    for (int f = 0; f < static_cast<int>(split.folds.size()); ++f) {
        const auto train = lookup(split.fold_train(f));
        const auto test = lookup(split.folds[static_cast<std::size_t>(f)]);
        const TddBundle tdd = fit_tdd(train, partition);
        FoldResult fr;
        fr.fold = f;
        std::map<std::string, std::map<std::string, double>> per_mode;
        double fold_d = 0.0;
        for (const auto& pair : test) {
            const double d = pair_ear_distance(pair);
            fold_d += d;
            for (const auto& mode : modes) {
                ReconstructionRequest req;
                req.skull = pair.skull;
                req.mode = mode;
                req.seed = pair_seed(seed, pair.id);
                req.config = config;
                req.ground_truth = &pair.face;
                req.ear_distance = d;
                const Reconstruction r = reconstruct(model, tdd, pairing, req);
                per_mode[mode.name()][pair.id] = *r.nme;
                pooled[mode.name()][pair.id] = *r.nme;
            }
        }
        d_sum += fold_d;
        d_count += static_cast<int>(test.size());
        for (const auto& [name, values] : per_mode) {
            fr.by_mode[name] = summarize(values, fold_d / static_cast<double>(test.size()));
        }
        cv.folds.push_back(std::move(fr));
    }
    for (const auto& [name, values] : pooled) cv.overall[name] = summarize(values, d_sum / d_count);
    return cv;
}

std::string version_stamp() { return std::string(CRANIOFORGE_VERSION) + "+" + CRANIOFORGE_GIT_REVISION; }

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
    json j{{"command", m.command},
           {"config", m.config},
           {"inputs", m.inputs},
           {"outputs", m.outputs},
           {"seed", m.seed},
           {"version", version_stamp()},
           {"wall_seconds", m.wall_seconds}};
    write_json(dir / "manifest.json", j);
}

}  // namespace cranioforge
