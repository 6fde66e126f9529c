#include "cranioforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "cranioforge/error.hpp"

namespace cranioforge {

double nme(const PointSet& f, const PointSet& g, double d) {
    if (f.cols() == 0 || g.cols() == 0) throw Error(ErrorKind::InvalidInput, "NME needs non-empty meshes");
    if (!(d > 0.0)) throw Error(ErrorKind::InvalidInput, "NME ear distance must be > 0");
    const PointIndex index(f);
    double total = 0.0;
    for (Eigen::Index i = 0; i < g.cols(); ++i) total += std::sqrt(index.nearest(g.col(i)).squared_distance);
    return total / (d * static_cast<double>(g.cols()));
}

double nme(const TriMesh& reconstructed, const TriMesh& ground_truth, double ear_distance) {
    return nme(reconstructed.vertices(), ground_truth.vertices(), ear_distance);
}

EvalReport summarize(const std::map<std::string, double>& per_pair, double ear_distance) {
    if (per_pair.empty()) throw Error(ErrorKind::InsufficientData, "no results to summarize");
    EvalReport r;
    r.per_pair_nme = per_pair;
    r.ear_distance = ear_distance;
    double sum = 0.0;
    r.max = -std::numeric_limits<double>::infinity();
    for (const auto& [_, e] : per_pair) {
        sum += e;
        r.max = std::max(r.max, e);
    }
    const auto n = static_cast<double>(per_pair.size());
    r.mean = sum / n;
    double ss = 0.0;
    for (const auto& [_, e] : per_pair) ss += (e - r.mean) * (e - r.mean);
    r.std = std::sqrt(ss / n);
    return r;
}

double pair_ear_distance(const SkullFacePair& pair, const LandmarkSchema& schema) {
    const PointSet facial = extend_landmarks_raw(pair.skull, pair.gt_depths);
    return (facial.col(schema.left_ear()) - facial.col(schema.right_ear())).norm();
}

EvalReport evaluate_set(const std::map<std::string, TriMesh>& results, const std::vector<SkullFacePair>& dataset,
                        double ear_distance, const LandmarkSchema& schema) {
    std::map<std::string, const SkullFacePair*> by_id;
    for (const auto& p : dataset) by_id[p.id] = &p;
    std::string missing;
    for (const auto& [id, _] : results) {
        if (!by_id.count(id)) missing += (missing.empty() ? "" : ", ") + id;
    }
    if (!missing.empty()) throw Error(ErrorKind::NotFound, "no ground truth for: " + missing);

    std::map<std::string, double> per_pair;
    double d_sum = 0.0;
    for (const auto& [id, mesh] : results) {
        const SkullFacePair& pair = *by_id.at(id);
        const double d = ear_distance > 0.0 ? ear_distance : pair_ear_distance(pair, schema);
        d_sum += d;
        per_pair[id] = nme(mesh, pair.face, d);
    }
    return summarize(per_pair, ear_distance > 0.0 ? ear_distance : d_sum / static_cast<double>(results.size()));
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [id, e] : r.per_pair_nme) per[id] = e;
    return {{"per_pair_nme", per},   {"mean", r.mean},
            {"max", r.max},          {"std", r.std},
            {"mean_percent", 100.0 * r.mean}, {"max_percent", 100.0 * r.max},
            {"std_percent", 100.0 * r.std},   {"ear_distance_mm", r.ear_distance},
            {"mean_mm", r.mean_mm()}};
}

std::string format_table(const std::vector<TableRow>& rows) {
    std::size_t width = 6;
    for (const auto& r : rows) width = std::max(width, r.label.size());
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-*s  %9s  %9s  %9s  %9s\n", static_cast<int>(width), "Method", "Mean (%)",
                  "Max (%)", "Std.", "Mean (mm)");
    out += buf;
    out += std::string(width + 44, '-') + "\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-*s  %9.3f  %9.3f  %9.3f  %9.3f\n", static_cast<int>(width), r.label.c_str(),
                      100.0 * r.report.mean, 100.0 * r.report.max, 100.0 * r.report.std, r.report.mean_mm());
        out += buf;
    }
    return out;
}

}  // namespace cranioforge
