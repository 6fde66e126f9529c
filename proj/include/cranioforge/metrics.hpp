#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "cranioforge/dataset.hpp"
#include "cranioforge/mesh.hpp"

namespace cranioforge {

/// (1 / (d |G|)) sum_{v in G} min_{u in F} |v - u|. Directional: G to F.
double nme(const TriMesh& reconstructed, const TriMesh& ground_truth, double ear_distance);
double nme(const PointSet& reconstructed, const PointSet& ground_truth, double ear_distance);

struct EvalReport {
    std::map<std::string, double> per_pair_nme;  // fractions, not percent
    double mean = 0.0;
    double max = 0.0;
    double std = 0.0;  // population
    double ear_distance = 200.0;

    double mean_mm() const { return mean * ear_distance; }
};

/// Summary statistics over per-pair errors (population std).
EvalReport summarize(const std::map<std::string, double>& per_pair, double ear_distance = 200.0);

/// Ear distance of a pair's ground truth, from its facial landmarks.
double pair_ear_distance(const SkullFacePair& pair, const LandmarkSchema& schema = LandmarkSchema::standard());

/// Scores each reconstruction against its ground truth. ear_distance <= 0
/// takes d from each pair; the report's ear_distance is then the mean d.
/// Throws NotFound listing ids with no ground truth.
EvalReport evaluate_set(const std::map<std::string, TriMesh>& results, const std::vector<SkullFacePair>& dataset,
                        double ear_distance = -1.0, const LandmarkSchema& schema = LandmarkSchema::standard());

nlohmann::json to_json(const EvalReport& report);

/// One table row: label, mean %, max %, std, mean mm.
struct TableRow {
    std::string label;
    EvalReport report;
};
/// Fixed-width text table with the columns Method | Mean (%) | Max (%) | Std. | Mean (mm).
std::string format_table(const std::vector<TableRow>& rows);

}  // namespace cranioforge
