#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cranioforge/landmarks.hpp"

namespace cranioforge {

/// Lowest depth any sampler will return (mm).
inline constexpr double kDepthFloor = 0.5;
/// Fractional widening of the training C range on each side.
inline constexpr double kRangeInflation = 0.25;

/// PCA statistics of a set of tissue-depth vectors. Component 0 is the
/// control axis C, signed so that larger C means thicker tissue.
class TddModel {
public:
    TddModel() = default;
    TddModel(Eigen::VectorXd mean, Eigen::MatrixXd components, Eigen::VectorXd eigenvalues, int sample_count,
             std::pair<double, double> c_range);

    int landmark_count() const noexcept { return static_cast<int>(mean_.size()); }
    int sample_count() const noexcept { return sample_count_; }
    const Eigen::VectorXd& mean() const noexcept { return mean_; }
    /// n x k, one unit component per column.
    const Eigen::MatrixXd& components() const noexcept { return components_; }
    const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
    std::pair<double, double> c_range() const noexcept { return c_range_; }
    Eigen::VectorXd axis() const { return components_.col(0); }

    /// Training range widened by kRangeInflation of its width on each side.
    std::pair<double, double> allowed_range() const;
    /// Fractions of total variance; all zero when the training set has none.
    Eigen::VectorXd variance_ratios() const;
    double variance_ratio(int component) const;

    /// mean + components.leftCols(k) * coefficients, k = coefficients.size().
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& coefficients) const;
    /// Coordinates on every retained component.
    Eigen::VectorXd project(const Eigen::VectorXd& depths) const;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd components_;
    Eigen::VectorXd eigenvalues_;
    int sample_count_ = 0;
    std::pair<double, double> c_range_{0.0, 0.0};
};

TddModel fit_tdd_global(const std::vector<DepthVector>& training);

/// C = axis . (depths - mean)
double project_c(const TddModel& model, const DepthVector& depths);

/// mean + c * axis, floored at kDepthFloor. Throws OutOfRangeError outside
/// allowed_range().
DepthVector sample_global(const TddModel& model, double c);

struct RepresentativeDepths {
    DepthVector thin;
    DepthVector normal;
    DepthVector fat;
};

/// Tercile means of the training samples ordered by C.
RepresentativeDepths representative_depths(const TddModel& model, const std::vector<DepthVector>& training);

/// region name -> landmark indices.
using RegionPartition = std::map<std::string, std::vector<int>>;

/// Throws PartitionError listing overlapping and missing indices.
void validate_partition(const RegionPartition& partition, int landmark_count);

/// The five facial regions used by the editor.
inline const std::vector<std::string>& standard_region_names() {
    static const std::vector<std::string> names{"cheeks", "chin", "forehead", "middle", "mouth"};
    return names;
}

class RegionalTddModel {
public:
    RegionalTddModel() = default;
    RegionalTddModel(RegionPartition partition, std::map<std::string, TddModel> regions);

    const RegionPartition& partition() const noexcept { return partition_; }
    const std::map<std::string, TddModel>& regions() const noexcept { return regions_; }
    const TddModel& region(const std::string& name) const;
    const std::vector<int>& indices(const std::string& name) const;
    int landmark_count() const noexcept { return landmark_count_; }

    /// True when the partition has exactly the five standard regions.
    bool has_standard_regions() const;

private:
    RegionPartition partition_;
    std::map<std::string, TddModel> regions_;
    int landmark_count_ = 0;
};

RegionalTddModel fit_tdd_regional(const std::vector<DepthVector>& training, const RegionPartition& partition);

/// Copy of base with the region's entries replaced by its mean + c_local * axis.
DepthVector sample_regional(const RegionalTddModel& model, const DepthVector& base, const std::string& region,
                            double c_local);

/// Region's C coordinate for a full-length depth vector.
double project_regional_c(const RegionalTddModel& model, const DepthVector& depths, const std::string& region);

}  // namespace cranioforge
