#include "cranioforge/tdd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/SVD>

#include "cranioforge/error.hpp"

namespace cranioforge {

namespace {

void check_training(const std::vector<DepthVector>& training, std::size_t min_samples) {
    if (training.size() < min_samples) {
        throw Error(ErrorKind::InsufficientData, "need at least " + std::to_string(min_samples) +
                                                     " training samples, got " + std::to_string(training.size()));
    }
    const auto n = training.front().size();
    if (n == 0) throw Error(ErrorKind::Schema, "training depth vectors are empty");
    for (std::size_t i = 0; i < training.size(); ++i) {
        if (training[i].size() != n) {
            throw Error(ErrorKind::Schema, "training sample " + std::to_string(i) + " has " +
                                               std::to_string(training[i].size()) + " depths, expected " +
                                               std::to_string(n));
        }
        validate_depths(training[i], static_cast<int>(n));
    }
}

// Sign that makes a component point toward thicker tissue; falls back to the
// largest-magnitude entry when the component sums to zero.
double orientation(const Eigen::VectorXd& v, bool by_total) {
    if (by_total) {
        const double total = v.sum();
        if (std::abs(total) > 1e-12) return total > 0 ? 1.0 : -1.0;
    }
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    return v[arg] >= 0 ? 1.0 : -1.0;
}

void check_range(double c, std::pair<double, double> allowed, const std::string& what) {
    if (!(c >= allowed.first && c <= allowed.second)) {
        throw OutOfRangeError(what + " " + std::to_string(c) + " is outside the allowed interval [" +
                                  std::to_string(allowed.first) + ", " + std::to_string(allowed.second) + "]",
                              allowed.first, allowed.second);
    }
}

}  // namespace

TddModel::TddModel(Eigen::VectorXd mean, Eigen::MatrixXd components, Eigen::VectorXd eigenvalues, int sample_count,
                   std::pair<double, double> c_range)
    : mean_(std::move(mean)),
      components_(std::move(components)),
      eigenvalues_(std::move(eigenvalues)),
      sample_count_(sample_count),
      c_range_(c_range) {
    if (components_.rows() != mean_.size() || components_.cols() != eigenvalues_.size() || components_.cols() < 1) {
        throw Error(ErrorKind::Schema, "TDD model: inconsistent mean/components/eigenvalues shapes");
    }
    if (c_range_.first > c_range_.second) {
        throw Error(ErrorKind::Schema, "TDD model: c_range is inverted");
    }
}

std::pair<double, double> TddModel::allowed_range() const {
    const double width = c_range_.second - c_range_.first;
    return {c_range_.first - kRangeInflation * width, c_range_.second + kRangeInflation * width};
}

Eigen::VectorXd TddModel::variance_ratios() const {
    const double total = eigenvalues_.sum();
    if (!(total > 0.0)) return Eigen::VectorXd::Zero(eigenvalues_.size());
    return eigenvalues_ / total;
}

double TddModel::variance_ratio(int component) const {
    if (component < 0 || component >= eigenvalues_.size()) {
        throw Error(ErrorKind::InvalidInput, "no principal component " + std::to_string(component));
    }
    return variance_ratios()[component];
}

Eigen::VectorXd TddModel::reconstruct(const Eigen::VectorXd& coefficients) const {
    if (coefficients.size() > components_.cols()) {
        throw Error(ErrorKind::Schema, "more coefficients than retained components");
    }
    return mean_ + components_.leftCols(coefficients.size()) * coefficients;
}

Eigen::VectorXd TddModel::project(const Eigen::VectorXd& depths) const {
    if (depths.size() != mean_.size()) {
        throw Error(ErrorKind::Schema, "expected " + std::to_string(mean_.size()) + " depths, got " +
                                           std::to_string(depths.size()));
    }
    return components_.transpose() * (depths - mean_);
}

TddModel fit_tdd_global(const std::vector<DepthVector>& training) {
    check_training(training, 2);
    const auto m = static_cast<Eigen::Index>(training.size());
    const auto n = training.front().size();

    Eigen::MatrixXd x(m, n);
    for (Eigen::Index i = 0; i < m; ++i) x.row(i) = training[static_cast<std::size_t>(i)].transpose();
    const Eigen::VectorXd mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::Index k = std::min<Eigen::Index>(m - 1, n);
    Eigen::MatrixXd components = svd.matrixV().leftCols(k);
    Eigen::VectorXd eigenvalues = svd.singularValues().head(k).array().square() / static_cast<double>(m - 1);
    for (Eigen::Index j = 0; j < k; ++j) {
        components.col(j) *= orientation(components.col(j), j == 0);
    }

    const Eigen::VectorXd c = centered * components.col(0);
    return TddModel(mean, std::move(components), std::move(eigenvalues), static_cast<int>(m),
                    {c.minCoeff(), c.maxCoeff()});
}

double project_c(const TddModel& model, const DepthVector& depths) {
    if (depths.size() != model.landmark_count()) {
        throw Error(ErrorKind::Schema, "expected " + std::to_string(model.landmark_count()) + " depths, got " +
                                           std::to_string(depths.size()));
    }
    return model.components().col(0).dot(depths - model.mean());
}

DepthVector sample_global(const TddModel& model, double c) {
    check_range(c, model.allowed_range(), "C");
    return (model.mean() + c * model.components().col(0)).cwiseMax(kDepthFloor);
}

RepresentativeDepths representative_depths(const TddModel& model, const std::vector<DepthVector>& training) {
    check_training(training, 3);
    const std::size_t m = training.size();
    std::vector<double> c(m);
    for (std::size_t i = 0; i < m; ++i) c[i] = project_c(model, training[i]);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return c[a] < c[b]; });

    auto tercile_mean = [&](std::size_t begin, std::size_t end) {
        DepthVector acc = DepthVector::Zero(training.front().size());
        for (std::size_t i = begin; i < end; ++i) acc += training[order[i]];
        return DepthVector(acc / static_cast<double>(end - begin));
    };
    const std::size_t a = m / 3;
    const std::size_t b = (2 * m) / 3;
    return {tercile_mean(0, a), tercile_mean(a, b), tercile_mean(b, m)};
}

void validate_partition(const RegionPartition& partition, int landmark_count) {
    std::vector<int> count(static_cast<std::size_t>(landmark_count), 0);
    std::set<int> overlapping;
    for (const auto& [name, indices] : partition) {
        if (indices.empty()) {
            throw PartitionError("region '" + name + "' is empty", {}, {});
        }
        for (int i : indices) {
            if (i < 0 || i >= landmark_count) {
                throw PartitionError("region '" + name + "' has out-of-range index " + std::to_string(i), {i}, {});
            }
            if (++count[static_cast<std::size_t>(i)] > 1) overlapping.insert(i);
        }
    }
    std::vector<int> missing;
    for (int i = 0; i < landmark_count; ++i) {
        if (count[static_cast<std::size_t>(i)] == 0) missing.push_back(i);
    }
    if (!overlapping.empty() || !missing.empty()) {
        std::string msg = "invalid region partition:";
        if (!overlapping.empty()) {
            msg += " overlapping indices";
            for (int i : overlapping) msg += " " + std::to_string(i);
            msg += ";";
        }
        if (!missing.empty()) {
            msg += " missing indices";
            for (int i : missing) msg += " " + std::to_string(i);
        }
        throw PartitionError(msg, {overlapping.begin(), overlapping.end()}, missing);
    }
}

RegionalTddModel::RegionalTddModel(RegionPartition partition, std::map<std::string, TddModel> regions)
    : partition_(std::move(partition)), regions_(std::move(regions)) {
    for (const auto& [name, idx] : partition_) {
        auto it = regions_.find(name);
        if (it == regions_.end() || it->second.landmark_count() != static_cast<int>(idx.size())) {
            throw Error(ErrorKind::Schema, "regional model for '" + name + "' is missing or has the wrong size");
        }
        landmark_count_ += static_cast<int>(idx.size());
    }
    if (regions_.size() != partition_.size()) {
        throw Error(ErrorKind::Schema, "regional models do not match the partition");
    }
    validate_partition(partition_, landmark_count_);
}

const TddModel& RegionalTddModel::region(const std::string& name) const {
    auto it = regions_.find(name);
    if (it == regions_.end()) throw Error(ErrorKind::NotFound, "unknown region '" + name + "'");
    return it->second;
}

const std::vector<int>& RegionalTddModel::indices(const std::string& name) const {
    auto it = partition_.find(name);
    if (it == partition_.end()) throw Error(ErrorKind::NotFound, "unknown region '" + name + "'");
    return it->second;
}

bool RegionalTddModel::has_standard_regions() const {
    const auto& names = standard_region_names();
    if (partition_.size() != names.size()) return false;
    return std::all_of(names.begin(), names.end(), [&](const std::string& n) { return partition_.count(n) == 1; });
}

RegionalTddModel fit_tdd_regional(const std::vector<DepthVector>& training, const RegionPartition& partition) {
    check_training(training, 2);
    const int n = static_cast<int>(training.front().size());
    validate_partition(partition, n);
    std::map<std::string, TddModel> regions;
    for (const auto& [name, idx] : partition) {
        std::vector<DepthVector> sub;
        sub.reserve(training.size());
        for (const auto& d : training) sub.emplace_back(d(idx));
        regions.emplace(name, fit_tdd_global(sub));
    }
    return RegionalTddModel(partition, std::move(regions));
}

DepthVector sample_regional(const RegionalTddModel& model, const DepthVector& base, const std::string& region,
                            double c_local) {
    const TddModel& sub = model.region(region);
    const auto& idx = model.indices(region);
    if (base.size() != model.landmark_count()) {
        throw Error(ErrorKind::Schema, "base depth vector has " + std::to_string(base.size()) + " entries, expected " +
                                           std::to_string(model.landmark_count()));
    }
    check_range(c_local, sub.allowed_range(), "regional C for '" + region + "'");
    DepthVector out = base;
    out(idx) = (sub.mean() + c_local * sub.components().col(0)).cwiseMax(kDepthFloor);
    return out;
}

double project_regional_c(const RegionalTddModel& model, const DepthVector& depths, const std::string& region) {
    if (depths.size() != model.landmark_count()) {
        throw Error(ErrorKind::Schema, "depth vector length does not match the regional model");
    }
    return project_c(model.region(region), DepthVector(depths(model.indices(region))));
}

}  // namespace cranioforge
