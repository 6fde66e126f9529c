#pragma once

// Shared fixtures and independent oracles for the unit tests. Oracles here
// deliberately avoid the library code paths they check (no kd-tree, no SVD
// Procrustes, no analytic gradients).

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "cranioforge/adaptation.hpp"
#include "cranioforge/dataset.hpp"
#include "cranioforge/face_model.hpp"
#include "cranioforge/pipeline.hpp"

namespace cftest {

using namespace cranioforge;

/// K = 50 model, seed 1: built once per test process.
inline const MorphableFaceModel& shared_model() {
    static const MorphableFaceModel model = build_synthetic_model(1, 50);
    return model;
}

/// The shipped dataset recipe: 100 normalized pairs, seed 1.
inline const std::vector<SkullFacePair>& shared_pairs() {
    static const std::vector<SkullFacePair> pairs = [] {
        auto p = generate_pairs(shared_model(), 100, 1);
        for (auto& x : p) x = normalize_pair(x);
        return p;
    }();
    return pairs;
}

inline const DatasetSplit& shared_split() {
    static const DatasetSplit split = [] {
        std::vector<std::string> ids;
        for (const auto& p : shared_pairs()) ids.push_back(p.id);
        return holdout_split(ids, 0.5, 5, 1);
    }();
    return split;
}

inline std::vector<SkullFacePair> select(const std::vector<std::string>& ids) {
    std::vector<SkullFacePair> out;
    for (const auto& id : ids)
        for (const auto& p : shared_pairs())
            if (p.id == id) out.push_back(p);
    return out;
}

inline const TddBundle& shared_tdd() {
    static const TddBundle tdd =
        fit_tdd(select(shared_split().train), LandmarkSchema::standard().region_partition());
    return tdd;
}

inline Eigen::Vector3d random_point(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    return {u(rng), u(rng), u(rng)};
}

inline PointSet random_cloud(std::mt19937_64& rng, int n, double lo = -100.0, double hi = 100.0) {
    PointSet p(3, n);
    for (int i = 0; i < n; ++i) p.col(i) = random_point(rng, lo, hi);
    return p;
}

/// Uniform random rotation from a normalized gaussian quaternion.
inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
    q.normalize();
    return q.toRotationMatrix();
}

inline Eigen::VectorXd random_latent(std::mt19937_64& rng, int k, double sigma = 1.0) {
    std::normal_distribution<double> g(0.0, sigma);
    Eigen::VectorXd f(k);
    for (int i = 0; i < k; ++i) f[i] = g(rng);
    return f;
}

/// Brute-force nearest point: plain loop, strict < so ties keep the lowest index.
inline std::pair<Eigen::Index, double> brute_nearest(const PointSet& pts, const Eigen::Vector3d& q) {
    Eigen::Index best = -1;
    double best_d = INFINITY;
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
        const double dx = pts(0, i) - q.x(), dy = pts(1, i) - q.y(), dz = pts(2, i) - q.z();
        const double d = dx * dx + dy * dy + dz * dz;
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return {best, best_d};
}

/// Eq. 8 as a double loop: mean over G of the distance to the closest F vertex, over d.
inline double brute_nme(const PointSet& f, const PointSet& g, double d) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < g.cols(); ++i) sum += std::sqrt(brute_nearest(f, g.col(i)).second);
    return sum / (d * static_cast<double>(g.cols()));
}

inline std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("cranioforge_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Mirror-symmetric landmark configuration about x = 0 for the shipped pairing.
inline PointSet symmetric_landmarks(std::mt19937_64& rng) {
    const SymmetryPairing pairing = LandmarkSchema::standard().pairing();
    PointSet q(3, LandmarkSchema::standard().size());
    std::uniform_real_distribution<double> u(-50.0, 50.0), pos(5.0, 80.0);
    for (std::size_t i = 0; i < pairing.left.size(); ++i) {
        const Eigen::Vector3d p(-pos(rng), u(rng), u(rng));
        q.col(pairing.left[i]) = p;
        q.col(pairing.right[i]) = Eigen::Vector3d(-p.x(), p.y(), p.z());
    }
    for (int m : pairing.mid) q.col(m) = Eigen::Vector3d(0.0, u(rng), u(rng));
    return q;
}

}  // namespace cftest
