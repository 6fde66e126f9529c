#include "doctest.h"

#include "cranioforge/error.hpp"
#include "cranioforge/tdd.hpp"
#include "support.hpp"

using namespace cranioforge;
using namespace cftest;

namespace {

std::vector<DepthVector> random_depths(std::mt19937_64& rng, int m, int n) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> base(4.0, 12.0);
    DepthVector mean(n), axis(n);
    for (int i = 0; i < n; ++i) {
        mean[i] = base(rng);
        axis[i] = 0.5 + 0.5 * base(rng) / 12.0;
    }
    std::vector<DepthVector> out;
    for (int s = 0; s < m; ++s) {
        DepthVector d = mean + 1.5 * g(rng) * axis;
        for (int i = 0; i < n; ++i) d[i] += 0.3 * g(rng);
        out.push_back(d);
    }
    return out;
}

// Largest eigenvalue of the sample covariance by power iteration (oracle).
double power_top_eigenvalue(const std::vector<DepthVector>& xs) {
    const Eigen::Index n = xs.front().size();
    DepthVector mean = DepthVector::Zero(n);
    for (const auto& x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    DepthVector v = DepthVector::Ones(n).normalized();
    double lambda = 0.0;
    for (int it = 0; it < 5000; ++it) {
        DepthVector w = DepthVector::Zero(n);
        for (const auto& x : xs) w += (x - mean) * (x - mean).dot(v);
        w /= static_cast<double>(xs.size() - 1);
        lambda = w.norm();
        v = w / lambda;
    }
    return lambda;
}

}  // namespace

TEST_SUITE("tdd") {
    TEST_CASE("rank-1 construction recovers the axis with ratio 1") {
        const int n = 12;
        DepthVector mean = DepthVector::LinSpaced(n, 4.0, 10.0);
        DepthVector u = DepthVector::LinSpaced(n, 1.0, 2.0).normalized();
        std::vector<DepthVector> xs;
        for (double c : {-1.0, 0.0, 1.0}) xs.push_back(mean + c * u);
        const TddModel m = fit_tdd_global(xs);
        CHECK((m.axis() - u).norm() < 1e-12);
        CHECK(std::abs(m.variance_ratio(0) - 1.0) < 1e-12);
        CHECK((m.mean() - mean).norm() < 1e-12);
        CHECK(std::abs(m.c_range().first + 1.0) < 1e-12);
        CHECK(std::abs(m.c_range().second - 1.0) < 1e-12);

        // Sign convention: flipping the construction axis flips nothing.
        std::vector<DepthVector> ys;
        for (double c : {-1.0, 0.0, 1.0}) ys.push_back(mean - c * u);
        CHECK((fit_tdd_global(ys).axis() - u).norm() < 1e-12);
    }

    TEST_CASE("identical samples: zero variance, sample(0) = mean") {
        const DepthVector d = DepthVector::Constant(6, 5.0);
        const TddModel m = fit_tdd_global({d, d});
        CHECK(m.eigenvalues().cwiseAbs().maxCoeff() < 1e-24);
        CHECK((sample_global(m, 0.0) - d).norm() == 0.0);
        CHECK(m.variance_ratios().cwiseAbs().maxCoeff() == 0.0);
    }

    TEST_CASE("fit errors") {
        try {
            fit_tdd_global({DepthVector::Ones(5)});
            FAIL("one sample accepted");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InsufficientData);
        }
        try {
            fit_tdd_global({DepthVector::Ones(5), DepthVector::Ones(6)});
            FAIL("ragged samples accepted");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Schema);
        }
    }

    TEST_CASE("PCA properties on random data") {
        std::mt19937_64 rng(3);
        const auto xs = random_depths(rng, 50, 78);
        const TddModel m = fit_tdd_global(xs);
        const auto& c = m.components();
        CHECK(c.cols() == 49);
        CHECK((c.transpose() * c - Eigen::MatrixXd::Identity(c.cols(), c.cols())).cwiseAbs().maxCoeff() < 1e-8);
        const auto r = m.variance_ratios();
        CHECK(std::abs(r.sum() - 1.0) < 1e-8);
        for (Eigen::Index k = 1; k < r.size(); ++k) CHECK(r[k] <= r[k - 1] + 1e-15);
        CHECK(m.axis().sum() > 0.0);

        double total = 0.0;
        for (const auto& x : xs) total += (x - m.mean()).squaredNorm();
        CHECK(std::abs(m.eigenvalues().sum() - total / 49.0) < 1e-9 * total);
        CHECK(std::abs(m.eigenvalues()[0] - power_top_eigenvalue(xs)) < 1e-8 * m.eigenvalues()[0]);

        // Full-rank round trip.
        for (const auto& x : xs) CHECK((m.reconstruct(m.project(x)) - x).cwiseAbs().maxCoeff() < 1e-8);
    }

    TEST_CASE("project_c and sample_global") {
        std::mt19937_64 rng(4);
        const TddModel m = fit_tdd_global(random_depths(rng, 30, 20));
        CHECK(std::abs(project_c(m, m.mean())) < 1e-12);
        CHECK(std::abs(project_c(m, m.mean() + 2.0 * m.axis()) - 2.0) < 1e-12);
        CHECK((sample_global(m, 0.0) - m.mean()).norm() == 0.0);

        const auto [lo, hi] = m.c_range();
        std::uniform_real_distribution<double> uc(lo, hi);
        for (int i = 0; i < 200; ++i) {
            const double c = uc(rng);
            REQUIRE(std::abs(project_c(m, sample_global(m, c)) - c) < 1e-10);
            const double c2 = uc(rng);
            const DepthVector aff = sample_global(m, c) + sample_global(m, c2) - 2.0 * sample_global(m, 0.5 * (c + c2));
            REQUIRE(aff.cwiseAbs().maxCoeff() < 1e-10);
        }
        CHECK_THROWS_AS(project_c(m, DepthVector::Ones(3)), Error);
    }

    TEST_CASE("allowed range is the training range widened by 25% per side") {
        std::mt19937_64 rng(8);
        const TddModel m = fit_tdd_global(random_depths(rng, 30, 20));
        const auto [lo, hi] = m.c_range();
        const auto [alo, ahi] = m.allowed_range();
        CHECK(std::abs(alo - (lo - 0.25 * (hi - lo))) < 1e-12);
        CHECK(std::abs(ahi - (hi + 0.25 * (hi - lo))) < 1e-12);
        CHECK_NOTHROW(sample_global(m, ahi));
        try {
            sample_global(m, ahi + 1e-6);
            FAIL("out-of-range c accepted");
        } catch (const OutOfRangeError& e) {
            CHECK(e.lower() == alo);
            CHECK(e.upper() == ahi);
        }
    }

    TEST_CASE("thicker at max C when the axis is non-negative") {
        const TddModel& m = shared_tdd().global;
        REQUIRE(m.axis().minCoeff() >= 0.0);
        const DepthVector at0 = sample_global(m, 0.0), atmax = sample_global(m, m.c_range().second);
        CHECK((atmax - at0).minCoeff() >= 0.0);
    }

    TEST_CASE("sampling floors negative depths at 0.5 mm") {
        DepthVector mean(3), u(3);
        mean << 6.0, 10.0, 10.0;
        u << 1.0, 1.0, 1.0;
        u.normalize();
        // Training depths stay positive; c = -12 lies inside the widened range.
        std::vector<DepthVector> xs{mean - 10.0 * u, mean, mean + 10.0 * u};
        const TddModel m = fit_tdd_global(xs);
        const DepthVector d = sample_global(m, -12.0);
        CHECK(6.0 - 12.0 / std::sqrt(3.0) < kDepthFloor);
        CHECK(d[0] == kDepthFloor);
        CHECK(std::abs(d[1] - (10.0 - 12.0 / std::sqrt(3.0))) < 1e-12);
    }

    TEST_CASE("representative depths are tercile means ordered by C") {
        const int n = 5;
        DepthVector mean = DepthVector::Constant(n, 8.0), u = DepthVector::Ones(n).normalized();
        std::vector<DepthVector> three{mean + u, mean - u, mean};
        const TddModel m = fit_tdd_global(three);
        const auto r = representative_depths(m, three);
        CHECK((r.thin - (mean - u)).norm() < 1e-12);
        CHECK((r.normal - mean).norm() < 1e-12);
        CHECK((r.fat - (mean + u)).norm() < 1e-12);
        CHECK_THROWS_AS(representative_depths(m, {mean, mean}), Error);

        std::mt19937_64 rng(5);
        const auto xs = random_depths(rng, 50, 78);
        const TddModel big = fit_tdd_global(xs);
        const auto rr = representative_depths(big, xs);
        CHECK(project_c(big, rr.thin) <= project_c(big, rr.normal));
        CHECK(project_c(big, rr.normal) <= project_c(big, rr.fat));
    }

    TEST_CASE("regional model") {
        std::mt19937_64 rng(6);
        const auto xs = random_depths(rng, 40, 78);
        const auto part = LandmarkSchema::standard().region_partition();
        const RegionalTddModel reg = fit_tdd_regional(xs, part);
        CHECK(reg.has_standard_regions());
        for (const auto& [name, m] : reg.regions()) CHECK(std::abs(m.variance_ratios().sum() - 1.0) < 1e-8);

        // One region covering everything equals the global fit.
        std::vector<int> all(78);
        for (int i = 0; i < 78; ++i) all[i] = i;
        const RegionalTddModel one = fit_tdd_regional(xs, {{"all", all}});
        const TddModel g = fit_tdd_global(xs);
        CHECK((one.region("all").mean() - g.mean()).norm() < 1e-12);
        CHECK((one.region("all").components() - g.components()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((one.region("all").eigenvalues() - g.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK_FALSE(one.has_standard_regions());

        // Disjoint support: only the edited region's entries change.
        const DepthVector base = xs[0];
        for (const auto& [name, idx] : part) {
            const double c = reg.region(name).c_range().second;
            const DepthVector out = sample_regional(reg, base, name, c);
            std::vector<bool> inside(78, false);
            for (int i : idx) inside[i] = true;
            for (int i = 0; i < 78; ++i)
                if (!inside[i]) REQUIRE(out[i] == base[i]);
        }

        // Region mean with a global-mean base reproduces the base on that region.
        DepthVector gm = DepthVector::Zero(78);
        for (const auto& x : xs) gm += x;
        gm /= static_cast<double>(xs.size());
        const DepthVector at0 = sample_regional(reg, gm, "cheeks", 0.0);
        CHECK((at0 - gm).cwiseAbs().maxCoeff() < 1e-12);

        CHECK_THROWS_AS(sample_regional(reg, base, "ears", 0.0), Error);
        CHECK_THROWS_AS(sample_regional(reg, base, "chin", reg.region("chin").allowed_range().second + 1.0),
                        OutOfRangeError);
    }

    TEST_CASE("sample_regional is the identity for an on-axis base") {
        std::mt19937_64 rng(12);
        const auto xs = random_depths(rng, 40, 78);
        const RegionalTddModel reg = fit_tdd_regional(xs, LandmarkSchema::standard().region_partition());
        DepthVector base = xs[3];
        const auto& idx = reg.indices("mouth");
        const TddModel& mouth = reg.region("mouth");
        for (std::size_t j = 0; j < idx.size(); ++j)
            base[idx[j]] = mouth.mean()[static_cast<Eigen::Index>(j)] + 0.7 * mouth.axis()[static_cast<Eigen::Index>(j)];
        const double c = project_regional_c(reg, base, "mouth");
        CHECK(std::abs(c - 0.7) < 1e-12);
        CHECK((sample_regional(reg, base, "mouth", c) - base).cwiseAbs().maxCoeff() < 1e-10);
    }

    TEST_CASE("separate nose and cheek increases compose independently") {
        const TddBundle& t = shared_tdd();
        const DepthVector base = sample_global(t.global, 0.0);
        const double cm = t.regional.region("middle").c_range().second;
        const double cc = t.regional.region("cheeks").c_range().second;
        const DepthVector a = sample_regional(t.regional, sample_regional(t.regional, base, "middle", cm), "cheeks", cc);
        const DepthVector b = sample_regional(t.regional, sample_regional(t.regional, base, "cheeks", cc), "middle", cm);
        CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
        for (int i : t.regional.indices("middle")) CHECK(a[i] > base[i] - 1e-12);
    }

    TEST_CASE("partition validation lists offenders") {
        auto part = LandmarkSchema::standard().region_partition();
        part["chin"].push_back(part["mouth"].front());
        try {
            validate_partition(part, 78);
            FAIL("overlap accepted");
        } catch (const PartitionError& e) {
            REQUIRE(e.overlapping().size() == 1);
            CHECK(e.overlapping()[0] == part["mouth"].front());
        }
        auto missing = LandmarkSchema::standard().region_partition();
        const int dropped = missing["forehead"].back();
        missing["forehead"].pop_back();
        try {
            validate_partition(missing, 78);
            FAIL("incomplete partition accepted");
        } catch (const PartitionError& e) {
            REQUIRE(e.missing().size() == 1);
            CHECK(e.missing()[0] == dropped);
        }
        std::mt19937_64 rng(1);
        CHECK_THROWS_AS(fit_tdd_regional(random_depths(rng, 5, 78), part), PartitionError);
    }

    TEST_CASE("shipped dataset: first component dominates") {
        std::vector<DepthVector> all;
        for (const auto& p : shared_pairs()) all.push_back(p.gt_depths);
        CHECK(fit_tdd_global(all).variance_ratio(0) >= 0.5);
    }
}
