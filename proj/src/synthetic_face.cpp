// Procedural stand-in for a pretrained head model: a closed ellipsoidal head
// with nose, brow, lip, cheekbone and chin relief, and a bank of smooth
// displacement fields orthonormalized with modified Gram-Schmidt.

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <functional>
#include <numbers>
#include <random>
#include <set>

#include "cranioforge/error.hpp"
#include "cranioforge/face_model.hpp"

namespace cranioforge {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Bump {
    double amplitude;
    double azimuth, elevation;  // degrees
    double width_az, width_el;  // gaussian sigma, degrees
};

double gaussian(double az, double el, const Bump& b) {
    const double da = (az - b.azimuth) / b.width_az;
    const double de = (el - b.elevation) / b.width_el;
    return b.amplitude * std::exp(-0.5 * (da * da + de * de));
}

// Symmetric relief added along the radial direction (mm).
double relief(double az, double el) {
    static const Bump bumps[] = {
        {18.0, 0.0, -2.0, 5.5, 9.0},     // nose
        {6.0, 0.0, 8.0, 4.0, 7.0},       // nasal ridge
        {-7.0, 22.0, 10.0, 7.0, 5.0},    // orbit
        {-7.0, -22.0, 10.0, 7.0, 5.0},
        {5.0, 47.0, 1.0, 12.0, 8.0},     // cheekbones
        {5.0, -47.0, 1.0, 12.0, 8.0},
        {6.0, 0.0, -19.0, 11.0, 4.5},    // lips
        {9.0, 0.0, -38.0, 13.0, 7.0},    // chin
    };
    double r = 5.0 * std::exp(-0.5 * std::pow((el - 21.0) / 4.0, 2)) * std::exp(-0.5 * std::pow(az / 28.0, 2));
    for (const auto& b : bumps) r += gaussian(az, el, b);
    return r;
}

Point3 direction(double az, double el) {
    const double a = az * kDeg, e = el * kDeg;
    return {std::cos(e) * std::sin(a), std::sin(e), std::cos(e) * std::cos(a)};
}

Point3 surface_point(double az, double el) {
    constexpr double ax = 100.0, ay = 125.0, az_r = 115.0;
    const Point3 d = direction(az, el);
    const double inv = std::sqrt(std::pow(d.x() / ax, 2) + std::pow(d.y() / ay, 2) + std::pow(d.z() / az_r, 2));
    return (1.0 / inv + relief(az, el)) * d;
}

// Cosine ramp: 1 below lo, 0 above hi.
double ramp(double t, double lo, double hi) {
    if (t <= lo) return 1.0;
    if (t >= hi) return 0.0;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * (t - lo) / (hi - lo)));
}

struct Grid {
    PointSet vertices;
    FaceIndices faces;
    std::vector<double> azimuth;
    std::vector<double> elevation;
};

Grid build_grid(int longitudes, int rings) {
    if (longitudes < 8 || longitudes % 4 != 0 || rings < 4) {
        throw Error(ErrorKind::InvalidInput, "synthetic head needs longitudes divisible by 4 (>= 8) and >= 4 rings");
    }
    Grid g;
    const int nv = 2 + longitudes * rings;
    g.vertices.resize(3, nv);
    g.azimuth.assign(static_cast<std::size_t>(nv), 0.0);
    g.elevation.assign(static_cast<std::size_t>(nv), 0.0);
    auto vid = [&](int ring, int lon) { return 1 + ring * longitudes + lon; };

    g.vertices.col(0) = surface_point(0.0, -90.0);
    g.vertices(0, 0) = 0.0;
    g.elevation[0] = -90.0;
    for (int r = 0; r < rings; ++r) {
        const double el = -90.0 + 180.0 * (r + 1) / (rings + 1);
        for (int j = 0; j <= longitudes / 2; ++j) {
            const double az = 360.0 * j / longitudes;  // 0 .. 180
            Point3 p = surface_point(az, el);
            if (j == 0 || 2 * j == longitudes) p.x() = 0.0;
            const int right = vid(r, j);
            g.vertices.col(right) = p;
            g.azimuth[static_cast<std::size_t>(right)] = az;
            g.elevation[static_cast<std::size_t>(right)] = el;
            if (j != 0 && 2 * j != longitudes) {
                // Exact mirror copy so the template is bitwise symmetric in x.
                const int left = vid(r, longitudes - j);
                g.vertices.col(left) = Point3(-p.x(), p.y(), p.z());
                g.azimuth[static_cast<std::size_t>(left)] = -az;
                g.elevation[static_cast<std::size_t>(left)] = el;
            }
        }
    }
    g.vertices.col(nv - 1) = surface_point(0.0, 90.0);
    g.vertices(0, nv - 1) = 0.0;
    g.elevation[static_cast<std::size_t>(nv - 1)] = 90.0;

    std::vector<int> f;
    for (int j = 0; j < longitudes; ++j) {
        const int jn = (j + 1) % longitudes;
        f.insert(f.end(), {0, vid(0, jn), vid(0, j)});
        for (int r = 0; r + 1 < rings; ++r) {
            f.insert(f.end(), {vid(r, j), vid(r, jn), vid(r + 1, jn)});
            f.insert(f.end(), {vid(r, j), vid(r + 1, jn), vid(r + 1, j)});
        }
        f.insert(f.end(), {vid(rings - 1, j), vid(rings - 1, jn), nv - 1});
    }
    g.faces = Eigen::Map<const FaceIndices>(f.data(), 3, static_cast<Eigen::Index>(f.size() / 3));
    return g;
}

using ScalarField = std::function<double(double az, double el)>;

struct FieldSpec {
    Eigen::VectorXd displacement;  // 3V
    double amplitude;              // peak displacement per unit latent (mm)
};

}  // namespace

MorphableFaceModel build_synthetic_model(std::uint64_t seed, int latent_size, const SyntheticModelOptions& options,
                                         const LandmarkSchema& schema) {
    if (latent_size < 1) throw Error(ErrorKind::InvalidInput, "latent size must be at least 1");
    Grid grid = build_grid(options.longitudes, options.rings);
    const Eigen::Index nv = grid.vertices.cols();
    if (latent_size > 3 * nv) {
        throw Error(ErrorKind::InvalidInput, "latent size " + std::to_string(latent_size) + " exceeds the " +
                                                 std::to_string(3 * nv) + " vertex degrees of freedom");
    }

    // Canonical landmark layout -> nearest template vertices.
    std::vector<int> landmarks;
    std::set<int> used;
    for (const auto& def : schema.landmarks()) {
        const auto hit = nearest_point(grid.vertices, surface_point(def.azimuth_deg, def.elevation_deg));
        if (!used.insert(static_cast<int>(hit.index)).second) {
            throw Error(ErrorKind::Degenerate, "landmark '" + def.name + "' collides with another landmark on a " +
                                                   std::to_string(options.longitudes) + "x" +
                                                   std::to_string(options.rings) + " template");
        }
        landmarks.push_back(static_cast<int>(hit.index));
    }

    // Fix the canonical scale from the ear landmarks.
    const Point3 ear_l = grid.vertices.col(landmarks[static_cast<std::size_t>(schema.left_ear())]);
    const Point3 ear_r = grid.vertices.col(landmarks[static_cast<std::size_t>(schema.right_ear())]);
    grid.vertices *= options.ear_distance / (ear_l - ear_r).norm();

    TriMesh mean_face(grid.vertices, grid.faces);
    const PointSet normals = vertex_normals(mean_face);

    // Support window: the face and sides of the head, fading toward the back
    // and the poles.
    std::vector<double> window(static_cast<std::size_t>(nv));
    for (Eigen::Index v = 0; v < nv; ++v) {
        const auto i = static_cast<std::size_t>(v);
        window[i] = ramp(std::abs(grid.azimuth[i]), 80.0, 150.0) * ramp(std::abs(grid.elevation[i]), 60.0, 88.0);
    }

    auto normal_field = [&](const ScalarField& s) {
        Eigen::VectorXd d(3 * nv);
        for (Eigen::Index v = 0; v < nv; ++v) {
            const auto i = static_cast<std::size_t>(v);
            d.segment<3>(3 * v) = window[i] * s(grid.azimuth[i], grid.elevation[i]) * normals.col(v);
        }
        return d;
    };
    // Landmark-anchored smoothing: a pattern sampled at the landmark sites and
    // spread over the surface with a gaussian kernel in angle. The kernel mass
    // term fades the field away from the landmark cloud.
    std::vector<Point3> sites;
    for (const auto& def : schema.landmarks()) sites.push_back(direction(def.azimuth_deg, def.elevation_deg));
    const double inv_two_sigma2 = 1.0 / (2.0 * options.anchor_sigma_deg * options.anchor_sigma_deg);
    Eigen::MatrixXd kernel(nv, static_cast<Eigen::Index>(sites.size()));
    for (Eigen::Index v = 0; v < nv; ++v) {
        const auto i = static_cast<std::size_t>(v);
        const Point3 dv = direction(grid.azimuth[i], grid.elevation[i]);
        double mass = 0.0;
        for (std::size_t j = 0; j < sites.size(); ++j) {
            const double ang = std::acos(std::clamp(dv.dot(sites[j]), -1.0, 1.0)) / kDeg;
            kernel(v, static_cast<Eigen::Index>(j)) = std::exp(-ang * ang * inv_two_sigma2);
            mass += kernel(v, static_cast<Eigen::Index>(j));
        }
        kernel.row(v) /= mass + options.anchor_fade;
    }
    // Interpolating variant: exact prescribed values at the landmark sites
    // (gaussian radial basis, lightly regularized).
    Eigen::MatrixXd site_kernel(static_cast<Eigen::Index>(sites.size()), static_cast<Eigen::Index>(sites.size()));
    Eigen::MatrixXd vertex_kernel(nv, static_cast<Eigen::Index>(sites.size()));
    for (std::size_t a = 0; a < sites.size(); ++a) {
        for (std::size_t b = 0; b < sites.size(); ++b) {
            const double ang = std::acos(std::clamp(sites[a].dot(sites[b]), -1.0, 1.0)) / kDeg;
            site_kernel(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = std::exp(-ang * ang * inv_two_sigma2);
        }
    }
    for (Eigen::Index v = 0; v < nv; ++v) {
        const auto i = static_cast<std::size_t>(v);
        const Point3 dv = direction(grid.azimuth[i], grid.elevation[i]);
        for (std::size_t j = 0; j < sites.size(); ++j) {
            const double ang = std::acos(std::clamp(dv.dot(sites[j]), -1.0, 1.0)) / kDeg;
            vertex_kernel(v, static_cast<Eigen::Index>(j)) = std::exp(-ang * ang * inv_two_sigma2);
        }
    }
    site_kernel.diagonal().array() += 1e-3;
    const Eigen::LDLT<Eigen::MatrixXd> site_solver(site_kernel);
    auto interpolated_field = [&](const Eigen::VectorXd& at_sites) {
        const Eigen::VectorXd values = vertex_kernel * site_solver.solve(at_sites);
        Eigen::VectorXd d(3 * nv);
        for (Eigen::Index v = 0; v < nv; ++v) d.segment<3>(3 * v) = values[v] * normals.col(v);
        return d;
    };

    auto anchored_field = [&](const ScalarField& s) {
        Eigen::VectorXd at_sites(static_cast<Eigen::Index>(sites.size()));
        for (std::size_t j = 0; j < sites.size(); ++j) {
            const auto& def = schema.landmarks()[j];
            at_sites[static_cast<Eigen::Index>(j)] = s(def.azimuth_deg, def.elevation_deg);
        }
        const Eigen::VectorXd values = kernel * at_sites;
        Eigen::VectorXd d(3 * nv);
        for (Eigen::Index v = 0; v < nv; ++v) d.segment<3>(3 * v) = values[v] * normals.col(v);
        return d;
    };

    // Whole-head fields: per-axis stretch, translation and small rotation.
    auto axis_field = [&](int axis) {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(3 * nv);
        for (Eigen::Index v = 0; v < nv; ++v) d[3 * v + axis] = grid.vertices(axis, v) / 100.0;
        return d;
    };
    auto shift_field = [&](int axis) {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(3 * nv);
        for (Eigen::Index v = 0; v < nv; ++v) d[3 * v + axis] = 1.0;
        return d;
    };
    auto spin_field = [&](int axis) {
        Eigen::VectorXd d(3 * nv);
        const Point3 w = Point3::Unit(axis);
        for (Eigen::Index v = 0; v < nv; ++v) d.segment<3>(3 * v) = w.cross(Point3(grid.vertices.col(v))) / 100.0;
        return d;
    };
    auto pair_field = [&](Bump b, bool antisymmetric) {
        return normal_field([b, antisymmetric](double az, double el) {
            Bump mirror = b;
            mirror.azimuth = -b.azimuth;
            return gaussian(az, el, b) + (antisymmetric ? -1.0 : 1.0) * gaussian(az, el, mirror);
        });
    };
    auto mid_field = [&](Bump b) { return normal_field([b](double az, double el) { return gaussian(az, el, b); }); };

    std::vector<FieldSpec> candidates;
    // 0: fullness of cheeks, jaw and chin (drives the "fat"/"thin" offsets).
    candidates.push_back({normal_field([](double az, double el) {
                              const Bump c{1.0, 50.0, -14.0, 20.0, 15.0}, j{0.6, 58.0, -33.0, 15.0, 10.0};
                              const Bump chin{0.5, 0.0, -38.0, 15.0, 9.0};
                              Bump cm = c, jm = j;
                              cm.azimuth = -c.azimuth;
                              jm.azimuth = -j.azimuth;
                              return gaussian(az, el, c) + gaussian(az, el, cm) + gaussian(az, el, j) +
                                     gaussian(az, el, jm) + gaussian(az, el, chin);
                          }),
                          4.0});
    for (int axis = 0; axis < 3; ++axis) candidates.push_back({axis_field(axis), 5.0});
    for (int axis = 0; axis < 3; ++axis) candidates.push_back({shift_field(axis), 3.0});
    for (int axis = 0; axis < 3; ++axis) candidates.push_back({spin_field(axis), 3.0});
    // Regional soft-tissue modes: a uniform push and two gradients over
    // each region's landmarks, zero at every other landmark.
    for (const auto& [region, members] : schema.region_partition()) {
        double mean_az = 0.0, mean_el = 0.0;
        for (int i : members) {
            mean_az += std::abs(schema.landmarks()[static_cast<std::size_t>(i)].azimuth_deg);
            mean_el += schema.landmarks()[static_cast<std::size_t>(i)].elevation_deg;
        }
        mean_az /= static_cast<double>(members.size());
        mean_el /= static_cast<double>(members.size());
        for (int mode = 0; mode < options.regional_modes; ++mode) {
            Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sites.size()));
            for (int i : members) {
                const auto& def = schema.landmarks()[static_cast<std::size_t>(i)];
                const double value = mode == 0   ? 1.0
                                     : mode == 1 ? (std::abs(def.azimuth_deg) - mean_az) / 30.0
                                                 : (def.elevation_deg - mean_el) / 30.0;
                g[i] = value;
            }
            candidates.push_back({interpolated_field(g), options.regional_amplitude});
        }
    }

    const double sym = 5.0, anti = 2.0;
    candidates.push_back({mid_field({1, 0, 35, 22, 10}), sym});           // forehead
    candidates.push_back({pair_field({1, 30, 22, 12, 6}, false), sym});   // brows
    candidates.push_back({pair_field({1, 30, 22, 12, 6}, true), anti});
    candidates.push_back({mid_field({1, 0, -2, 6, 9}), sym});             // nose size
    candidates.push_back({pair_field({1, 9, -5, 5, 5}, false), sym});     // nose width
    candidates.push_back({mid_field({1, 0, 14, 8, 6}), sym});             // nasion
    candidates.push_back({pair_field({1, 22, 10, 8, 6}, false), sym});    // eyes
    candidates.push_back({pair_field({1, 45, -5, 14, 12}, false), sym});  // cheeks
    candidates.push_back({pair_field({1, 45, -5, 14, 12}, true), anti});
    candidates.push_back({mid_field({1, 0, -19, 12, 5}), sym});           // mouth
    candidates.push_back({pair_field({1, 15, -19, 6, 5}, false), sym});   // mouth corners
    candidates.push_back({mid_field({1, 0, -38, 12, 8}), sym});           // chin
    candidates.push_back({pair_field({1, 58, -30, 14, 12}, false), sym}); // jaw
    candidates.push_back({pair_field({1, 58, -30, 14, 12}, true), anti});
    candidates.push_back({pair_field({1, 58, 24, 14, 10}, false), sym});  // temples
    candidates.push_back({pair_field({1, 85, 0, 10, 12}, false), sym});   // ears
    candidates.push_back({pair_field({1, 85, 0, 10, 12}, true), anti});
    candidates.push_back({pair_field({1, 35, 35, 15, 10}, true), anti});  // lateral forehead
    candidates.push_back({pair_field({1, 20, -38, 10, 8}, true), anti});  // lateral chin

    // Low-frequency trigonometric fields with seeded phases, ordered by
    // total frequency; generated lazily until the basis is full.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    int order = 1, a = 0, trig_index = 0;
    bool next_antisymmetric = false;
    auto next_trig = [&]() -> FieldSpec {
        const int b = order - a;
        const double psi = phase(rng);
        const bool antisymmetric = next_antisymmetric;
        const double decay = std::pow(0.92, trig_index++);
        FieldSpec spec{anchored_field([=](double az, double el) {
                           const double ang = a * az * kDeg;
                           return (antisymmetric ? std::sin(ang) : std::cos(ang)) * std::cos(b * el * kDeg + psi);
                       }),
                       (antisymmetric ? 1.5 : 4.0) * decay};
        // Advance: cos then sin for a >= 1, then the next (a, b) split.
        if (!antisymmetric && a >= 1) {
            next_antisymmetric = true;
        } else {
            next_antisymmetric = false;
            if (++a > order) {
                ++order;
                a = 0;
            }
        }
        return spec;
    };

    // Slot 0 is the fullness field, which the attribute table refers to.
    // The rest span the stretch and rigid fields plus the most
    // landmark-visible directions of a wider pool, rotated within that span
    // so their landmark rows are orthogonal as well.
    // Fullness, stretches, shifts, spins and the regional modes are always kept.
    const int named = 10 + static_cast<int>(schema.region_partition().size()) * options.regional_modes;
    const int pool_size = std::max(options.pool_factor * latent_size, named + static_cast<int>(candidates.size()));
    Eigen::MatrixXd pool(3 * nv, pool_size);
    std::vector<double> amplitude;
    int accepted = 0;
    std::size_t next_candidate = 0;
    int attempts = 0;
    while (accepted < pool_size) {
        if (++attempts > 20 * pool_size + 1000) {
            if (accepted >= latent_size) break;
            throw Error(ErrorKind::Numerical, "could not assemble an independent displacement basis");
        }
        FieldSpec spec = next_candidate < candidates.size() ? candidates[next_candidate++] : next_trig();
        Eigen::VectorXd v = spec.displacement;
        const double original = v.norm();
        if (!(original > 0.0)) continue;
        for (int pass = 0; pass < 2; ++pass) {
            for (int j = 0; j < accepted; ++j) v -= pool.col(j).dot(v) * pool.col(j);
        }
        const double residual = v.norm();
        if (residual < 1e-6 * original) continue;
        pool.col(accepted++) = v / residual;
        amplitude.push_back(spec.amplitude);
    }

    auto peak_norm = [nv](const Eigen::VectorXd& v) {
        double peak = 0.0;
        for (Eigen::Index i = 0; i < nv; ++i) peak = std::max(peak, v.segment<3>(3 * i).norm());
        return peak;
    };

    Eigen::MatrixXd basis(3 * nv, latent_size);
    Eigen::VectorXd scales(latent_size);
    basis.col(0) = pool.col(0);
    scales[0] = amplitude[0] / peak_norm(pool.col(0));
    if (latent_size > 1) {
        auto landmark_rows = [&](const Eigen::MatrixXd& m) {
            Eigen::MatrixXd r(3 * static_cast<Eigen::Index>(landmarks.size()), m.cols());
            for (std::size_t l = 0; l < landmarks.size(); ++l) {
                r.middleRows(3 * static_cast<Eigen::Index>(l), 3) = m.middleRows(3 * landmarks[l], 3);
            }
            return r;
        };
        // Most landmark-visible directions of the free pool.
        const int kept = std::min(latent_size, named);
        const int free_count = accepted - named;
        const int wanted = latent_size - kept;
        Eigen::MatrixXd span(3 * nv, (kept - 1) + wanted);
        span.leftCols(kept - 1) = pool.middleCols(1, kept - 1);
        if (wanted > 0) {
            const Eigen::MatrixXd free = pool.middleCols(named, free_count);
            const Eigen::MatrixXd lf = landmark_rows(free);
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lf.transpose() * lf);
            span.rightCols(wanted) = free * eig.eigenvectors().rightCols(wanted);
        }
        // Rotate so the landmark rows of the whole span are orthogonal;
        // most visible first.
        const Eigen::MatrixXd ls = landmark_rows(span);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ls.transpose() * ls);
        const Eigen::Index m = span.cols();
        for (Eigen::Index j = 0; j < m; ++j) {
            Eigen::VectorXd v = span * eig.eigenvectors().col(m - 1 - j);
            const int k = static_cast<int>(j) + 1;
            for (int pass = 0; pass < 2; ++pass) {
                for (int i = 0; i < k; ++i) v -= basis.col(i).dot(v) * basis.col(i);
            }
            v.normalize();
            // Sign convention: the largest landmark displacement has a positive component sum.
            Eigen::Index arg = 0;
            double best = -1.0;
            for (std::size_t l = 0; l < landmarks.size(); ++l) {
                const double n = v.segment<3>(3 * landmarks[l]).norm();
                if (n > best + 1e-12) {
                    best = n;
                    arg = 3 * landmarks[l];
                }
            }
            if (v.segment<3>(arg).sum() < 0.0) v = -v;
            basis.col(k) = v;
            scales[k] = options.rotated_amplitude * std::pow(options.rotated_decay, j) / peak_norm(v);
        }
    }

    return MorphableFaceModel(std::move(mean_face), std::move(basis), std::move(scales), std::move(landmarks));
}

}  // namespace cranioforge
