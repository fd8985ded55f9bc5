#include "hybreg/datagen.hpp"

#include "hybreg/nn_index.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace hybreg {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec3 v;
    do {
        v = Vec3(normal(rng), normal(rng), normal(rng));
    } while (v.norm() < 1e-6);
    return v.normalized();
}

Vec3 sample_sphere_point(std::mt19937_64& rng, double radius) {
    return radius * random_unit(rng);
}

Vec3 sample_box_point(std::mt19937_64& rng, const Vec3& half) {
    // face chosen by area, point uniform in the face
    const double ax = half.y() * half.z();
    const double ay = half.x() * half.z();
    const double az = half.x() * half.y();
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double pick = uni(rng) * (ax + ay + az);
    std::uniform_real_distribution<double> sgn(0.0, 1.0);
    const double side = sgn(rng) < 0.5 ? -1.0 : 1.0;
    const double s = 2.0 * uni(rng) - 1.0;
    const double t = 2.0 * uni(rng) - 1.0;
    if (pick < ax) return {side * half.x(), s * half.y(), t * half.z()};
    if (pick < ax + ay) return {s * half.x(), side * half.y(), t * half.z()};
    return {s * half.x(), t * half.y(), side * half.z()};
}

Vec3 sample_cylinder_point(std::mt19937_64& rng, double radius, double half_h) {
    const double lateral = 2.0 * kPi * radius * 2.0 * half_h;
    const double caps = 2.0 * kPi * radius * radius;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double ang = 2.0 * kPi * uni(rng);
    if (uni(rng) * (lateral + caps) < lateral) {
        const double z = half_h * (2.0 * uni(rng) - 1.0);
        return {radius * std::cos(ang), radius * std::sin(ang), z};
    }
    const double r = radius * std::sqrt(uni(rng));
    const double z = uni(rng) < 0.5 ? -half_h : half_h;
    return {r * std::cos(ang), r * std::sin(ang), z};
}

Vec3 sample_torus_point(std::mt19937_64& rng, double major, double minor) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    // rejection on the tube angle keeps the surface density uniform
    double u, v;
    do {
        u = 2.0 * kPi * uni(rng);
        v = 2.0 * kPi * uni(rng);
    } while (uni(rng) > (major + minor * std::cos(v)) / (major + minor));
    const double w = major + minor * std::cos(v);
    return {w * std::cos(u), w * std::sin(u), minor * std::sin(v)};
}

}  // namespace

void PairSpec::validate() const {
    if (n_points < 32) throw std::invalid_argument("n_points must be >= 32");
    if (!(min_overlap >= 0.0) || min_overlap > 1.0) {
        throw std::invalid_argument("min_overlap must be in [0, 1]");
    }
}

PointCloud sample_shape(const PairSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);

    PointCloud cloud;
    cloud.points.reserve(spec.n_points);
    const int n = spec.n_points;
    switch (spec.shape) {
        case ShapeKind::Sphere:
            for (int i = 0; i < n; ++i) cloud.points.push_back(sample_sphere_point(rng, 1.0));
            break;
        case ShapeKind::Box:
            for (int i = 0; i < n; ++i) {
                cloud.points.push_back(sample_box_point(rng, {1.0, 0.7, 0.5}));
            }
            break;
        case ShapeKind::Cylinder:
            for (int i = 0; i < n; ++i) {
                cloud.points.push_back(sample_cylinder_point(rng, 0.6, 1.0));
            }
            break;
        case ShapeKind::Torus:
            for (int i = 0; i < n; ++i) cloud.points.push_back(sample_torus_point(rng, 0.7, 0.3));
            break;
        case ShapeKind::Composite: {
            // asymmetric assembly: slab body, offset post, offset bump
            const int n_box = n / 2;
            const int n_cyl = n / 4;
            const int n_sph = n - n_box - n_cyl;
            for (int i = 0; i < n_box; ++i) {
                cloud.points.push_back(sample_box_point(rng, {1.0, 0.6, 0.25}));
            }
            for (int i = 0; i < n_cyl; ++i) {
                cloud.points.push_back(sample_cylinder_point(rng, 0.25, 0.6) +
                                       Vec3(0.5, 0.1, 0.75));
            }
            for (int i = 0; i < n_sph; ++i) {
                cloud.points.push_back(sample_sphere_point(rng, 0.35) + Vec3(-0.7, -0.4, 0.4));
            }
            break;
        }
    }

    double max_r = 0.0;
    for (const auto& p : cloud.points) max_r = std::max(max_r, p.norm());
    if (max_r > 0.0) {
        for (auto& p : cloud.points) p /= max_r;
    }
    return cloud;
}

PointCloud partial_view(const PointCloud& cloud, const Vec3& view_dir, double keep_fraction) {
    if (!(keep_fraction > 0.0) || keep_fraction > 1.0) {
        throw std::invalid_argument("keep_fraction must be in (0, 1]");
    }
    cloud.validate();
    const std::size_t n = cloud.size();
    const auto k = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n))), 1, n);

    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) score[i] = cloud[i].dot(view_dir);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(),
                     [&](std::size_t a, std::size_t b) {
                         if (score[a] != score[b]) return score[a] > score[b];
                         return a < b;
                     });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());

    PointCloud out;
    out.points.reserve(k);
    for (std::size_t i : idx) out.points.push_back(cloud[i]);
    return out;
}

double overlap_rate(const PointCloud& a, const PointCloud& b, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("overlap_rate: eps must be > 0");
    a.validate();
    b.validate();
    const SpatialIndex bi(b);
    const double eps2 = eps * eps;
    std::size_t hits = 0;
    for (const auto& p : a.points) {
        if (bi.nearest(p).sq_distance <= eps2) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(a.size());
}

LabeledPair generate_pair(const PairSpec& spec) {
    spec.validate();
    const PointCloud shape = sample_shape(spec);
    std::mt19937_64 rng(spec.seed ^ 0xd1b54a32d192ed03ULL);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    PointCloud view1, view2;
    double overlap = 0.0;
    bool found = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
        const Vec3 d1 = random_unit(rng);
        const Vec3 d2 = random_unit(rng);
        view1 = partial_view(shape, d1, kKeepFraction);
        view2 = partial_view(shape, d2, kKeepFraction);
        overlap = std::min(overlap_rate(view1, view2, kOverlapEps),
                           overlap_rate(view2, view1, kOverlapEps));
        if (overlap >= spec.min_overlap) {
            found = true;
            break;
        }
    }
    if (!found) {
        throw GenerationError("generate_pair: overlap " + std::to_string(spec.min_overlap) +
                              " unattainable in 100 attempts");
    }

    const double max_angle = spec.rot_level == RotLevel::Restricted ? kPi / 4.0 : kPi;
    const double angle = max_angle * uni(rng);
    const Vec3 axis = random_unit(rng);
    const Vec3 t_dir = random_unit(rng);
    const double t_mag = kTranslationRadius * std::cbrt(uni(rng));

    LabeledPair pair;
    pair.gt = {rodrigues(axis, angle), t_mag * t_dir};
    pair.source = std::move(view1);
    pair.target = apply_transform(view2, pair.gt);
    pair.overlap = overlap;
    pair.rot_level = spec.rot_level;
    return pair;
}

}  // namespace hybreg
