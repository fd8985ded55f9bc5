#include "hybreg/datagen.hpp"

#include "hybreg/metrics.hpp"
#include "hybreg/nn_index.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace hybreg;

TEST_CASE("sphere samples lie on the unit sphere") {
    PairSpec spec;
    spec.shape = ShapeKind::Sphere;
    spec.n_points = 256;
    spec.seed = 1;
    const PointCloud c = sample_shape(spec);
    REQUIRE(c.size() == 256);
    for (const auto& p : c.points) CHECK(std::abs(p.norm() - 1.0) < 1e-9);
}

TEST_CASE("box samples sit on a face") {
    PairSpec spec;
    spec.shape = ShapeKind::Box;
    spec.n_points = 256;
    spec.seed = 2;
    const PointCloud c = sample_shape(spec);
    // recover the normalization scale from the extremes, then check each
    // point has one coordinate pinned at a face
    double max_norm = 0.0;
    for (const auto& p : c.points) max_norm = std::max(max_norm, p.norm());
    CHECK(max_norm <= 1.0 + 1e-12);
    // Every raw sample has one coordinate pinned at a face plane |x_k| =
    // half_k, so the largest ratio |p_k| / half_k over the cloud equals
    // 1 / scale. Recover the scale from that and re-check every point.
    const Vec3 half(1.0, 0.7, 0.5);
    double inv_scale = 0.0;
    for (const auto& p : c.points)
        for (int k = 0; k < 3; ++k) inv_scale = std::max(inv_scale, std::abs(p[k]) / half[k]);
    REQUIRE(inv_scale > 0.0);
    const double scale = 1.0 / inv_scale;
    for (const auto& p : c.points) {
        const Vec3 raw = p * scale;
        const bool on_face = std::abs(std::abs(raw.x()) - half.x()) < 1e-9 ||
                             std::abs(std::abs(raw.y()) - half.y()) < 1e-9 ||
                             std::abs(std::abs(raw.z()) - half.z()) < 1e-9;
        CHECK(on_face);
    }
}

TEST_CASE("all shapes fit the unit ball and are deterministic per seed") {
    for (auto shape : {ShapeKind::Sphere, ShapeKind::Box, ShapeKind::Cylinder, ShapeKind::Torus,
                       ShapeKind::Composite}) {
        PairSpec spec;
        spec.shape = shape;
        spec.n_points = 128;
        spec.seed = 42;
        const PointCloud a = sample_shape(spec);
        const PointCloud b = sample_shape(spec);
        REQUIRE(a.size() == 128);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i] == b[i]);
            CHECK(a[i].norm() <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("partial_view keeps the top fraction by view direction") {
    PairSpec spec;
    spec.shape = ShapeKind::Sphere;
    spec.n_points = 200;
    spec.seed = 3;
    const PointCloud c = sample_shape(spec);

    CHECK(partial_view(c, Vec3::UnitZ(), 1.0).size() == c.size());

    const PointCloud half = partial_view(c, Vec3::UnitZ(), 0.5);
    CHECK(half.size() == 100);
    double min_kept = 1e30;
    for (const auto& p : half.points) min_kept = std::min(min_kept, p.z());
    // every dropped point is below every kept point
    std::size_t below = 0;
    for (const auto& p : c.points) {
        if (p.z() < min_kept) ++below;
    }
    CHECK(below == c.size() - half.size());
}

TEST_CASE("opposite half views of a sphere are near-disjoint") {
    PairSpec spec;
    spec.shape = ShapeKind::Sphere;
    spec.n_points = 400;
    spec.seed = 4;
    const PointCloud c = sample_shape(spec);
    const PointCloud top = partial_view(c, Vec3::UnitZ(), 0.5);
    const PointCloud bottom = partial_view(c, -Vec3::UnitZ(), 0.5);
    std::size_t shared = 0;
    for (const auto& a : top.points) {
        for (const auto& b : bottom.points) {
            if (a == b) ++shared;
        }
    }
    CHECK(shared <= 1);  // only a median-boundary point can be shared
}

TEST_CASE("overlap_rate basics") {
    PairSpec spec;
    spec.shape = ShapeKind::Torus;
    spec.n_points = 128;
    spec.seed = 5;
    const PointCloud c = sample_shape(spec);
    CHECK(overlap_rate(c, c, 0.01) == doctest::Approx(1.0));

    PointCloud far = c;
    for (auto& p : far.points) p += Vec3(100, 0, 0);
    CHECK(overlap_rate(c, far, 0.05) == 0.0);
    CHECK_THROWS_AS(overlap_rate(c, far, 0.0), std::invalid_argument);
}

TEST_CASE("overlap_rate on a half-shared composite") {
    PointCloud a, b;
    for (int i = 0; i < 50; ++i) {
        const Vec3 shared(0.01 * i, 0, 0);
        a.points.push_back(shared);
        b.points.push_back(shared);
        a.points.emplace_back(10.0 + 0.01 * i, 0, 0);  // only in a
        b.points.emplace_back(-10.0 - 0.01 * i, 0, 0);  // only in b
    }
    CHECK(overlap_rate(a, b, 0.001) == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("generate_pair honors rotation level and overlap") {
    PairSpec spec;
    spec.shape = ShapeKind::Composite;
    spec.n_points = 256;
    spec.min_overlap = 0.5;

    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        spec.seed = seed;
        spec.rot_level = RotLevel::Restricted;
        const LabeledPair pair = generate_pair(spec);
        CHECK(pair.overlap >= spec.min_overlap);
        CHECK(rotation_error(Mat3::Identity(), pair.gt.R) <= 45.0 + 1e-9);
        CHECK(pair.gt.T.norm() <= kTranslationRadius + 1e-12);

        // closed loop: undoing gt recovers the overlap against the source
        const PointCloud aligned = apply_transform(pair.target, pair.gt.inverse());
        const double rate = std::min(overlap_rate(pair.source, aligned, kOverlapEps),
                                     overlap_rate(aligned, pair.source, kOverlapEps));
        CHECK(rate >= spec.min_overlap - 1e-12);
    }
}

TEST_CASE("generate_pair determinism and min_overlap zero") {
    PairSpec spec;
    spec.shape = ShapeKind::Cylinder;
    spec.n_points = 128;
    spec.min_overlap = 0.0;
    spec.seed = 9;
    const LabeledPair a = generate_pair(spec);
    const LabeledPair b = generate_pair(spec);
    REQUIRE(a.source.size() == b.source.size());
    for (std::size_t i = 0; i < a.source.size(); ++i) CHECK(a.source[i] == b.source[i]);
    for (std::size_t i = 0; i < a.target.size(); ++i) CHECK(a.target[i] == b.target[i]);
    CHECK((a.gt.R - b.gt.R).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generate_pair fails cleanly on unattainable overlap") {
    PairSpec spec;
    // On a dense sphere the crop boundaries always differ by more than the
    // overlap radius, so full overlap would need byte-identical crops.
    spec.shape = ShapeKind::Sphere;
    spec.n_points = 512;
    spec.min_overlap = 1.0;
    spec.seed = 10;
    CHECK_THROWS_AS(generate_pair(spec), GenerationError);
}

TEST_CASE("ground truth is locally optimal for generated pairs") {
    // perturbing gt by 1 degree / 0.01 units should not beat the gt loss
    PairSpec spec;
    spec.shape = ShapeKind::Composite;
    spec.n_points = 192;
    spec.min_overlap = 0.6;

    int ok = 0, total = 0;
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        spec.seed = seed;
        LabeledPair pair;
        try {
            pair = generate_pair(spec);
        } catch (const GenerationError&) {
            continue;
        }
        ++total;
        const double alpha = 0.7;
        const PointCloud at_gt = apply_transform(pair.source, pair.gt);
        const double gt_loss = local_chamfer(at_gt, pair.target, alpha);

        bool beaten = false;
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> n(0.0, 1.0);
        for (int k = 0; k < 6; ++k) {
            const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
            RigidTransform perturbed = pair.gt;
            perturbed.R = rodrigues(axis, 1.0 * 3.14159265 / 180.0) * perturbed.R;
            perturbed.T += 0.01 * Vec3(n(rng), n(rng), n(rng)).normalized();
            const double loss =
                local_chamfer(apply_transform(pair.source, perturbed), pair.target, alpha);
            if (loss < gt_loss) beaten = true;
        }
        if (!beaten) ++ok;
    }
    REQUIRE(total >= 5);
    CHECK(static_cast<double>(ok) / total >= 0.8);
}
