#pragma once

#include "hybreg/geometry.hpp"

#include <cstdint>

namespace hybreg {

enum class ShapeKind { Sphere, Box, Cylinder, Torus, Composite };
enum class RotLevel { Restricted, Unrestricted };  // gt rotation in [0,45] / [0,180] degrees

struct PairSpec {
    ShapeKind shape = ShapeKind::Composite;
    int n_points = 2048;
    RotLevel rot_level = RotLevel::Restricted;
    double min_overlap = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LabeledPair {
    PointCloud source;
    PointCloud target;
    RigidTransform gt;  // R * source_frame + T aligns to the target frame
    double overlap = 0.0;
    RotLevel rot_level = RotLevel::Restricted;
};

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// n_points surface samples of the parametric shape, normalized to fit the
/// unit sphere centered at the origin. Deterministic per seed.
PointCloud sample_shape(const PairSpec& spec);

/// Keeps the ceil(keep_fraction * n) points with the largest dot product
/// against view_dir (half-space-style single-view crop). Original point
/// order is preserved among the kept points.
PointCloud partial_view(const PointCloud& cloud, const Vec3& view_dir, double keep_fraction);

/// Fraction of a's points whose nearest neighbor in b lies within eps.
double overlap_rate(const PointCloud& a, const PointCloud& b, double eps);

/// Two partial views of one shape; the second view is moved by a random
/// rigid transform consistent with spec.rot_level. View pairs are rejected
/// and resampled (up to 100 attempts) until the symmetric overlap of the
/// aligned views reaches spec.min_overlap.
LabeledPair generate_pair(const PairSpec& spec);

/// Overlap tolerance on unit-normalized clouds.
inline constexpr double kOverlapEps = 0.05;

/// Fraction of points kept by each partial view.
inline constexpr double kKeepFraction = 0.7;

/// gt translations are drawn from the ball of this radius (0.8 * default d_max).
inline constexpr double kTranslationRadius = 0.4;

}  // namespace hybreg
