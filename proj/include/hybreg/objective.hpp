#pragma once

#include "hybreg/geometry.hpp"
#include "hybreg/nn_index.hpp"

#include <array>

namespace hybreg {

struct ObjectiveConfig {
    double alpha = 0.7;   // trim fraction in (0, 1]
    double beta = 0.1;    // projection weight, >= 0
    double d_max = 0.5;   // translation bound, > 0
    TranslationMapping mapping = TranslationMapping::Sin;

    void validate() const;
};

struct LossBreakdown {
    double local_cd = 0.0;
    double proj_xy = 0.0;
    double proj_yz = 0.0;
    double proj_xz = 0.0;
    double total = 0.0;
};

/// Symmetric Chamfer distance: mean of squared nearest-neighbor distances,
/// both directions.
double chamfer(const PointCloud& p, const PointCloud& q);

/// Trimmed Chamfer: each direction averages only the ceil(alpha*n) points
/// with the smallest nearest-neighbor squared distances. Equals chamfer()
/// when alpha == 1.
double local_chamfer(const PointCloud& p, const PointCloud& q, double alpha);

/// Symmetric Chamfer over 2D projections onto the chosen coordinate plane.
double projected_chamfer(const PointCloud& p, const PointCloud& q, Plane plane);

/// Nearest-neighbor assignments and trim sets, frozen at one parameter value.
struct Correspondences {
    std::vector<std::size_t> fwd3;                 // per source point: target index
    std::vector<std::size_t> bwd3;                 // per target point: source index
    std::vector<std::size_t> fwd_trim;             // source indices kept by the trim
    std::vector<std::size_t> bwd_trim;             // target indices kept by the trim
    std::array<std::vector<std::size_t>, 3> fwd2;  // per plane, per source point
    std::array<std::vector<std::size_t>, 3> bwd2;  // per plane, per target point
};

/// Recomputes correspondences for transform(source) against target.
/// Rebuilds the index over the transformed source internally.
Correspondences associate(const PointCloud& transformed_source, const PointCloud& target,
                          const SpatialIndex& target_index, const ObjectiveConfig& cfg);

/// Loss evaluated with frozen correspondences (no re-association). Used for
/// differentiation and by finite-difference checks.
LossBreakdown fixed_correspondence_loss(const TransformParams& params, const PointCloud& source,
                                        const PointCloud& target, const Correspondences& corr,
                                        const ObjectiveConfig& cfg);

/// Same, but over an already-realized transform (for parameterizations whose
/// realization lives outside TransformParams).
LossBreakdown fixed_correspondence_loss(const RigidTransform& t, const PointCloud& source,
                                        const PointCloud& target, const Correspondences& corr,
                                        const ObjectiveConfig& cfg);

/// Full objective at `params`: local CD plus beta-weighted projected CDs of
/// transform(source) against target, all correspondences recomputed.
LossBreakdown total_loss(const TransformParams& params, const PointCloud& source,
                         const PointCloud& target, const SpatialIndex& target_index,
                         const ObjectiveConfig& cfg);

/// Gradient order: (v1, v2, v3, theta, u1, u2, u3, d_u).
using ParamGradient = std::array<double, 8>;

struct GradientResult {
    ParamGradient grad{};
    LossBreakdown loss;
};

/// Analytic gradient under the fixed-correspondence convention:
/// correspondences are recomputed at `params`, then held fixed while the
/// squared-distance terms are differentiated through R(v, theta) and
/// T(u, d_u). The returned loss equals total_loss at the same params.
GradientResult gradient(const TransformParams& params, const PointCloud& source,
                        const PointCloud& target, const SpatialIndex& target_index,
                        const ObjectiveConfig& cfg);

/// Gradient restricted to frozen correspondences (helper for the full
/// gradient and for alternative-parameterization solvers).
GradientResult gradient_with_correspondences(const TransformParams& params,
                                             const PointCloud& source, const PointCloud& target,
                                             const Correspondences& corr,
                                             const ObjectiveConfig& cfg);

/// Number of points kept by the trim: ceil(alpha * n), at least 1.
std::size_t trim_count(std::size_t n, double alpha);

}  // namespace hybreg
