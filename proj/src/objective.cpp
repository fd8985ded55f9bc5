#include "hybreg/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hybreg {

void ObjectiveConfig::validate() const {
    if (!(alpha > 0.0) || !(alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
    if (!(d_max > 0.0)) throw std::invalid_argument("d_max must be > 0");
}

std::size_t trim_count(std::size_t n, double alpha) {
    const auto k = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n)));
    return std::clamp<std::size_t>(k, 1, n);
}

namespace {

double sq_dist3(const Vec3& a, const Vec3& b) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double d = a[k] - b[k];
        d2 += d * d;
    }
    return d2;
}

double sq_dist2(const Vec3& a, const Vec3& b, Plane plane) {
    const auto axes = plane_axes(plane);
    double d2 = 0.0;
    for (int ax : axes) {
        const double d = a[ax] - b[ax];
        d2 += d * d;
    }
    return d2;
}

std::vector<double> nn_sq_dists(const PointCloud& from, const SpatialIndex& to_index) {
    std::vector<double> d(from.size());
    for (std::size_t i = 0; i < from.size(); ++i) d[i] = to_index.nearest(from[i]).sq_distance;
    return d;
}

double mean_all(const std::vector<double>& d) {
    double s = 0.0;
    for (double x : d) s += x;
    return s / static_cast<double>(d.size());
}

/// Indices of the k smallest values, ties by smaller index, returned in
/// ascending index order so downstream sums are order-stable.
std::vector<std::size_t> smallest_k(const std::vector<double>& d, std::size_t k) {
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(),
                     [&](std::size_t a, std::size_t b) {
                         if (d[a] != d[b]) return d[a] < d[b];
                         return a < b;
                     });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

double trimmed_mean(const std::vector<double>& d, double alpha) {
    const std::size_t k = trim_count(d.size(), alpha);
    const auto keep = smallest_k(d, k);
    double s = 0.0;
    for (std::size_t i : keep) s += d[i];
    return s / static_cast<double>(k);
}

}  // namespace

double chamfer(const PointCloud& p, const PointCloud& q) {
    p.validate();
    q.validate();
    const SpatialIndex qi(q);
    const SpatialIndex pi(p);
    return mean_all(nn_sq_dists(p, qi)) + mean_all(nn_sq_dists(q, pi));
}

double local_chamfer(const PointCloud& p, const PointCloud& q, double alpha) {
    if (!(alpha > 0.0) || !(alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
    p.validate();
    q.validate();
    const SpatialIndex qi(q);
    const SpatialIndex pi(p);
    return trimmed_mean(nn_sq_dists(p, qi), alpha) + trimmed_mean(nn_sq_dists(q, pi), alpha);
}

double projected_chamfer(const PointCloud& p, const PointCloud& q, Plane plane) {
    p.validate();
    q.validate();
    const SpatialIndex qi(q);
    const SpatialIndex pi(p);
    double fwd = 0.0;
    for (const auto& x : p.points) fwd += qi.nearest_projected(x, plane).sq_distance;
    double bwd = 0.0;
    for (const auto& y : q.points) bwd += pi.nearest_projected(y, plane).sq_distance;
    return fwd / static_cast<double>(p.size()) + bwd / static_cast<double>(q.size());
}

Correspondences associate(const PointCloud& transformed_source, const PointCloud& target,
                          const SpatialIndex& target_index, const ObjectiveConfig& cfg) {
    cfg.validate();
    const std::size_t np = transformed_source.size();
    const std::size_t nq = target.size();
    const SpatialIndex source_index(transformed_source);

    Correspondences corr;
    corr.fwd3.resize(np);
    std::vector<double> fwd_d(np);
    for (std::size_t i = 0; i < np; ++i) {
        const auto hit = target_index.nearest(transformed_source[i]);
        corr.fwd3[i] = hit.index;
        fwd_d[i] = hit.sq_distance;
    }
    corr.bwd3.resize(nq);
    std::vector<double> bwd_d(nq);
    for (std::size_t j = 0; j < nq; ++j) {
        const auto hit = source_index.nearest(target[j]);
        corr.bwd3[j] = hit.index;
        bwd_d[j] = hit.sq_distance;
    }
    corr.fwd_trim = smallest_k(fwd_d, trim_count(np, cfg.alpha));
    corr.bwd_trim = smallest_k(bwd_d, trim_count(nq, cfg.alpha));

    for (int pl = 0; pl < 3; ++pl) {
        const auto plane = static_cast<Plane>(pl);
        corr.fwd2[pl].resize(np);
        for (std::size_t i = 0; i < np; ++i) {
            corr.fwd2[pl][i] = target_index.nearest_projected(transformed_source[i], plane).index;
        }
        corr.bwd2[pl].resize(nq);
        for (std::size_t j = 0; j < nq; ++j) {
            corr.bwd2[pl][j] = source_index.nearest_projected(target[j], plane).index;
        }
    }
    return corr;
}

LossBreakdown fixed_correspondence_loss(const TransformParams& params, const PointCloud& source,
                                        const PointCloud& target, const Correspondences& corr,
                                        const ObjectiveConfig& cfg) {
    return fixed_correspondence_loss(realize_transform(params), source, target, corr, cfg);
}

LossBreakdown fixed_correspondence_loss(const RigidTransform& t, const PointCloud& source,
                                        const PointCloud& target, const Correspondences& corr,
                                        const ObjectiveConfig& cfg) {
    const PointCloud moved = apply_transform(source, t);

    LossBreakdown out;
    double fwd = 0.0;
    for (std::size_t i : corr.fwd_trim) fwd += sq_dist3(moved[i], target[corr.fwd3[i]]);
    double bwd = 0.0;
    for (std::size_t j : corr.bwd_trim) bwd += sq_dist3(moved[corr.bwd3[j]], target[j]);
    out.local_cd = fwd / static_cast<double>(corr.fwd_trim.size()) +
                   bwd / static_cast<double>(corr.bwd_trim.size());

    double* proj[3] = {&out.proj_xy, &out.proj_yz, &out.proj_xz};
    for (int pl = 0; pl < 3; ++pl) {
        const auto plane = static_cast<Plane>(pl);
        double f2 = 0.0;
        for (std::size_t i = 0; i < moved.size(); ++i) {
            f2 += sq_dist2(moved[i], target[corr.fwd2[pl][i]], plane);
        }
        double b2 = 0.0;
        for (std::size_t j = 0; j < target.size(); ++j) {
            b2 += sq_dist2(moved[corr.bwd2[pl][j]], target[j], plane);
        }
        *proj[pl] = f2 / static_cast<double>(moved.size()) + b2 / static_cast<double>(target.size());
    }
    out.total = out.local_cd + cfg.beta * (out.proj_xy + out.proj_yz + out.proj_xz);
    return out;
}

LossBreakdown total_loss(const TransformParams& params, const PointCloud& source,
                         const PointCloud& target, const SpatialIndex& target_index,
                         const ObjectiveConfig& cfg) {
    source.validate();
    target.validate();
    const PointCloud moved = apply_transform(source, realize_transform(params));
    const Correspondences corr = associate(moved, target, target_index, cfg);
    return fixed_correspondence_loss(params, source, target, corr, cfg);
}

GradientResult gradient_with_correspondences(const TransformParams& params,
                                             const PointCloud& source, const PointCloud& target,
                                             const Correspondences& corr,
                                             const ObjectiveConfig& cfg) {
    GradientResult res;
    res.loss = fixed_correspondence_loss(params, source, target, corr, cfg);

    const double vn = params.v.norm();
    const double un = params.u.norm();
    if (!(vn > 0.0)) throw std::invalid_argument("gradient: degenerate rotation axis");
    if (!(un > 0.0)) throw std::invalid_argument("gradient: degenerate translation direction");
    const Vec3 axis = params.v / vn;
    const Vec3 udir = params.u / un;
    const Mat3 rot = rodrigues(params.v, params.theta);
    const Vec3 trans = realize_translation(params);
    const std::size_t np = source.size();
    const std::size_t nq = target.size();

    // Per-source-point adjoints: d(total)/d(moved point i).
    std::vector<Vec3> adj(np, Vec3::Zero());
    const auto moved_pt = [&](std::size_t i) -> Vec3 { return rot * source[i] + trans; };

    const double wf = 1.0 / static_cast<double>(corr.fwd_trim.size());
    for (std::size_t i : corr.fwd_trim) {
        adj[i] += 2.0 * wf * (moved_pt(i) - target[corr.fwd3[i]]);
    }
    const double wb = 1.0 / static_cast<double>(corr.bwd_trim.size());
    for (std::size_t j : corr.bwd_trim) {
        const std::size_t i = corr.bwd3[j];
        adj[i] += 2.0 * wb * (moved_pt(i) - target[j]);
    }
    for (int pl = 0; pl < 3; ++pl) {
        const auto axes = plane_axes(static_cast<Plane>(pl));
        const double wf2 = cfg.beta / static_cast<double>(np);
        for (std::size_t i = 0; i < np; ++i) {
            const Vec3 m = moved_pt(i);
            const Vec3& t = target[corr.fwd2[pl][i]];
            for (int ax : axes) adj[i][ax] += 2.0 * wf2 * (m[ax] - t[ax]);
        }
        const double wb2 = cfg.beta / static_cast<double>(nq);
        for (std::size_t j = 0; j < nq; ++j) {
            const std::size_t i = corr.bwd2[pl][j];
            const Vec3 m = moved_pt(i);
            for (int ax : axes) adj[i][ax] += 2.0 * wb2 * (m[ax] - target[j][ax]);
        }
    }

    // Collapse to the two sufficient statistics: sum of adjoints (translation
    // path) and sum of adj * p^T (rotation path).
    Vec3 adj_sum = Vec3::Zero();
    Mat3 outer = Mat3::Zero();
    for (std::size_t i = 0; i < np; ++i) {
        adj_sum += adj[i];
        outer += adj[i] * source[i].transpose();
    }

    const double c = std::cos(params.theta);
    const double s = std::sin(params.theta);

    // theta: dR/dtheta = -sin I + sin n n^T + cos Skew(n)
    const Mat3 dr_dtheta =
        -s * Mat3::Identity() + s * (axis * axis.transpose()) + c * skew(axis);
    const double g_theta = dr_dtheta.cwiseProduct(outer).sum();

    // axis: sum_i J_n(p_i)^T adj_i with
    // J_n = (1-cos)(n p^T + (n.p) I) - sin Skew(p)
    const Vec3 cross_sum(outer(2, 1) - outer(1, 2),
                         outer(0, 2) - outer(2, 0),
                         outer(1, 0) - outer(0, 1));
    const Vec3 g_axis =
        (1.0 - c) * (outer.transpose() * axis + outer * axis) + s * cross_sum;
    const Vec3 g_v = (g_axis - axis * axis.dot(g_axis)) / vn;

    // translation direction and distance
    const double mag = translation_magnitude(params.d_u, params.d_max, params.mapping);
    const double dmag = translation_magnitude_deriv(params.d_u, params.d_max, params.mapping);
    const Vec3 g_u = (mag / un) * (adj_sum - udir * udir.dot(adj_sum));
    const double g_du = dmag * udir.dot(adj_sum);

    res.grad = {g_v.x(), g_v.y(), g_v.z(), g_theta, g_u.x(), g_u.y(), g_u.z(), g_du};
    return res;
}

GradientResult gradient(const TransformParams& params, const PointCloud& source,
                        const PointCloud& target, const SpatialIndex& target_index,
                        const ObjectiveConfig& cfg) {
    source.validate();
    target.validate();
    const PointCloud moved = apply_transform(source, realize_transform(params));
    const Correspondences corr = associate(moved, target, target_index, cfg);
    return gradient_with_correspondences(params, source, target, corr, cfg);
}

}  // namespace hybreg
