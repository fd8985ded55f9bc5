#include "hybreg/nn_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace hybreg {
namespace detail {

template <int Dim>
KdTree<Dim>::KdTree(std::vector<std::array<double, Dim>> pts) : pts_(std::move(pts)) {
    if (pts_.empty()) return;
    std::vector<std::uint32_t> order(pts_.size());
    std::iota(order.begin(), order.end(), 0u);
    nodes_.reserve(pts_.size());
    root_ = build(order.data(), order.data() + order.size(), 0);
}

template <int Dim>
std::int32_t KdTree<Dim>::build(std::uint32_t* begin, std::uint32_t* end, int depth) {
    if (begin == end) return -1;
    const int axis = depth % Dim;
    std::uint32_t* mid = begin + (end - begin) / 2;
    // Tie-break on index keeps the build deterministic for duplicate coords.
    std::nth_element(begin, mid, end, [&](std::uint32_t a, std::uint32_t b) {
        if (pts_[a][axis] != pts_[b][axis]) return pts_[a][axis] < pts_[b][axis];
        return a < b;
    });
    const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({*mid, -1, -1, static_cast<std::uint8_t>(axis)});
    const std::int32_t left = build(begin, mid, depth + 1);
    const std::int32_t right = build(mid + 1, end, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

template <int Dim>
void KdTree<Dim>::search(std::int32_t node, const std::array<double, Dim>& q,
                         double& best, std::size_t& best_idx) const {
    if (node < 0) return;
    const Node& n = nodes_[node];
    const auto& p = pts_[n.point];

    double d2 = 0.0;
    for (int k = 0; k < Dim; ++k) {
        const double d = q[k] - p[k];
        d2 += d * d;
    }
    if (d2 < best || (d2 == best && n.point < best_idx)) {
        best = d2;
        best_idx = n.point;
    }

    const double diff = q[n.axis] - p[n.axis];
    const std::int32_t near_side = diff < 0.0 ? n.left : n.right;
    const std::int32_t far_side = diff < 0.0 ? n.right : n.left;
    search(near_side, q, best, best_idx);
    // <= so equal-distance points on the far side can win the index tie-break.
    if (diff * diff <= best) search(far_side, q, best, best_idx);
}

template <int Dim>
NearestHit KdTree<Dim>::nearest(const std::array<double, Dim>& q) const {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = std::numeric_limits<std::size_t>::max();
    search(root_, q, best, best_idx);
    return {best_idx, best};
}

template class KdTree<2>;
template class KdTree<3>;

}  // namespace detail

SpatialIndex::SpatialIndex(const PointCloud& cloud) {
    cloud.validate();
    size_ = cloud.size();

    std::vector<std::array<double, 3>> pts3(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        pts3[i] = {cloud[i].x(), cloud[i].y(), cloud[i].z()};
    }
    tree3d_ = detail::KdTree<3>(std::move(pts3));

    for (int pl = 0; pl < 3; ++pl) {
        const auto axes = plane_axes(static_cast<Plane>(pl));
        std::vector<std::array<double, 2>> pts2(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            pts2[i] = {cloud[i][axes[0]], cloud[i][axes[1]]};
        }
        tree2d_[pl] = detail::KdTree<2>(std::move(pts2));
    }
}

NearestHit SpatialIndex::nearest(const Vec3& q) const {
    if (!q.allFinite()) throw std::invalid_argument("nearest: non-finite query");
    return tree3d_.nearest({q.x(), q.y(), q.z()});
}

NearestHit SpatialIndex::nearest_projected(const Vec3& q, Plane plane) const {
    if (!q.allFinite()) throw std::invalid_argument("nearest_projected: non-finite query");
    const auto axes = plane_axes(plane);
    return tree2d_[static_cast<int>(plane)].nearest({q[axes[0]], q[axes[1]]});
}

}  // namespace hybreg
