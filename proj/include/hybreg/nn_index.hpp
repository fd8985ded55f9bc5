#pragma once

#include "hybreg/geometry.hpp"

#include <cstdint>

namespace hybreg {

enum class Plane { XY = 0, YZ = 1, XZ = 2 };

struct NearestHit {
    std::size_t index = 0;       // index into the source cloud
    double sq_distance = 0.0;    // exact squared distance
};

namespace detail {

/// Balanced median-split kd-tree over fixed-dimension points. Exact search;
/// ties broken by smallest original point index.
template <int Dim>
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(std::vector<std::array<double, Dim>> pts);

    NearestHit nearest(const std::array<double, Dim>& q) const;
    bool empty() const { return pts_.empty(); }

private:
    struct Node {
        std::uint32_t point = 0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::uint8_t axis = 0;
    };

    std::int32_t build(std::uint32_t* begin, std::uint32_t* end, int depth);
    void search(std::int32_t node, const std::array<double, Dim>& q,
                double& best, std::size_t& best_idx) const;

    std::vector<std::array<double, Dim>> pts_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

}  // namespace detail

/// Static exact nearest-neighbor index over a point cloud: one 3D tree plus
/// three 2D trees over the xy, yz, xz coordinate-plane projections.
/// Immutable after build; concurrent queries are safe.
class SpatialIndex {
public:
    /// Throws std::invalid_argument on an empty cloud.
    explicit SpatialIndex(const PointCloud& cloud);

    std::size_t size() const { return size_; }

    /// Exact 3D nearest neighbor; ties broken by smallest point index.
    /// Throws std::invalid_argument on a non-finite query.
    NearestHit nearest(const Vec3& q) const;

    /// Nearest neighbor under the 2D metric of the chosen coordinate plane.
    NearestHit nearest_projected(const Vec3& q, Plane plane) const;

private:
    std::size_t size_ = 0;
    detail::KdTree<3> tree3d_;
    std::array<detail::KdTree<2>, 3> tree2d_;
};

/// The two coordinates kept by a plane projection (indices into xyz).
constexpr std::array<int, 2> plane_axes(Plane plane) {
    switch (plane) {
        case Plane::XY: return {0, 1};
        case Plane::YZ: return {1, 2};
        default: return {0, 2};
    }
}

}  // namespace hybreg
