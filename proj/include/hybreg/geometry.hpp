#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <vector>

namespace hybreg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Ordered set of 3D points. Point order is stable; indices are meaningful
/// for correspondence reporting.
struct PointCloud {
    std::vector<Vec3> points;

    PointCloud() = default;
    explicit PointCloud(std::vector<Vec3> pts) : points(std::move(pts)) {}

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    const Vec3& operator[](std::size_t i) const { return points[i]; }
    Vec3& operator[](std::size_t i) { return points[i]; }

    Vec3 centroid() const;

    /// Throws std::invalid_argument if empty or any coordinate is non-finite.
    void validate() const;
};

/// Rotation matrix + translation vector.
struct RigidTransform {
    Mat3 R = Mat3::Identity();
    Vec3 T = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return R * p + T; }
    RigidTransform inverse() const { return {R.transpose(), -(R.transpose() * T)}; }

    /// True iff R is orthonormal with det = 1 within `tol` per entry.
    bool is_rotation(double tol = 1e-9) const;
};

enum class TranslationMapping { Sigmoid, Sin };

/// Unconstrained optimization variables [v, theta, u, d_u] plus the
/// translation bound d_max. v and u are free (unnormalized) directions,
/// normalized at realization time.
struct TransformParams {
    Vec3 v = Vec3::UnitZ();       // rotation direction, free scale
    double theta = 0.0;           // rotation angle, radians
    Vec3 u = Vec3::UnitX();       // translation direction, free scale
    double d_u = 0.0;             // unconstrained distance variable
    double d_max = 0.5;           // translation bound, > 0
    TranslationMapping mapping = TranslationMapping::Sin;
};

/// Alternative rotation parameterizations kept for comparison runs.
struct AltRotationParams {
    enum class Kind { EulerXYZ, SixD };
    Kind kind = Kind::EulerXYZ;
    // 3 values (radians) for EulerXYZ, 6 for the continuous 6-D representation.
    std::array<double, 6> values{};
};

/// Antisymmetric matrix of v; skew(v) * w == v x w.
Mat3 skew(const Vec3& v);

/// Rotation by theta about axis v/|v| (right-hand rule).
/// Throws std::invalid_argument when |v| == 0.
Mat3 rodrigues(const Vec3& v, double theta);

/// Bounded translation from the unconstrained variables:
///   Sigmoid: T = d_max * sigmoid(d_u) * u/|u|
///   Sin:     T = d_max/2 * (1 + sin(d_u)) * u/|u|
/// |T| <= d_max for all finite d_u.
Vec3 realize_translation(const TransformParams& params);

/// The smooth distance mapping m(d_u) in [0, d_max] and its derivative.
double translation_magnitude(double d_u, double d_max, TranslationMapping mapping);
double translation_magnitude_deriv(double d_u, double d_max, TranslationMapping mapping);

/// Preimage of a distance d in (0, d_max) under the mapping.
double translation_preimage(double d, double d_max, TranslationMapping mapping);

RigidTransform realize_transform(const TransformParams& params);

/// Realizes EulerXYZ (R = Rz*Ry*Rx) or the 6-D Gram-Schmidt construction.
/// Throws std::invalid_argument when the 6-D vectors are parallel.
Mat3 realize_alt_rotation(const AltRotationParams& params);

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);

}  // namespace hybreg
