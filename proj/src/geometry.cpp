#include "hybreg/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace hybreg {

Vec3 PointCloud::centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : points) c += p;
    return c / static_cast<double>(points.size());
}

void PointCloud::validate() const {
    if (points.empty()) throw std::invalid_argument("point cloud is empty");
    for (const auto& p : points) {
        if (!p.allFinite()) throw std::invalid_argument("point cloud contains non-finite coordinates");
    }
}

bool RigidTransform::is_rotation(double tol) const {
    const Mat3 err = R.transpose() * R - Mat3::Identity();
    if (err.cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(R.determinant() - 1.0) <= tol;
}

Mat3 skew(const Vec3& v) {
    if (!v.allFinite()) throw std::invalid_argument("skew: non-finite input");
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

Mat3 rodrigues(const Vec3& v, double theta) {
    const double n = v.norm();
    if (!(n > 0.0) || !v.allFinite() || !std::isfinite(theta)) {
        throw std::invalid_argument("rodrigues: degenerate rotation axis");
    }
    const Vec3 a = v / n;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return c * Mat3::Identity() + (1.0 - c) * (a * a.transpose()) + s * skew(a);
}

double translation_magnitude(double d_u, double d_max, TranslationMapping mapping) {
    if (mapping == TranslationMapping::Sigmoid) {
        return d_max / (1.0 + std::exp(-d_u));
    }
    return 0.5 * d_max * (1.0 + std::sin(d_u));
}

double translation_magnitude_deriv(double d_u, double d_max, TranslationMapping mapping) {
    if (mapping == TranslationMapping::Sigmoid) {
        const double s = 1.0 / (1.0 + std::exp(-d_u));
        return d_max * s * (1.0 - s);
    }
    return 0.5 * d_max * std::cos(d_u);
}

double translation_preimage(double d, double d_max, TranslationMapping mapping) {
    if (!(d_max > 0.0)) throw std::invalid_argument("translation_preimage: d_max must be positive");
    const double lo = 1e-6 * d_max;
    d = std::clamp(d, lo, d_max - lo);
    if (mapping == TranslationMapping::Sigmoid) {
        const double p = d / d_max;
        return std::log(p / (1.0 - p));
    }
    return std::asin(2.0 * d / d_max - 1.0);
}

Vec3 realize_translation(const TransformParams& params) {
    if (!(params.d_max > 0.0)) throw std::invalid_argument("realize_translation: d_max must be positive");
    const double n = params.u.norm();
    if (!(n > 0.0) || !params.u.allFinite()) {
        throw std::invalid_argument("realize_translation: degenerate translation direction");
    }
    const double m = translation_magnitude(params.d_u, params.d_max, params.mapping);
    return m * (params.u / n);
}

RigidTransform realize_transform(const TransformParams& params) {
    return {rodrigues(params.v, params.theta), realize_translation(params)};
}

Mat3 realize_alt_rotation(const AltRotationParams& params) {
    if (params.kind == AltRotationParams::Kind::EulerXYZ) {
        const Mat3 rx = rodrigues(Vec3::UnitX(), params.values[0]);
        const Mat3 ry = rodrigues(Vec3::UnitY(), params.values[1]);
        const Mat3 rz = rodrigues(Vec3::UnitZ(), params.values[2]);
        return rz * ry * rx;
    }
    const Vec3 a(params.values[0], params.values[1], params.values[2]);
    const Vec3 b(params.values[3], params.values[4], params.values[5]);
    const double na = a.norm();
    if (!(na > 0.0)) throw std::invalid_argument("realize_alt_rotation: degenerate 6-D frame");
    const Vec3 c0 = a / na;
    const Vec3 b_orth = b - b.dot(c0) * c0;
    const double nb = b_orth.norm();
    if (!(nb > 1e-12 * b.norm()) || !(b.norm() > 0.0)) {
        throw std::invalid_argument("realize_alt_rotation: degenerate 6-D frame");
    }
    const Vec3 c1 = b_orth / nb;
    Mat3 r;
    r.col(0) = c0;
    r.col(1) = c1;
    r.col(2) = c0.cross(c1);
    return r;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const auto& p : cloud.points) out.points.push_back(t.apply(p));
    return out;
}

}  // namespace hybreg
