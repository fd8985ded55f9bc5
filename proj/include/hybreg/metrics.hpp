#pragma once

#include "hybreg/geometry.hpp"
#include "hybreg/solver.hpp"

namespace hybreg {

struct PairEvaluation {
    double rot_error_deg = 0.0;
    double trans_error = 0.0;
    double mse = 0.0;
    double cd = 0.0;
    double fscore = 0.0;
};

struct AggregateSummary {
    std::size_t count = 0;
    PairEvaluation mean;
    PairEvaluation median;  // lower-median convention
    double recall = 0.0;    // fraction with rot < recall_rot_deg and trans < recall_trans
    double recall_rot_deg = 5.0;
    double recall_trans = 0.05;
};

/// Isotropic geodesic rotation error in degrees:
/// rad2deg(arccos((tr(R_gt^-1 R_pred) - 1) / 2)), arccos argument clamped.
/// Throws std::invalid_argument when either input is not a rotation (1e-6).
double rotation_error(const Mat3& r_gt, const Mat3& r_pred);

double translation_error(const Vec3& t_gt, const Vec3& t_pred);

/// Combined MSE metric: trans_error + deg2rad(rot_error_deg).
double mse_error(double rot_error_deg, double trans_error);

/// Harmonic mean of precision (fraction of P within threshold of Q) and
/// recall (fraction of Q within threshold of P); 0 when both are 0.
double fscore(const PointCloud& p, const PointCloud& q, double threshold);

/// The "@1%" threshold: 0.01 * diagonal of the joint bounding box.
double fscore_threshold_1pct(const PointCloud& p, const PointCloud& q);

PairEvaluation evaluate_pair(const RegistrationResult& result, const RigidTransform& gt,
                             const PointCloud& source, const PointCloud& target);

PairEvaluation evaluate_pair(const RigidTransform& pred, const RigidTransform& gt,
                             const PointCloud& source, const PointCloud& target);

AggregateSummary aggregate(const std::vector<PairEvaluation>& evals, double recall_rot_deg = 5.0,
                           double recall_trans = 0.05);

}  // namespace hybreg
