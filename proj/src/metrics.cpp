#include "hybreg/metrics.hpp"

#include "hybreg/nn_index.hpp"
#include "hybreg/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hybreg {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

void require_rotation(const Mat3& r, const char* what) {
    const RigidTransform t{r, Vec3::Zero()};
    if (!t.is_rotation(1e-6)) {
        throw std::invalid_argument(std::string(what) + ": input is not a rotation matrix");
    }
}

double lower_median(std::vector<double> v) {
    const std::size_t k = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + k, v.end());
    return v[k];
}

}  // namespace

double rotation_error(const Mat3& r_gt, const Mat3& r_pred) {
    require_rotation(r_gt, "rotation_error");
    require_rotation(r_pred, "rotation_error");
    const double tr = (r_gt.transpose() * r_pred).trace();
    const double c = std::clamp(0.5 * (tr - 1.0), -1.0, 1.0);
    return kRadToDeg * std::acos(c);
}

double translation_error(const Vec3& t_gt, const Vec3& t_pred) {
    if (!t_gt.allFinite() || !t_pred.allFinite()) {
        throw std::invalid_argument("translation_error: non-finite input");
    }
    return (t_gt - t_pred).norm();
}

double mse_error(double rot_error_deg, double trans_error) {
    return trans_error + rot_error_deg / kRadToDeg;
}

double fscore(const PointCloud& p, const PointCloud& q, double threshold) {
    if (!(threshold > 0.0)) throw std::invalid_argument("fscore: threshold must be > 0");
    p.validate();
    q.validate();
    const double t2 = threshold * threshold;
    const SpatialIndex qi(q);
    const SpatialIndex pi(p);
    std::size_t hits_p = 0;
    for (const auto& x : p.points) {
        if (qi.nearest(x).sq_distance <= t2) ++hits_p;
    }
    std::size_t hits_q = 0;
    for (const auto& y : q.points) {
        if (pi.nearest(y).sq_distance <= t2) ++hits_q;
    }
    const double precision = static_cast<double>(hits_p) / static_cast<double>(p.size());
    const double recall = static_cast<double>(hits_q) / static_cast<double>(q.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double fscore_threshold_1pct(const PointCloud& p, const PointCloud& q) {
    Vec3 lo = p.points.front();
    Vec3 hi = lo;
    const auto absorb = [&](const PointCloud& c) {
        for (const auto& pt : c.points) {
            lo = lo.cwiseMin(pt);
            hi = hi.cwiseMax(pt);
        }
    };
    absorb(p);
    absorb(q);
    return 0.01 * (hi - lo).norm();
}

PairEvaluation evaluate_pair(const RigidTransform& pred, const RigidTransform& gt,
                             const PointCloud& source, const PointCloud& target) {
    (void)target;
    PairEvaluation e;
    e.rot_error_deg = rotation_error(gt.R, pred.R);
    e.trans_error = translation_error(gt.T, pred.T);
    e.mse = mse_error(e.rot_error_deg, e.trans_error);
    const PointCloud gt_moved = apply_transform(source, gt);
    const PointCloud pred_moved = apply_transform(source, pred);
    e.cd = chamfer(gt_moved, pred_moved);
    e.fscore = fscore(gt_moved, pred_moved, fscore_threshold_1pct(gt_moved, pred_moved));
    return e;
}

PairEvaluation evaluate_pair(const RegistrationResult& result, const RigidTransform& gt,
                             const PointCloud& source, const PointCloud& target) {
    return evaluate_pair(result.transform, gt, source, target);
}

AggregateSummary aggregate(const std::vector<PairEvaluation>& evals, double recall_rot_deg,
                           double recall_trans) {
    if (evals.empty()) throw std::invalid_argument("aggregate: empty evaluation list");
    AggregateSummary s;
    s.count = evals.size();
    s.recall_rot_deg = recall_rot_deg;
    s.recall_trans = recall_trans;

    std::vector<double> rot, trans, mse, cd, fs;
    std::size_t recalled = 0;
    for (const auto& e : evals) {
        rot.push_back(e.rot_error_deg);
        trans.push_back(e.trans_error);
        mse.push_back(e.mse);
        cd.push_back(e.cd);
        fs.push_back(e.fscore);
        if (e.rot_error_deg < recall_rot_deg && e.trans_error < recall_trans) ++recalled;
    }
    const auto mean = [](const std::vector<double>& v) {
        double t = 0.0;
        for (double x : v) t += x;
        return t / static_cast<double>(v.size());
    };
    s.mean = {mean(rot), mean(trans), mean(mse), mean(cd), mean(fs)};
    s.median = {lower_median(rot), lower_median(trans), lower_median(mse), lower_median(cd),
                lower_median(fs)};
    s.recall = static_cast<double>(recalled) / static_cast<double>(evals.size());
    return s;
}

}  // namespace hybreg
