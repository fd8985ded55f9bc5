// Acceptance gate: one criterion per invocation (argv[1] = 1..8), or all
// when run without arguments. Each criterion prints a single pass/fail line
// with its pinned tolerances and measured runtime.

#include "hybreg/datagen.hpp"
#include "hybreg/io.hpp"
#include "hybreg/metrics.hpp"
#include "hybreg/objective.hpp"
#include "hybreg/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hybreg;

namespace {

constexpr double kPi = 3.14159265358979323846;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double extent = 1.0) {
    std::uniform_real_distribution<double> u(-extent, extent);
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
    return c;
}

Vec3 random_unit(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec3 v;
    do {
        v = Vec3(u(rng), u(rng), u(rng));
    } while (v.norm() < 1e-3 || v.norm() > 1.0);
    return v.normalized();
}

double lower_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

// ---------------------------------------------------------------------------
// 1. Metric-formula fidelity: published rot/trans compositions within 5e-4.
// ---------------------------------------------------------------------------
bool criterion_1(std::string& detail) {
    struct Row {
        double rot_deg, trans, published;
    };
    const Row rows[] = {{2.92, 0.021, 0.072},
                        {2.97, 0.026, 0.078},
                        {2.5008, 0.0305, 0.0742},
                        {3.2183, 0.0311, 0.0872}};
    double worst = 0.0;
    for (const Row& r : rows)
        worst = std::max(worst, std::abs(mse_error(r.rot_deg, r.trans) - r.published));
    std::ostringstream os;
    os << "max |mse - published| = " << worst << " (limit 5e-4)";
    detail = os.str();
    return worst < 5e-4;
}

// ---------------------------------------------------------------------------
// 2. Analytic gradient vs central finite differences, frozen correspondences.
// ---------------------------------------------------------------------------
bool criterion_2(std::string& detail) {
    std::mt19937_64 rng(20240101);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> ang(0.05, 2.8);
    std::uniform_int_distribution<std::size_t> size_dist(64, 256);

    int cases = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 110; ++trial) {
        const PointCloud p = random_cloud(rng, size_dist(rng));
        const PointCloud q = random_cloud(rng, size_dist(rng));
        const SpatialIndex qi(q);

        ObjectiveConfig cfg;
        cfg.alpha = 0.4 + 0.6 * std::abs(u(rng));
        cfg.beta = std::abs(u(rng)) * 0.3;
        cfg.d_max = 0.3 + 0.4 * std::abs(u(rng));
        cfg.mapping = trial % 2 ? TranslationMapping::Sin : TranslationMapping::Sigmoid;

        TransformParams params;
        params.v = Vec3(u(rng), u(rng), u(rng));
        if (params.v.norm() < 0.2) params.v = Vec3::UnitZ();
        params.theta = ang(rng);
        params.u = Vec3(u(rng), u(rng), u(rng));
        if (params.u.norm() < 0.2) params.u = Vec3::UnitX();
        params.d_u = u(rng);
        params.mapping = cfg.mapping;
        params.d_max = cfg.d_max;

        const PointCloud moved = apply_transform(p, realize_transform(params));
        const Correspondences corr = associate(moved, q, qi, cfg);
        const auto res = gradient_with_correspondences(params, p, q, corr, cfg);

        const double h = 1e-5;
        for (int k = 0; k < 8; ++k) {
            TransformParams lo = params, hi = params;
            const auto bump = [&](TransformParams& t, double delta) {
                if (k < 3) t.v[k] += delta;
                else if (k == 3) t.theta += delta;
                else if (k < 7) t.u[k - 4] += delta;
                else t.d_u += delta;
            };
            bump(lo, -h);
            bump(hi, h);
            const double fd = (fixed_correspondence_loss(hi, p, q, corr, cfg).total -
                               fixed_correspondence_loss(lo, p, q, corr, cfg).total) /
                              (2 * h);
            const double denom = std::max({std::abs(fd), std::abs(res.grad[k]), 1e-7});
            worst = std::max(worst, std::abs(res.grad[k] - fd) / denom);
        }
        ++cases;
    }
    std::ostringstream os;
    os << cases << " cases, worst component relative error " << worst << " (limit 1e-4)";
    detail = os.str();
    return cases >= 100 && worst < 1e-4;
}

// ---------------------------------------------------------------------------
// 3. Chamfer family equals brute-force double loops exactly.
// ---------------------------------------------------------------------------
namespace brute {

double sq3(const Vec3& a, const Vec3& b) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double d = a[k] - b[k];
        d2 += d * d;
    }
    return d2;
}

std::vector<double> nn_dists(const PointCloud& from, const PointCloud& to) {
    std::vector<double> out(from.size());
    for (std::size_t i = 0; i < from.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < to.size(); ++j) best = std::min(best, sq3(from[i], to[j]));
        out[i] = best;
    }
    return out;
}

double chamfer(const PointCloud& p, const PointCloud& q) {
    const auto fwd = nn_dists(p, q);
    const auto bwd = nn_dists(q, p);
    double a = 0.0, b = 0.0;
    for (double d : fwd) a += d;
    for (double d : bwd) b += d;
    return a / static_cast<double>(p.size()) + b / static_cast<double>(q.size());
}

double trimmed_side(std::vector<double> d, double alpha) {
    const std::size_t k = trim_count(d.size(), alpha);
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (d[a] != d[b]) return d[a] < d[b];
        return a < b;
    });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    double s = 0.0;
    for (std::size_t i : idx) s += d[i];
    return s / static_cast<double>(k);
}

double local_chamfer(const PointCloud& p, const PointCloud& q, double alpha) {
    return trimmed_side(nn_dists(p, q), alpha) + trimmed_side(nn_dists(q, p), alpha);
}

double projected_chamfer(const PointCloud& p, const PointCloud& q, Plane plane) {
    const auto axes = plane_axes(plane);
    const auto side = [&](const PointCloud& from, const PointCloud& to) {
        double s = 0.0;
        for (std::size_t i = 0; i < from.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < to.size(); ++j) {
                double d2 = 0.0;
                for (int ax : axes) {
                    const double d = from[i][ax] - to[j][ax];
                    d2 += d * d;
                }
                best = std::min(best, d2);
            }
            s += best;
        }
        return s / static_cast<double>(from.size());
    };
    return side(p, q) + side(q, p);
}

}  // namespace brute

bool criterion_3(std::string& detail) {
    std::mt19937_64 rng(30303);
    std::uniform_int_distribution<std::size_t> size_dist(1, 64);
    std::uniform_real_distribution<double> alpha_dist(0.05, 1.0);
    int instances = 0, mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const PointCloud p = random_cloud(rng, size_dist(rng));
        const PointCloud q = random_cloud(rng, size_dist(rng));
        const double alpha = alpha_dist(rng);
        if (chamfer(p, q) != brute::chamfer(p, q)) ++mismatches;
        if (local_chamfer(p, q, alpha) != brute::local_chamfer(p, q, alpha)) ++mismatches;
        for (auto plane : {Plane::XY, Plane::YZ, Plane::XZ})
            if (projected_chamfer(p, q, plane) != brute::projected_chamfer(p, q, plane))
                ++mismatches;
        ++instances;
    }
    std::ostringstream os;
    os << instances << " instances, " << mismatches << " exact mismatches (limit 0)";
    detail = os.str();
    return instances == 200 && mismatches == 0;
}

// ---------------------------------------------------------------------------
// 4. Rotation algebra properties over 1000 random draws.
// ---------------------------------------------------------------------------
bool criterion_4(std::string& detail) {
    std::mt19937_64 rng(40404);
    std::uniform_real_distribution<double> ang(1e-3, kPi - 1e-3);
    std::uniform_real_distribution<double> scale(0.1, 10.0);
    double worst_ortho = 0.0, worst_det = 0.0, worst_inv = 0.0, worst_scale = 0.0,
           worst_angle = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec3 axis = random_unit(rng);
        const double theta = ang(rng);
        const Mat3 r = rodrigues(axis, theta);
        worst_ortho = std::max(worst_ortho,
                               (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff());
        worst_det = std::max(worst_det, std::abs(r.determinant() - 1.0));
        worst_inv = std::max(worst_inv,
                             (r * rodrigues(axis, -theta) - Mat3::Identity()).cwiseAbs().maxCoeff());
        worst_scale = std::max(worst_scale,
                               (rodrigues(axis * scale(rng), theta) - r).cwiseAbs().maxCoeff());
        const Mat3 base = rodrigues(random_unit(rng), ang(rng));
        worst_angle = std::max(
            worst_angle,
            std::abs(rotation_error(base, base * r) - theta * 180.0 / kPi));
    }
    const bool ok = worst_ortho < 1e-12 && worst_det < 1e-12 && worst_inv < 1e-12 &&
                    worst_scale < 1e-12 && worst_angle < 1e-6;
    std::ostringstream os;
    os << "1000 draws: ortho " << worst_ortho << ", det " << worst_det << ", inverse "
       << worst_inv << ", scale-invariance " << worst_scale
       << " (limits 1e-12); angle recovery " << worst_angle << " deg (limit 1e-6)";
    detail = os.str();
    return ok;
}

// ---------------------------------------------------------------------------
// 5. Self-registration: exact rigid copies, rotations in [0, 45 deg].
// ---------------------------------------------------------------------------
bool criterion_5(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> rot_err, trans_err;
    for (int i = 0; i < 50; ++i) {
        PairSpec spec;
        spec.shape = ShapeKind::Composite;
        spec.n_points = 128;
        spec.seed = 500 + static_cast<std::uint64_t>(i);
        const PointCloud source = sample_shape(spec);

        std::mt19937_64 rng(9000 + static_cast<std::uint64_t>(i));
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::uniform_real_distribution<double> ang(0.0, kPi / 4.0);
        RigidTransform gt;
        gt.R = rodrigues(random_unit(rng), ang(rng));
        Vec3 t(u(rng), u(rng), u(rng));
        gt.T = 0.35 * t / std::max(1.0, t.norm());
        const PointCloud target = apply_transform(source, gt);

        ObjectiveConfig obj;
        SolverConfig cfg;
        cfg.n_directions = 32;
        cfg.n_angles = 16;
        cfg.max_iters = 150;
        cfg.seed = 70 + static_cast<std::uint64_t>(i);
        cfg.n_threads = 1;
        cfg.early_stop_loss = default_loss_threshold(target, obj, cfg.seed);
        const RegistrationResult res = register_clouds(source, target, obj, cfg);
        const PairEvaluation ev = evaluate_pair(res, gt, source, target);
        rot_err.push_back(ev.rot_error_deg);
        trans_err.push_back(ev.trans_error);
    }
    const double med_rot = lower_median(rot_err);
    const double med_trans = lower_median(trans_err);
    const double elapsed = seconds_since(t0);
    std::ostringstream os;
    os << "50 pairs (32x16x150): median rot " << med_rot << " deg (limit 0.5), median trans "
       << med_trans << " (limit 1e-3), " << elapsed << " s (limit 300)";
    detail = os.str();
    return med_rot < 0.5 && med_trans < 1e-3 && elapsed < 300.0;
}

// ---------------------------------------------------------------------------
// 6. Partial benchmark: 200 pairs, overlap >= 0.6, rotation mix 4:1.
// ---------------------------------------------------------------------------
bool criterion_6(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> rot_err, trans_err;
    int hits = 0;
    for (int i = 0; i < 200; ++i) {
        PairSpec spec;
        spec.shape = ShapeKind::Composite;
        spec.n_points = 192;
        spec.min_overlap = 0.6;
        spec.rot_level = (i % 5 == 4) ? RotLevel::Unrestricted : RotLevel::Restricted;
        spec.seed = 1000 + static_cast<std::uint64_t>(i);
        const LabeledPair pair = generate_pair(spec);

        ObjectiveConfig obj;
        SolverConfig cfg;
        cfg.n_directions = 16;
        cfg.n_angles = 8;
        cfg.seed = 7 + static_cast<std::uint64_t>(i);
        cfg.n_threads = 1;
        cfg.loss_threshold = 1.2e-2;
        cfg.early_stop_loss = 1.2e-2;
        const RegistrationResult res = register_clouds(pair.source, pair.target, obj, cfg);
        const PairEvaluation ev = evaluate_pair(res, pair.gt, pair.source, pair.target);
        rot_err.push_back(ev.rot_error_deg);
        trans_err.push_back(ev.trans_error);
        if (ev.rot_error_deg < 5.0 && ev.trans_error < 0.05) ++hits;
    }
    const double med_rot = lower_median(rot_err);
    const double med_trans = lower_median(trans_err);
    const double recall = hits / 200.0;
    const double elapsed = seconds_since(t0);
    std::ostringstream os;
    os << "200 pairs: median rot " << med_rot << " deg (limit 5), median trans " << med_trans
       << " (limit 0.05), recall(5 deg, 0.05) " << recall << " (limit 0.7), " << elapsed
       << " s (limit 1800)";
    detail = os.str();
    return med_rot <= 5.0 && med_trans <= 0.05 && recall >= 0.7 && elapsed <= 1800.0;
}

// ---------------------------------------------------------------------------
// 7. Ablation directions on an unrestricted-rotation set.
// ---------------------------------------------------------------------------
bool criterion_7(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<LabeledPair> pairs;
    for (int i = 0; i < 20; ++i) {
        PairSpec spec;
        spec.shape = ShapeKind::Composite;
        spec.n_points = 192;
        spec.min_overlap = 0.6;
        spec.rot_level = RotLevel::Unrestricted;
        spec.seed = 3000 + static_cast<std::uint64_t>(i);
        pairs.push_back(generate_pair(spec));
    }

    const auto run = [&](auto mod) {
        std::vector<double> rot, trans;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            ObjectiveConfig obj;
            SolverConfig cfg;
            cfg.n_directions = 16;
            cfg.n_angles = 8;
            cfg.n_threads = 1;
            cfg.loss_threshold = 1.2e-2;
            cfg.early_stop_loss = 1.2e-2;
            cfg.seed = 7 + static_cast<std::uint64_t>(i);
            mod(cfg, obj);
            const RegistrationResult res =
                register_clouds(pairs[i].source, pairs[i].target, obj, cfg);
            const PairEvaluation ev = evaluate_pair(res, pairs[i].gt, pairs[i].source,
                                                    pairs[i].target);
            rot.push_back(ev.rot_error_deg);
            trans.push_back(ev.trans_error);
        }
        const double mean_rot = std::accumulate(rot.begin(), rot.end(), 0.0) / rot.size();
        const double mean_trans = std::accumulate(trans.begin(), trans.end(), 0.0) / trans.size();
        return std::tuple<double, double, double>(mean_rot, lower_median(rot), mean_trans);
    };

    const auto [full_mean, full_median, full_trans] = run([](SolverConfig&, ObjectiveConfig&) {});
    // Strategies off: the escalation threshold is unreachable, so only the
    // base [0, pi/4] interval is ever searched.
    const auto [nostrat_mean, nostrat_median, nostrat_trans] =
        run([](SolverConfig& c, ObjectiveConfig&) { c.loss_threshold = 1e30; });
    const auto [noproj_mean, noproj_median, noproj_trans] =
        run([](SolverConfig&, ObjectiveConfig& o) { o.beta = 0.0; });
    // Euler baseline: a standalone method without theta-interval escalation.
    const auto [euler_mean, euler_median, euler_trans] = run([](SolverConfig& c,
                                                                ObjectiveConfig&) {
        c.rotation_param = RotationParameterization::EulerXYZ;
        c.angle_intervals = {{0.0, kPi}};
    });

    const bool strat_ok = nostrat_mean >= 2.0 * full_mean;
    const bool proj_ok = noproj_trans > full_trans;
    const bool euler_ok = euler_median > full_median;
    const double elapsed = seconds_since(t0);
    std::ostringstream os;
    os << "20 pairs: mean rot full " << full_mean << " vs no-strategies " << nostrat_mean
       << " (need >= 2x); mean trans full " << full_trans << " vs no-projected " << noproj_trans
       << " (need higher); median rot hybrid " << full_median << " vs euler " << euler_median
       << " (need higher); " << elapsed << " s (limit 2700)";
    detail = os.str();
    return strat_ok && proj_ok && euler_ok && elapsed <= 2700.0;
}

// ---------------------------------------------------------------------------
// 8. Determinism: benchmark pipeline gives byte-identical reports at any
//    parallelism degree and across repeats.
// ---------------------------------------------------------------------------
std::string run_benchmark_once(const fs::path& dir, int n_threads) {
    fs::create_directories(dir);
    PairManifest manifest;
    std::vector<LabeledPair> pairs;
    for (int i = 0; i < 6; ++i) {
        PairSpec spec;
        spec.shape = static_cast<ShapeKind>(i % 5);
        spec.n_points = 128;
        spec.min_overlap = 0.5;
        spec.rot_level = (i % 5 == 4) ? RotLevel::Unrestricted : RotLevel::Restricted;
        spec.seed = 8800 + static_cast<std::uint64_t>(i);
        pairs.push_back(generate_pair(spec));

        ManifestPair entry;
        entry.id = "pair_" + std::to_string(i);
        entry.source_path = entry.id + "_source.xyz";
        entry.target_path = entry.id + "_target.xyz";
        entry.gt = pairs.back().gt;
        entry.rot_level = pairs.back().rot_level;
        entry.overlap = pairs.back().overlap;
        write_cloud(pairs.back().source, dir / entry.source_path);
        write_cloud(pairs.back().target, dir / entry.target_path);
        manifest.pairs.push_back(std::move(entry));
    }
    write_manifest(manifest, dir / "manifest.json");

    RunReport report;
    report.config = {{"n_threads", std::to_string(n_threads)}};
    std::vector<PairEvaluation> evals;
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        ObjectiveConfig obj;
        SolverConfig cfg;
        cfg.n_directions = 8;
        cfg.n_angles = 8;
        cfg.seed = 99 + static_cast<std::uint64_t>(i);
        cfg.n_threads = n_threads;
        cfg.loss_threshold = 1.2e-2;
        cfg.early_stop_loss = 1.2e-2;
        const RegistrationResult res = register_clouds(pairs[i].source, pairs[i].target, obj, cfg);
        Prediction pred;
        pred.id = manifest.pairs[i].id;
        pred.transform = res.transform;
        pred.final_loss = res.final_loss;
        pred.restarts_used = res.restarts_used;
        pred.intervals_visited = res.intervals_visited;
        preds.push_back(pred);

        ReportPair row;
        row.id = pred.id;
        row.eval = evaluate_pair(res, pairs[i].gt, pairs[i].source, pairs[i].target);
        row.restarts_used = res.restarts_used;
        evals.push_back(row.eval);
        report.pairs.push_back(std::move(row));
    }
    // The per-run thread count must not leak into the compared bytes.
    report.config = {{"pipeline", "acceptance-determinism"}};
    report.summary = aggregate(evals);
    write_predictions(preds, dir / "predictions.json");
    write_report(report, dir / "report.json", dir / "report.csv");

    std::string blob;
    for (const char* name : {"manifest.json", "predictions.json", "report.json", "report.csv"}) {
        std::ifstream in(dir / name, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        blob += ss.str();
        blob += '\0';
    }
    return blob;
}

bool criterion_8(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path base = fs::temp_directory_path() / "hybreg_acceptance_8";
    fs::remove_all(base);
    const std::string a = run_benchmark_once(base / "run_t1", 1);
    const std::string b = run_benchmark_once(base / "run_t3", 3);
    const std::string c = run_benchmark_once(base / "run_t1_repeat", 1);
    const std::string d = run_benchmark_once(base / "run_t0", 0);  // hardware concurrency
    fs::remove_all(base);
    const bool ok = (a == b) && (a == c) && (a == d);
    std::ostringstream os;
    os << "6-pair benchmark, threads {1, 3, repeat, auto}: outputs "
       << (ok ? "byte-identical" : "DIFFER") << ", " << seconds_since(t0) << " s";
    detail = os.str();
    return ok;
}

struct Criterion {
    int number;
    const char* name;
    bool (*fn)(std::string&);
};

const Criterion kCriteria[] = {
    {1, "metric-formula fidelity", criterion_1},
    {2, "gradient vs finite differences", criterion_2},
    {3, "chamfer oracle equivalence", criterion_3},
    {4, "rotation algebra", criterion_4},
    {5, "self-registration", criterion_5},
    {6, "partial benchmark", criterion_6},
    {7, "ablation directions", criterion_7},
    {8, "determinism", criterion_8},
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    if (argc == 2) {
        only = std::atoi(argv[1]);
        if (only < 1 || only > 8) {
            std::fprintf(stderr, "usage: %s [1-8]\n", argv[0]);
            return 2;
        }
    }
    int failures = 0;
    for (const Criterion& c : kCriteria) {
        if (only != 0 && c.number != only) continue;
        std::string detail;
        const bool ok = c.fn(detail);
        std::printf("criterion %d (%s): %s — %s\n", c.number, c.name, ok ? "PASS" : "FAIL",
                    detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
