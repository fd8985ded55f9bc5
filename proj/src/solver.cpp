#include "hybreg/solver.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

namespace hybreg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kChunk = 16;  // fixed so early-stop is thread-count independent

using Eigen::VectorXd;

Vec3 random_unit_vector(std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec3 v;
    do {
        v = Vec3(normal(rng), normal(rng), normal(rng));
    } while (v.norm() < 1e-6);
    return v.normalized();
}

/// Near-uniform deterministic covering of the unit sphere, rotated as a whole
/// by a seed-derived rotation.
std::vector<Vec3> fibonacci_sphere(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uang(0.0, 2.0 * std::numbers::pi);
    const Mat3 spin = rodrigues(random_unit_vector(rng), uang(rng));

    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<Vec3> dirs;
    dirs.reserve(n);
    for (int k = 0; k < n; ++k) {
        const double z = 1.0 - 2.0 * (k + 0.5) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden_angle * k;
        dirs.push_back(spin * Vec3(r * std::cos(phi), r * std::sin(phi), z));
    }
    return dirs;
}

// ---- generic first-order descent over a flat parameter vector ----

struct Eval {
    double loss = kInf;
    VectorXd grad;
};

struct DescentOut {
    VectorXd best_x;
    double best_loss = kInf;
    std::vector<double> trace;
    bool failed = false;
};

template <typename EvalFn, typename ProjectFn>
DescentOut descend(VectorXd x, EvalFn&& eval, ProjectFn&& project, const SolverConfig& cfg) {
    DescentOut out;
    Eval e = eval(x);
    if (!std::isfinite(e.loss)) {
        out.failed = true;
        return out;
    }
    out.best_x = x;
    out.best_loss = e.loss;
    out.trace.push_back(e.loss);

    VectorXd m = VectorXd::Zero(x.size());
    VectorXd v = VectorXd::Zero(x.size());
    constexpr double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
    double scale = cfg.step_size;
    int adam_t = 0;
    int stall = 0;

    for (int it = 0; it < cfg.max_iters; ++it) {
        VectorXd dir;
        if (cfg.optimizer == OptimizerKind::Adaptive) {
            ++adam_t;
            m = b1 * m + (1.0 - b1) * e.grad;
            v = b2 * v + (1.0 - b2) * e.grad.cwiseProduct(e.grad);
            const VectorXd mhat = m / (1.0 - std::pow(b1, adam_t));
            const VectorXd vhat = v / (1.0 - std::pow(b2, adam_t));
            dir = mhat.cwiseQuotient(vhat.cwiseSqrt().array().matrix() +
                                     VectorXd::Constant(x.size(), adam_eps));
        } else {
            dir = e.grad;
        }

        // Monotone safeguard: halve the per-start step while the candidate
        // increases the loss, up to 10 times, then accept.
        VectorXd x_try;
        Eval e_try;
        bool accepted = false;
        int halvings = 0;
        for (int h = 0; h <= 10; ++h) {
            x_try = project(x - scale * dir);
            e_try = eval(x_try);
            if (std::isfinite(e_try.loss) && (e_try.loss <= e.loss || h == 10)) {
                accepted = true;
                break;
            }
            scale *= 0.5;
            ++halvings;
        }
        if (!accepted || !std::isfinite(e_try.loss)) break;
        if (halvings == 0) {
            // Let the step recover after clean accepts so a few early
            // halvings do not freeze progress for the rest of the start.
            scale = std::min(cfg.step_size, scale * 2.0);
        } else if (cfg.optimizer == OptimizerKind::Adaptive) {
            // The overshoot means the momentum direction is stale; restart
            // the moments so the next step follows the fresh gradient.
            m.setZero();
            v.setZero();
            adam_t = 0;
        }

        x = x_try;
        e = e_try;
        const double improvement = out.best_loss - e.loss;
        if (e.loss < out.best_loss) {
            out.best_loss = e.loss;
            out.best_x = x;
        }
        out.trace.push_back(out.best_loss);

        if (improvement > cfg.convergence_tol * std::max(out.best_loss, 1e-12)) {
            stall = 0;
        } else if (++stall >= cfg.convergence_patience) {
            break;
        }
        if (out.best_loss <= 1e-18) break;
    }
    return out;
}

VectorXd pack_hybrid(const TransformParams& p) {
    VectorXd x(8);
    x << p.v.x(), p.v.y(), p.v.z(), p.theta, p.u.x(), p.u.y(), p.u.z(), p.d_u;
    return x;
}

TransformParams unpack_hybrid(const VectorXd& x, const TransformParams& like) {
    TransformParams p = like;
    p.v = Vec3(x[0], x[1], x[2]);
    p.theta = x[3];
    p.u = Vec3(x[4], x[5], x[6]);
    p.d_u = x[7];
    return p;
}

// ---- alternative parameterizations (ablation paths) ----

struct AltSpec {
    RotationParameterization rot;
    TranslationMode tmode;
    TranslationMapping mapping;
    double d_max;

    int rot_dim() const {
        switch (rot) {
            case RotationParameterization::Hybrid: return 4;
            case RotationParameterization::EulerXYZ: return 3;
            default: return 6;
        }
    }
    int dim() const { return rot_dim() + 4; }

    RigidTransform realize(const VectorXd& x) const {
        Mat3 r;
        switch (rot) {
            case RotationParameterization::Hybrid:
                r = rodrigues(Vec3(x[0], x[1], x[2]), x[3]);
                break;
            case RotationParameterization::EulerXYZ: {
                AltRotationParams ap;
                ap.kind = AltRotationParams::Kind::EulerXYZ;
                ap.values = {x[0], x[1], x[2], 0, 0, 0};
                r = realize_alt_rotation(ap);
                break;
            }
            default: {
                AltRotationParams ap;
                ap.kind = AltRotationParams::Kind::SixD;
                ap.values = {x[0], x[1], x[2], x[3], x[4], x[5]};
                r = realize_alt_rotation(ap);
            }
        }
        const int o = rot_dim();
        const Vec3 u(x[o], x[o + 1], x[o + 2]);
        const double nu = u.norm();
        if (!(nu > 0.0)) throw std::invalid_argument("degenerate translation direction");
        Vec3 t;
        if (tmode == TranslationMode::RawClamped) {
            t = std::clamp(x[o + 3], 0.0, d_max) * (u / nu);
        } else {
            t = translation_magnitude(x[o + 3], d_max, mapping) * (u / nu);
        }
        return {r, t};
    }

    VectorXd pack(const TransformParams& p) const {
        VectorXd x(dim());
        const Mat3 r = rodrigues(p.v, p.theta);
        switch (rot) {
            case RotationParameterization::Hybrid:
                x[0] = p.v.x(); x[1] = p.v.y(); x[2] = p.v.z(); x[3] = p.theta;
                break;
            case RotationParameterization::EulerXYZ: {
                const Vec3 e = r.eulerAngles(2, 1, 0);  // (z, y, x) for Rz*Ry*Rx
                x[0] = e[2]; x[1] = e[1]; x[2] = e[0];
                break;
            }
            default:
                for (int k = 0; k < 3; ++k) x[k] = r(k, 0);
                for (int k = 0; k < 3; ++k) x[3 + k] = r(k, 1);
        }
        const int o = rot_dim();
        x[o] = p.u.x(); x[o + 1] = p.u.y(); x[o + 2] = p.u.z();
        if (tmode == TranslationMode::RawClamped) {
            x[o + 3] = translation_magnitude(p.d_u, d_max, p.mapping);
        } else {
            x[o + 3] = p.d_u;
        }
        return x;
    }
};

}  // namespace

std::vector<AngleInterval> default_angle_intervals() {
    const double pi = std::numbers::pi;
    return {{0.0, pi / 4}, {pi / 4, pi / 2}, {pi / 2, 3 * pi / 4}, {3 * pi / 4, pi}};
}

void SolverConfig::validate() const {
    if (n_directions < 1 || n_angles < 1) throw std::invalid_argument("start counts must be >= 1");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be > 0");
    if (angle_intervals.empty()) throw std::invalid_argument("angle_intervals must be non-empty");
    const double pi = std::numbers::pi;
    double cursor = 0.0;
    for (const auto& [lo, hi] : angle_intervals) {
        if (!(lo < hi)) throw std::invalid_argument("angle interval must have lo < hi");
        if (std::abs(lo - cursor) > 1e-9) {
            throw std::invalid_argument("angle intervals must be ascending, disjoint, and contiguous");
        }
        cursor = hi;
    }
    if (std::abs(cursor - pi) > 1e-9) throw std::invalid_argument("angle intervals must cover [0, pi]");
}

std::vector<TransformParams> init_grid(const SolverConfig& cfg, const AngleInterval& interval,
                                       const ObjectiveConfig& obj, const Vec3& source_centroid,
                                       const Vec3& target_centroid) {
    if (cfg.n_directions < 1 || cfg.n_angles < 1) {
        throw std::invalid_argument("init_grid: start counts must be >= 1");
    }
    const auto [lo, hi] = interval;
    if (!(lo <= hi)) throw std::invalid_argument("init_grid: empty interval");

    const auto dirs = fibonacci_sphere(cfg.n_directions, cfg.seed);
    std::vector<double> angles(cfg.n_angles);
    if (cfg.n_angles == 1) {
        angles[0] = 0.5 * (lo + hi);
    } else {
        for (int i = 0; i < cfg.n_angles; ++i) {
            angles[i] = lo + i * (hi - lo) / (cfg.n_angles - 1);
        }
    }

    const auto make_start = [&](const Vec3& dir, double angle) {
        TransformParams p;
        p.v = dir;
        p.theta = angle;
        p.d_max = obj.d_max;
        p.mapping = obj.mapping;
        const Vec3 delta = target_centroid - rodrigues(dir, angle) * source_centroid;
        double dist = delta.norm();
        if (dist < 1e-12) {
            p.u = Vec3::UnitX();
            dist = 0.05 * obj.d_max;
        } else {
            p.u = delta / dist;
        }
        dist = std::clamp(dist, 0.05 * obj.d_max, 0.95 * obj.d_max);
        p.d_u = translation_preimage(dist, obj.d_max, obj.mapping);
        return p;
    };

    std::vector<TransformParams> starts;
    if (cfg.combination == StartCombination::Product) {
        starts.reserve(static_cast<std::size_t>(cfg.n_directions) * cfg.n_angles);
        for (const auto& dir : dirs) {
            for (double a : angles) starts.push_back(make_start(dir, a));
        }
    } else {
        const int n = std::max(cfg.n_directions, cfg.n_angles);
        starts.reserve(n);
        for (int i = 0; i < n; ++i) {
            starts.push_back(make_start(dirs[i % dirs.size()], angles[i % angles.size()]));
        }
    }
    return starts;
}

StartResult optimize_start(const TransformParams& start, const PointCloud& source,
                           const PointCloud& target, const SpatialIndex& target_index,
                           const ObjectiveConfig& obj, const SolverConfig& cfg) {
    StartResult out;
    out.params = start;

    if (cfg.rotation_param == RotationParameterization::Hybrid &&
        cfg.translation_mode == TranslationMode::Mapped) {
        const auto eval = [&](const VectorXd& x) -> Eval {
            Eval e;
            try {
                const auto g = gradient(unpack_hybrid(x, start), source, target, target_index, obj);
                e.loss = g.loss.total;
                e.grad = Eigen::Map<const VectorXd>(g.grad.data(), 8);
            } catch (const std::invalid_argument&) {
                // degenerate axis/direction reached by a step: reject candidate
            }
            return e;
        };
        const auto res =
            descend(pack_hybrid(start), eval, [](VectorXd x) { return x; }, cfg);
        if (res.failed) {
            out.failed = true;
            out.loss = kInf;
            return out;
        }
        out.params = unpack_hybrid(res.best_x, start);
        out.loss = res.best_loss;
        out.trace = res.trace;
        return out;
    }

    // Alternative parameterizations: loss is exact, gradient by central
    // finite differences on the frozen-correspondence loss.
    const AltSpec spec{cfg.rotation_param, cfg.translation_mode, obj.mapping, obj.d_max};
    const auto eval = [&](const VectorXd& x) -> Eval {
        Eval e;
        try {
            const RigidTransform t = spec.realize(x);
            const PointCloud moved = apply_transform(source, t);
            const Correspondences corr = associate(moved, target, target_index, obj);
            e.loss = fixed_correspondence_loss(t, source, target, corr, obj).total;
            e.grad = VectorXd::Zero(x.size());
            for (int k = 0; k < x.size(); ++k) {
                const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
                VectorXd xp = x, xm = x;
                xp[k] += h;
                xm[k] -= h;
                const double lp =
                    fixed_correspondence_loss(spec.realize(xp), source, target, corr, obj).total;
                const double lm =
                    fixed_correspondence_loss(spec.realize(xm), source, target, corr, obj).total;
                e.grad[k] = (lp - lm) / (2.0 * h);
            }
        } catch (const std::invalid_argument&) {
            e.loss = kInf;
        }
        return e;
    };
    const auto project = [&](VectorXd x) {
        if (cfg.translation_mode == TranslationMode::RawClamped) {
            x[x.size() - 1] = std::clamp(x[x.size() - 1], 0.0, obj.d_max);
        }
        return x;
    };
    const auto res = descend(spec.pack(start), eval, project, cfg);
    if (res.failed) {
        out.failed = true;
        out.loss = kInf;
        return out;
    }
    // Report the realized transform through the hybrid parameter set.
    const RigidTransform t = spec.realize(res.best_x);
    const Eigen::AngleAxisd aa(t.R);
    TransformParams p = start;
    p.v = aa.angle() < 1e-12 ? Vec3::UnitZ() : Vec3(aa.axis());
    p.theta = aa.angle();
    const double tn = t.T.norm();
    p.u = tn < 1e-12 ? Vec3::UnitX() : Vec3(t.T / tn);
    p.d_u = translation_preimage(tn, obj.d_max, obj.mapping);
    out.params = p;
    out.loss = res.best_loss;
    out.trace = res.trace;
    return out;
}

double default_loss_threshold(const PointCloud& target, const ObjectiveConfig& obj,
                              std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const Vec3 axis = random_unit_vector(rng);
    const double two_deg = 2.0 * std::numbers::pi / 180.0;
    const PointCloud perturbed =
        apply_transform(target, {rodrigues(axis, two_deg), Vec3::Zero()});
    return std::max(2.0 * local_chamfer(perturbed, target, obj.alpha), 1e-12);
}

RegistrationResult register_clouds(const PointCloud& source, const PointCloud& target,
                                   const ObjectiveConfig& obj, const SolverConfig& cfg) {
    source.validate();
    target.validate();
    obj.validate();
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();

    const SpatialIndex target_index(target);
    const double threshold = cfg.loss_threshold > 0.0
                                 ? cfg.loss_threshold
                                 : default_loss_threshold(target, obj, cfg.seed);
    const Vec3 sc = source.centroid();
    const Vec3 tc = target.centroid();
    const int n_threads = cfg.n_threads > 0
                              ? cfg.n_threads
                              : std::max(1u, std::thread::hardware_concurrency());

    RegistrationResult result;
    result.combination = cfg.combination;
    double best_loss = kInf;
    StartResult best;

    for (const auto& interval : cfg.angle_intervals) {
        const auto starts = init_grid(cfg, interval, obj, sc, tc);
        ++result.intervals_visited;

        for (std::size_t base = 0; base < starts.size(); base += kChunk) {
            const std::size_t count = std::min(kChunk, starts.size() - base);
            std::vector<StartResult> chunk(count);
            const auto run_one = [&](std::size_t k) {
                chunk[k] = optimize_start(starts[base + k], source, target, target_index, obj, cfg);
            };
            if (n_threads <= 1 || count == 1) {
                for (std::size_t k = 0; k < count; ++k) run_one(k);
            } else {
                std::atomic<std::size_t> next{0};
                std::vector<std::thread> workers;
                const std::size_t nw = std::min<std::size_t>(n_threads, count);
                for (std::size_t w = 0; w < nw; ++w) {
                    workers.emplace_back([&] {
                        for (std::size_t k = next.fetch_add(1); k < count; k = next.fetch_add(1)) {
                            run_one(k);
                        }
                    });
                }
                for (auto& t : workers) t.join();
            }
            // Sequential reduction in ordinal order keeps ties deterministic.
            for (std::size_t k = 0; k < count; ++k) {
                ++result.restarts_used;
                result.per_restart_losses.push_back(chunk[k].failed ? kInf : chunk[k].loss);
                if (!chunk[k].failed && chunk[k].loss < best_loss) {
                    best_loss = chunk[k].loss;
                    best = std::move(chunk[k]);
                }
            }
            if (cfg.early_stop_loss >= 0.0 && best_loss <= cfg.early_stop_loss) break;
        }
        if (best_loss <= threshold) break;
    }

    if (!std::isfinite(best_loss)) {
        throw RegistrationError("registration failed: all " +
                                std::to_string(result.restarts_used) +
                                " starts diverged to non-finite loss");
    }
    result.params = best.params;
    result.transform = realize_transform(best.params);
    result.final_loss = best_loss;
    result.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

}  // namespace hybreg
