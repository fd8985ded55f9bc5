#pragma once

#include "hybreg/geometry.hpp"
#include "hybreg/nn_index.hpp"
#include "hybreg/objective.hpp"

#include <cstdint>
#include <utility>

namespace hybreg {

enum class StartCombination { Product, Paired };
enum class OptimizerKind { PlainGD, Adaptive };
enum class RotationParameterization { Hybrid, EulerXYZ, SixD };
enum class TranslationMode { Mapped, RawClamped };

using AngleInterval = std::pair<double, double>;

std::vector<AngleInterval> default_angle_intervals();

struct SolverConfig {
    int n_directions = 64;
    int n_angles = 64;
    StartCombination combination = StartCombination::Product;
    std::vector<AngleInterval> angle_intervals = default_angle_intervals();
    double loss_threshold = 0.0;  // <= 0: per-pair automatic threshold
    int max_iters = 150;
    double step_size = 0.05;
    OptimizerKind optimizer = OptimizerKind::Adaptive;
    std::uint64_t seed = 0;

    int n_threads = 0;  // 0 = hardware concurrency
    RotationParameterization rotation_param = RotationParameterization::Hybrid;
    TranslationMode translation_mode = TranslationMode::Mapped;

    // Plateau stop: break a start when the best loss has not improved by
    // convergence_tol (relative) for convergence_patience iterations.
    double convergence_tol = 1e-9;
    int convergence_patience = 12;

    // When >= 0, stop launching further starts in an interval once the best
    // loss so far drops to this value. Checked between fixed-size chunks of
    // starts so results are independent of thread count.
    double early_stop_loss = -1.0;

    void validate() const;
};

struct RegistrationResult {
    RigidTransform transform;
    TransformParams params;
    double final_loss = 0.0;
    int restarts_used = 0;
    int intervals_visited = 0;
    std::vector<double> per_restart_losses;  // +inf for abandoned starts
    double wall_time = 0.0;                  // seconds
    StartCombination combination = StartCombination::Product;
};

struct StartResult {
    TransformParams params;
    double loss = 0.0;
    std::vector<double> trace;  // best-seen loss per iteration, non-increasing
    bool failed = false;
};

struct RegistrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Multi-start grid for one angle interval. Directions are a Fibonacci-sphere
/// covering rotated by a seed-derived rotation; angles are evenly spaced in
/// the interval. Translation starts at the centroid-difference direction with
/// distance clamped to [0.05, 0.95] * d_max.
std::vector<TransformParams> init_grid(const SolverConfig& cfg, const AngleInterval& interval,
                                       const ObjectiveConfig& obj, const Vec3& source_centroid,
                                       const Vec3& target_centroid);

/// First-order descent from one start with re-association each step and a
/// monotone safeguard (step halving, up to 10 times, before accepting).
/// Returns best-seen parameters, not the last iterate.
StartResult optimize_start(const TransformParams& start, const PointCloud& source,
                           const PointCloud& target, const SpatialIndex& target_index,
                           const ObjectiveConfig& obj, const SolverConfig& cfg);

/// Automatic per-pair loss threshold: twice the local CD of the target
/// against itself under a 2-degree seeded rotation.
double default_loss_threshold(const PointCloud& target, const ObjectiveConfig& obj,
                              std::uint64_t seed);

/// Full registration: runs all starts of the first angle interval, escalates
/// to the next interval while the best loss exceeds the threshold, and
/// returns the global best. Deterministic for fixed inputs, config, and seed,
/// at any thread count.
RegistrationResult register_clouds(const PointCloud& source, const PointCloud& target,
                                   const ObjectiveConfig& obj, const SolverConfig& cfg);

}  // namespace hybreg
