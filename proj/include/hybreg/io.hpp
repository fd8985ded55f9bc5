#pragma once

#include "hybreg/datagen.hpp"
#include "hybreg/geometry.hpp"
#include "hybreg/metrics.hpp"

#include <filesystem>
#include <string>

namespace hybreg {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shortest decimal representation that round-trips the exact double.
std::string format_double(double v);

/// Formats inferred from extension: `.xyz` (one "x y z" per line) or `.ply`
/// (ASCII PLY 1.0, element vertex with x, y, z). Throws ParseError with a
/// line number on malformed input, std::invalid_argument on an unknown
/// extension.
PointCloud read_cloud(const std::filesystem::path& path);
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path);

struct NormalizedPair {
    PointCloud source;
    PointCloud target;
    Vec3 center = Vec3::Zero();  // joint centroid of the raw clouds
    double scale = 1.0;          // joint max radius of the raw clouds
};

/// Moves the joint centroid to the origin and scales the joint max radius
/// to 1, applying the same (center, scale) to both clouds. Idempotent on its
/// own output. Throws std::invalid_argument on zero-extent input.
NormalizedPair normalize_pair(const PointCloud& source, const PointCloud& target);

/// Maps a transform estimated in the normalized frame back to the raw frame:
/// rotation unchanged, T_raw = center - R * center + scale * T.
RigidTransform denormalize_transform(const RigidTransform& t, const Vec3& center, double scale);

struct ManifestPair {
    std::string id;
    std::string source_path;  // relative to the manifest's directory
    std::string target_path;
    RigidTransform gt;
    RotLevel rot_level = RotLevel::Restricted;
    double overlap = 0.0;
};

struct PairManifest {
    std::string version = "1";
    std::vector<ManifestPair> pairs;
    Vec3 normalization_center = Vec3::Zero();
    double normalization_scale = 1.0;
};

void write_manifest(const PairManifest& manifest, const std::filesystem::path& path);

/// Validates that every referenced cloud file exists and every gt matrix is
/// a rotation.
PairManifest read_manifest(const std::filesystem::path& path);

struct Prediction {
    std::string id;
    RigidTransform transform;
    double final_loss = 0.0;
    int restarts_used = 0;
    int intervals_visited = 0;
};

void write_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

struct ReportPair {
    std::string id;
    PairEvaluation eval;
    int restarts_used = 0;
    double wall_time = 0.0;
};

struct RunReport {
    std::vector<std::pair<std::string, std::string>> config;  // snapshot, stable order
    std::vector<ReportPair> pairs;
    AggregateSummary summary;
};

/// Writes the structured report to `path` and a flat per-pair CSV (columns:
/// id, rot_error_deg, trans_error, mse, cd, fscore, restarts_used, wall_time)
/// to `csv_path`. Writers are deterministic. Rejects an empty pair list.
void write_report(const RunReport& report, const std::filesystem::path& path,
                  const std::filesystem::path& csv_path);

RunReport read_report(const std::filesystem::path& path);

}  // namespace hybreg
