// Command-line front end: generate / register / evaluate / benchmark / ablate.

#include "hybreg/datagen.hpp"
#include "hybreg/io.hpp"
#include "hybreg/metrics.hpp"
#include "hybreg/solver.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hybreg;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t pair_seed(std::uint64_t base, std::size_t index) {
    return splitmix64(base ^ splitmix64(static_cast<std::uint64_t>(index) + 1));
}

// ---------------------------------------------------------------------------
// Flag bundles
// ---------------------------------------------------------------------------

struct SolverFlags {
    SolverConfig solver;
    ObjectiveConfig objective;
    std::string combination = "product";
    std::string optimizer = "adaptive";
    std::string rotation_param = "hybrid";
    std::string translation_mode = "mapped";
    std::string mapping = "sin";
    std::string angle_intervals;  // "0:45,45:90" in degrees; empty = default
};

void add_solver_flags(CLI::App& cmd, SolverFlags& f) {
    cmd.add_option("--n-directions", f.solver.n_directions, "Rotation-axis starts per interval");
    cmd.add_option("--n-angles", f.solver.n_angles, "Angle starts per interval");
    cmd.add_option("--combination", f.combination, "Start combination: product|paired");
    cmd.add_option("--angle-intervals", f.angle_intervals,
                   "Comma list of lo:hi angle intervals in degrees (default 0:45,...,135:180)");
    cmd.add_option("--loss-threshold", f.solver.loss_threshold,
                   "Escalation threshold; <= 0 selects the per-pair automatic threshold");
    cmd.add_option("--max-iters", f.solver.max_iters, "Descent iterations per start");
    cmd.add_option("--step-size", f.solver.step_size, "Base step size");
    cmd.add_option("--optimizer", f.optimizer, "Optimizer: adaptive|plain");
    cmd.add_option("--seed", f.solver.seed, "Base RNG seed");
    cmd.add_option("--threads", f.solver.n_threads,
                   "Worker threads (0 = hardware concurrency; HYBREG_THREADS overrides)");
    cmd.add_option("--rotation-param", f.rotation_param,
                   "Rotation parameterization: hybrid|euler|sixd");
    cmd.add_option("--translation-mode", f.translation_mode,
                   "Translation handling: mapped|raw-clamped");
    cmd.add_option("--convergence-tol", f.solver.convergence_tol,
                   "Relative plateau tolerance per start");
    cmd.add_option("--convergence-patience", f.solver.convergence_patience,
                   "Iterations without improvement before a start stops");
    cmd.add_option("--early-stop-loss", f.solver.early_stop_loss,
                   "Stop launching starts once the best loss reaches this value (< 0 = off)");
    cmd.add_option("--alpha", f.objective.alpha, "Trim fraction of the local chamfer term");
    cmd.add_option("--beta", f.objective.beta, "Weight of the projected chamfer term");
    cmd.add_option("--d-max", f.objective.d_max, "Translation radius bound");
    cmd.add_option("--mapping", f.mapping, "Translation change of variables: sin|sigmoid");
}

std::vector<AngleInterval> parse_intervals(const std::string& text) {
    std::vector<AngleInterval> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("bad interval: " + item);
        const double lo = std::stod(item.substr(0, colon));
        const double hi = std::stod(item.substr(colon + 1));
        out.emplace_back(lo * kPi / 180.0, hi * kPi / 180.0);
    }
    if (out.empty()) throw std::invalid_argument("empty --angle-intervals");
    return out;
}

// Resolves the string-valued flags into the typed configs and validates.
// Throws std::invalid_argument on bad values (mapped to exit code 2).
void finalize(SolverFlags& f) {
    if (f.combination == "product")
        f.solver.combination = StartCombination::Product;
    else if (f.combination == "paired")
        f.solver.combination = StartCombination::Paired;
    else
        throw std::invalid_argument("--combination must be product or paired");

    if (f.optimizer == "adaptive")
        f.solver.optimizer = OptimizerKind::Adaptive;
    else if (f.optimizer == "plain")
        f.solver.optimizer = OptimizerKind::PlainGD;
    else
        throw std::invalid_argument("--optimizer must be adaptive or plain");

    if (f.rotation_param == "hybrid")
        f.solver.rotation_param = RotationParameterization::Hybrid;
    else if (f.rotation_param == "euler")
        f.solver.rotation_param = RotationParameterization::EulerXYZ;
    else if (f.rotation_param == "sixd")
        f.solver.rotation_param = RotationParameterization::SixD;
    else
        throw std::invalid_argument("--rotation-param must be hybrid, euler, or sixd");

    if (f.translation_mode == "mapped")
        f.solver.translation_mode = TranslationMode::Mapped;
    else if (f.translation_mode == "raw-clamped")
        f.solver.translation_mode = TranslationMode::RawClamped;
    else
        throw std::invalid_argument("--translation-mode must be mapped or raw-clamped");

    if (f.mapping == "sin")
        f.objective.mapping = TranslationMapping::Sin;
    else if (f.mapping == "sigmoid")
        f.objective.mapping = TranslationMapping::Sigmoid;
    else
        throw std::invalid_argument("--mapping must be sin or sigmoid");

    if (!f.angle_intervals.empty()) f.solver.angle_intervals = parse_intervals(f.angle_intervals);

    if (const char* env = std::getenv("HYBREG_THREADS")) {
        const int n = std::atoi(env);
        if (n < 0) throw std::invalid_argument("HYBREG_THREADS must be >= 0");
        f.solver.n_threads = n;
    }

    f.solver.validate();
    f.objective.validate();
}

std::vector<std::pair<std::string, std::string>> config_snapshot(const SolverFlags& f) {
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back("n_directions", std::to_string(f.solver.n_directions));
    out.emplace_back("n_angles", std::to_string(f.solver.n_angles));
    out.emplace_back("combination", f.combination);
    out.emplace_back("loss_threshold", format_double(f.solver.loss_threshold));
    out.emplace_back("max_iters", std::to_string(f.solver.max_iters));
    out.emplace_back("step_size", format_double(f.solver.step_size));
    out.emplace_back("optimizer", f.optimizer);
    out.emplace_back("seed", std::to_string(f.solver.seed));
    out.emplace_back("rotation_param", f.rotation_param);
    out.emplace_back("translation_mode", f.translation_mode);
    out.emplace_back("alpha", format_double(f.objective.alpha));
    out.emplace_back("beta", format_double(f.objective.beta));
    out.emplace_back("d_max", format_double(f.objective.d_max));
    out.emplace_back("mapping", f.mapping);
    return out;
}

// ---------------------------------------------------------------------------
// Generation flags
// ---------------------------------------------------------------------------

struct GenFlags {
    int count = 20;
    int n_points = 2048;
    std::string shape = "mixed";
    std::string rot_level = "mixed";  // "mixed" = 4:1 restricted:unrestricted
    double min_overlap = 0.5;
    std::uint64_t seed = 0;
    std::string format = "xyz";
};

void add_gen_flags(CLI::App& cmd, GenFlags& g) {
    cmd.add_option("--count", g.count, "Number of pairs")->check(CLI::PositiveNumber);
    cmd.add_option("--points", g.n_points, "Points per full shape")->check(CLI::PositiveNumber);
    cmd.add_option("--shape", g.shape, "sphere|box|cylinder|torus|composite|mixed");
    cmd.add_option("--rot-level", g.rot_level,
                   "restricted|unrestricted|mixed (mixed = 4:1 restricted:unrestricted)");
    cmd.add_option("--min-overlap", g.min_overlap, "Minimum symmetric overlap rate");
    cmd.add_option("--gen-seed", g.seed, "Generation RNG seed");
    cmd.add_option("--format", g.format, "Cloud file format: xyz|ply");
}

ShapeKind parse_shape(const std::string& s) {
    static const std::map<std::string, ShapeKind> kShapes = {
        {"sphere", ShapeKind::Sphere},     {"box", ShapeKind::Box},
        {"cylinder", ShapeKind::Cylinder}, {"torus", ShapeKind::Torus},
        {"composite", ShapeKind::Composite}};
    const auto it = kShapes.find(s);
    if (it == kShapes.end()) throw std::invalid_argument("unknown --shape: " + s);
    return it->second;
}

PairSpec spec_for_index(const GenFlags& g, std::size_t i) {
    PairSpec spec;
    if (g.shape == "mixed") {
        static const ShapeKind kCycle[] = {ShapeKind::Sphere, ShapeKind::Box, ShapeKind::Cylinder,
                                           ShapeKind::Torus, ShapeKind::Composite};
        spec.shape = kCycle[i % 5];
    } else {
        spec.shape = parse_shape(g.shape);
    }
    if (g.rot_level == "restricted")
        spec.rot_level = RotLevel::Restricted;
    else if (g.rot_level == "unrestricted")
        spec.rot_level = RotLevel::Unrestricted;
    else if (g.rot_level == "mixed")
        spec.rot_level = (i % 5 == 4) ? RotLevel::Unrestricted : RotLevel::Restricted;
    else
        throw std::invalid_argument("unknown --rot-level: " + g.rot_level);
    spec.n_points = g.n_points;
    spec.min_overlap = g.min_overlap;
    spec.seed = pair_seed(g.seed, i);
    return spec;
}

std::string pair_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "pair_%04zu", i);
    return buf;
}

PairManifest generate_to_dir(const GenFlags& g, const fs::path& dir) {
    if (g.format != "xyz" && g.format != "ply")
        throw std::invalid_argument("--format must be xyz or ply");
    fs::create_directories(dir);
    PairManifest manifest;
    for (std::size_t i = 0; i < static_cast<std::size_t>(g.count); ++i) {
        const PairSpec spec = spec_for_index(g, i);
        const LabeledPair pair = generate_pair(spec);
        ManifestPair entry;
        entry.id = pair_id(i);
        entry.source_path = entry.id + "_source." + g.format;
        entry.target_path = entry.id + "_target." + g.format;
        entry.gt = pair.gt;
        entry.rot_level = pair.rot_level;
        entry.overlap = pair.overlap;
        write_cloud(pair.source, dir / entry.source_path);
        write_cloud(pair.target, dir / entry.target_path);
        manifest.pairs.push_back(std::move(entry));
    }
    write_manifest(manifest, dir / "manifest.json");
    return manifest;
}

// ---------------------------------------------------------------------------
// Register / evaluate cores
// ---------------------------------------------------------------------------

Prediction register_one(const std::string& id, const PointCloud& source, const PointCloud& target,
                        const SolverFlags& f, std::uint64_t seed) {
    const NormalizedPair norm = normalize_pair(source, target);
    SolverConfig cfg = f.solver;
    cfg.seed = seed;
    const RegistrationResult res = register_clouds(norm.source, norm.target, f.objective, cfg);
    Prediction pred;
    pred.id = id;
    pred.transform = denormalize_transform(res.transform, norm.center, norm.scale);
    pred.final_loss = res.final_loss;
    pred.restarts_used = res.restarts_used;
    pred.intervals_visited = res.intervals_visited;
    return pred;
}

std::vector<Prediction> register_manifest(const PairManifest& manifest, const fs::path& dir,
                                          const SolverFlags& f) {
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < manifest.pairs.size(); ++i) {
        const ManifestPair& entry = manifest.pairs[i];
        const PointCloud source = read_cloud(dir / entry.source_path);
        const PointCloud target = read_cloud(dir / entry.target_path);
        preds.push_back(register_one(entry.id, source, target, f, pair_seed(f.solver.seed, i)));
    }
    return preds;
}

RunReport evaluate_manifest(const PairManifest& manifest, const fs::path& dir,
                            const std::vector<Prediction>& preds,
                            const std::vector<std::pair<std::string, std::string>>& config) {
    std::map<std::string, const Prediction*> by_id;
    for (const auto& p : preds) by_id[p.id] = &p;

    RunReport report;
    report.config = config;
    std::vector<PairEvaluation> evals;
    for (const ManifestPair& entry : manifest.pairs) {
        const auto it = by_id.find(entry.id);
        if (it == by_id.end())
            throw std::runtime_error("no prediction for manifest pair '" + entry.id + "'");
        const PointCloud source = read_cloud(dir / entry.source_path);
        const PointCloud target = read_cloud(dir / entry.target_path);
        ReportPair row;
        row.id = entry.id;
        row.eval = evaluate_pair(it->second->transform, entry.gt, source, target);
        row.restarts_used = it->second->restarts_used;
        row.wall_time = 0.0;  // kept zero so reports are byte-identical across runs
        evals.push_back(row.eval);
        report.pairs.push_back(std::move(row));
    }
    report.summary = aggregate(evals);
    return report;
}

fs::path default_csv_path(fs::path json_path) { return json_path.replace_extension(".csv"); }

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string name;
    AggregateSummary summary;
};

AblationRow run_ablation_config(const std::string& name, const std::vector<LabeledPair>& pairs,
                                const SolverFlags& f) {
    std::vector<PairEvaluation> evals;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        SolverConfig cfg = f.solver;
        cfg.seed = pair_seed(f.solver.seed, i);
        const RegistrationResult res =
            register_clouds(pairs[i].source, pairs[i].target, f.objective, cfg);
        evals.push_back(evaluate_pair(res, pairs[i].gt, pairs[i].source, pairs[i].target));
    }
    return {name, aggregate(evals)};
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << "config,count,mean_rot_deg,median_rot_deg,mean_trans,median_trans,recall\n";
    for (const auto& row : rows) {
        out << row.name << ',' << row.summary.count << ','
            << format_double(row.summary.mean.rot_error_deg) << ','
            << format_double(row.summary.median.rot_error_deg) << ','
            << format_double(row.summary.mean.trans_error) << ','
            << format_double(row.summary.median.trans_error) << ','
            << format_double(row.summary.recall) << '\n';
    }
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
    CLI::App app{"Multi-start rigid point-cloud registration"};
    app.require_subcommand(1);

    // generate ------------------------------------------------------------
    auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic pair set and its manifest");
    GenFlags gen;
    std::string gen_out_dir;
    gen_cmd->add_option("--out-dir", gen_out_dir, "Output directory")->required();
    add_gen_flags(*gen_cmd, gen);

    // register ------------------------------------------------------------
    auto* reg_cmd = app.add_subcommand("register", "Estimate transforms for a manifest or a pair");
    std::string reg_manifest, reg_source, reg_target, reg_out;
    reg_cmd->add_option("--manifest", reg_manifest, "Pair manifest (JSON)");
    reg_cmd->add_option("--source", reg_source, "Single source cloud (.xyz/.ply)");
    reg_cmd->add_option("--target", reg_target, "Single target cloud (.xyz/.ply)");
    reg_cmd->add_option("--out", reg_out, "Predictions JSON path")->required();
    SolverFlags reg_flags;
    add_solver_flags(*reg_cmd, reg_flags);

    // evaluate ------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("evaluate", "Join predictions with ground truth");
    std::string eval_manifest, eval_preds, eval_out, eval_csv;
    eval_cmd->add_option("--manifest", eval_manifest, "Pair manifest (JSON)")->required();
    eval_cmd->add_option("--predictions", eval_preds, "Predictions JSON")->required();
    eval_cmd->add_option("--out", eval_out, "Report JSON path")->required();
    eval_cmd->add_option("--csv", eval_csv, "Per-pair CSV path (default: report path with .csv)");

    // benchmark -----------------------------------------------------------
    auto* bench_cmd = app.add_subcommand("benchmark", "generate + register + evaluate");
    std::string bench_out_dir;
    bench_cmd->add_option("--out-dir", bench_out_dir, "Output directory")->required();
    GenFlags bench_gen;
    add_gen_flags(*bench_cmd, bench_gen);
    SolverFlags bench_flags;
    add_solver_flags(*bench_cmd, bench_flags);

    // ablate ----------------------------------------------------------------
    auto* abl_cmd = app.add_subcommand("ablate", "Run the factor grid, one summary row each");
    std::string abl_out;
    abl_cmd->add_option("--out", abl_out, "Summary CSV path")->required();
    GenFlags abl_gen;
    abl_gen.count = 20;
    abl_gen.n_points = 256;
    abl_gen.rot_level = "unrestricted";
    add_gen_flags(*abl_cmd, abl_gen);
    SolverFlags abl_flags;
    add_solver_flags(*abl_cmd, abl_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        // Validate everything up front so usage errors never write files.
        GenFlags* gen_used = nullptr;
        SolverFlags* flags_used = nullptr;
        if (gen_cmd->parsed()) gen_used = &gen;
        if (bench_cmd->parsed()) gen_used = &bench_gen, flags_used = &bench_flags;
        if (abl_cmd->parsed()) gen_used = &abl_gen, flags_used = &abl_flags;
        if (reg_cmd->parsed()) flags_used = &reg_flags;
        try {
            if (flags_used) finalize(*flags_used);
            if (gen_used) {
                if (gen_used->shape != "mixed") parse_shape(gen_used->shape);
                spec_for_index(*gen_used, 0).validate();
            }
            if (reg_cmd->parsed()) {
                const bool single = !reg_source.empty() || !reg_target.empty();
                if (single && (reg_source.empty() || reg_target.empty()))
                    throw std::invalid_argument("--source and --target must be given together");
                if (single == !reg_manifest.empty())
                    throw std::invalid_argument(
                        "give either --manifest or --source/--target, not both");
            }
        } catch (const std::invalid_argument& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        }

        if (gen_cmd->parsed()) {
            generate_to_dir(gen, gen_out_dir);
        } else if (reg_cmd->parsed()) {
            std::vector<Prediction> preds;
            if (!reg_manifest.empty()) {
                const fs::path dir = fs::path(reg_manifest).parent_path();
                preds = register_manifest(read_manifest(reg_manifest), dir, reg_flags);
            } else {
                preds.push_back(register_one("pair", read_cloud(reg_source),
                                             read_cloud(reg_target), reg_flags,
                                             pair_seed(reg_flags.solver.seed, 0)));
            }
            write_predictions(preds, reg_out);
        } else if (eval_cmd->parsed()) {
            const fs::path dir = fs::path(eval_manifest).parent_path();
            const PairManifest manifest = read_manifest(eval_manifest);
            const RunReport report =
                evaluate_manifest(manifest, dir, read_predictions(eval_preds), {});
            write_report(report, eval_out,
                         eval_csv.empty() ? default_csv_path(eval_out) : fs::path(eval_csv));
        } else if (bench_cmd->parsed()) {
            const fs::path dir = bench_out_dir;
            const PairManifest manifest = generate_to_dir(bench_gen, dir);
            const std::vector<Prediction> preds = register_manifest(manifest, dir, bench_flags);
            write_predictions(preds, dir / "predictions.json");
            const RunReport report =
                evaluate_manifest(manifest, dir, preds, config_snapshot(bench_flags));
            write_report(report, dir / "report.json", dir / "report.csv");
        } else if (abl_cmd->parsed()) {
            std::vector<LabeledPair> pairs;
            for (std::size_t i = 0; i < static_cast<std::size_t>(abl_gen.count); ++i)
                pairs.push_back(generate_pair(spec_for_index(abl_gen, i)));

            std::vector<AblationRow> rows;
            rows.push_back(run_ablation_config("full", pairs, abl_flags));

            // Strategies off = the escalation never fires (threshold unreachable),
            // so only the base [0, pi/4] interval is searched.
            SolverFlags no_strategies = abl_flags;
            no_strategies.solver.loss_threshold = 1e30;
            rows.push_back(run_ablation_config("no_strategies", pairs, no_strategies));

            SolverFlags no_projected = abl_flags;
            no_projected.objective.beta = 0.0;
            rows.push_back(run_ablation_config("no_projected_cd", pairs, no_projected));

            SolverFlags raw_t = abl_flags;
            raw_t.solver.translation_mode = TranslationMode::RawClamped;
            rows.push_back(run_ablation_config("raw_clamped_t", pairs, raw_t));

            // The parameterization baselines are standalone methods without the
            // theta-interval escalation, so they search [0, pi] in one pass.
            SolverFlags euler = abl_flags;
            euler.solver.rotation_param = RotationParameterization::EulerXYZ;
            euler.solver.angle_intervals = {{0.0, kPi}};
            rows.push_back(run_ablation_config("euler", pairs, euler));

            SolverFlags sixd = abl_flags;
            sixd.solver.rotation_param = RotationParameterization::SixD;
            sixd.solver.angle_intervals = {{0.0, kPi}};
            rows.push_back(run_ablation_config("sixd", pairs, sixd));

            write_ablation_csv(rows, abl_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
