#include "hybreg/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace hybreg {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& token, const fs::path& path, std::size_t line_no) {
    double v = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": malformed number '" + token + "'");
    }
    return v;
}

PointCloud read_xyz(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    PointCloud cloud;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tx, ty, tz, extra;
        if (!(ss >> tx >> ty >> tz) || (ss >> extra)) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected three coordinates");
        }
        cloud.points.emplace_back(parse_double(tx, path, line_no), parse_double(ty, path, line_no),
                                  parse_double(tz, path, line_no));
    }
    if (cloud.empty()) throw ParseError(path.string() + ": no points");
    return cloud;
}

PointCloud read_ply(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    const auto fail = [&](const std::string& what) -> ParseError {
        return ParseError(path.string() + ":" + std::to_string(line_no) + ": " + what);
    };
    const auto next_line = [&]() {
        if (!std::getline(in, line)) throw ParseError(path.string() + ": missing end_header");
        ++line_no;
    };

    next_line();
    if (line != "ply") throw fail("expected 'ply' magic");
    next_line();
    if (line != "format ascii 1.0") throw fail("expected 'format ascii 1.0'");

    std::size_t n_vertices = 0;
    std::vector<std::string> properties;
    bool in_vertex_element = false;
    for (;;) {
        next_line();
        if (line == "end_header") break;
        std::istringstream ss(line);
        std::string keyword;
        ss >> keyword;
        if (keyword == "comment") continue;
        if (keyword == "element") {
            std::string name;
            std::size_t count = 0;
            if (!(ss >> name >> count)) throw fail("malformed element declaration");
            if (name != "vertex") throw fail("only 'vertex' elements are supported");
            n_vertices = count;
            in_vertex_element = true;
        } else if (keyword == "property") {
            if (!in_vertex_element) throw fail("property outside vertex element");
            std::string type, name;
            if (!(ss >> type >> name)) throw fail("malformed property declaration");
            if (type != "float" && type != "double" && type != "float32" && type != "float64") {
                throw fail("unsupported property type '" + type + "'");
            }
            properties.push_back(name);
        } else {
            throw fail("unexpected header keyword '" + keyword + "'");
        }
    }
    if (properties != std::vector<std::string>{"x", "y", "z"}) {
        throw ParseError(path.string() + ": vertex element must have exactly x, y, z properties");
    }
    if (n_vertices == 0) throw ParseError(path.string() + ": vertex count is zero");

    PointCloud cloud;
    cloud.points.reserve(n_vertices);
    for (std::size_t i = 0; i < n_vertices; ++i) {
        next_line();
        std::istringstream ss(line);
        std::string tx, ty, tz, extra;
        if (!(ss >> tx >> ty >> tz) || (ss >> extra)) throw fail("expected three coordinates");
        cloud.points.emplace_back(parse_double(tx, path, line_no), parse_double(ty, path, line_no),
                                  parse_double(tz, path, line_no));
    }
    return cloud;
}

std::array<double, 9> rotation_to_row_major(const Mat3& r) {
    std::array<double, 9> out{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) out[3 * i + j] = r(i, j);
    }
    return out;
}

Mat3 rotation_from_row_major(const std::vector<double>& v) {
    if (v.size() != 9) throw ParseError("gt_rotation must have 9 entries");
    Mat3 r;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) r(i, j) = v[3 * i + j];
    }
    return r;
}

std::string rot_level_name(RotLevel level) {
    return level == RotLevel::Restricted ? "restricted" : "unrestricted";
}

RotLevel rot_level_from_name(const std::string& name) {
    if (name == "restricted") return RotLevel::Restricted;
    if (name == "unrestricted") return RotLevel::Unrestricted;
    throw ParseError("unknown rot_level '" + name + "'");
}

ordered_json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void store_json(const ordered_json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

PointCloud read_cloud(const fs::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".xyz") return read_xyz(path);
    if (ext == ".ply") return read_ply(path);
    throw std::invalid_argument("unsupported point cloud format: '" + ext + "'");
}

void write_cloud(const PointCloud& cloud, const fs::path& path) {
    cloud.validate();
    const auto ext = path.extension().string();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    if (ext == ".xyz") {
        for (const auto& p : cloud.points) {
            out << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
                << format_double(p.z()) << '\n';
        }
    } else if (ext == ".ply") {
        out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
            << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
        for (const auto& p : cloud.points) {
            out << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
                << format_double(p.z()) << '\n';
        }
    } else {
        throw std::invalid_argument("unsupported point cloud format: '" + ext + "'");
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

NormalizedPair normalize_pair(const PointCloud& source, const PointCloud& target) {
    source.validate();
    target.validate();
    const double n = static_cast<double>(source.size() + target.size());
    Vec3 center = Vec3::Zero();
    for (const auto& p : source.points) center += p;
    for (const auto& p : target.points) center += p;
    center /= n;

    double scale = 0.0;
    for (const auto& p : source.points) scale = std::max(scale, (p - center).norm());
    for (const auto& p : target.points) scale = std::max(scale, (p - center).norm());
    if (!(scale > 0.0)) throw std::invalid_argument("normalize_pair: zero-extent input");

    NormalizedPair out;
    out.center = center;
    out.scale = scale;
    out.source.points.reserve(source.size());
    for (const auto& p : source.points) out.source.points.push_back((p - center) / scale);
    out.target.points.reserve(target.size());
    for (const auto& p : target.points) out.target.points.push_back((p - center) / scale);
    return out;
}

RigidTransform denormalize_transform(const RigidTransform& t, const Vec3& center, double scale) {
    return {t.R, center - t.R * center + scale * t.T};
}

void write_manifest(const PairManifest& manifest, const fs::path& path) {
    ordered_json j;
    j["version"] = manifest.version;
    j["normalization"] = {{"center", std::vector<double>{manifest.normalization_center.x(),
                                                         manifest.normalization_center.y(),
                                                         manifest.normalization_center.z()}},
                          {"scale", manifest.normalization_scale}};
    j["pairs"] = ordered_json::array();
    for (const auto& p : manifest.pairs) {
        ordered_json jp;
        jp["id"] = p.id;
        jp["source_path"] = p.source_path;
        jp["target_path"] = p.target_path;
        jp["gt_rotation"] = rotation_to_row_major(p.gt.R);
        jp["gt_translation"] = std::vector<double>{p.gt.T.x(), p.gt.T.y(), p.gt.T.z()};
        jp["rot_level"] = rot_level_name(p.rot_level);
        jp["overlap"] = p.overlap;
        j["pairs"].push_back(std::move(jp));
    }
    store_json(j, path);
}

PairManifest read_manifest(const fs::path& path) {
    const ordered_json j = load_json(path);
    const fs::path dir = path.parent_path();
    PairManifest m;
    try {
        m.version = j.at("version").get<std::string>();
        const auto center = j.at("normalization").at("center").get<std::vector<double>>();
        if (center.size() != 3) throw ParseError("normalization center must have 3 entries");
        m.normalization_center = Vec3(center[0], center[1], center[2]);
        m.normalization_scale = j.at("normalization").at("scale").get<double>();
        for (const auto& jp : j.at("pairs")) {
            ManifestPair p;
            p.id = jp.at("id").get<std::string>();
            p.source_path = jp.at("source_path").get<std::string>();
            p.target_path = jp.at("target_path").get<std::string>();
            p.gt.R = rotation_from_row_major(jp.at("gt_rotation").get<std::vector<double>>());
            const auto t = jp.at("gt_translation").get<std::vector<double>>();
            if (t.size() != 3) throw ParseError("gt_translation must have 3 entries");
            p.gt.T = Vec3(t[0], t[1], t[2]);
            p.rot_level = rot_level_from_name(jp.at("rot_level").get<std::string>());
            p.overlap = jp.at("overlap").get<double>();
            if (!p.gt.is_rotation(1e-6)) {
                throw ParseError(path.string() + ": pair '" + p.id +
                                 "' gt_rotation is not a rotation matrix");
            }
            for (const auto* rel : {&p.source_path, &p.target_path}) {
                if (!fs::exists(dir / *rel)) {
                    throw ParseError(path.string() + ": missing cloud file '" + *rel + "'");
                }
            }
            m.pairs.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return m;
}

void write_predictions(const std::vector<Prediction>& preds, const fs::path& path) {
    ordered_json j;
    j["version"] = "1";
    j["predictions"] = ordered_json::array();
    for (const auto& p : preds) {
        ordered_json jp;
        jp["id"] = p.id;
        jp["rotation"] = rotation_to_row_major(p.transform.R);
        jp["translation"] = std::vector<double>{p.transform.T.x(), p.transform.T.y(),
                                                p.transform.T.z()};
        jp["final_loss"] = p.final_loss;
        jp["restarts_used"] = p.restarts_used;
        jp["intervals_visited"] = p.intervals_visited;
        j["predictions"].push_back(std::move(jp));
    }
    store_json(j, path);
}

std::vector<Prediction> read_predictions(const fs::path& path) {
    const ordered_json j = load_json(path);
    std::vector<Prediction> out;
    try {
        for (const auto& jp : j.at("predictions")) {
            Prediction p;
            p.id = jp.at("id").get<std::string>();
            p.transform.R = rotation_from_row_major(jp.at("rotation").get<std::vector<double>>());
            const auto t = jp.at("translation").get<std::vector<double>>();
            if (t.size() != 3) throw ParseError("translation must have 3 entries");
            p.transform.T = Vec3(t[0], t[1], t[2]);
            p.final_loss = jp.at("final_loss").get<double>();
            p.restarts_used = jp.at("restarts_used").get<int>();
            p.intervals_visited = jp.at("intervals_visited").get<int>();
            out.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return out;
}

namespace {

ordered_json eval_to_json(const PairEvaluation& e) {
    ordered_json j;
    j["rot_error_deg"] = e.rot_error_deg;
    j["trans_error"] = e.trans_error;
    j["mse"] = e.mse;
    j["cd"] = e.cd;
    j["fscore"] = e.fscore;
    return j;
}

PairEvaluation eval_from_json(const ordered_json& j) {
    PairEvaluation e;
    e.rot_error_deg = j.at("rot_error_deg").get<double>();
    e.trans_error = j.at("trans_error").get<double>();
    e.mse = j.at("mse").get<double>();
    e.cd = j.at("cd").get<double>();
    e.fscore = j.at("fscore").get<double>();
    return e;
}

}  // namespace

void write_report(const RunReport& report, const fs::path& path, const fs::path& csv_path) {
    if (report.pairs.empty()) throw std::invalid_argument("write_report: empty pair list");

    ordered_json j;
    j["version"] = "1";
    j["config"] = ordered_json::object();
    for (const auto& [k, v] : report.config) j["config"][k] = v;
    j["pairs"] = ordered_json::array();
    for (const auto& p : report.pairs) {
        ordered_json jp;
        jp["id"] = p.id;
        jp["metrics"] = eval_to_json(p.eval);
        jp["restarts_used"] = p.restarts_used;
        jp["wall_time"] = p.wall_time;
        j["pairs"].push_back(std::move(jp));
    }
    const auto& s = report.summary;
    j["aggregate"] = {{"count", s.count},
                      {"mean", eval_to_json(s.mean)},
                      {"median", eval_to_json(s.median)},
                      {"recall", s.recall},
                      {"recall_rot_deg", s.recall_rot_deg},
                      {"recall_trans", s.recall_trans}};
    store_json(j, path);

    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot open " + csv_path.string() + " for writing");
    csv << "id,rot_error_deg,trans_error,mse,cd,fscore,restarts_used,wall_time\n";
    for (const auto& p : report.pairs) {
        csv << p.id << ',' << format_double(p.eval.rot_error_deg) << ','
            << format_double(p.eval.trans_error) << ',' << format_double(p.eval.mse) << ','
            << format_double(p.eval.cd) << ',' << format_double(p.eval.fscore) << ','
            << p.restarts_used << ',' << format_double(p.wall_time) << '\n';
    }
    if (!csv) throw std::runtime_error("write failed: " + csv_path.string());
}

RunReport read_report(const fs::path& path) {
    const ordered_json j = load_json(path);
    RunReport r;
    try {
        for (const auto& [k, v] : j.at("config").items()) {
            r.config.emplace_back(k, v.get<std::string>());
        }
        for (const auto& jp : j.at("pairs")) {
            ReportPair p;
            p.id = jp.at("id").get<std::string>();
            p.eval = eval_from_json(jp.at("metrics"));
            p.restarts_used = jp.at("restarts_used").get<int>();
            p.wall_time = jp.at("wall_time").get<double>();
            r.pairs.push_back(std::move(p));
        }
        const auto& js = j.at("aggregate");
        r.summary.count = js.at("count").get<std::size_t>();
        r.summary.mean = eval_from_json(js.at("mean"));
        r.summary.median = eval_from_json(js.at("median"));
        r.summary.recall = js.at("recall").get<double>();
        r.summary.recall_rot_deg = js.at("recall_rot_deg").get<double>();
        r.summary.recall_trans = js.at("recall_trans").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return r;
}

}  // namespace hybreg
