#include "gift/artifacts.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "gift/errors.hpp"
#include "gift/rng.hpp"

namespace gift {

std::string format_double(double v) {
    char buf[64];
    if (v == static_cast<double>(static_cast<long long>(v)) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
        return buf;
    }
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw FormatError("cannot open " + tmp + " for writing");
        f << content;
        f.flush();
        if (!f) throw FormatError("write to " + tmp + " failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw FormatError("rename " + tmp + " -> " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string matrix_to_csv(const AccuracyMatrix& m) {
    std::ostringstream out;
    for (int row = 0; row <= m.n; ++row) {
        for (int col = 1; col <= m.n; ++col) {
            if (col > 1) out << ",";
            out << format_double(m.at(row, col));
        }
        out << "\n";
    }
    return out.str();
}

AccuracyMatrix matrix_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError("matrix csv: no rows");
    const int n = static_cast<int>(rows.front().size());
    if (static_cast<int>(rows.size()) != n + 1)
        throw FormatError("matrix csv: expected n+1 rows");
    AccuracyMatrix m(n);
    for (int row = 0; row <= n; ++row) {
        if (static_cast<int>(rows[static_cast<std::size_t>(row)].size()) != n)
            throw FormatError("matrix csv: ragged rows");
        for (int col = 1; col <= n; ++col)
            m.at(row, col) = rows[static_cast<std::size_t>(row)][static_cast<std::size_t>(col - 1)];
    }
    return m;
}

namespace {

nlohmann::json parse_json(const std::string& text, const char* what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string(what) + ": " + e.what());
    }
}

} // namespace

std::string metrics_to_json(const MetricReport& r) {
    nlohmann::json j;
    j["transfer"] = r.transfer;
    j["avg"] = r.avg;
    j["last"] = r.last;
    nlohmann::json per;
    auto series = [](const std::vector<double>& v) {
        // index 0 and undefined columns are NaN; store as null
        nlohmann::json arr = nlohmann::json::array();
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (std::isnan(v[i])) arr.push_back(nullptr);
            else arr.push_back(v[i]);
        }
        return arr;
    };
    per["transfer"] = series(r.per_task_transfer);
    per["avg"] = series(r.per_task_avg);
    per["last"] = series(r.per_task_last);
    j["per_task"] = per;
    return j.dump(2) + "\n";
}

MetricReport metrics_from_json(const std::string& text) {
    const nlohmann::json j = parse_json(text, "metrics json");
    MetricReport r;
    try {
        r.transfer = j.at("transfer").get<double>();
        r.avg = j.at("avg").get<double>();
        r.last = j.at("last").get<double>();
        auto series = [&](const char* key, std::vector<double>& out) {
            out.assign(1, std::numeric_limits<double>::quiet_NaN());
            for (const auto& v : j.at("per_task").at(key)) {
                if (v.is_null()) out.push_back(std::numeric_limits<double>::quiet_NaN());
                else out.push_back(v.get<double>());
            }
        };
        series("transfer", r.per_task_transfer);
        series("avg", r.per_task_avg);
        series("last", r.per_task_last);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("metrics json: ") + e.what());
    }
    return r;
}

std::string trace_to_csv(const TaskTrace& t) {
    std::ostringstream out;
    out << "step,lr,ce,cd,ita,awc,distill_xent,fisher_min,fisher_mean,fisher_max\n";
    for (const StepRecord& s : t.steps) {
        out << s.step << "," << format_double(s.lr) << "," << format_double(s.ce) << ","
            << format_double(s.cd) << "," << format_double(s.ita) << ","
            << format_double(s.awc) << "," << format_double(s.distill_xent) << ","
            << format_double(s.fisher_min) << "," << format_double(s.fisher_mean) << ","
            << format_double(s.fisher_max) << "\n";
    }
    return out.str();
}

TaskTrace trace_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("trace csv: empty file");
    if (line.rfind("step,lr,ce,cd,ita,awc,distill_xent", 0) != 0)
        throw FormatError("trace csv: unexpected header '" + line + "'");
    TaskTrace t;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
        if (vals.size() != 10) throw FormatError("trace csv: expected 10 columns");
        StepRecord s;
        s.step = static_cast<int>(vals[0]);
        s.lr = vals[1];
        s.ce = vals[2];
        s.cd = vals[3];
        s.ita = vals[4];
        s.awc = vals[5];
        s.distill_xent = vals[6];
        s.fisher_min = vals[7];
        s.fisher_mean = vals[8];
        s.fisher_max = vals[9];
        t.steps.push_back(s);
    }
    return t;
}

std::string landscape_to_csv(const LandscapeGrid& grid,
                             const std::vector<LandscapeAnchor>& anchors) {
    std::ostringstream out;
    out << "x,y,loss,label\n";
    for (std::size_t r = 0; r < grid.ys.size(); ++r)
        for (std::size_t c = 0; c < grid.xs.size(); ++c)
            out << format_double(grid.xs[c]) << "," << format_double(grid.ys[r]) << ","
                << format_double(grid.loss.at(r, c)) << ",\n";
    for (const auto& a : anchors)
        out << format_double(a.x) << "," << format_double(a.y) << ","
            << format_double(a.loss) << "," << a.name << "\n";
    return out.str();
}

std::string trace_report_to_csv(const TraceReport& r) {
    std::ostringstream out;
    out << "global_step,task,step,distill_xent\n";
    for (const auto& p : r.series)
        out << p.global_step << "," << p.task << "," << p.step << ","
            << format_double(p.distill_xent) << "\n";
    return out.str();
}

std::string task_starts_to_csv(const TraceReport& r) {
    std::ostringstream out;
    out << "task,initial_distill_xent\n";
    for (const auto& [task, value] : r.task_start_values)
        out << task << "," << format_double(value) << "\n";
    return out.str();
}

std::string config_hash_of(const std::string& config_text) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(config_text)));
    return buf;
}

std::string manifest_to_json(const RunManifest& m) {
    nlohmann::json j;
    j["tool_version"] = m.tool_version;
    j["config"] = m.config_text;
    j["config_hash"] = m.config_hash;
    j["suite_signature"] = {{"seed", m.signature.seed},
                            {"tasks", m.signature.tasks},
                            {"classes_per_task", m.signature.classes_per_task},
                            {"base_classes", m.signature.base_classes},
                            {"eval_mode", m.signature.eval_mode}};
    nlohmann::json methods = nlohmann::json::object();
    for (const auto& [name, art] : m.methods) {
        nlohmann::json a;
        a["dir"] = art.dir;
        a["matrix"] = art.matrix_csv;
        a["metrics"] = art.metrics_json;
        a["traces"] = art.traces;
        a["snapshots"] = art.snapshots;
        a["wall_seconds"] = art.wall_seconds;
        methods[name] = a;
    }
    j["methods"] = methods;
    return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
    const nlohmann::json j = parse_json(text, "manifest");
    RunManifest m;
    try {
        m.tool_version = j.at("tool_version").get<std::string>();
        m.config_text = j.at("config").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::string>();
        const auto& sig = j.at("suite_signature");
        m.signature.seed = sig.at("seed").get<std::uint64_t>();
        m.signature.tasks = sig.at("tasks").get<int>();
        m.signature.classes_per_task = sig.at("classes_per_task").get<int>();
        m.signature.base_classes = sig.at("base_classes").get<int>();
        m.signature.eval_mode = sig.at("eval_mode").get<std::string>();
        for (const auto& [name, a] : j.at("methods").items()) {
            MethodArtifacts art;
            art.dir = a.at("dir").get<std::string>();
            art.matrix_csv = a.at("matrix").get<std::string>();
            art.metrics_json = a.at("metrics").get<std::string>();
            art.traces = a.at("traces").get<std::vector<std::string>>();
            art.snapshots = a.at("snapshots").get<std::vector<std::string>>();
            art.wall_seconds = a.at("wall_seconds").get<double>();
            m.methods[name] = art;
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    return m;
}

} // namespace gift
