#pragma once

#include <map>
#include <string>
#include <vector>

#include "gift/analysis.hpp"
#include "gift/bench.hpp"

namespace gift {

// Shortest decimal text that parses back to the exact same double; every
// numeric artifact goes through this so reruns are byte-identical.
std::string format_double(double v);

// Write-to-temp-then-rename so no artifact is ever observed half-written.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

std::string matrix_to_csv(const AccuracyMatrix& m);
AccuracyMatrix matrix_from_csv(const std::string& text);

std::string metrics_to_json(const MetricReport& r);
MetricReport metrics_from_json(const std::string& text);

std::string trace_to_csv(const TaskTrace& t);
TaskTrace trace_from_csv(const std::string& text);

struct LandscapeAnchor {
    std::string name;
    double x, y, loss;
};
std::string landscape_to_csv(const LandscapeGrid& grid,
                             const std::vector<LandscapeAnchor>& anchors);

std::string trace_report_to_csv(const TraceReport& r);
std::string task_starts_to_csv(const TraceReport& r);

struct SuiteSignature {
    std::uint64_t seed = 0;
    int tasks = 0;
    int classes_per_task = 0;
    int base_classes = 0;
    std::string eval_mode;

    bool operator==(const SuiteSignature&) const = default;
};

struct MethodArtifacts {
    std::string dir;
    std::string matrix_csv;
    std::string metrics_json;
    std::vector<std::string> traces;
    std::vector<std::string> snapshots;
    double wall_seconds = 0;
};

struct RunManifest {
    std::string tool_version;
    std::string config_text;
    std::string config_hash; // fnv1a64 of config_text, hex
    SuiteSignature signature;
    std::map<std::string, MethodArtifacts> methods;
};

std::string config_hash_of(const std::string& config_text);
std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);

} // namespace gift
