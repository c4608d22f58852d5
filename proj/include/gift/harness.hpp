#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "gift/artifacts.hpp"
#include "gift/config.hpp"

namespace gift {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunOutcome {
    std::string out_dir;
    std::string manifest_path;
    RunManifest manifest;
};

// Full experiment: build world and suite, pretrain once, run every requested
// method (serially or in threads), write all artifacts plus the manifest.
RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                          std::ostream& log);

struct CompareRow {
    std::string run;
    std::string method;
    double transfer = 0, avg = 0, last = 0;
    bool has_delta = false;
    double d_transfer = 0, d_avg = 0, d_last = 0;
};

struct CompareTable {
    std::string baseline;
    std::vector<CompareRow> rows;
};

// Aligned Transfer/Avg/Last table over >= 1 manifests of compatible suites.
// With a baseline method, deltas are method-minus-baseline within each run;
// without one, deltas are taken against the first manifest's row for the
// same method.
CompareTable compare_runs(const std::vector<std::string>& manifest_paths,
                          const std::string& baseline_method);
std::string compare_to_csv(const CompareTable& t);
std::string compare_to_text(const CompareTable& t);

struct LandscapeOptions {
    std::string config_path;
    std::string w0_path, w1_path, w2_path;
    std::string loss = "train_ce"; // train_ce | test_ce
    int task = 1;
    int resolution = 41;
    int max_samples = 256;
    double margin = 0.5;
    std::string out_csv = "landscape.csv";
};
void run_landscape(const LandscapeOptions& opt, std::ostream& log);

struct TraceOptions {
    std::string run_dir;
    std::string method;
    std::string report_csv = "distill_trace.csv";
    std::string starts_csv = "task_starts.csv";
};
void run_trace(const TraceOptions& opt, std::ostream& log);

// Compact invariant checks, printed one per line; true when everything holds.
bool selftest(std::ostream& out);

} // namespace gift
