#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gift/bench.hpp"
#include "gift/trainer.hpp"
#include "gift/worldgen.hpp"

namespace gift {

// Whole-experiment configuration: a single sectioned key=value text file with
// a closed schema (unknown keys are rejected with their line number).
struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::string out_dir; // empty: resolved from --out or GIFT_BENCH_OUT
    std::vector<std::string> methods = {"zeroshot", "finetune", "l2", "gift_full"};
    bool parallel = false;
    EvalMode eval_mode = EvalMode::til;
    bool dump_datasets = false;

    int base_classes = 40;
    WorldConfig world;
    SuiteConfig suite;
    int hidden = 64;
    int embed_dim = 16;
    PretrainConfig pretrain;
    TrainConfig train;
    double lambda_l2 = 1.0;

    ModelArch arch() const {
        return ModelArch{world.image_dim, world.text_dim, hidden, embed_dim};
    }

    static ExperimentConfig defaults();
    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_text(const std::string& text, const std::string& origin);

    // Canonical text form; parse(serialize()) reproduces the exact config.
    std::string serialize() const;
    void validate() const;

private:
    // Derived fields kept consistent after parsing and before serializing.
    void resolve();
};

std::string teacher_to_string(const TeacherMode& mode);
TeacherMode teacher_from_string(const std::string& text);

} // namespace gift
