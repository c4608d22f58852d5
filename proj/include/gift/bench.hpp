#pragma once

#include <string>
#include <vector>

#include "gift/model.hpp"
#include "gift/trainer.hpp"
#include "gift/worldgen.hpp"

namespace gift {

enum class EvalMode { til, cil };
EvalMode eval_mode_from(const std::string& name);
std::string to_string(EvalMode mode);

// Row i (1..n) holds per-task test accuracies of the model after learning
// task i; row 0 holds the pretrained model's zero-shot accuracies.
struct AccuracyMatrix {
    int n = 0;
    std::vector<double> cells; // (n + 1) rows x n cols

    explicit AccuracyMatrix(int tasks = 0)
        : n(tasks),
          cells(tasks > 0 ? static_cast<std::size_t>((tasks + 1) * tasks) : 0, 0.0) {}

    double& at(int row, int col); // row in 0..n, col in 1..n
    double at(int row, int col) const;
    bool complete() const; // every cell in [0, 1]
};

struct MetricReport {
    double transfer = 0;
    double avg = 0;
    double last = 0;
    std::vector<double> per_task_transfer; // column j, j >= 2; index 0 is NaN
    std::vector<double> per_task_avg;
    std::vector<double> per_task_last;
};

// Transfer, Last and Avg over rows 1..n (row 0 is stored but excluded).
MetricReport metrics(const AccuracyMatrix& m);

// Fraction of correct argmax predictions on the task's test split.
// TIL restricts candidates to the task's own classes; CIL ranks against all
// downstream classes learned so far plus the evaluated task's classes.
double evaluate(const TwoTowerModel& model, const World& world, const TaskSpec& task,
                EvalMode mode, const ClassPool& pool, int learned_upto);

std::vector<int> cil_candidates(const ClassPool& pool, int learned_upto,
                                const TaskSpec& task);

enum class MethodKind {
    zeroshot,
    finetune,
    l2,
    ewc_static,
    gift_cd,
    gift_cd_ita,
    gift_cd_awc,
    gift_full,
    wise_teacher,
};

struct MethodSpec {
    MethodKind kind = MethodKind::zeroshot;
    double wise_blend = 0.5;

    static MethodSpec parse(const std::string& id); // e.g. "wise_teacher(0.2)"
    std::string canonical() const;
};

struct RunContext {
    const World& world;
    const std::vector<TaskSpec>& suite;
    const ModelSnapshot& theta0;
    TrainConfig base;
    double lambda_l2 = 1.0; // penalty scale for the plain-l2 baseline
    EvalMode mode = EvalMode::til;
};

// The method presets: which loss terms and consolidation mode each method id
// turns on, starting from the run's base training config.
TrainConfig resolve_method_config(const MethodSpec& method, const RunContext& ctx);

struct MethodResult {
    MethodSpec method;
    TrainConfig resolved;
    AccuracyMatrix matrix;
    MetricReport report;
    std::vector<TaskTrace> traces;
    std::vector<ModelSnapshot> snapshots;
};

MethodResult run_method(const MethodSpec& method, const RunContext& ctx);

} // namespace gift
