#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gift/consolidation.hpp"
#include "gift/losses.hpp"
#include "gift/model.hpp"
#include "gift/worldgen.hpp"

namespace gift {

// Bias-corrected adaptive moments with decoupled weight decay.
struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    long step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    static OptimizerState for_params(std::size_t n, double weight_decay = 0.0);
};

void optimizer_step(OptimizerState& state, std::vector<double>& theta,
                    const std::vector<double>& grad, double lr);

// lr_min + 0.5 (lr_max - lr_min) (1 + cos(pi step / total))
double cosine_lr(long step, long total, double lr_max, double lr_min);

struct TeacherMode {
    enum class Kind { previous, initial, wise };
    Kind kind = Kind::previous;
    double blend = 0.5; // wise: weight on the initial pretrained parameters
};

struct TrainConfig {
    int iterations = 300;
    int batch = 16;
    double lr_max = 1e-3;
    double lr_min = 1e-4;
    double weight_decay = 0.0;
    LossWeights weights;
    ConsolidationConfig consolidation;
    TeacherMode teacher;
    DistillVariant distill_variant = DistillVariant::contrastive;
    int synthetic_per_task = 256;

    void validate() const;
};

struct PretrainConfig {
    int steps = 2000;
    int batch = 16;
    double lr_max = 3e-3;
    double lr_min = 3e-4;
    double weight_decay = 0.0;

    void validate() const;
};

struct StepRecord {
    int step = 0;
    double lr = 0;
    double ce = 0;
    double cd = 0;
    double ita = 0;
    double awc = 0;
    double distill_xent = 0;
    double fisher_min = 0;
    double fisher_mean = 0;
    double fisher_max = 0;
};

struct TaskTrace {
    int task_index = 0;
    std::vector<StepRecord> steps;
};

// Test instrumentation: called per step with the Fisher actually applied and
// the quantities needed to recompute it independently.
struct TrainHooks {
    std::function<void(int step, const std::vector<double>& params_before,
                       const std::vector<double>& distill_grad,
                       const FisherDiagonal& fisher)>
        on_step;
};

// Thrown when a loss goes non-finite; carries the trace up to the failure.
struct DivergenceError : TrainingError {
    DivergenceError(const std::string& msg, TaskTrace trace)
        : TrainingError(msg), trace(std::make_shared<TaskTrace>(std::move(trace))) {}
    std::shared_ptr<TaskTrace> trace;
};

struct PretrainResult {
    ModelSnapshot snapshot;
    std::vector<double> loss_trace;
};

// Symmetric contrastive training on real base-class batches; the alignment
// loss over the batch matrix is the InfoNCE objective. The temperature is
// trainable here and frozen everywhere downstream.
PretrainResult pretrain(TwoTowerModel& model, const World& world,
                        const std::vector<int>& base_classes, const PretrainConfig& cfg);

// Gradient of alpha * L_CD + beta * L_ITA for one synthetic batch, evaluated
// at the given parameters against the given teacher. Shared by the per-step
// Fisher path and the static pre-task Fisher.
struct DistillEval {
    double cd = 0;
    double ita = 0;
    Tensor teacher_matrix;    // the batch's detached teacher cosines
    std::vector<double> grad; // flat layout, tau slot zero
};
DistillEval distill_eval(const ModelArch& arch, const std::vector<double>& params,
                         const ModelSnapshot& teacher, const Tensor& images,
                         const Tensor& texts, double alpha, double beta,
                         DistillVariant variant = DistillVariant::contrastive);

// Cross-entropy of the cosine-softmax prediction on a fixed batch at
// arbitrary flat parameters; the loss surface probed by the landscape
// tooling.
double task_ce_value(const ModelArch& arch, const std::vector<double>& params,
                     const Tensor& images, const Tensor& class_texts,
                     const std::vector<int>& label_positions, double smoothing);

// One task of continual fine-tuning: per step a task batch drives the
// cross-entropy term, a synthetic batch drives distillation and alignment,
// and the consolidation penalty anchors the flat parameters to the teacher.
TaskTrace train_task(TwoTowerModel& model, const ModelSnapshot& teacher,
                     const TaskSpec& task, const std::vector<SyntheticPair>& synthetic,
                     const TrainConfig& cfg, const World& world,
                     const TrainHooks* hooks = nullptr);

struct ContinualResult {
    std::vector<ModelSnapshot> snapshots; // one per task, in order
    std::vector<TaskTrace> traces;
};

using EvalHook = std::function<void(int task_just_finished, const TwoTowerModel&)>;

// Sequential loop: grow the pool, regenerate the synthetic set, pick the
// teacher, train, snapshot, evaluate.
ContinualResult continual_fit(TwoTowerModel& model, const ModelSnapshot& theta0,
                              const std::vector<TaskSpec>& suite, const TrainConfig& cfg,
                              const World& world, ClassPool& pool,
                              const EvalHook& hook = {});

// Teacher parameters for task t given the mode; previous falls back to theta0
// for the first task.
ModelSnapshot resolve_teacher(const TeacherMode& mode, const ModelSnapshot& theta0,
                              const ModelSnapshot* previous);

} // namespace gift
