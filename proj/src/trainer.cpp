#include "gift/trainer.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

#include "gift/errors.hpp"
#include "gift/kernels.hpp"

namespace gift {

OptimizerState OptimizerState::for_params(std::size_t n, double weight_decay) {
    OptimizerState st;
    st.m.assign(n, 0.0);
    st.v.assign(n, 0.0);
    st.weight_decay = weight_decay;
    return st;
}

void optimizer_step(OptimizerState& state, std::vector<double>& theta,
                    const std::vector<double>& grad, double lr) {
    if (theta.size() != grad.size() || theta.size() != state.m.size() ||
        theta.size() != state.v.size())
        throw ContractError("optimizer_step: shape mismatch");
    for (double g : grad)
        if (!std::isfinite(g)) throw TrainingError("optimizer_step: non-finite gradient");
    state.step_count += 1;
    const double bias1 = 1.0 / (1.0 - std::pow(state.beta1, state.step_count));
    const double bias2 = 1.0 / (1.0 - std::pow(state.beta2, state.step_count));
    kern::active().adamw(theta.data(), state.m.data(), state.v.data(), grad.data(),
                         theta.size(), lr, state.beta1, state.beta2, state.eps,
                         state.weight_decay, bias1, bias2);
}

double cosine_lr(long step, long total, double lr_max, double lr_min) {
    if (total < 1) throw ContractError("cosine_lr: total must be >= 1");
    if (step < 0 || step > total) throw ContractError("cosine_lr: step outside [0, total]");
    constexpr double kPi = 3.141592653589793238462643383279502884;
    return lr_min + 0.5 * (lr_max - lr_min) *
                        (1.0 + std::cos(kPi * static_cast<double>(step) /
                                        static_cast<double>(total)));
}

void TrainConfig::validate() const {
    if (iterations < 1) throw ConfigError("train: iterations must be >= 1");
    if (batch < 2) throw ConfigError("train: batch must be >= 2");
    if (!(lr_max >= lr_min) || lr_min < 0)
        throw ConfigError("train: need lr_max >= lr_min >= 0");
    if (synthetic_per_task < 1) throw ConfigError("train: synthetic_per_task must be >= 1");
    weights.validate();
    consolidation.validate();
}

void PretrainConfig::validate() const {
    if (steps < 0) throw ConfigError("pretrain: steps must be >= 0");
    if (batch < 2) throw ConfigError("pretrain: batch must be >= 2");
    if (!(lr_max >= lr_min) || lr_min < 0)
        throw ConfigError("pretrain: need lr_max >= lr_min >= 0");
}

namespace {

struct GradEval {
    double value = 0;
    std::vector<double> grad;
};

GradEval ce_eval(const ModelArch& arch, const std::vector<double>& params,
                 const Tensor& images, const Tensor& class_texts,
                 const std::vector<int>& label_positions, double smoothing) {
    const ParamLayout layout = ParamLayout::make(arch);
    const double tau = std::exp(params[layout.log_tau.offset]);
    Graph g;
    const ModelNodes nodes = bind_model(g, arch, params, true, false);
    const NodeId z = encode_images_node(g, nodes, g.constant(images));
    const NodeId w = encode_texts_node(g, nodes, g.constant(class_texts));
    const NodeId cos = g.matmul(z, g.transpose(w));
    const NodeId ce = ce_loss_node(g, cos, tau, label_positions, smoothing);
    g.backward(ce);
    GradEval out;
    out.value = g.scalar_value(ce);
    out.grad.assign(layout.total, 0.0);
    collect_param_grads(g, nodes, layout, out.grad);
    return out;
}

Tensor class_text_matrix(const World& world, const std::vector<int>& class_ids) {
    const auto d = static_cast<std::size_t>(world.config().text_dim);
    Tensor out(class_ids.size(), d);
    for (std::size_t k = 0; k < class_ids.size(); ++k) {
        const Tensor row = world.text_input(class_ids[k]);
        kern::active().add(row.data(), out.row_ptr(k), out.row_ptr(k), d);
    }
    return out;
}

struct SynthBatch {
    Tensor images;
    Tensor texts;
};

// Cyclic slices over the regenerated set: deterministic, and with the set
// size equal to the batch size every step sees the identical batch.
SynthBatch synth_batch(const std::vector<SyntheticPair>& set, int step, int batch) {
    const std::size_t s = set.size();
    const std::size_t d_img = set[0].image.size();
    const std::size_t d_txt = set[0].text.size();
    SynthBatch out{Tensor(static_cast<std::size_t>(batch), d_img),
                   Tensor(static_cast<std::size_t>(batch), d_txt)};
    const std::size_t start = (static_cast<std::size_t>(step) *
                               static_cast<std::size_t>(batch)) % s;
    for (int b = 0; b < batch; ++b) {
        const auto& pair = set[(start + static_cast<std::size_t>(b)) % s];
        for (std::size_t j = 0; j < d_img; ++j)
            out.images.at(static_cast<std::size_t>(b), j) = pair.image[j];
        for (std::size_t j = 0; j < d_txt; ++j)
            out.texts.at(static_cast<std::size_t>(b), j) = pair.text[j];
    }
    return out;
}

void fisher_stats(const FisherDiagonal& f, StepRecord& rec) {
    if (f.values.empty()) return;
    const auto& k = kern::active();
    rec.fisher_max = k.max(f.values.data(), f.values.size());
    rec.fisher_mean = k.sum(f.values.data(), f.values.size()) /
                      static_cast<double>(f.values.size());
    double mn = f.values[0];
    for (double v : f.values)
        if (v < mn) mn = v;
    rec.fisher_min = mn;
}

void ensure_finite(double v, const char* what, int step, const TaskTrace& trace) {
    if (!std::isfinite(v))
        throw DivergenceError(std::string(what) + " went non-finite at step " +
                                  std::to_string(step),
                              trace);
}

} // namespace

PretrainResult pretrain(TwoTowerModel& model, const World& world,
                        const std::vector<int>& base_classes, const PretrainConfig& cfg) {
    cfg.validate();
    if (base_classes.empty()) throw ContractError("pretrain: base class set is empty");
    if (static_cast<std::size_t>(cfg.batch) > base_classes.size())
        throw ConfigError("pretrain: batch exceeds base class count");
    const ParamLayout& layout = model.layout();
    Rng rng = derive_stream(world.config().seed, "pretrain");
    OptimizerState opt = OptimizerState::for_params(layout.total, cfg.weight_decay);
    PretrainResult res;
    res.loss_trace.reserve(static_cast<std::size_t>(cfg.steps));
    std::vector<int> ids = base_classes;
    const auto d_img = static_cast<std::size_t>(world.config().image_dim);
    for (int step = 0; step < cfg.steps; ++step) {
        const double lr = cosine_lr(step, cfg.steps, cfg.lr_max, cfg.lr_min);
        // Distinct classes per batch keep the one-hot alignment targets clean.
        for (int b = 0; b < cfg.batch; ++b) {
            const std::size_t j = static_cast<std::size_t>(b) +
                                  rng.below(ids.size() - static_cast<std::size_t>(b));
            std::swap(ids[static_cast<std::size_t>(b)], ids[j]);
        }
        Tensor images(static_cast<std::size_t>(cfg.batch), d_img);
        Tensor texts(static_cast<std::size_t>(cfg.batch),
                     static_cast<std::size_t>(world.config().text_dim));
        for (int b = 0; b < cfg.batch; ++b) {
            const int cls = ids[static_cast<std::size_t>(b)];
            const Tensor clean = world.clean_image(cls);
            double* row = images.row_ptr(static_cast<std::size_t>(b));
            for (std::size_t j = 0; j < d_img; ++j)
                row[j] = clean.data()[j] + rng.normal(0.0, world.config().sigma_image);
            const Tensor txt = world.text_input(cls);
            kern::active().add(txt.data(), texts.row_ptr(static_cast<std::size_t>(b)),
                               texts.row_ptr(static_cast<std::size_t>(b)), txt.size());
        }
        Graph g;
        const ModelNodes nodes = bind_model(g, model.arch(), model.params(), true, true);
        const NodeId z = encode_images_node(g, nodes, g.constant(images));
        const NodeId w = encode_texts_node(g, nodes, g.constant(texts));
        const NodeId m = contrastive_matrix_node(g, z, w);
        const NodeId loss = ita_loss_node(g, m, nodes.log_tau);
        const double v = g.scalar_value(loss);
        if (!std::isfinite(v))
            throw DivergenceError("pretraining loss went non-finite at step " +
                                      std::to_string(step),
                                  TaskTrace{});
        g.backward(loss);
        std::vector<double> grad(layout.total, 0.0);
        collect_param_grads(g, nodes, layout, grad);
        res.loss_trace.push_back(v);
        optimizer_step(opt, model.params(), grad, lr);
        // keep the trainable temperature in the usual contrastive range
        double& log_tau = model.params()[layout.log_tau.offset];
        log_tau = std::min(std::max(log_tau, std::log(0.01)), std::log(10.0));
    }
    res.snapshot = ModelSnapshot::of(model, 0, cfg.steps);
    return res;
}

double task_ce_value(const ModelArch& arch, const std::vector<double>& params,
                     const Tensor& images, const Tensor& class_texts,
                     const std::vector<int>& label_positions, double smoothing) {
    const ParamLayout layout = ParamLayout::make(arch);
    const double tau = std::exp(params[layout.log_tau.offset]);
    Graph g;
    const ModelNodes nodes = bind_model(g, arch, params, false, false);
    const NodeId z = encode_images_node(g, nodes, g.constant(images));
    const NodeId w = encode_texts_node(g, nodes, g.constant(class_texts));
    const NodeId cos = g.matmul(z, g.transpose(w));
    return g.scalar_value(ce_loss_node(g, cos, tau, label_positions, smoothing));
}

DistillEval distill_eval(const ModelArch& arch, const std::vector<double>& params,
                         const ModelSnapshot& teacher, const Tensor& images,
                         const Tensor& texts, double alpha, double beta,
                         DistillVariant variant) {
    if (!(teacher.arch == arch)) throw ContractError("distill_eval: architecture mismatch");
    const ParamLayout layout = ParamLayout::make(arch);
    const double tau_s = std::exp(params[layout.log_tau.offset]);
    const double tau_t = teacher.temperature();

    const TwoTowerModel teacher_model = teacher.to_model();
    const EmbeddingBatch te = encode(teacher_model, images, texts);
    const Tensor teacher_m = contrastive_matrix(te).values;

    Graph g;
    const ModelNodes nodes = bind_model(g, arch, params, true, false);
    const NodeId z = encode_images_node(g, nodes, g.constant(images));
    const NodeId w = encode_texts_node(g, nodes, g.constant(texts));
    const NodeId m = contrastive_matrix_node(g, z, w);
    NodeId cd = -1;
    switch (variant) {
        case DistillVariant::contrastive:
            cd = cd_loss_node(g, m, teacher_m, tau_s, tau_t);
            break;
        case DistillVariant::image_only:
            // student text side replaced by the frozen teacher embeddings
            cd = cd_loss_node(g, g.matmul(z, g.transpose(g.constant(te.text))),
                              teacher_m, tau_s, tau_t);
            break;
        case DistillVariant::text_only:
            cd = cd_loss_node(g, g.matmul(g.constant(te.image), g.transpose(w)),
                              teacher_m, tau_s, tau_t);
            break;
        case DistillVariant::feature:
            cd = feature_distance_node(g, z, w, te.image, te.text);
            break;
    }
    const NodeId ita = ita_loss_node(g, m, tau_s);
    const NodeId obj = g.add(g.scale(cd, alpha), g.scale(ita, beta));
    g.backward(obj);

    DistillEval out;
    out.cd = g.scalar_value(cd);
    out.ita = g.scalar_value(ita);
    out.teacher_matrix = teacher_m;
    out.grad.assign(layout.total, 0.0);
    collect_param_grads(g, nodes, layout, out.grad);
    return out;
}

TaskTrace train_task(TwoTowerModel& model, const ModelSnapshot& teacher,
                     const TaskSpec& task, const std::vector<SyntheticPair>& synthetic,
                     const TrainConfig& cfg, const World& world,
                     const TrainHooks* hooks) {
    cfg.validate();
    if (!(teacher.arch == model.arch()))
        throw ContractError("train_task: teacher architecture mismatch");
    const ParamLayout& layout = model.layout();
    const auto& k = kern::active();

    const int n_train = task.train_per_class * static_cast<int>(task.class_ids.size());
    const LabeledSet train_set = sample_real(world, task, n_train, Split::train);
    const Tensor class_texts = class_text_matrix(world, task.class_ids);
    std::unordered_map<int, int> position;
    for (std::size_t i = 0; i < task.class_ids.size(); ++i)
        position[task.class_ids[i]] = static_cast<int>(i);

    const ConsolidationMode mode = cfg.consolidation.mode;
    const bool distill_active = cfg.weights.alpha > 0.0 || cfg.weights.beta > 0.0 ||
                                mode == ConsolidationMode::awc ||
                                mode == ConsolidationMode::ewc_static;
    if (distill_active && synthetic.empty())
        throw ContractError("train_task: distillation is active but synthetic set is empty");

    FisherDiagonal static_fisher;
    if (mode == ConsolidationMode::ewc_static) {
        static_fisher = ewc_static_fisher(
            [&](int b) {
                const SynthBatch sb = synth_batch(synthetic, b, cfg.batch);
                return distill_eval(model.arch(), teacher.params, teacher, sb.images,
                                    sb.texts, cfg.weights.alpha, cfg.weights.beta,
                                    cfg.distill_variant)
                    .grad;
            },
            cfg.consolidation.static_sample_batches, cfg.consolidation.normalize);
    }

    Rng task_rng = derive_stream(world.config().seed, "task-batches",
                                 static_cast<std::uint64_t>(task.index));
    OptimizerState opt = OptimizerState::for_params(layout.total, cfg.weight_decay);
    TaskTrace trace;
    trace.task_index = task.index;

    const auto d_img = static_cast<std::size_t>(world.config().image_dim);
    for (int step = 0; step < cfg.iterations; ++step) {
        const double lr = cosine_lr(step, cfg.iterations, cfg.lr_max, cfg.lr_min);

        Tensor batch_images(static_cast<std::size_t>(cfg.batch), d_img);
        std::vector<int> labels(static_cast<std::size_t>(cfg.batch));
        for (int b = 0; b < cfg.batch; ++b) {
            const std::size_t idx = task_rng.below(train_set.labels.size());
            k.add(train_set.images.row_ptr(idx),
                  batch_images.row_ptr(static_cast<std::size_t>(b)),
                  batch_images.row_ptr(static_cast<std::size_t>(b)), d_img);
            labels[static_cast<std::size_t>(b)] =
                position.at(train_set.labels[idx]);
        }
        const GradEval ce = ce_eval(model.arch(), model.params(), batch_images,
                                    class_texts, labels, cfg.weights.label_smoothing);
        std::vector<double> grad = ce.grad;

        StepRecord rec;
        rec.step = step;
        rec.lr = lr;
        rec.ce = ce.value;

        std::vector<double> distill_grad(layout.total, 0.0);
        if (distill_active) {
            const SynthBatch sb = synth_batch(synthetic, step, cfg.batch);
            const DistillEval de =
                distill_eval(model.arch(), model.params(), teacher, sb.images, sb.texts,
                             cfg.weights.alpha, cfg.weights.beta, cfg.distill_variant);
            rec.cd = de.cd;
            rec.ita = de.ita;
            rec.distill_xent =
                de.cd + teacher_entropy(ContrastiveMatrix{de.teacher_matrix},
                                        teacher.temperature());
            distill_grad = de.grad;
            k.add(distill_grad.data(), grad.data(), grad.data(), grad.size());
        }

        FisherDiagonal fisher;
        switch (mode) {
            case ConsolidationMode::none:
                break;
            case ConsolidationMode::l2:
                rec.awc = l2_penalty(model.params(), teacher.params);
                accumulate_l2_gradient(model.params(), teacher.params,
                                       cfg.consolidation.lambda, grad);
                break;
            case ConsolidationMode::awc:
                fisher = fisher_from_gradients(distill_grad, step,
                                               cfg.consolidation.normalize);
                rec.awc = awc_loss(model.params(), teacher.params, fisher);
                accumulate_awc_gradient(model.params(), teacher.params, fisher,
                                        cfg.consolidation.lambda, grad);
                break;
            case ConsolidationMode::ewc_static:
                fisher = static_fisher;
                fisher.step_index = step;
                rec.awc = awc_loss(model.params(), teacher.params, fisher);
                accumulate_awc_gradient(model.params(), teacher.params, fisher,
                                        cfg.consolidation.lambda, grad);
                break;
        }
        fisher_stats(fisher, rec);

        ensure_finite(rec.ce, "cross-entropy loss", step, trace);
        ensure_finite(rec.cd, "distillation loss", step, trace);
        ensure_finite(rec.ita, "alignment loss", step, trace);
        ensure_finite(rec.awc, "consolidation penalty", step, trace);

        if (hooks && hooks->on_step)
            hooks->on_step(step, model.params(), distill_grad, fisher);

        trace.steps.push_back(rec);
        optimizer_step(opt, model.params(), grad, lr);
    }
    return trace;
}

ModelSnapshot resolve_teacher(const TeacherMode& mode, const ModelSnapshot& theta0,
                              const ModelSnapshot* previous) {
    switch (mode.kind) {
        case TeacherMode::Kind::initial:
            return theta0;
        case TeacherMode::Kind::previous:
            return previous ? *previous : theta0;
        case TeacherMode::Kind::wise: {
            if (!previous) return theta0;
            const TwoTowerModel blended = interpolate(*previous, theta0, mode.blend);
            return ModelSnapshot::of(blended, previous->task_index, previous->step);
        }
    }
    throw ContractError("resolve_teacher: unknown teacher mode");
}

ContinualResult continual_fit(TwoTowerModel& model, const ModelSnapshot& theta0,
                              const std::vector<TaskSpec>& suite, const TrainConfig& cfg,
                              const World& world, ClassPool& pool, const EvalHook& hook) {
    cfg.validate();
    if (suite.empty()) throw ContractError("continual_fit: empty task suite");
    ContinualResult res;
    long steps_done = theta0.step;
    for (const TaskSpec& task : suite) {
        pool.grow(task.class_ids);
        const std::vector<SyntheticPair> synth =
            regenerate_for_task(world, pool, task.index, cfg.synthetic_per_task);
        const ModelSnapshot teacher = resolve_teacher(
            cfg.teacher, theta0, res.snapshots.empty() ? nullptr : &res.snapshots.back());
        res.traces.push_back(train_task(model, teacher, task, synth, cfg, world));
        steps_done += cfg.iterations;
        res.snapshots.push_back(ModelSnapshot::of(model, task.index, steps_done));
        if (hook) hook(task.index, model);
    }
    return res;
}

} // namespace gift
