#include "gift/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "gift/errors.hpp"
#include "gift/kernels.hpp"

namespace gift {

EvalMode eval_mode_from(const std::string& name) {
    if (name == "til") return EvalMode::til;
    if (name == "cil") return EvalMode::cil;
    throw ConfigError("eval mode must be til or cil (got '" + name + "')");
}

std::string to_string(EvalMode mode) { return mode == EvalMode::til ? "til" : "cil"; }

double& AccuracyMatrix::at(int row, int col) {
    if (row < 0 || row > n || col < 1 || col > n)
        throw ContractError("AccuracyMatrix: cell out of range");
    return cells[static_cast<std::size_t>(row) * static_cast<std::size_t>(n) +
                 static_cast<std::size_t>(col - 1)];
}

double AccuracyMatrix::at(int row, int col) const {
    return const_cast<AccuracyMatrix*>(this)->at(row, col);
}

bool AccuracyMatrix::complete() const {
    if (n == 0) return false;
    for (double c : cells)
        if (!(c >= 0.0 && c <= 1.0)) return false;
    return true;
}

MetricReport metrics(const AccuracyMatrix& m) {
    if (m.n < 2)
        throw ContractError("metrics: Transfer is undefined for fewer than 2 tasks");
    const int n = m.n;
    MetricReport r;
    r.per_task_transfer.assign(static_cast<std::size_t>(n) + 1,
                               std::numeric_limits<double>::quiet_NaN());
    r.per_task_avg.assign(static_cast<std::size_t>(n) + 1, 0.0);
    r.per_task_last.assign(static_cast<std::size_t>(n) + 1, 0.0);

    double transfer = 0.0;
    for (int j = 2; j <= n; ++j) {
        double col = 0.0;
        for (int i = 1; i <= j - 1; ++i) col += m.at(i, j);
        col /= static_cast<double>(j - 1);
        r.per_task_transfer[static_cast<std::size_t>(j)] = col;
        transfer += col;
    }
    r.transfer = transfer / static_cast<double>(n - 1);

    double avg = 0.0;
    for (int j = 1; j <= n; ++j) {
        double col = 0.0;
        for (int i = 1; i <= n; ++i) col += m.at(i, j);
        col /= static_cast<double>(n);
        r.per_task_avg[static_cast<std::size_t>(j)] = col;
        avg += col;
    }
    r.avg = avg / static_cast<double>(n);

    double last = 0.0;
    for (int j = 1; j <= n; ++j) {
        r.per_task_last[static_cast<std::size_t>(j)] = m.at(n, j);
        last += m.at(n, j);
    }
    r.last = last / static_cast<double>(n);
    return r;
}

std::vector<int> cil_candidates(const ClassPool& pool, int learned_upto,
                                const TaskSpec& task) {
    std::vector<int> out;
    std::set<int> seen;
    const int upto = std::min<int>(learned_upto, static_cast<int>(pool.downstream.size()));
    for (int t = 0; t < upto; ++t)
        for (int id : pool.downstream[static_cast<std::size_t>(t)])
            if (seen.insert(id).second) out.push_back(id);
    for (int id : task.class_ids)
        if (seen.insert(id).second) out.push_back(id);
    return out;
}

double evaluate(const TwoTowerModel& model, const World& world, const TaskSpec& task,
                EvalMode mode, const ClassPool& pool, int learned_upto) {
    const int n_test = task.test_per_class * static_cast<int>(task.class_ids.size());
    if (n_test < 1) throw ContractError("evaluate: empty test set");
    const LabeledSet test = sample_real(world, task, n_test, Split::test);

    const std::vector<int> candidates = mode == EvalMode::til
                                            ? task.class_ids
                                            : cil_candidates(pool, learned_upto, task);
    Tensor texts(candidates.size(), static_cast<std::size_t>(world.config().text_dim));
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        const Tensor row = world.text_input(candidates[k]);
        kern::active().add(row.data(), texts.row_ptr(k), texts.row_ptr(k), row.size());
    }

    const Tensor z = encode_images(model, test.images);
    const Tensor w = encode_texts(model, texts);
    // the prediction softmax is monotone in the cosine, so argmax cosine
    // suffices
    const auto& k = kern::active();
    int correct = 0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        std::size_t best = 0;
        double best_cos = -2.0;
        for (std::size_t c = 0; c < w.rows(); ++c) {
            const double cosv = k.dot(z.row_ptr(i), w.row_ptr(c), z.cols());
            if (cosv > best_cos) {
                best_cos = cosv;
                best = c;
            }
        }
        if (candidates[best] == test.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(z.rows());
}

MethodSpec MethodSpec::parse(const std::string& id) {
    MethodSpec m;
    if (id == "zeroshot") m.kind = MethodKind::zeroshot;
    else if (id == "finetune") m.kind = MethodKind::finetune;
    else if (id == "l2") m.kind = MethodKind::l2;
    else if (id == "ewc_static") m.kind = MethodKind::ewc_static;
    else if (id == "gift_cd") m.kind = MethodKind::gift_cd;
    else if (id == "gift_cd_ita") m.kind = MethodKind::gift_cd_ita;
    else if (id == "gift_cd_awc") m.kind = MethodKind::gift_cd_awc;
    else if (id == "gift_full") m.kind = MethodKind::gift_full;
    else if (id == "wise_teacher") m.kind = MethodKind::wise_teacher;
    else if (id.rfind("wise_teacher(", 0) == 0 && id.back() == ')') {
        m.kind = MethodKind::wise_teacher;
        const std::string num = id.substr(13, id.size() - 14);
        try {
            std::size_t used = 0;
            m.wise_blend = std::stod(num, &used);
            if (used != num.size()) throw std::invalid_argument(num);
        } catch (const std::exception&) {
            throw ConfigError("bad wise_teacher blend '" + num + "'");
        }
        if (!(m.wise_blend >= 0.0 && m.wise_blend <= 1.0))
            throw ConfigError("wise_teacher blend must lie in [0, 1]");
    } else {
        throw ConfigError("unknown method '" + id + "'");
    }
    return m;
}

std::string MethodSpec::canonical() const {
    switch (kind) {
        case MethodKind::zeroshot: return "zeroshot";
        case MethodKind::finetune: return "finetune";
        case MethodKind::l2: return "l2";
        case MethodKind::ewc_static: return "ewc_static";
        case MethodKind::gift_cd: return "gift_cd";
        case MethodKind::gift_cd_ita: return "gift_cd_ita";
        case MethodKind::gift_cd_awc: return "gift_cd_awc";
        case MethodKind::gift_full: return "gift_full";
        case MethodKind::wise_teacher: {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "wise_teacher(%g)", wise_blend);
            return buf;
        }
    }
    return "?";
}

TrainConfig resolve_method_config(const MethodSpec& method, const RunContext& ctx) {
    TrainConfig cfg = ctx.base;
    auto off = [&cfg]() {
        cfg.weights.alpha = 0.0;
        cfg.weights.beta = 0.0;
        cfg.consolidation.mode = ConsolidationMode::none;
        cfg.consolidation.lambda = 0.0;
        cfg.weights.lambda_awc = 0.0;
    };
    switch (method.kind) {
        case MethodKind::zeroshot:
        case MethodKind::finetune:
            off();
            break;
        case MethodKind::l2:
            off();
            cfg.consolidation.mode = ConsolidationMode::l2;
            cfg.consolidation.lambda = ctx.lambda_l2;
            break;
        case MethodKind::ewc_static:
            cfg.consolidation.mode = ConsolidationMode::ewc_static;
            break;
        case MethodKind::gift_cd:
            cfg.weights.beta = 0.0;
            cfg.consolidation.mode = ConsolidationMode::none;
            cfg.consolidation.lambda = 0.0;
            cfg.weights.lambda_awc = 0.0;
            break;
        case MethodKind::gift_cd_ita:
            cfg.consolidation.mode = ConsolidationMode::none;
            cfg.consolidation.lambda = 0.0;
            cfg.weights.lambda_awc = 0.0;
            break;
        case MethodKind::gift_cd_awc:
            cfg.weights.beta = 0.0;
            cfg.consolidation.mode = ConsolidationMode::awc;
            break;
        case MethodKind::gift_full:
            cfg.consolidation.mode = ConsolidationMode::awc;
            break;
        case MethodKind::wise_teacher:
            cfg.consolidation.mode = ConsolidationMode::awc;
            cfg.teacher.kind = TeacherMode::Kind::wise;
            cfg.teacher.blend = method.wise_blend;
            break;
    }
    return cfg;
}

MethodResult run_method(const MethodSpec& method, const RunContext& ctx) {
    MethodResult res;
    res.method = method;
    res.resolved = resolve_method_config(method, ctx);
    const int n = static_cast<int>(ctx.suite.size());
    res.matrix = AccuracyMatrix(n);

    // The base set is the ids reserved before the suite's first class.
    ClassPool pool;
    const int reserved = ctx.suite.empty() ? 0 : ctx.suite.front().class_ids.front();
    for (int c = 0; c < reserved; ++c) pool.base.push_back(c);

    const TwoTowerModel pretrained = ctx.theta0.to_model();
    for (int j = 1; j <= n; ++j)
        res.matrix.at(0, j) = evaluate(pretrained, ctx.world,
                                       ctx.suite[static_cast<std::size_t>(j - 1)],
                                       ctx.mode, pool, 0);

    if (method.kind == MethodKind::zeroshot) {
        for (int i = 1; i <= n; ++i)
            for (int j = 1; j <= n; ++j) res.matrix.at(i, j) = res.matrix.at(0, j);
        res.report = metrics(res.matrix);
        return res;
    }

    TwoTowerModel model = ctx.theta0.to_model();
    ContinualResult fit = continual_fit(
        model, ctx.theta0, ctx.suite, res.resolved, ctx.world, pool,
        [&](int task_done, const TwoTowerModel& current) {
            for (int j = 1; j <= n; ++j)
                res.matrix.at(task_done, j) =
                    evaluate(current, ctx.world, ctx.suite[static_cast<std::size_t>(j - 1)],
                             ctx.mode, pool, task_done);
        });
    res.traces = std::move(fit.traces);
    res.snapshots = std::move(fit.snapshots);
    res.report = metrics(res.matrix);
    return res;
}

} // namespace gift
