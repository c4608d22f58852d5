#include "gift/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include "gift/analysis.hpp"
#include "gift/errors.hpp"
#include "gift/kernels.hpp"

namespace gift {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& rel) {
    return (fs::path(dir) / rel).string();
}

std::string pretrain_trace_csv(const std::vector<double>& losses) {
    std::ostringstream out;
    out << "step,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i)
        out << i << "," << format_double(losses[i]) << "\n";
    return out.str();
}

MethodArtifacts write_method_artifacts(const std::string& out_dir,
                                       const MethodResult& res) {
    const std::string name = res.method.canonical();
    fs::create_directories(join(out_dir, name));
    MethodArtifacts art;
    art.dir = name;
    art.matrix_csv = name + "/accuracy_matrix.csv";
    art.metrics_json = name + "/metrics.json";
    write_file_atomic(join(out_dir, art.matrix_csv), matrix_to_csv(res.matrix));
    write_file_atomic(join(out_dir, art.metrics_json), metrics_to_json(res.report));
    for (const TaskTrace& trace : res.traces) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s/trace_task%d.csv", name.c_str(),
                      trace.task_index);
        art.traces.emplace_back(buf);
        write_file_atomic(join(out_dir, buf), trace_to_csv(trace));
    }
    for (const ModelSnapshot& snap : res.snapshots) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s/snapshot_task%d.json", name.c_str(),
                      snap.task_index);
        art.snapshots.emplace_back(buf);
        write_file_atomic(join(out_dir, buf), checkpoint_to_json(snap) + "\n");
    }
    return art;
}

} // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                          std::ostream& log) {
    cfg.validate();
    fs::create_directories(out_dir);

    const World world = World::build(cfg.world);
    const std::vector<TaskSpec> suite = make_task_suite(world, cfg.suite, cfg.base_classes);
    std::vector<int> base_ids(static_cast<std::size_t>(cfg.base_classes));
    for (int c = 0; c < cfg.base_classes; ++c) base_ids[static_cast<std::size_t>(c)] = c;

    const std::string config_text = cfg.serialize();
    write_file_atomic(join(out_dir, "config.resolved"), config_text);

    log << "[run] pretraining " << cfg.pretrain.steps << " steps on " << cfg.base_classes
        << " base classes\n";
    TwoTowerModel model = TwoTowerModel::init(cfg.arch(), cfg.seed);
    const PretrainResult pre = pretrain(model, world, base_ids, cfg.pretrain);
    write_file_atomic(join(out_dir, "theta0.json"), checkpoint_to_json(pre.snapshot) + "\n");
    write_file_atomic(join(out_dir, "pretrain_trace.csv"), pretrain_trace_csv(pre.loss_trace));

    if (cfg.dump_datasets) {
        std::ostringstream dump;
        dump_dataset_csv(dump, world, suite);
        write_file_atomic(join(out_dir, "datasets.csv"), dump.str());
    }

    RunManifest manifest;
    manifest.tool_version = kToolVersion;
    manifest.config_text = config_text;
    manifest.config_hash = config_hash_of(config_text);
    manifest.signature = SuiteSignature{cfg.seed, cfg.suite.tasks, cfg.suite.classes_per_task,
                                        cfg.base_classes, to_string(cfg.eval_mode)};

    TrainConfig base_train = cfg.train;
    base_train.consolidation.lambda = cfg.train.weights.lambda_awc;

    std::vector<MethodSpec> specs;
    specs.reserve(cfg.methods.size());
    for (const auto& id : cfg.methods) specs.push_back(MethodSpec::parse(id));

    std::mutex mu;
    std::vector<std::exception_ptr> failures;
    auto run_one = [&](const MethodSpec& spec) {
        try {
            const auto t0 = std::chrono::steady_clock::now();
            const RunContext ctx{world, suite, pre.snapshot, base_train, cfg.lambda_l2,
                                 cfg.eval_mode};
            const MethodResult res = run_method(spec, ctx);
            MethodArtifacts art = write_method_artifacts(out_dir, res);
            art.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::lock_guard<std::mutex> lock(mu);
            manifest.methods[spec.canonical()] = art;
            log << "[run] " << spec.canonical() << ": transfer=" << res.report.transfer
                << " avg=" << res.report.avg << " last=" << res.report.last << " ("
                << art.wall_seconds << "s)\n";
        } catch (...) {
            std::lock_guard<std::mutex> lock(mu);
            failures.push_back(std::current_exception());
        }
    };

    if (cfg.parallel) {
        std::vector<std::thread> threads;
        threads.reserve(specs.size());
        for (const auto& spec : specs) threads.emplace_back(run_one, spec);
        for (auto& t : threads) t.join();
    } else {
        for (const auto& spec : specs) run_one(spec);
    }
    if (!failures.empty()) std::rethrow_exception(failures.front());

    const std::string manifest_path = join(out_dir, "manifest.json");
    write_file_atomic(manifest_path, manifest_to_json(manifest));
    return RunOutcome{out_dir, manifest_path, manifest};
}

CompareTable compare_runs(const std::vector<std::string>& manifest_paths,
                          const std::string& baseline_method) {
    if (manifest_paths.empty()) throw ContractError("compare: no manifests given");
    struct Loaded {
        std::string label;
        std::string dir;
        RunManifest manifest;
    };
    std::vector<Loaded> runs;
    for (const auto& path : manifest_paths) {
        Loaded l;
        l.label = path;
        l.dir = fs::path(path).parent_path().string();
        l.manifest = manifest_from_json(read_file(path));
        runs.push_back(std::move(l));
    }
    for (std::size_t i = 1; i < runs.size(); ++i)
        if (!(runs[i].manifest.signature == runs[0].manifest.signature))
            throw ContractError("compare: incompatible suites between " + runs[0].label +
                                " and " + runs[i].label);

    CompareTable table;
    table.baseline = baseline_method.empty() ? "first run" : "method " + baseline_method;

    auto load_metrics = [](const Loaded& run, const MethodArtifacts& art) {
        return metrics_from_json(read_file(join(run.dir, art.metrics_json)));
    };

    for (const auto& run : runs) {
        MetricReport baseline;
        bool have_baseline = false;
        if (!baseline_method.empty()) {
            const auto it = run.manifest.methods.find(baseline_method);
            if (it == run.manifest.methods.end())
                throw ConfigError("compare: baseline method '" + baseline_method +
                                  "' not present in " + run.label);
            baseline = load_metrics(run, it->second);
            have_baseline = true;
        }
        for (const auto& [name, art] : run.manifest.methods) {
            CompareRow row;
            row.run = run.label;
            row.method = name;
            const MetricReport r = load_metrics(run, art);
            row.transfer = r.transfer;
            row.avg = r.avg;
            row.last = r.last;
            if (have_baseline) {
                row.has_delta = true;
                row.d_transfer = r.transfer - baseline.transfer;
                row.d_avg = r.avg - baseline.avg;
                row.d_last = r.last - baseline.last;
            }
            table.rows.push_back(row);
        }
    }
    if (baseline_method.empty()) {
        // Delta against the first run's row for the same method.
        for (auto& row : table.rows) {
            for (const auto& ref : table.rows) {
                if (ref.run == runs[0].label && ref.method == row.method) {
                    row.has_delta = true;
                    row.d_transfer = row.transfer - ref.transfer;
                    row.d_avg = row.avg - ref.avg;
                    row.d_last = row.last - ref.last;
                    break;
                }
            }
        }
    }
    return table;
}

std::string compare_to_csv(const CompareTable& t) {
    std::ostringstream out;
    out << "run,method,transfer,d_transfer,avg,d_avg,last,d_last\n";
    for (const auto& r : t.rows) {
        out << r.run << "," << r.method << "," << format_double(r.transfer) << ","
            << (r.has_delta ? format_double(r.d_transfer) : "") << ","
            << format_double(r.avg) << "," << (r.has_delta ? format_double(r.d_avg) : "")
            << "," << format_double(r.last) << ","
            << (r.has_delta ? format_double(r.d_last) : "") << "\n";
    }
    return out.str();
}

std::string compare_to_text(const CompareTable& t) {
    std::ostringstream out;
    out << "deltas vs " << t.baseline << "\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%-18s %-10s %8s %8s %8s %8s %8s %8s\n", "method",
                  "run", "transfer", "d", "avg", "d", "last", "d");
    out << line;
    for (const auto& r : t.rows) {
        const std::string run_tag = fs::path(r.run).parent_path().filename().string();
        if (r.has_delta)
            std::snprintf(line, sizeof(line),
                          "%-18s %-10s %8.4f %+8.4f %8.4f %+8.4f %8.4f %+8.4f\n",
                          r.method.c_str(), run_tag.c_str(), r.transfer, r.d_transfer,
                          r.avg, r.d_avg, r.last, r.d_last);
        else
            std::snprintf(line, sizeof(line), "%-18s %-10s %8.4f %8s %8.4f %8s %8.4f %8s\n",
                          r.method.c_str(), run_tag.c_str(), r.transfer, "-", r.avg, "-",
                          r.last, "-");
        out << line;
    }
    return out.str();
}

void run_landscape(const LandscapeOptions& opt, std::ostream& log) {
    const ExperimentConfig cfg = ExperimentConfig::from_file(opt.config_path);
    const World world = World::build(cfg.world);
    const std::vector<TaskSpec> suite = make_task_suite(world, cfg.suite, cfg.base_classes);
    if (opt.task < 1 || opt.task > static_cast<int>(suite.size()))
        throw ConfigError("landscape: task index out of range");
    if (opt.loss != "train_ce" && opt.loss != "test_ce")
        throw ConfigError("landscape: loss must be train_ce or test_ce");

    const ModelSnapshot w0 = load_checkpoint(opt.w0_path);
    const ModelSnapshot w1 = load_checkpoint(opt.w1_path);
    const ModelSnapshot w2 = load_checkpoint(opt.w2_path);
    if (!(w0.arch == cfg.arch()) || !(w1.arch == cfg.arch()) || !(w2.arch == cfg.arch()))
        throw ContractError("landscape: snapshot architecture does not match config");

    const TaskSpec& task = suite[static_cast<std::size_t>(opt.task - 1)];
    const bool train_split = opt.loss == "train_ce";
    const int full = (train_split ? task.train_per_class : task.test_per_class) *
                     static_cast<int>(task.class_ids.size());
    const int n = std::min(opt.max_samples, full);
    const LabeledSet data =
        sample_real(world, task, n, train_split ? Split::train : Split::test);
    Tensor class_texts(task.class_ids.size(),
                       static_cast<std::size_t>(world.config().text_dim));
    for (std::size_t k = 0; k < task.class_ids.size(); ++k) {
        const Tensor row = world.text_input(task.class_ids[k]);
        kern::active().add(row.data(), class_texts.row_ptr(k), class_texts.row_ptr(k),
                           row.size());
    }
    std::vector<int> labels(data.labels.size());
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        const auto it =
            std::find(task.class_ids.begin(), task.class_ids.end(), data.labels[i]);
        labels[i] = static_cast<int>(it - task.class_ids.begin());
    }
    const double smoothing = train_split ? cfg.train.weights.label_smoothing : 0.0;
    const ModelArch arch = cfg.arch();
    const LossClosure closure = [&](const std::vector<double>& params) {
        return task_ce_value(arch, params, data.images, class_texts, labels, smoothing);
    };

    const PlaneBasis basis = plane_basis(w0.params, w1.params, w2.params);
    // cover all three anchor coordinates with a margin on each side
    const double x_lo = std::min({0.0, basis.w1_x, basis.w2_x});
    const double x_hi = std::max({0.0, basis.w1_x, basis.w2_x});
    const double y_lo = std::min(0.0, basis.w2_y);
    const double y_hi = std::max(0.0, basis.w2_y);
    const double x0 = x_lo - opt.margin * (x_hi - x_lo);
    const double x1 = x_hi + opt.margin * (x_hi - x_lo);
    const double y0 = y_lo - opt.margin * (y_hi - y_lo);
    const double y1 = y_hi + opt.margin * (y_hi - y_lo);
    log << "[landscape] plane range x=[" << x0 << ", " << x1 << "] y=[" << y0 << ", "
        << y1 << "], grid " << opt.resolution << "x" << opt.resolution << "\n";
    const LandscapeGrid grid =
        landscape_slice(basis, closure, x0, x1, y0, y1, opt.resolution, opt.resolution);

    // Anchor rows reconstruct each snapshot from its plane coordinates, the
    // same way every grid point is built.
    std::vector<LandscapeAnchor> anchors;
    anchors.push_back({"W0", 0.0, 0.0, closure(basis.point(0.0, 0.0))});
    anchors.push_back({"W1", basis.w1_x, 0.0, closure(basis.point(basis.w1_x, 0.0))});
    anchors.push_back(
        {"W2", basis.w2_x, basis.w2_y, closure(basis.point(basis.w2_x, basis.w2_y))});
    write_file_atomic(opt.out_csv, landscape_to_csv(grid, anchors));
    log << "[landscape] wrote " << opt.out_csv << "\n";
}

void run_trace(const TraceOptions& opt, std::ostream& log) {
    const RunManifest manifest =
        manifest_from_json(read_file(join(opt.run_dir, "manifest.json")));
    const auto it = manifest.methods.find(opt.method);
    if (it == manifest.methods.end())
        throw ConfigError("trace: method '" + opt.method + "' not in manifest");
    std::vector<TaskTrace> traces;
    for (const auto& rel : it->second.traces) {
        TaskTrace t = trace_from_csv(read_file(join(opt.run_dir, rel)));
        // task index recovered from the file name trace_task<N>.csv
        const std::size_t pos = rel.rfind("trace_task");
        t.task_index = std::atoi(rel.c_str() + pos + 10);
        traces.push_back(std::move(t));
    }
    const TraceReport report = distill_trace_report(traces);
    write_file_atomic(opt.report_csv, trace_report_to_csv(report));
    write_file_atomic(opt.starts_csv, task_starts_to_csv(report));
    log << "[trace] " << report.series.size() << " steps over " << traces.size()
        << " tasks -> " << opt.report_csv << "\n";
}

bool selftest(std::ostream& out) {
    bool all_ok = true;
    auto check = [&](const char* name, bool ok) {
        out << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
        if (!ok) all_ok = false;
    };

    // Kernel variants agree.
    {
        Rng rng(123);
        const std::size_t n = 103;
        std::vector<double> a(n), b(n), f(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.uniform(-2, 2);
            b[i] = rng.uniform(-2, 2);
            f[i] = rng.uniform(0, 2);
        }
        bool elementwise_ok = true, reduction_ok = true;
        const auto& sc = kern::scalar_ops();
        for (const auto* ops : kern::all_available()) {
            std::vector<double> r1(n), r2(n);
            sc.add(a.data(), b.data(), r1.data(), n);
            ops->add(a.data(), b.data(), r2.data(), n);
            if (r1 != r2) elementwise_ok = false;
            sc.mul(a.data(), b.data(), r1.data(), n);
            ops->mul(a.data(), b.data(), r2.data(), n);
            if (r1 != r2) elementwise_ok = false;
            const double d1 = sc.dot(a.data(), b.data(), n);
            const double d2 = ops->dot(a.data(), b.data(), n);
            if (std::abs(d1 - d2) > 1e-12 * (1.0 + std::abs(d1))) reduction_ok = false;
            const double w1 = sc.weighted_sqdiff_sum(f.data(), a.data(), b.data(), n);
            const double w2 = ops->weighted_sqdiff_sum(f.data(), a.data(), b.data(), n);
            if (std::abs(w1 - w2) > 1e-12 * (1.0 + std::abs(w1))) reduction_ok = false;
        }
        check("kernel variants: elementwise bitwise-identical", elementwise_ok);
        check("kernel variants: reductions agree to 1e-12", reduction_ok);
    }

    // Softmax rows are distributions.
    {
        Rng rng(7);
        Graph g;
        Tensor x(5, 9);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-3, 3);
        const Tensor y = g.value(g.softmax_rows(g.constant(x), 0.7));
        bool ok = true;
        for (std::size_t i = 0; i < y.rows(); ++i) {
            double s = 0;
            for (std::size_t j = 0; j < y.cols(); ++j) {
                s += y.at(i, j);
                if (!(y.at(i, j) > 0.0 && y.at(i, j) < 1.0)) ok = false;
            }
            if (std::abs(s - 1.0) > 1e-12) ok = false;
        }
        check("softmax rows sum to 1 within 1e-12", ok);
    }

    // Autodiff vs central differences on a small two-tower alignment loss.
    {
        const ModelArch arch{6, 5, 8, 4};
        TwoTowerModel model = TwoTowerModel::init(arch, 99);
        Rng rng(17);
        Tensor images(3, 6), texts(3, 5);
        for (std::size_t i = 0; i < images.size(); ++i) images.data()[i] = rng.uniform(-1, 1);
        for (std::size_t i = 0; i < texts.size(); ++i) texts.data()[i] = rng.uniform(-1, 1);
        auto loss_at = [&](const std::vector<double>& p) {
            Graph g;
            const ModelNodes nodes = bind_model(g, arch, p, false, false);
            const NodeId z = encode_images_node(g, nodes, g.constant(images));
            const NodeId w = encode_texts_node(g, nodes, g.constant(texts));
            return g.scalar_value(ita_loss_node(g, contrastive_matrix_node(g, z, w), 1.0));
        };
        Graph g;
        const ModelNodes nodes = bind_model(g, arch, model.params(), true, false);
        const NodeId z = encode_images_node(g, nodes, g.constant(images));
        const NodeId w = encode_texts_node(g, nodes, g.constant(texts));
        const NodeId loss = ita_loss_node(g, contrastive_matrix_node(g, z, w), 1.0);
        g.backward(loss);
        std::vector<double> grad(model.layout().total, 0.0);
        collect_param_grads(g, nodes, model.layout(), grad);
        const std::vector<double> fd = finite_diff(loss_at, model.params(), 1e-5);
        double worst = 0;
        for (std::size_t i = 0; i + 1 < grad.size(); ++i) { // last slot is frozen tau
            const double denom = std::max({std::abs(grad[i]), std::abs(fd[i]), 1e-6});
            worst = std::max(worst, std::abs(grad[i] - fd[i]) / denom);
        }
        check("backward matches finite differences (rel < 1e-5)", worst < 1e-5);
    }

    // Metric formulas vs a brute-force double loop.
    {
        Rng rng(31);
        bool ok = true;
        for (int trial = 0; trial < 100 && ok; ++trial) {
            const int n = 2 + static_cast<int>(rng.below(7));
            AccuracyMatrix m(n);
            for (int i = 0; i <= n; ++i)
                for (int j = 1; j <= n; ++j) m.at(i, j) = rng.uniform();
            const MetricReport r = metrics(m);
            double transfer = 0;
            for (int j = 2; j <= n; ++j) {
                double inner = 0;
                for (int i = 1; i <= j - 1; ++i) inner += m.at(i, j);
                transfer += inner / (j - 1);
            }
            transfer /= (n - 1);
            double avg = 0;
            for (int i = 1; i <= n; ++i)
                for (int j = 1; j <= n; ++j) avg += m.at(i, j);
            avg /= static_cast<double>(n) * n;
            double last = 0;
            for (int j = 1; j <= n; ++j) last += m.at(n, j);
            last /= n;
            if (std::abs(transfer - r.transfer) > 1e-12 || std::abs(avg - r.avg) > 1e-12 ||
                std::abs(last - r.last) > 1e-12)
                ok = false;
        }
        check("metrics match brute-force formulas within 1e-12", ok);
    }

    // Consolidation identities.
    {
        Rng rng(41);
        std::vector<double> now(50), prev(50);
        for (std::size_t i = 0; i < now.size(); ++i) {
            now[i] = rng.uniform(-1, 1);
            prev[i] = rng.uniform(-1, 1);
        }
        FisherDiagonal ones;
        ones.values.assign(now.size(), 1.0);
        const bool identical = awc_loss(now, prev, ones) == l2_penalty(now, prev);
        check("awc with unit Fisher equals l2 penalty bitwise", identical);
    }

    // Cosine schedule endpoints.
    {
        const bool ok = cosine_lr(0, 100, 1e-3, 1e-4) == 1e-3 &&
                        std::abs(cosine_lr(100, 100, 1e-3, 1e-4) - 1e-4) < 1e-19 &&
                        std::abs(cosine_lr(50, 100, 1e-3, 1e-4) - 5.5e-4) < 1e-12;
        check("cosine schedule hits its endpoints", ok);
    }

    return all_ok;
}

} // namespace gift
