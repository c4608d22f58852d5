#include "gift/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gift/errors.hpp"

namespace gift {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Shortest decimal text that parses back to the exact same double.
std::string shortest_double(double v) {
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

[[noreturn]] void bad(const std::string& origin, int line, const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& origin, int line, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        bad(origin, line, "expected a number, got '" + v + "'");
    }
}

long parse_long(const std::string& origin, int line, const std::string& v) {
    try {
        std::size_t used = 0;
        const long n = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        bad(origin, line, "expected an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& origin, int line, const std::string& v) {
    try {
        std::size_t used = 0;
        const unsigned long long n = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        bad(origin, line, "expected an unsigned integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& origin, int line, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    bad(origin, line, "expected true or false, got '" + v + "'");
}

std::vector<std::string> parse_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace

std::string teacher_to_string(const TeacherMode& mode) {
    switch (mode.kind) {
        case TeacherMode::Kind::previous: return "previous";
        case TeacherMode::Kind::initial: return "initial";
        case TeacherMode::Kind::wise: return "wise:" + shortest_double(mode.blend);
    }
    return "?";
}

TeacherMode teacher_from_string(const std::string& text) {
    TeacherMode mode;
    if (text == "previous") {
        mode.kind = TeacherMode::Kind::previous;
    } else if (text == "initial") {
        mode.kind = TeacherMode::Kind::initial;
    } else if (text.rfind("wise:", 0) == 0) {
        mode.kind = TeacherMode::Kind::wise;
        const std::string num = text.substr(5);
        try {
            std::size_t used = 0;
            mode.blend = std::stod(num, &used);
            if (used != num.size()) throw std::invalid_argument(num);
        } catch (const std::exception&) {
            throw ConfigError("bad teacher blend '" + num + "'");
        }
        if (!(mode.blend >= 0.0 && mode.blend <= 1.0))
            throw ConfigError("teacher blend must lie in [0, 1]");
    } else {
        throw ConfigError("teacher must be previous, initial, or wise:<blend>");
    }
    return mode;
}

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig cfg;
    cfg.resolve();
    return cfg;
}

void ExperimentConfig::resolve() {
    world.seed = seed;
    world.total_classes = base_classes + suite.tasks * suite.classes_per_task;
    world.spread_classes = base_classes;
    world.cluster_size = suite.classes_per_task;
    train.consolidation.lambda = train.weights.lambda_awc;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str(), path);
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text,
                                             const std::string& origin) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') bad(origin, line_no, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "experiment" && section != "world" && section != "suite" &&
                section != "model" && section != "pretrain" && section != "train")
                bad(origin, line_no, "unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) bad(origin, line_no, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) bad(origin, line_no, "key outside any section");

        auto unknown = [&]() { bad(origin, line_no, "unknown key '" + key + "' in [" + section + "]"); };
        try {
            if (section == "experiment") {
                if (key == "seed") cfg.seed = parse_u64(origin, line_no, value);
                else if (key == "out") cfg.out_dir = value;
                else if (key == "methods") cfg.methods = parse_list(value);
                else if (key == "parallel") cfg.parallel = parse_bool(origin, line_no, value);
                else if (key == "eval_mode") cfg.eval_mode = eval_mode_from(value);
                else if (key == "dump_datasets") cfg.dump_datasets = parse_bool(origin, line_no, value);
                else unknown();
            } else if (section == "world") {
                if (key == "base_classes") cfg.base_classes = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "latent_dim") cfg.world.latent_dim = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "image_dim") cfg.world.image_dim = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "text_dim") cfg.world.text_dim = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "sigma_image") cfg.world.sigma_image = parse_double(origin, line_no, value);
                else if (key == "sigma_text") cfg.world.sigma_text = parse_double(origin, line_no, value);
                else if (key == "min_angle_deg") cfg.world.min_angle_deg = parse_double(origin, line_no, value);
                else if (key == "sigma_gen") cfg.world.sigma_gen = value == "auto" ? -1.0 : parse_double(origin, line_no, value);
                else if (key == "gap_bias") cfg.world.gap_bias = parse_double(origin, line_no, value);
                else if (key == "cluster_angle_deg") cfg.world.cluster_angle_deg = parse_double(origin, line_no, value);
                else unknown();
            } else if (section == "suite") {
                if (key == "tasks") cfg.suite.tasks = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "classes_per_task") cfg.suite.classes_per_task = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "train_per_class") cfg.suite.train_per_class = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "test_per_class") cfg.suite.test_per_class = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "shift_profile") cfg.suite.shift_profile = value;
                else if (key == "shift_severity") cfg.suite.shift_severity = parse_double(origin, line_no, value);
                else unknown();
            } else if (section == "model") {
                if (key == "hidden") cfg.hidden = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "embed_dim") cfg.embed_dim = static_cast<int>(parse_long(origin, line_no, value));
                else unknown();
            } else if (section == "pretrain") {
                if (key == "steps") cfg.pretrain.steps = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "batch") cfg.pretrain.batch = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "lr_max") cfg.pretrain.lr_max = parse_double(origin, line_no, value);
                else if (key == "lr_min") cfg.pretrain.lr_min = parse_double(origin, line_no, value);
                else if (key == "weight_decay") cfg.pretrain.weight_decay = parse_double(origin, line_no, value);
                else unknown();
            } else { // train
                if (key == "iterations") cfg.train.iterations = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "batch") cfg.train.batch = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "lr_max") cfg.train.lr_max = parse_double(origin, line_no, value);
                else if (key == "lr_min") cfg.train.lr_min = parse_double(origin, line_no, value);
                else if (key == "weight_decay") cfg.train.weight_decay = parse_double(origin, line_no, value);
                else if (key == "label_smoothing") cfg.train.weights.label_smoothing = parse_double(origin, line_no, value);
                else if (key == "alpha") cfg.train.weights.alpha = parse_double(origin, line_no, value);
                else if (key == "beta") cfg.train.weights.beta = parse_double(origin, line_no, value);
                else if (key == "lambda_awc") cfg.train.weights.lambda_awc = parse_double(origin, line_no, value);
                else if (key == "lambda_l2") cfg.lambda_l2 = parse_double(origin, line_no, value);
                else if (key == "fisher_normalize") {
                    if (value == "raw") cfg.train.consolidation.normalize = FisherNormalize::raw;
                    else if (value == "mean_one") cfg.train.consolidation.normalize = FisherNormalize::mean_one;
                    else bad(origin, line_no, "fisher_normalize must be raw or mean_one");
                }
                else if (key == "static_batches") cfg.train.consolidation.static_sample_batches = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "synthetic_per_task") cfg.train.synthetic_per_task = static_cast<int>(parse_long(origin, line_no, value));
                else if (key == "teacher") cfg.train.teacher = teacher_from_string(value);
                else if (key == "distill_variant") cfg.train.distill_variant = distill_variant_from(value);
                else unknown();
            }
        } catch (const ConfigError& e) {
            // Re-tag nested messages with the offending line.
            const std::string what = e.what();
            if (what.rfind(origin + ":", 0) == 0) throw;
            bad(origin, line_no, what);
        }
    }
    cfg.resolve();
    cfg.validate();
    return cfg;
}

std::string ExperimentConfig::serialize() const {
    std::ostringstream out;
    out << "[experiment]\n";
    out << "seed = " << seed << "\n";
    out << "out = " << out_dir << "\n";
    out << "methods = ";
    for (std::size_t i = 0; i < methods.size(); ++i)
        out << (i ? ", " : "") << methods[i];
    out << "\n";
    out << "parallel = " << (parallel ? "true" : "false") << "\n";
    out << "eval_mode = " << to_string(eval_mode) << "\n";
    out << "dump_datasets = " << (dump_datasets ? "true" : "false") << "\n";
    out << "\n[world]\n";
    out << "base_classes = " << base_classes << "\n";
    out << "latent_dim = " << world.latent_dim << "\n";
    out << "image_dim = " << world.image_dim << "\n";
    out << "text_dim = " << world.text_dim << "\n";
    out << "sigma_image = " << shortest_double(world.sigma_image) << "\n";
    out << "sigma_text = " << shortest_double(world.sigma_text) << "\n";
    out << "min_angle_deg = " << shortest_double(world.min_angle_deg) << "\n";
    out << "sigma_gen = "
        << (world.sigma_gen < 0 ? std::string("auto") : shortest_double(world.sigma_gen))
        << "\n";
    out << "gap_bias = " << shortest_double(world.gap_bias) << "\n";
    out << "cluster_angle_deg = " << shortest_double(world.cluster_angle_deg) << "\n";
    out << "\n[suite]\n";
    out << "tasks = " << suite.tasks << "\n";
    out << "classes_per_task = " << suite.classes_per_task << "\n";
    out << "train_per_class = " << suite.train_per_class << "\n";
    out << "test_per_class = " << suite.test_per_class << "\n";
    out << "shift_profile = " << suite.shift_profile << "\n";
    out << "shift_severity = " << shortest_double(suite.shift_severity) << "\n";
    out << "\n[model]\n";
    out << "hidden = " << hidden << "\n";
    out << "embed_dim = " << embed_dim << "\n";
    out << "\n[pretrain]\n";
    out << "steps = " << pretrain.steps << "\n";
    out << "batch = " << pretrain.batch << "\n";
    out << "lr_max = " << shortest_double(pretrain.lr_max) << "\n";
    out << "lr_min = " << shortest_double(pretrain.lr_min) << "\n";
    out << "weight_decay = " << shortest_double(pretrain.weight_decay) << "\n";
    out << "\n[train]\n";
    out << "iterations = " << train.iterations << "\n";
    out << "batch = " << train.batch << "\n";
    out << "lr_max = " << shortest_double(train.lr_max) << "\n";
    out << "lr_min = " << shortest_double(train.lr_min) << "\n";
    out << "weight_decay = " << shortest_double(train.weight_decay) << "\n";
    out << "label_smoothing = " << shortest_double(train.weights.label_smoothing) << "\n";
    out << "alpha = " << shortest_double(train.weights.alpha) << "\n";
    out << "beta = " << shortest_double(train.weights.beta) << "\n";
    out << "lambda_awc = " << shortest_double(train.weights.lambda_awc) << "\n";
    out << "lambda_l2 = " << shortest_double(lambda_l2) << "\n";
    out << "fisher_normalize = "
        << (train.consolidation.normalize == FisherNormalize::raw ? "raw" : "mean_one")
        << "\n";
    out << "static_batches = " << train.consolidation.static_sample_batches << "\n";
    out << "synthetic_per_task = " << train.synthetic_per_task << "\n";
    out << "teacher = " << teacher_to_string(train.teacher) << "\n";
    out << "distill_variant = " << to_string(train.distill_variant) << "\n";
    return out.str();
}

void ExperimentConfig::validate() const {
    if (methods.empty()) throw ConfigError("experiment: no methods requested");
    for (const auto& m : methods) MethodSpec::parse(m);
    world.validate();
    suite.validate();
    if (suite.tasks < 2)
        throw ConfigError("suite: Transfer needs at least 2 tasks");
    if (hidden < 1 || embed_dim < 1)
        throw ConfigError("model: hidden and embed_dim must be >= 1");
    pretrain.validate();
    if (pretrain.batch > base_classes)
        throw ConfigError("pretrain: batch cannot exceed base_classes");
    TrainConfig t = train;
    t.consolidation.lambda = train.weights.lambda_awc;
    t.validate();
    if (!(lambda_l2 >= 0) || !std::isfinite(lambda_l2))
        throw ConfigError("train: lambda_l2 must be finite and nonnegative");
    if (base_classes < 1) throw ConfigError("world: base_classes must be >= 1");
}

} // namespace gift
