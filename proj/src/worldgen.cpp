#include "gift/worldgen.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <string>

#include "gift/errors.hpp"
#include "gift/kernels.hpp"

namespace gift {

void WorldConfig::validate() const {
    if (total_classes < 1) throw ConfigError("world: total_classes must be >= 1");
    if (latent_dim < 2) throw ConfigError("world: latent_dim must be >= 2");
    if (image_dim < 1 || text_dim < 1) throw ConfigError("world: dims must be >= 1");
    if (sigma_image < 0 || sigma_text < 0) throw ConfigError("world: sigmas must be >= 0");
    if (!(min_angle_deg >= 0 && min_angle_deg < 90))
        throw ConfigError("world: min_angle_deg must lie in [0, 90)");
    if (spread_classes < 0 || spread_classes > total_classes)
        throw ConfigError("world: spread_classes must lie in [0, total_classes]");
    if (cluster_size < 1) throw ConfigError("world: cluster_size must be >= 1");
    if (!(cluster_angle_deg > 0 && cluster_angle_deg < 90))
        throw ConfigError("world: cluster_angle_deg must lie in (0, 90)");
}

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void unit_normalize(double* row, std::size_t n) {
    const double norm = std::sqrt(kern::active().dot(row, row, n));
    kern::active().scale(row, 1.0 / norm, row, n);
}

std::string pseudoword(Rng& rng) {
    static const char* consonants = "bdfgklmnprstvz";
    static const char* vowels = "aeiou";
    const int syllables = 2 + static_cast<int>(rng.below(2));
    std::string s;
    for (int i = 0; i < syllables; ++i) {
        s += consonants[rng.below(14)];
        s += vowels[rng.below(5)];
    }
    return s;
}

} // namespace

World World::build(const WorldConfig& cfg) {
    cfg.validate();
    World w;
    w.cfg_ = cfg;
    const auto K = static_cast<std::size_t>(cfg.total_classes);
    const auto dl = static_cast<std::size_t>(cfg.latent_dim);

    // Spread prototypes: unit gaussians, re-drawn until the new row clears
    // the pairwise angle floor against every spread row and cluster center
    // placed so far. Clustered prototypes: members within cluster_angle_deg
    // of their group center.
    const double cos_floor = std::cos(cfg.min_angle_deg * kPi / 180.0);
    const double cluster_rad = cfg.cluster_angle_deg * kPi / 180.0;
    Rng proto_rng = derive_stream(cfg.seed, "world-prototypes");
    w.protos_ = Tensor(K, dl);
    constexpr int kMaxTries = 1000;
    std::vector<std::vector<double>> anchors; // spread rows and cluster centers
    auto draw_separated = [&](double* row) {
        int tries = 0;
        for (;;) {
            if (++tries > kMaxTries)
                throw ConfigError("world: cannot satisfy min_angle_deg=" +
                                  std::to_string(cfg.min_angle_deg) + " for " +
                                  std::to_string(cfg.total_classes) + " classes");
            for (std::size_t i = 0; i < dl; ++i) row[i] = proto_rng.normal();
            unit_normalize(row, dl);
            bool ok = true;
            for (const auto& prev : anchors) {
                if (std::abs(kern::active().dot(row, prev.data(), dl)) > cos_floor) {
                    ok = false;
                    break;
                }
            }
            if (ok) break;
        }
        anchors.emplace_back(row, row + dl);
    };

    const auto spread = std::min<std::size_t>(static_cast<std::size_t>(cfg.spread_classes), K);
    for (std::size_t c = 0; c < spread; ++c) draw_separated(w.protos_.row_ptr(c));

    std::vector<double> center(dl);
    for (std::size_t c = spread; c < K; ++c) {
        const std::size_t member =
            (c - spread) % static_cast<std::size_t>(cfg.cluster_size);
        if (member == 0) draw_separated(center.data());
        double* row = w.protos_.row_ptr(c);
        // tilt the center by an angle up to cluster_rad in a random direction
        std::vector<double> dir(dl);
        for (std::size_t i = 0; i < dl; ++i) dir[i] = proto_rng.normal();
        const double along = kern::active().dot(dir.data(), center.data(), dl);
        kern::active().axpy(-along, center.data(), dir.data(), dl);
        unit_normalize(dir.data(), dl);
        const double angle = cluster_rad * std::sqrt(proto_rng.uniform());
        for (std::size_t i = 0; i < dl; ++i)
            row[i] = std::cos(angle) * center[i] + std::sin(angle) * dir[i];
        unit_normalize(row, dl);
    }

    Rng proj_rng = derive_stream(cfg.seed, "world-projections");
    const double proj_scale = 1.0 / std::sqrt(static_cast<double>(dl));
    w.a_img_ = Tensor(dl, static_cast<std::size_t>(cfg.image_dim));
    for (std::size_t i = 0; i < w.a_img_.size(); ++i)
        w.a_img_.data()[i] = proj_rng.normal(0.0, proj_scale);
    w.a_txt_ = Tensor(dl, static_cast<std::size_t>(cfg.text_dim));
    for (std::size_t i = 0; i < w.a_txt_.size(); ++i)
        w.a_txt_.data()[i] = proj_rng.normal(0.0, proj_scale);

    w.gap_dir_ = Tensor(1, static_cast<std::size_t>(cfg.image_dim));
    for (std::size_t i = 0; i < w.gap_dir_.size(); ++i)
        w.gap_dir_.data()[i] = proj_rng.normal();
    unit_normalize(w.gap_dir_.data(), w.gap_dir_.size());

    Rng name_rng = derive_stream(cfg.seed, "world-names");
    std::set<std::string> seen;
    w.names_.reserve(K);
    for (std::size_t c = 0; c < K; ++c) {
        std::string name = pseudoword(name_rng);
        while (!seen.insert(name).second) name = pseudoword(name_rng);
        w.names_.push_back(std::move(name));
    }
    return w;
}

const std::string& World::class_name(int id) const {
    if (id < 0 || id >= num_classes()) throw ContractError("unknown class id");
    return names_[static_cast<std::size_t>(id)];
}

std::string World::prompt(int id) const { return template_prompt(class_name(id)); }

Tensor World::clean_image(int id) const {
    if (id < 0 || id >= num_classes()) throw ContractError("unknown class id");
    Tensor out(1, a_img_.cols());
    const double* mu = protos_.row_ptr(static_cast<std::size_t>(id));
    for (std::size_t l = 0; l < a_img_.rows(); ++l)
        kern::active().axpy(mu[l], a_img_.row_ptr(l), out.data(), a_img_.cols());
    return out;
}

Tensor World::text_input(int id) const {
    if (id < 0 || id >= num_classes()) throw ContractError("unknown class id");
    Tensor out(1, a_txt_.cols());
    const double* mu = protos_.row_ptr(static_cast<std::size_t>(id));
    for (std::size_t l = 0; l < a_txt_.rows(); ++l)
        kern::active().axpy(mu[l], a_txt_.row_ptr(l), out.data(), a_txt_.cols());
    // Keyed on the prompt string: equal prompts give bit-equal inputs.
    Rng jitter = derive_stream(cfg_.seed, "prompt-jitter", fnv1a64(prompt(id)));
    const double scale = 0.01 * cfg_.sigma_text;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] += scale * jitter.normal();
    return out;
}

Tensor World::gap_offset() const {
    Tensor out(1, gap_dir_.cols());
    kern::active().scale(gap_dir_.data(), cfg_.gap_bias, out.data(), out.size());
    return out;
}

std::string template_prompt(const std::string& class_name) {
    if (class_name.empty()) throw ContractError("template_prompt: empty class name");
    return "a photo of a " + class_name + ".";
}

std::vector<int> ClassPool::all() const {
    std::vector<int> out = base;
    for (const auto& task : downstream) out.insert(out.end(), task.begin(), task.end());
    return out;
}

bool ClassPool::contains(int id) const {
    if (std::find(base.begin(), base.end(), id) != base.end()) return true;
    for (const auto& task : downstream)
        if (std::find(task.begin(), task.end(), id) != task.end()) return true;
    return false;
}

void ClassPool::grow(const std::vector<int>& task_classes) {
    downstream.push_back(task_classes);
}

Tensor DomainTransform::apply(const Tensor& rows) const {
    if (rows.cols() != linear.rows())
        throw DimensionError("DomainTransform: dimension mismatch");
    Tensor out(rows.rows(), linear.cols());
    const auto& k = kern::active();
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        double* oi = out.row_ptr(i);
        for (std::size_t p = 0; p < linear.rows(); ++p)
            k.axpy(rows.at(i, p), linear.row_ptr(p), oi, linear.cols());
        k.add(oi, offset.data(), oi, out.cols());
    }
    return out;
}

DomainTransform DomainTransform::identity(int d) {
    return DomainTransform{Tensor::identity(static_cast<std::size_t>(d)),
                           Tensor(1, static_cast<std::size_t>(d))};
}

bool DomainTransform::is_identity() const {
    const Tensor eye = Tensor::identity(linear.rows());
    for (std::size_t i = 0; i < linear.size(); ++i)
        if (linear.data()[i] != eye.data()[i]) return false;
    for (std::size_t i = 0; i < offset.size(); ++i)
        if (offset.data()[i] != 0.0) return false;
    return true;
}

LabeledSet sample_real(const World& world, const TaskSpec& task, int n, Split split) {
    if (n < 1) throw ContractError("sample_real: n must be >= 1");
    if (task.class_ids.empty()) throw ContractError("sample_real: task has no classes");
    const auto& cfg = world.config();
    Rng rng = derive_stream(cfg.seed, split == Split::train ? "real-train" : "real-test",
                            static_cast<std::uint64_t>(task.index));
    LabeledSet set;
    set.images = Tensor(static_cast<std::size_t>(n), static_cast<std::size_t>(cfg.image_dim));
    set.labels.resize(static_cast<std::size_t>(n));
    Tensor raw(static_cast<std::size_t>(n), static_cast<std::size_t>(cfg.image_dim));
    for (int i = 0; i < n; ++i) {
        const int cls = task.class_ids[static_cast<std::size_t>(i) % task.class_ids.size()];
        set.labels[static_cast<std::size_t>(i)] = cls;
        const Tensor clean = world.clean_image(cls);
        double* row = raw.row_ptr(static_cast<std::size_t>(i));
        for (std::size_t j = 0; j < clean.size(); ++j)
            row[j] = clean.data()[j] + rng.normal(0.0, cfg.sigma_image);
    }
    set.images = task.transform.apply(raw);
    return set;
}

std::vector<SyntheticPair> generate_synthetic(const World& world, const ClassPool& pool,
                                              int n, Rng& rng) {
    const std::vector<int> classes = pool.all();
    if (classes.empty()) throw ContractError("generate_synthetic: empty class pool");
    if (n < 1) throw ContractError("generate_synthetic: n must be >= 1");
    const auto& cfg = world.config();
    const double sigma = cfg.effective_sigma_gen();
    const Tensor gap = world.gap_offset();
    std::vector<SyntheticPair> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int cls = classes[rng.below(classes.size())];
        SyntheticPair pair;
        pair.class_id = cls;
        pair.prompt = world.prompt(cls);
        const Tensor clean = world.clean_image(cls);
        pair.image.resize(clean.size());
        for (std::size_t j = 0; j < clean.size(); ++j)
            pair.image[j] = clean.data()[j] + rng.normal(0.0, sigma) + gap.data()[j];
        pair.text = world.text_input(cls).vec();
        out.push_back(std::move(pair));
    }
    return out;
}

std::vector<SyntheticPair> regenerate_for_task(const World& world, const ClassPool& pool,
                                               int task_index, int n) {
    Rng rng = derive_stream(world.config().seed, "synthetic",
                            static_cast<std::uint64_t>(task_index));
    return generate_synthetic(world, pool, n, rng);
}

void SuiteConfig::validate() const {
    if (tasks < 1) throw ConfigError("suite: tasks must be >= 1");
    if (classes_per_task < 1) throw ConfigError("suite: classes_per_task must be >= 1");
    if (train_per_class < 1 || test_per_class < 1)
        throw ConfigError("suite: per-class sample counts must be >= 1");
    if (shift_profile != "none" && shift_profile != "constant" &&
        shift_profile != "ramp" && shift_profile != "alternating")
        throw ConfigError("suite: shift_profile must be none|constant|ramp|alternating");
    if (shift_severity < 0) throw ConfigError("suite: shift_severity must be >= 0");
}

double shift_severity_for(const SuiteConfig& cfg, int task_index) {
    if (cfg.shift_profile == "none") return 0.0;
    if (cfg.shift_profile == "constant") return cfg.shift_severity;
    if (cfg.shift_profile == "ramp")
        return cfg.shift_severity * static_cast<double>(task_index) /
               static_cast<double>(cfg.tasks);
    // alternating: heavy on odd tasks, light on even ones
    return cfg.shift_severity * (task_index % 2 == 1 ? 1.0 : 0.4);
}

namespace {

Tensor matmul_small(const Tensor& a, const Tensor& b) {
    Tensor c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t p = 0; p < a.cols(); ++p)
            kern::active().axpy(a.at(i, p), b.row_ptr(p), c.row_ptr(i), b.cols());
    return c;
}

// exp(A) by scaling-and-squaring with a Taylor series; A is tiny (d_img^2).
Tensor expm(const Tensor& a) {
    double norm = 0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double row = 0;
        for (std::size_t j = 0; j < a.cols(); ++j) row += std::abs(a.at(i, j));
        norm = std::max(norm, row);
    }
    int squarings = 0;
    while (norm > 0.5) {
        norm /= 2;
        ++squarings;
    }
    Tensor scaled = a;
    kern::active().scale(scaled.data(), std::pow(0.5, squarings), scaled.data(),
                         scaled.size());
    Tensor result = Tensor::identity(a.rows());
    Tensor term = Tensor::identity(a.rows());
    for (int k = 1; k <= 24; ++k) {
        term = matmul_small(term, scaled);
        kern::active().scale(term.data(), 1.0 / k, term.data(), term.size());
        kern::active().add(term.data(), result.data(), result.data(), result.size());
    }
    for (int s = 0; s < squarings; ++s) result = matmul_small(result, result);
    return result;
}

} // namespace

std::vector<TaskSpec> make_task_suite(const World& world, const SuiteConfig& cfg,
                                      int reserved) {
    cfg.validate();
    const int needed = reserved + cfg.tasks * cfg.classes_per_task;
    if (needed > world.num_classes())
        throw ConfigError("suite: needs " + std::to_string(needed) + " classes, world has " +
                          std::to_string(world.num_classes()));
    const int d = world.config().image_dim;
    std::vector<TaskSpec> suite;
    suite.reserve(static_cast<std::size_t>(cfg.tasks));
    for (int t = 1; t <= cfg.tasks; ++t) {
        TaskSpec task;
        task.index = t;
        task.train_per_class = cfg.train_per_class;
        task.test_per_class = cfg.test_per_class;
        const int first = reserved + (t - 1) * cfg.classes_per_task;
        for (int c = 0; c < cfg.classes_per_task; ++c) task.class_ids.push_back(first + c);

        const double severity = shift_severity_for(cfg, t);
        if (severity == 0.0) {
            task.transform = DomainTransform::identity(d);
        } else {
            // Rotation by roughly `severity` radians plus a small offset:
            // norm-preserving, so tasks stay learnable at any severity while
            // cross-task interference grows with the angle.
            Rng rng = derive_stream(world.config().seed, "domain-shift",
                                    static_cast<std::uint64_t>(t));
            const auto dd = static_cast<std::size_t>(d);
            Tensor skew(dd, dd);
            const double scale = severity / std::sqrt(2.0 * static_cast<double>(d));
            for (std::size_t i = 0; i < dd; ++i)
                for (std::size_t j = i + 1; j < dd; ++j) {
                    const double v = rng.normal(0.0, scale);
                    skew.at(i, j) = v;
                    skew.at(j, i) = -v;
                }
            task.transform.linear = expm(skew);
            task.transform.offset = Tensor(1, dd);
            for (std::size_t i = 0; i < dd; ++i)
                task.transform.offset.data()[i] = rng.normal(0.0, 0.1 * severity);
        }
        suite.push_back(std::move(task));
    }
    return suite;
}

void dump_dataset_csv(std::ostream& out, const World& world,
                      const std::vector<TaskSpec>& suite) {
    out << "task,split,class_id,prompt";
    for (int j = 0; j < world.config().image_dim; ++j) out << ",x" << j;
    out << "\n";
    for (const auto& task : suite) {
        for (const Split split : {Split::train, Split::test}) {
            const int per = split == Split::train ? task.train_per_class : task.test_per_class;
            const LabeledSet set =
                sample_real(world, task, per * static_cast<int>(task.class_ids.size()), split);
            for (std::size_t i = 0; i < set.labels.size(); ++i) {
                out << task.index << "," << (split == Split::train ? "train" : "test") << ","
                    << set.labels[i] << ",\"" << world.prompt(set.labels[i]) << "\"";
                for (std::size_t j = 0; j < set.images.cols(); ++j)
                    out << "," << set.images.at(i, j);
                out << "\n";
            }
        }
    }
}

} // namespace gift
