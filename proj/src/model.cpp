#include "gift/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gift/errors.hpp"
#include "gift/kernels.hpp"
#include "gift/rng.hpp"

namespace gift {

ParamLayout ParamLayout::make(const ModelArch& arch) {
    ParamLayout l;
    std::size_t off = 0;
    auto place = [&off](std::size_t r, std::size_t c) {
        ParamLayout::Slice s{off, r, c};
        off += r * c;
        return s;
    };
    const auto di = static_cast<std::size_t>(arch.d_img);
    const auto dt = static_cast<std::size_t>(arch.d_txt);
    const auto h = static_cast<std::size_t>(arch.hidden);
    const auto de = static_cast<std::size_t>(arch.d_emb);
    l.img_w1 = place(di, h);
    l.img_b1 = place(1, h);
    l.img_w2 = place(h, de);
    l.img_b2 = place(1, de);
    l.txt_w1 = place(dt, h);
    l.txt_b1 = place(1, h);
    l.txt_w2 = place(h, de);
    l.txt_b2 = place(1, de);
    l.log_tau = place(1, 1);
    l.total = off;
    return l;
}

TwoTowerModel::TwoTowerModel(ModelArch arch, std::uint64_t init_seed,
                             std::vector<double> params)
    : arch_(arch), seed_(init_seed), layout_(ParamLayout::make(arch)),
      params_(std::move(params)) {
    if (params_.size() != layout_.total)
        throw DimensionError("model parameter vector has wrong length");
}

TwoTowerModel TwoTowerModel::init(const ModelArch& arch, std::uint64_t seed) {
    const ParamLayout layout = ParamLayout::make(arch);
    std::vector<double> p(layout.total, 0.0);
    Rng rng = derive_stream(seed, "model-init");
    auto fill = [&](const ParamLayout::Slice& s, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < s.size(); ++i)
            p[s.offset + i] = rng.uniform(-bound, bound);
    };
    fill(layout.img_w1, arch.d_img);
    fill(layout.img_b1, arch.d_img);
    fill(layout.img_w2, arch.hidden);
    fill(layout.img_b2, arch.hidden);
    fill(layout.txt_w1, arch.d_txt);
    fill(layout.txt_b1, arch.d_txt);
    fill(layout.txt_w2, arch.hidden);
    fill(layout.txt_b2, arch.hidden);
    // tau = 0.07: prediction logits are cosines scaled by ~14.3, the usual
    // contrastive sharpness.
    p[layout.log_tau.offset] = std::log(0.07);
    return TwoTowerModel(arch, seed, std::move(p));
}

double TwoTowerModel::temperature() const { return std::exp(log_temperature()); }

ModelSnapshot ModelSnapshot::of(const TwoTowerModel& m, int task_index, long step) {
    return ModelSnapshot{m.arch(), m.init_seed(), m.params(), task_index, step};
}

TwoTowerModel ModelSnapshot::to_model() const {
    return TwoTowerModel(arch, init_seed, params);
}

double ModelSnapshot::log_temperature() const {
    return params[ParamLayout::make(arch).log_tau.offset];
}

double ModelSnapshot::temperature() const { return std::exp(log_temperature()); }

namespace {

Tensor slice_tensor(const std::vector<double>& flat, const ParamLayout::Slice& s) {
    std::vector<double> data(flat.begin() + static_cast<long>(s.offset),
                             flat.begin() + static_cast<long>(s.offset + s.size()));
    return Tensor(s.rows, s.cols, std::move(data));
}

} // namespace

ModelNodes bind_model(Graph& g, const ModelArch& arch, const std::vector<double>& params,
                      bool trainable, bool tau_trainable) {
    const ParamLayout layout = ParamLayout::make(arch);
    if (params.size() != layout.total)
        throw DimensionError("bind_model: parameter vector has wrong length");
    auto bind = [&](const ParamLayout::Slice& s, bool train) {
        Tensor t = slice_tensor(params, s);
        return train ? g.param(std::move(t)) : g.constant(std::move(t));
    };
    ModelNodes m{};
    m.trainable = trainable;
    m.tau_trainable = tau_trainable;
    m.img_w1 = bind(layout.img_w1, trainable);
    m.img_b1 = bind(layout.img_b1, trainable);
    m.img_w2 = bind(layout.img_w2, trainable);
    m.img_b2 = bind(layout.img_b2, trainable);
    m.txt_w1 = bind(layout.txt_w1, trainable);
    m.txt_b1 = bind(layout.txt_b1, trainable);
    m.txt_w2 = bind(layout.txt_w2, trainable);
    m.txt_b2 = bind(layout.txt_b2, trainable);
    m.log_tau = bind(layout.log_tau, tau_trainable);
    return m;
}

namespace {

NodeId tower_forward(Graph& g, NodeId x, NodeId w1, NodeId b1, NodeId w2, NodeId b2) {
    const NodeId h = g.tanh(g.add_rowvec(g.matmul(x, w1), b1));
    const NodeId e = g.add_rowvec(g.matmul(h, w2), b2);
    return g.l2_normalize_rows(e);
}

} // namespace

NodeId encode_images_node(Graph& g, const ModelNodes& m, NodeId images) {
    return tower_forward(g, images, m.img_w1, m.img_b1, m.img_w2, m.img_b2);
}

NodeId encode_texts_node(Graph& g, const ModelNodes& m, NodeId texts) {
    return tower_forward(g, texts, m.txt_w1, m.txt_b1, m.txt_w2, m.txt_b2);
}

void collect_param_grads(const Graph& g, const ModelNodes& m, const ParamLayout& layout,
                         std::vector<double>& out) {
    if (out.size() != layout.total)
        throw DimensionError("collect_param_grads: output has wrong length");
    auto gather = [&](NodeId id, const ParamLayout::Slice& s) {
        const Tensor& grad = g.grad(id);
        kern::active().add(grad.data(), out.data() + s.offset, out.data() + s.offset,
                           s.size());
    };
    if (m.trainable) {
        gather(m.img_w1, layout.img_w1);
        gather(m.img_b1, layout.img_b1);
        gather(m.img_w2, layout.img_w2);
        gather(m.img_b2, layout.img_b2);
        gather(m.txt_w1, layout.txt_w1);
        gather(m.txt_b1, layout.txt_b1);
        gather(m.txt_w2, layout.txt_w2);
        gather(m.txt_b2, layout.txt_b2);
    }
    if (m.tau_trainable) gather(m.log_tau, layout.log_tau);
}

namespace {

void check_input(const Tensor& t, int expected_cols, const char* what) {
    if (t.rows() == 0 || t.cols() != static_cast<std::size_t>(expected_cols))
        throw DimensionError(std::string(what) + ": expected N x " +
                             std::to_string(expected_cols));
}

} // namespace

Tensor encode_images(const TwoTowerModel& m, const Tensor& images) {
    check_input(images, m.arch().d_img, "encode_images");
    Graph g;
    const ModelNodes nodes = bind_model(g, m.arch(), m.params(), false, false);
    return g.value(encode_images_node(g, nodes, g.constant(images)));
}

Tensor encode_texts(const TwoTowerModel& m, const Tensor& texts) {
    check_input(texts, m.arch().d_txt, "encode_texts");
    Graph g;
    const ModelNodes nodes = bind_model(g, m.arch(), m.params(), false, false);
    return g.value(encode_texts_node(g, nodes, g.constant(texts)));
}

EmbeddingBatch encode(const TwoTowerModel& m, const Tensor& images, const Tensor& texts) {
    if (images.rows() != texts.rows())
        throw DimensionError("encode: image and text batches differ in size");
    return EmbeddingBatch{encode_images(m, images), encode_texts(m, texts)};
}

std::vector<double> predict(const TwoTowerModel& m, const Tensor& image,
                            const Tensor& class_texts) {
    if (class_texts.rows() < 1) throw ContractError("predict: need at least one class");
    check_input(image, m.arch().d_img, "predict image");
    check_input(class_texts, m.arch().d_txt, "predict class_texts");
    if (image.rows() != 1) throw DimensionError("predict: image must be a single row");
    Graph g;
    const ModelNodes nodes = bind_model(g, m.arch(), m.params(), false, false);
    const NodeId z = encode_images_node(g, nodes, g.constant(image));
    const NodeId w = encode_texts_node(g, nodes, g.constant(class_texts));
    const NodeId cos = g.matmul(z, g.transpose(w));
    const NodeId probs = g.softmax_rows(cos, m.temperature());
    return g.value(probs).vec();
}

TwoTowerModel interpolate(const ModelSnapshot& a, const ModelSnapshot& b, double w) {
    if (!(a.arch == b.arch))
        throw ContractError("interpolate: architecture mismatch");
    if (!(w >= 0.0 && w <= 1.0))
        throw ContractError("interpolate: weight must lie in [0, 1]");
    std::vector<double> out(a.params.size());
    kern::active().lerp(a.params.data(), b.params.data(), w, out.data(), out.size());
    return TwoTowerModel(a.arch, a.init_seed, std::move(out));
}

std::string checkpoint_to_json(const ModelSnapshot& snap) {
    const ParamLayout layout = ParamLayout::make(snap.arch);
    nlohmann::json j;
    j["arch"] = {{"d_img", snap.arch.d_img},
                 {"d_txt", snap.arch.d_txt},
                 {"hidden", snap.arch.hidden},
                 {"d_emb", snap.arch.d_emb}};
    j["seed"] = snap.init_seed;
    std::vector<double> towers(snap.params.begin(),
                               snap.params.begin() + static_cast<long>(layout.log_tau.offset));
    j["params"] = towers;
    j["log_temperature"] = snap.params[layout.log_tau.offset];
    j["metadata"] = {{"task_index", snap.task_index}, {"step", snap.step}};
    return j.dump(2);
}

ModelSnapshot checkpoint_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    try {
        ModelSnapshot snap;
        snap.arch.d_img = j.at("arch").at("d_img").get<int>();
        snap.arch.d_txt = j.at("arch").at("d_txt").get<int>();
        snap.arch.hidden = j.at("arch").at("hidden").get<int>();
        snap.arch.d_emb = j.at("arch").at("d_emb").get<int>();
        snap.init_seed = j.at("seed").get<std::uint64_t>();
        snap.params = j.at("params").get<std::vector<double>>();
        snap.params.push_back(j.at("log_temperature").get<double>());
        snap.task_index = j.at("metadata").at("task_index").get<int>();
        snap.step = j.at("metadata").at("step").get<long>();
        const ParamLayout layout = ParamLayout::make(snap.arch);
        if (snap.params.size() != layout.total)
            throw FormatError("checkpoint: parameter count does not match arch");
        return snap;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::string& path, const ModelSnapshot& snap) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << checkpoint_to_json(snap);
    f << "\n";
}

ModelSnapshot load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return checkpoint_from_json(ss.str());
}

} // namespace gift
