#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gift/autodiff.hpp"
#include "gift/tensor.hpp"

namespace gift {

struct ModelArch {
    int d_img = 32;
    int d_txt = 24;
    int hidden = 64;
    int d_emb = 16;
    bool operator==(const ModelArch&) const = default;
};

// Flat-parameter layout of the two towers plus the temperature scalar. Every
// consumer of gradients, penalties, Fisher weights and interpolation works on
// this flat view.
struct ParamLayout {
    struct Slice {
        std::size_t offset = 0;
        std::size_t rows = 0;
        std::size_t cols = 0;
        std::size_t size() const { return rows * cols; }
    };
    Slice img_w1, img_b1, img_w2, img_b2;
    Slice txt_w1, txt_b1, txt_w2, txt_b2;
    Slice log_tau;
    std::size_t total = 0;

    static ParamLayout make(const ModelArch& arch);
};

// Two-tower encoder: each tower is affine -> tanh -> affine followed by row
// L2 normalization onto the unit sphere; predictions are softmax over
// cosine / tau.
class TwoTowerModel {
public:
    TwoTowerModel() = default;
    TwoTowerModel(ModelArch arch, std::uint64_t init_seed, std::vector<double> params);

    static TwoTowerModel init(const ModelArch& arch, std::uint64_t seed);

    const ModelArch& arch() const { return arch_; }
    std::uint64_t init_seed() const { return seed_; }
    const ParamLayout& layout() const { return layout_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    double log_temperature() const { return params_[layout_.log_tau.offset]; }
    void set_log_temperature(double v) { params_[layout_.log_tau.offset] = v; }
    double temperature() const;

private:
    ModelArch arch_;
    std::uint64_t seed_ = 0;
    ParamLayout layout_;
    std::vector<double> params_;
};

// Frozen copy of a model's parameters; the distillation teacher and the
// consolidation anchor.
struct ModelSnapshot {
    ModelArch arch;
    std::uint64_t init_seed = 0;
    std::vector<double> params;
    int task_index = 0;
    long step = 0;

    static ModelSnapshot of(const TwoTowerModel& m, int task_index, long step);
    TwoTowerModel to_model() const;
    double log_temperature() const;
    double temperature() const;
};

struct EmbeddingBatch {
    Tensor image; // B x d_emb, unit rows
    Tensor text;  // B x d_emb, unit rows
};

// Graph binding of a model's parameters. Trainable towers become param
// nodes; a frozen binding uses constants so no gradient is ever produced.
struct ModelNodes {
    NodeId img_w1, img_b1, img_w2, img_b2;
    NodeId txt_w1, txt_b1, txt_w2, txt_b2;
    NodeId log_tau;
    bool trainable = false;
    bool tau_trainable = false;
};

ModelNodes bind_model(Graph& g, const ModelArch& arch, const std::vector<double>& params,
                      bool trainable, bool tau_trainable);

NodeId encode_images_node(Graph& g, const ModelNodes& m, NodeId images);
NodeId encode_texts_node(Graph& g, const ModelNodes& m, NodeId texts);

// Scatter node gradients back into the flat layout. Frozen slices stay zero.
void collect_param_grads(const Graph& g, const ModelNodes& m, const ParamLayout& layout,
                         std::vector<double>& out);

Tensor encode_images(const TwoTowerModel& m, const Tensor& images);
Tensor encode_texts(const TwoTowerModel& m, const Tensor& texts);
EmbeddingBatch encode(const TwoTowerModel& m, const Tensor& images, const Tensor& texts);

// p(y_i | x) = exp(cos(z, w_i)/tau) / sum_j exp(cos(z, w_j)/tau)
std::vector<double> predict(const TwoTowerModel& m, const Tensor& image,
                            const Tensor& class_texts);

// theta = (1 - w) * a + w * b, elementwise over the flat parameters.
TwoTowerModel interpolate(const ModelSnapshot& a, const ModelSnapshot& b, double w);

std::string checkpoint_to_json(const ModelSnapshot& snap);
ModelSnapshot checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::string& path, const ModelSnapshot& snap);
ModelSnapshot load_checkpoint(const std::string& path);

} // namespace gift
