#pragma once

#include <vector>

#include "gift/autodiff.hpp"
#include "gift/model.hpp"
#include "gift/tensor.hpp"

namespace gift {

// B x B matrix of image-to-text cosine similarities. Rows drive
// image-to-text classification, columns text-to-image retrieval.
struct ContrastiveMatrix {
    Tensor values;
    std::size_t batch() const { return values.rows(); }
};

struct LossWeights {
    double alpha = 1.0;          // contrastive-distillation scale
    double beta = 0.25;          // image-text-alignment scale
    double lambda_awc = 1.0;     // consolidation scale, applied by the trainer
    double label_smoothing = 0.2;

    void validate() const;
};

ContrastiveMatrix contrastive_matrix(const EmbeddingBatch& e);
NodeId contrastive_matrix_node(Graph& g, NodeId z, NodeId w);

// KL(teacher rows || student rows) + KL(teacher cols || student cols), each
// row/column turned into a distribution by softmax with the owning model's
// temperature. The teacher side is detached.
NodeId cd_loss_node(Graph& g, NodeId student, const Tensor& teacher, double tau_s,
                    double tau_t);
double cd_loss(const ContrastiveMatrix& student, const ContrastiveMatrix& teacher,
               double tau_s, double tau_t);

// KL against the B-class identity matrix, rows plus columns. With one-hot
// targets this is exactly the mean negative log of the diagonal softmax
// entries.
NodeId ita_loss_node(Graph& g, NodeId m, double tau);
// Pretraining variant with a trainable temperature: entries are scaled by
// exp(-log_tau) before the softmax so the gradient reaches log_tau.
NodeId ita_loss_node(Graph& g, NodeId m, NodeId log_tau);
double ita_loss(const ContrastiveMatrix& m, double tau);

// Smoothed targets q = (1 - eps) * onehot + eps / K.
Tensor smoothed_targets(std::size_t num_classes, const std::vector<int>& labels,
                        double eps);

// cosines: B x K similarity rows; prediction is softmax(cosines / tau).
NodeId ce_loss_node(Graph& g, NodeId cosines, double tau, const std::vector<int>& labels,
                    double smoothing);
// probs: B x K rows of already-formed prediction distributions.
double ce_loss(const Tensor& probs, const std::vector<int>& labels, double smoothing);

double total_loss(double ce, double cd, double ita, const LossWeights& w);
NodeId total_loss_node(Graph& g, NodeId ce, NodeId cd, NodeId ita, const LossWeights& w);

// Monitoring value: cd_loss plus the teacher distributions' entropy (rows and
// columns, averaged the same way). No gradients.
double distill_cross_entropy(const ContrastiveMatrix& student,
                             const ContrastiveMatrix& teacher, double tau_s,
                             double tau_t);

// Ablation variants of the distillation objective. image_only / text_only
// swap one side of the student matrix for the frozen teacher embeddings;
// feature replaces the contrastive term with per-modality embedding
// distances.
enum class DistillVariant { contrastive, image_only, text_only, feature };
DistillVariant distill_variant_from(const std::string& name);
std::string to_string(DistillVariant v);

// (1/B) (sum_i |z_i - tz_i|^2 + sum_i |w_i - tw_i|^2)
NodeId feature_distance_node(Graph& g, NodeId z, NodeId w, const Tensor& teacher_z,
                             const Tensor& teacher_w);

// Entropy of the teacher's row and column distributions, averaged as in
// cd_loss; the additive constant between KL and cross-entropy monitoring.
double teacher_entropy(const ContrastiveMatrix& teacher, double tau_t);

} // namespace gift
