#include "gift/losses.hpp"

#include <cmath>
#include <string>

#include "gift/errors.hpp"

namespace gift {

void LossWeights::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
        throw ContractError("LossWeights: alpha must be finite and nonnegative");
    if (!(beta >= 0.0) || !std::isfinite(beta))
        throw ContractError("LossWeights: beta must be finite and nonnegative");
    if (!(lambda_awc >= 0.0) || !std::isfinite(lambda_awc))
        throw ContractError("LossWeights: lambda_awc must be finite and nonnegative");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
        throw ContractError("LossWeights: label_smoothing must lie in [0, 1)");
}

ContrastiveMatrix contrastive_matrix(const EmbeddingBatch& e) {
    if (e.image.rows() != e.text.rows())
        throw ContractError("contrastive_matrix: image and text batch sizes differ");
    Graph g;
    const NodeId m = contrastive_matrix_node(g, g.constant(e.image), g.constant(e.text));
    return ContrastiveMatrix{g.value(m)};
}

NodeId contrastive_matrix_node(Graph& g, NodeId z, NodeId w) {
    if (g.value(z).rows() != g.value(w).rows())
        throw ContractError("contrastive_matrix: image and text batch sizes differ");
    return g.matmul(z, g.transpose(w));
}

namespace {

void require_same_square(const Tensor& s, const Tensor& t, const char* what) {
    if (s.rows() == 0) throw ContractError(std::string(what) + ": empty batch");
    if (s.rows() != s.cols()) throw ContractError(std::string(what) + ": matrix not square");
    if (!s.same_shape(t)) throw ContractError(std::string(what) + ": batch sizes differ");
}

} // namespace

NodeId cd_loss_node(Graph& g, NodeId student, const Tensor& teacher, double tau_s,
                    double tau_t) {
    require_same_square(g.value(student), teacher, "cd_loss");
    const NodeId teacher_node = g.constant(teacher);
    const NodeId p_rows = g.softmax_rows(teacher_node, tau_t);
    const NodeId q_rows = g.softmax_rows(student, tau_s);
    const NodeId kl_rows = g.kl_rows(p_rows, q_rows);
    const NodeId p_cols = g.softmax_rows(g.transpose(teacher_node), tau_t);
    const NodeId q_cols = g.softmax_rows(g.transpose(student), tau_s);
    const NodeId kl_cols = g.kl_rows(p_cols, q_cols);
    return g.add(kl_rows, kl_cols);
}

double cd_loss(const ContrastiveMatrix& student, const ContrastiveMatrix& teacher,
               double tau_s, double tau_t) {
    Graph g;
    return g.scalar_value(
        cd_loss_node(g, g.constant(student.values), teacher.values, tau_s, tau_t));
}

NodeId ita_loss_node(Graph& g, NodeId m, double tau) {
    const Tensor& v = g.value(m);
    require_same_square(v, v, "ita_loss");
    const NodeId eye = g.constant(Tensor::identity(v.rows()));
    const NodeId rows = g.kl_rows(eye, g.softmax_rows(m, tau));
    const NodeId cols = g.kl_rows(eye, g.softmax_rows(g.transpose(m), tau));
    return g.add(rows, cols);
}

NodeId ita_loss_node(Graph& g, NodeId m, NodeId log_tau) {
    const Tensor& v = g.value(m);
    require_same_square(v, v, "ita_loss");
    const NodeId inv_tau = g.exp(g.scale(log_tau, -1.0));
    const NodeId scaled = g.mul_scalar(m, inv_tau);
    const NodeId eye = g.constant(Tensor::identity(v.rows()));
    const NodeId rows = g.kl_rows(eye, g.softmax_rows(scaled, 1.0));
    const NodeId cols = g.kl_rows(eye, g.softmax_rows(g.transpose(scaled), 1.0));
    return g.add(rows, cols);
}

double ita_loss(const ContrastiveMatrix& m, double tau) {
    Graph g;
    return g.scalar_value(ita_loss_node(g, g.constant(m.values), tau));
}

Tensor smoothed_targets(std::size_t num_classes, const std::vector<int>& labels,
                        double eps) {
    if (num_classes == 0) throw ContractError("smoothed_targets: no classes");
    Tensor t(labels.size(), num_classes);
    const double off = eps / static_cast<double>(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
            throw ContractError("label " + std::to_string(y) + " outside 0.." +
                                std::to_string(num_classes - 1));
        for (std::size_t j = 0; j < num_classes; ++j) t.at(i, j) = off;
        t.at(i, static_cast<std::size_t>(y)) += 1.0 - eps;
    }
    return t;
}

NodeId ce_loss_node(Graph& g, NodeId cosines, double tau, const std::vector<int>& labels,
                    double smoothing) {
    const Tensor& v = g.value(cosines);
    if (v.rows() != labels.size())
        throw ContractError("ce_loss: batch size and label count differ");
    const Tensor targets = smoothed_targets(v.cols(), labels, smoothing);
    const NodeId probs = g.softmax_rows(cosines, tau);
    return g.cross_entropy_rows(g.constant(targets), probs);
}

double ce_loss(const Tensor& probs, const std::vector<int>& labels, double smoothing) {
    if (probs.rows() != labels.size())
        throw ContractError("ce_loss: batch size and label count differ");
    Graph g;
    const Tensor targets = smoothed_targets(probs.cols(), labels, smoothing);
    return g.scalar_value(
        g.cross_entropy_rows(g.constant(targets), g.constant(probs)));
}

double total_loss(double ce, double cd, double ita, const LossWeights& w) {
    w.validate();
    if (!std::isfinite(ce) || !std::isfinite(cd) || !std::isfinite(ita))
        throw ContractError("total_loss: non-finite component");
    return ce + w.alpha * cd + w.beta * ita;
}

NodeId total_loss_node(Graph& g, NodeId ce, NodeId cd, NodeId ita, const LossWeights& w) {
    w.validate();
    return g.add(ce, g.add(g.scale(cd, w.alpha), g.scale(ita, w.beta)));
}

double teacher_entropy(const ContrastiveMatrix& teacher, double tau_t) {
    Graph g;
    const NodeId t = g.constant(teacher.values);
    const NodeId p_rows = g.softmax_rows(t, tau_t);
    const NodeId p_cols = g.softmax_rows(g.transpose(t), tau_t);
    // H(P) per direction is the cross-entropy of P with itself.
    const NodeId h = g.add(g.cross_entropy_rows(p_rows, p_rows),
                           g.cross_entropy_rows(p_cols, p_cols));
    return g.scalar_value(h);
}

double distill_cross_entropy(const ContrastiveMatrix& student,
                             const ContrastiveMatrix& teacher, double tau_s,
                             double tau_t) {
    return cd_loss(student, teacher, tau_s, tau_t) + teacher_entropy(teacher, tau_t);
}

DistillVariant distill_variant_from(const std::string& name) {
    if (name == "contrastive") return DistillVariant::contrastive;
    if (name == "image_only") return DistillVariant::image_only;
    if (name == "text_only") return DistillVariant::text_only;
    if (name == "feature") return DistillVariant::feature;
    throw ConfigError("unknown distill variant '" + name + "'");
}

std::string to_string(DistillVariant v) {
    switch (v) {
        case DistillVariant::contrastive: return "contrastive";
        case DistillVariant::image_only: return "image_only";
        case DistillVariant::text_only: return "text_only";
        case DistillVariant::feature: return "feature";
    }
    return "?";
}

NodeId feature_distance_node(Graph& g, NodeId z, NodeId w, const Tensor& teacher_z,
                             const Tensor& teacher_w) {
    const Tensor& vz = g.value(z);
    if (!vz.same_shape(teacher_z) || !g.value(w).same_shape(teacher_w))
        throw ContractError("feature_distance: embedding shapes differ");
    const NodeId dz = g.add(z, g.scale(g.constant(teacher_z), -1.0));
    const NodeId dw = g.add(w, g.scale(g.constant(teacher_w), -1.0));
    return g.scale(g.add(g.sqnorm(dz), g.sqnorm(dw)),
                   1.0 / static_cast<double>(vz.rows()));
}

} // namespace gift
