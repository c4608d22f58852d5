#pragma once

#include <functional>
#include <vector>

#include "gift/tensor.hpp"

namespace gift {

using NodeId = int;

// Reverse-mode tape over dense tensors. Forward values are computed eagerly
// as nodes are appended, so creation order is a topological order and
// backward is a single reverse sweep that visits each node exactly once.
class Graph {
public:
    // Guards shared across losses. The normalization guard surfaces
    // degenerate embeddings instead of silently perturbing them; the
    // probability floor keeps logs finite on near-zero teacher mass and is
    // numerical, not semantic.
    static constexpr double kNormEpsilon = 1e-8;
    static constexpr double kProbFloor = 1e-12;
    static constexpr double kRowSumTolerance = 1e-6;

    NodeId constant(Tensor value);
    NodeId param(Tensor value);

    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId add(NodeId a, NodeId b);
    // x: m x n, v: 1 x n broadcast over rows
    NodeId add_rowvec(NodeId x, NodeId v);
    NodeId scale(NodeId a, double c);
    // s: 1x1 node multiplied into every entry of a
    NodeId mul_scalar(NodeId a, NodeId s);
    NodeId exp(NodeId a);
    NodeId tanh(NodeId a);
    // scalar sum of squared entries
    NodeId sqnorm(NodeId a);
    NodeId l2_normalize_rows(NodeId a);
    // softmax of (row / temperature), max-subtracted
    NodeId softmax_rows(NodeId a, double temperature);
    // (1/m) sum_i KL(p_i || q_i) with 0*log0 := 0. p is a detached target:
    // gradient flows to q only.
    NodeId kl_rows(NodeId p, NodeId q);
    // -(1/m) sum_ij t_ij log q_ij; gradient to q only.
    NodeId cross_entropy_rows(NodeId targets, NodeId q);

    const Tensor& value(NodeId id) const;
    const Tensor& grad(NodeId id) const;
    double scalar_value(NodeId id) const;

    // Accumulates gradients for every node reachable from root; resets any
    // previous gradients first, so repeated calls on one graph are
    // independent.
    void backward(NodeId root);

    const std::vector<NodeId>& params() const { return params_; }
    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op : unsigned char {
        Constant,
        Param,
        MatMul,
        Transpose,
        Add,
        AddRowVec,
        Scale,
        MulScalar,
        Exp,
        Tanh,
        SqNorm,
        L2NormalizeRows,
        SoftmaxRows,
        KlRows,
        CrossEntropyRows,
    };

    struct Node {
        Op op;
        NodeId a = -1;
        NodeId b = -1;
        double aux = 0.0; // temperature for SoftmaxRows, factor for Scale
        Tensor value;
        Tensor grad;
    };

    NodeId push(Node n);
    const Node& node(NodeId id) const;
    void check_id(NodeId id) const;
    void backprop_node(NodeId id);

    std::vector<Node> nodes_;
    std::vector<NodeId> params_;
};

// Central-difference gradient estimate, one coordinate at a time:
// (L(theta + h e_i) - L(theta - h e_i)) / (2h). The validation oracle for
// every backward pass in this codebase; deliberately knows nothing about
// Graph internals.
std::vector<double> finite_diff(
    const std::function<double(const std::vector<double>&)>& loss,
    const std::vector<double>& theta, double h);

} // namespace gift
