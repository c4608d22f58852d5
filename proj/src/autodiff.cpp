#include "gift/autodiff.hpp"

#include <cmath>
#include <string>

#include "gift/kernels.hpp"

namespace gift {

namespace {

void check_row_stochastic(const Tensor& t, const char* what) {
    const auto& k = kern::active();
    for (std::size_t i = 0; i < t.rows(); ++i) {
        const double s = k.sum(t.row_ptr(i), t.cols());
        if (std::abs(s - 1.0) > Graph::kRowSumTolerance)
            throw ContractError(std::string(what) + ": row " + std::to_string(i) +
                                " sums to " + std::to_string(s) + ", expected 1");
    }
}

} // namespace

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

const Graph::Node& Graph::node(NodeId id) const {
    check_id(id);
    return nodes_[static_cast<std::size_t>(id)];
}

void Graph::check_id(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
        throw ContractError("invalid node id " + std::to_string(id));
}

const Tensor& Graph::value(NodeId id) const { return node(id).value; }

const Tensor& Graph::grad(NodeId id) const {
    const Node& n = node(id);
    if (n.grad.size() == 0)
        throw ContractError("gradient not computed for node " + std::to_string(id));
    return n.grad;
}

double Graph::scalar_value(NodeId id) const {
    const Tensor& v = value(id);
    if (v.size() != 1) throw ContractError("node is not scalar");
    return v.data()[0];
}

NodeId Graph::constant(Tensor value) {
    return push({Op::Constant, -1, -1, 0.0, std::move(value), {}});
}

NodeId Graph::param(Tensor value) {
    const NodeId id = push({Op::Param, -1, -1, 0.0, std::move(value), {}});
    params_.push_back(id);
    return id;
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.cols() != vb.rows())
        throw DimensionError("matmul: inner dimensions " + std::to_string(va.cols()) +
                             " and " + std::to_string(vb.rows()) + " disagree");
    const auto& k = kern::active();
    Tensor out(va.rows(), vb.cols());
    for (std::size_t i = 0; i < va.rows(); ++i) {
        double* ci = out.row_ptr(i);
        for (std::size_t p = 0; p < va.cols(); ++p)
            k.axpy(va.at(i, p), vb.row_ptr(p), ci, vb.cols());
    }
    return push({Op::MatMul, a, b, 0.0, std::move(out), {}});
}

NodeId Graph::transpose(NodeId a) {
    const Tensor& va = value(a);
    Tensor out(va.cols(), va.rows());
    for (std::size_t i = 0; i < va.rows(); ++i)
        for (std::size_t j = 0; j < va.cols(); ++j) out.at(j, i) = va.at(i, j);
    return push({Op::Transpose, a, -1, 0.0, std::move(out), {}});
}

NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb)) throw DimensionError("add: shape mismatch");
    Tensor out(va.rows(), va.cols());
    kern::active().add(va.data(), vb.data(), out.data(), out.size());
    return push({Op::Add, a, b, 0.0, std::move(out), {}});
}

NodeId Graph::add_rowvec(NodeId x, NodeId v) {
    const Tensor& vx = value(x);
    const Tensor& vv = value(v);
    if (vv.rows() != 1 || vv.cols() != vx.cols())
        throw DimensionError("add_rowvec: bias must be 1 x cols(x)");
    const auto& k = kern::active();
    Tensor out(vx.rows(), vx.cols());
    for (std::size_t i = 0; i < vx.rows(); ++i)
        k.add(vx.row_ptr(i), vv.data(), out.row_ptr(i), vx.cols());
    return push({Op::AddRowVec, x, v, 0.0, std::move(out), {}});
}

NodeId Graph::scale(NodeId a, double c) {
    const Tensor& va = value(a);
    Tensor out(va.rows(), va.cols());
    kern::active().scale(va.data(), c, out.data(), out.size());
    return push({Op::Scale, a, -1, c, std::move(out), {}});
}

NodeId Graph::mul_scalar(NodeId a, NodeId s) {
    const Tensor& va = value(a);
    const Tensor& vs = value(s);
    if (vs.size() != 1) throw DimensionError("mul_scalar: multiplier must be 1x1");
    Tensor out(va.rows(), va.cols());
    kern::active().scale(va.data(), vs.data()[0], out.data(), out.size());
    return push({Op::MulScalar, a, s, 0.0, std::move(out), {}});
}

NodeId Graph::exp(NodeId a) {
    const Tensor& va = value(a);
    Tensor out(va.rows(), va.cols());
    for (std::size_t i = 0; i < va.size(); ++i) out.data()[i] = std::exp(va.data()[i]);
    return push({Op::Exp, a, -1, 0.0, std::move(out), {}});
}

NodeId Graph::tanh(NodeId a) {
    const Tensor& va = value(a);
    Tensor out(va.rows(), va.cols());
    for (std::size_t i = 0; i < va.size(); ++i) out.data()[i] = std::tanh(va.data()[i]);
    return push({Op::Tanh, a, -1, 0.0, std::move(out), {}});
}

NodeId Graph::sqnorm(NodeId a) {
    const Tensor& va = value(a);
    const auto& k = kern::active();
    return push({Op::SqNorm, a, -1, 0.0,
                 Tensor::scalar(k.dot(va.data(), va.data(), va.size())), {}});
}

NodeId Graph::l2_normalize_rows(NodeId a) {
    const Tensor& va = value(a);
    const auto& k = kern::active();
    Tensor out(va.rows(), va.cols());
    for (std::size_t i = 0; i < va.rows(); ++i) {
        const double norm = std::sqrt(k.dot(va.row_ptr(i), va.row_ptr(i), va.cols()));
        if (norm <= kNormEpsilon)
            throw DegenerateInputError("l2_normalize_rows: row " + std::to_string(i) +
                                       " has norm " + std::to_string(norm));
        k.scale(va.row_ptr(i), 1.0 / norm, out.row_ptr(i), va.cols());
    }
    return push({Op::L2NormalizeRows, a, -1, 0.0, std::move(out), {}});
}

NodeId Graph::softmax_rows(NodeId a, double temperature) {
    if (!(temperature > 0.0))
        throw ParameterError("softmax_rows: temperature must be positive");
    const Tensor& va = value(a);
    const auto& k = kern::active();
    Tensor out(va.rows(), va.cols());
    for (std::size_t i = 0; i < va.rows(); ++i) {
        const double* x = va.row_ptr(i);
        double* y = out.row_ptr(i);
        const double m = k.max(x, va.cols());
        double s = 0.0;
        for (std::size_t j = 0; j < va.cols(); ++j) {
            y[j] = std::exp((x[j] - m) / temperature);
            s += y[j];
        }
        k.scale(y, 1.0 / s, y, va.cols());
    }
    return push({Op::SoftmaxRows, a, -1, temperature, std::move(out), {}});
}

NodeId Graph::kl_rows(NodeId p, NodeId q) {
    const Tensor& vp = value(p);
    const Tensor& vq = value(q);
    if (!vp.same_shape(vq)) throw DimensionError("kl_rows: shape mismatch");
    check_row_stochastic(vp, "kl_rows targets");
    check_row_stochastic(vq, "kl_rows inputs");
    double acc = 0.0;
    for (std::size_t i = 0; i < vp.size(); ++i) {
        const double pi = vp.data()[i];
        if (pi > 0.0) {
            const double qi = std::max(vq.data()[i], kProbFloor);
            acc += pi * (std::log(pi) - std::log(qi));
        }
    }
    return push({Op::KlRows, p, q, 0.0,
                 Tensor::scalar(acc / static_cast<double>(vp.rows())), {}});
}

NodeId Graph::cross_entropy_rows(NodeId targets, NodeId q) {
    const Tensor& vt = value(targets);
    const Tensor& vq = value(q);
    if (!vt.same_shape(vq)) throw DimensionError("cross_entropy_rows: shape mismatch");
    check_row_stochastic(vt, "cross_entropy_rows targets");
    double acc = 0.0;
    for (std::size_t i = 0; i < vt.size(); ++i) {
        const double ti = vt.data()[i];
        if (ti != 0.0) acc -= ti * std::log(std::max(vq.data()[i], kProbFloor));
    }
    return push({Op::CrossEntropyRows, targets, q, 0.0,
                 Tensor::scalar(acc / static_cast<double>(vt.rows())), {}});
}

void Graph::backward(NodeId root) {
    check_id(root);
    Node& r = nodes_[static_cast<std::size_t>(root)];
    if (r.value.size() != 1) throw ContractError("backward: root must be scalar");
    for (auto& n : nodes_) {
        n.grad = Tensor(n.value.rows(), n.value.cols());
    }
    r.grad.data()[0] = 1.0;
    for (NodeId id = root; id >= 0; --id) backprop_node(id);
}

void Graph::backprop_node(NodeId id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = n.grad;
    const auto& k = kern::active();
    switch (n.op) {
        case Op::Constant:
        case Op::Param:
            return;
        case Op::MatMul: {
            Node& na = nodes_[static_cast<std::size_t>(n.a)];
            Node& nb = nodes_[static_cast<std::size_t>(n.b)];
            // dA = g * B^T, dB = A^T * g
            for (std::size_t i = 0; i < na.value.rows(); ++i) {
                for (std::size_t p = 0; p < na.value.cols(); ++p) {
                    na.grad.at(i, p) +=
                        k.dot(g.row_ptr(i), nb.value.row_ptr(p), g.cols());
                }
                for (std::size_t p = 0; p < na.value.cols(); ++p)
                    k.axpy(na.value.at(i, p), g.row_ptr(i), nb.grad.row_ptr(p),
                           g.cols());
            }
            return;
        }
        case Op::Transpose: {
            Node& na = nodes_[static_cast<std::size_t>(n.a)];
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j)
                    na.grad.at(j, i) += g.at(i, j);
            return;
        }
        case Op::Add: {
            Node& na = nodes_[static_cast<std::size_t>(n.a)];
            Node& nb = nodes_[static_cast<std::size_t>(n.b)];
            k.axpy(1.0, g.data(), na.grad.data(), g.size());
            k.axpy(1.0, g.data(), nb.grad.data(), g.size());
            return;
        }
        case Op::AddRowVec: {
            Node& nx = nodes_[static_cast<std::size_t>(n.a)];
            Node& nv = nodes_[static_cast<std::size_t>(n.b)];
            k.axpy(1.0, g.data(), nx.grad.data(), g.size());
            for (std::size_t i = 0; i < g.rows(); ++i)
                k.axpy(1.0, g.row_ptr(i), nv.grad.data(), g.cols());
            return;
        }
        case Op::Scale: {
            Node& na = nodes_[static_cast<std::size_t>(n.a)];
            k.axpy(n.aux, g.data(), na.grad.data(), g.size());
            return;
        }
        case Op::MulScalar: {
            Node& na = nodes_[static_cast<std::size_t>(n.a)];
            Node& ns = nodes_[static_cast<std::size_t>(n.b)];
            k.axpy(ns.value.data()[0], g.data(), na.grad.data(), g.size());
            ns.grad.data()[0] += k.dot(g.data(), na.value.data(), g.size());
            return;
        }
        case Op::Exp: {
            Node& na = nodes_[static_cast<std::size_t>(n.a)];
            for (std::size_t i = 0; i < g.size(); ++i)
                na.grad.data()[i] += g.data()[i] * n.value.data()[i];
            return;
        }
        case Op::Tanh: {
            Node& na = nodes_[static_cast<std::size_t>(n.a)];
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = n.value.data()[i];
                na.grad.data()[i] += g.data()[i] * (1.0 - y * y);
            }
            return;
        }
        case Op::SqNorm: {
            Node& na = nodes_[static_cast<std::size_t>(n.a)];
            k.axpy(2.0 * g.data()[0], na.value.data(), na.grad.data(),
                   na.value.size());
            return;
        }
        case Op::L2NormalizeRows: {
            Node& na = nodes_[static_cast<std::size_t>(n.a)];
            for (std::size_t i = 0; i < g.rows(); ++i) {
                const double* x = na.value.row_ptr(i);
                const double* y = n.value.row_ptr(i);
                const double* gi = g.row_ptr(i);
                const double norm = std::sqrt(k.dot(x, x, g.cols()));
                const double gy = k.dot(gi, y, g.cols());
                double* out = na.grad.row_ptr(i);
                for (std::size_t j = 0; j < g.cols(); ++j)
                    out[j] += (gi[j] - gy * y[j]) / norm;
            }
            return;
        }
        case Op::SoftmaxRows: {
            Node& na = nodes_[static_cast<std::size_t>(n.a)];
            const double inv_t = 1.0 / n.aux;
            for (std::size_t i = 0; i < g.rows(); ++i) {
                const double* y = n.value.row_ptr(i);
                const double* gi = g.row_ptr(i);
                const double gy = k.dot(gi, y, g.cols());
                double* out = na.grad.row_ptr(i);
                for (std::size_t j = 0; j < g.cols(); ++j)
                    out[j] += y[j] * (gi[j] - gy) * inv_t;
            }
            return;
        }
        case Op::KlRows: {
            // Targets are detached; only q receives gradient.
            Node& np = nodes_[static_cast<std::size_t>(n.a)];
            Node& nq = nodes_[static_cast<std::size_t>(n.b)];
            const double go = g.data()[0] / static_cast<double>(np.value.rows());
            for (std::size_t i = 0; i < np.value.size(); ++i) {
                const double pi = np.value.data()[i];
                if (pi > 0.0) {
                    const double qi = std::max(nq.value.data()[i], kProbFloor);
                    nq.grad.data()[i] -= go * pi / qi;
                }
            }
            return;
        }
        case Op::CrossEntropyRows: {
            Node& nt = nodes_[static_cast<std::size_t>(n.a)];
            Node& nq = nodes_[static_cast<std::size_t>(n.b)];
            const double go = g.data()[0] / static_cast<double>(nt.value.rows());
            for (std::size_t i = 0; i < nt.value.size(); ++i) {
                const double ti = nt.value.data()[i];
                if (ti != 0.0) {
                    const double qi = std::max(nq.value.data()[i], kProbFloor);
                    nq.grad.data()[i] -= go * ti / qi;
                }
            }
            return;
        }
    }
}

std::vector<double> finite_diff(
    const std::function<double(const std::vector<double>&)>& loss,
    const std::vector<double>& theta, double h) {
    if (!(h > 0.0)) throw ParameterError("finite_diff: h must be positive");
    std::vector<double> grad(theta.size());
    std::vector<double> probe = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        probe[i] = theta[i] + h;
        const double up = loss(probe);
        probe[i] = theta[i] - h;
        const double down = loss(probe);
        probe[i] = theta[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

} // namespace gift
