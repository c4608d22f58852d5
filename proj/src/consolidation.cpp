#include "gift/consolidation.hpp"

#include <cmath>
#include <string>

#include "gift/errors.hpp"
#include "gift/kernels.hpp"

namespace gift {

void ConsolidationConfig::validate() const {
    if (!std::isfinite(lambda) || lambda < 0.0)
        throw ConfigError("consolidation: lambda must be finite and nonnegative");
    if (static_sample_batches < 1)
        throw ConfigError("consolidation: static_sample_batches must be >= 1");
}

ConsolidationMode consolidation_mode_from(const std::string& name) {
    if (name == "none") return ConsolidationMode::none;
    if (name == "l2") return ConsolidationMode::l2;
    if (name == "ewc_static") return ConsolidationMode::ewc_static;
    if (name == "awc") return ConsolidationMode::awc;
    throw ConfigError("unknown consolidation mode '" + name + "'");
}

std::string to_string(ConsolidationMode mode) {
    switch (mode) {
        case ConsolidationMode::none: return "none";
        case ConsolidationMode::l2: return "l2";
        case ConsolidationMode::ewc_static: return "ewc_static";
        case ConsolidationMode::awc: return "awc";
    }
    return "?";
}

FisherDiagonal fisher_from_gradients(const std::vector<double>& grad, long step_index,
                                     FisherNormalize normalize) {
    FisherDiagonal f;
    f.step_index = step_index;
    f.mode = normalize;
    f.values.resize(grad.size());
    const auto& k = kern::active();
    k.square(grad.data(), f.values.data(), grad.size());
    if (normalize == FisherNormalize::mean_one && !f.values.empty()) {
        const double mean = k.sum(f.values.data(), f.values.size()) /
                            static_cast<double>(f.values.size());
        if (mean > 0.0)
            k.scale(f.values.data(), 1.0 / mean, f.values.data(), f.values.size());
    }
    return f;
}

double awc_loss(const std::vector<double>& now, const std::vector<double>& prev,
                const FisherDiagonal& fisher) {
    if (now.size() != prev.size() || now.size() != fisher.values.size())
        throw ContractError("awc_loss: length mismatch");
    return kern::active().weighted_sqdiff_sum(fisher.values.data(), now.data(),
                                              prev.data(), now.size());
}

void accumulate_awc_gradient(const std::vector<double>& now,
                             const std::vector<double>& prev,
                             const FisherDiagonal& fisher, double scale,
                             std::vector<double>& grad) {
    if (now.size() != prev.size() || now.size() != fisher.values.size() ||
        now.size() != grad.size())
        throw ContractError("accumulate_awc_gradient: length mismatch");
    const double c = 2.0 * scale;
    for (std::size_t i = 0; i < now.size(); ++i)
        grad[i] += c * fisher.values[i] * (now[i] - prev[i]);
}

double l2_penalty(const std::vector<double>& now, const std::vector<double>& prev) {
    if (now.size() != prev.size()) throw ContractError("l2_penalty: length mismatch");
    return kern::active().sqdiff_sum(now.data(), prev.data(), now.size());
}

void accumulate_l2_gradient(const std::vector<double>& now,
                            const std::vector<double>& prev, double scale,
                            std::vector<double>& grad) {
    if (now.size() != prev.size() || now.size() != grad.size())
        throw ContractError("accumulate_l2_gradient: length mismatch");
    const double c = 2.0 * scale;
    for (std::size_t i = 0; i < now.size(); ++i) grad[i] += c * (now[i] - prev[i]);
}

FisherDiagonal ewc_static_fisher(
    const std::function<std::vector<double>(int)>& distill_gradient, int batches,
    FisherNormalize normalize) {
    if (batches < 1) throw ContractError("ewc_static_fisher: need at least one batch");
    const auto& k = kern::active();
    std::vector<double> acc;
    std::vector<double> sq;
    for (int b = 0; b < batches; ++b) {
        const std::vector<double> g = distill_gradient(b);
        if (acc.empty()) {
            acc.assign(g.size(), 0.0);
            sq.resize(g.size());
        } else if (g.size() != acc.size()) {
            throw ContractError("ewc_static_fisher: gradient length changed");
        }
        k.square(g.data(), sq.data(), g.size());
        k.axpy(1.0, sq.data(), acc.data(), acc.size());
    }
    k.scale(acc.data(), 1.0 / static_cast<double>(batches), acc.data(), acc.size());
    FisherDiagonal f;
    f.step_index = 0;
    f.mode = normalize;
    f.values = std::move(acc);
    if (normalize == FisherNormalize::mean_one && !f.values.empty()) {
        const double mean =
            k.sum(f.values.data(), f.values.size()) / static_cast<double>(f.values.size());
        if (mean > 0.0)
            k.scale(f.values.data(), 1.0 / mean, f.values.data(), f.values.size());
    }
    return f;
}

} // namespace gift
