#pragma once

#include <functional>
#include <string>
#include <vector>

namespace gift {

enum class ConsolidationMode { none, l2, ewc_static, awc };
enum class FisherNormalize { raw, mean_one };

// Per-parameter nonnegative importance weights: the squared gradient of the
// scaled distillation objective at one optimization step.
struct FisherDiagonal {
    std::vector<double> values;
    long step_index = 0;
    FisherNormalize mode = FisherNormalize::raw;
};

struct ConsolidationConfig {
    ConsolidationMode mode = ConsolidationMode::none;
    double lambda = 1.0;
    FisherNormalize normalize = FisherNormalize::mean_one;
    int static_sample_batches = 2;

    void validate() const;
};

ConsolidationMode consolidation_mode_from(const std::string& name);
std::string to_string(ConsolidationMode mode);

// F_i = g_i^2, optionally rescaled to mean one so the penalty scale keeps its
// meaning across gradient magnitudes. Reuses the already-computed
// distillation gradient; no extra backward pass.
FisherDiagonal fisher_from_gradients(const std::vector<double>& grad, long step_index,
                                     FisherNormalize normalize);

// sum_i F_i (now_i - prev_i)^2. The Fisher weights are treated as constants:
// the gradient is 2 F_i (now_i - prev_i) w.r.t. now only.
double awc_loss(const std::vector<double>& now, const std::vector<double>& prev,
                const FisherDiagonal& fisher);

// grad += scale * 2 F_i (now_i - prev_i)
void accumulate_awc_gradient(const std::vector<double>& now,
                             const std::vector<double>& prev,
                             const FisherDiagonal& fisher, double scale,
                             std::vector<double>& grad);

// sum_i (now_i - prev_i)^2
double l2_penalty(const std::vector<double>& now, const std::vector<double>& prev);

// grad += scale * 2 (now_i - prev_i)
void accumulate_l2_gradient(const std::vector<double>& now,
                            const std::vector<double>& prev, double scale,
                            std::vector<double>& grad);

// Mean of squared distillation gradients over k pre-task batches, evaluated
// once at the anchor parameters and frozen for the whole task. The provider
// returns the distillation gradient for batch index b.
FisherDiagonal ewc_static_fisher(
    const std::function<std::vector<double>(int)>& distill_gradient, int batches,
    FisherNormalize normalize);

} // namespace gift
