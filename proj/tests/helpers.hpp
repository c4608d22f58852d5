#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gift/rng.hpp"
#include "gift/tensor.hpp"

namespace testutil {

inline gift::Tensor random_tensor(gift::Rng& rng, std::size_t rows, std::size_t cols,
                                  double lo = -1.0, double hi = 1.0) {
    gift::Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

// Random row-stochastic matrix with entries bounded away from zero.
inline gift::Tensor random_stochastic(gift::Rng& rng, std::size_t rows, std::size_t cols,
                                      double floor = 1e-3) {
    gift::Tensor t(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < cols; ++j) {
            t.at(i, j) = floor + rng.uniform();
            sum += t.at(i, j);
        }
        for (std::size_t j = 0; j < cols; ++j) t.at(i, j) /= sum;
    }
    return t;
}

inline double rel_err(double a, double b, double floor = 1e-9) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b,
                          double floor = 1e-6) {
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, rel_err(a[i], b[i], floor));
    return worst;
}

} // namespace testutil
