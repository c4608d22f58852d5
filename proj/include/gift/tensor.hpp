#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

#include "gift/errors.hpp"

namespace gift {

// Dense row-major matrix of doubles. Everything in the pipeline is rank-2:
// scalars are 1x1 and vectors 1xn, which keeps the op set small.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw DimensionError("tensor data length does not match shape");
    }

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t.data_[0] = v;
        return t;
    }

    static Tensor row(std::vector<double> v) {
        const std::size_t n = v.size();
        return Tensor(1, n, std::move(v));
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.begin()->size() : 0;
        Tensor t(r, c);
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != c) throw DimensionError("ragged tensor initializer");
            for (double v : row) t.data_[i++] = v;
        }
        return t;
    }

    static Tensor identity(std::size_t n) {
        Tensor t(n, n);
        for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    bool same_shape(const Tensor& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

} // namespace gift
