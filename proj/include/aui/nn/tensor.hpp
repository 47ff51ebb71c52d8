#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aui/random.hpp"

namespace aui::nn {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// out += M x
void gemv_add(const Matrix& m, std::span<const double> x, std::span<double> out);
/// out += M^T x
void gemv_t_add(const Matrix& m, std::span<const double> x, std::span<double> out);
/// M += a b^T
void outer_add(Matrix& m, std::span<const double> a, std::span<const double> b);

void fill_uniform(std::span<double> values, Rng& rng, double bound);

/// Max-subtracted softmax. Throws std::invalid_argument on empty input.
Vector softmax(std::span<const double> logits);

bool all_finite(std::span<const double> values);

/// Named view of one parameter tensor, used by the optimizer, the gradient
/// checker and checkpoint I/O.
template <typename T>
struct TensorView {
    std::string name;
    std::size_t rows;
    std::size_t cols;
    std::span<T> values;
};

}  // namespace aui::nn
