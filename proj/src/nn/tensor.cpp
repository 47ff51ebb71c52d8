#include "aui/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aui::nn {

void gemv_add(const Matrix& m, std::span<const double> x, std::span<double> out) {
    const std::size_t cols = m.cols();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double* row = m.row(r).data();
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        out[r] += acc;
    }
}

void gemv_t_add(const Matrix& m, std::span<const double> x, std::span<double> out) {
    const std::size_t cols = m.cols();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double xr = x[r];
        if (xr == 0.0) continue;
        const double* row = m.row(r).data();
        for (std::size_t c = 0; c < cols; ++c) out[c] += row[c] * xr;
    }
}

void outer_add(Matrix& m, std::span<const double> a, std::span<const double> b) {
    const std::size_t cols = m.cols();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double ar = a[r];
        if (ar == 0.0) continue;
        double* row = m.row(r).data();
        for (std::size_t c = 0; c < cols; ++c) row[c] += ar * b[c];
    }
}

void fill_uniform(std::span<double> values, Rng& rng, double bound) {
    for (double& v : values) v = uniform(rng, -bound, bound);
}

Vector softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax of an empty vector");
    const double mx = *std::max_element(logits.begin(), logits.end());
    Vector out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace aui::nn
