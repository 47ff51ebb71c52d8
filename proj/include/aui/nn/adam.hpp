#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "aui/nn/tensor.hpp"

namespace aui::nn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::vector<Vector> first_moment;
    std::vector<Vector> second_moment;
    std::int64_t step = 0;
};

/// Bias-corrected Adam update over matching tensor lists. Moment buffers are
/// allocated lazily on the first step. Throws on any shape mismatch.
void adam_step(std::span<const TensorView<double>> params, std::span<const TensorView<const double>> grads,
               AdamState& state);

/// Convenience over any parameter struct that provides tensors().
template <typename Params>
void adam_step(Params& params, const Params& grads, AdamState& state) {
    auto p = tensors(params);
    auto g = tensors(grads);
    adam_step(std::span<const TensorView<double>>(p), std::span<const TensorView<const double>>(g), state);
}

}  // namespace aui::nn
