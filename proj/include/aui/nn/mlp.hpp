#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aui/nn/tensor.hpp"

namespace aui::nn {

struct DenseLayer {
    Matrix w;  // out x in
    Vector b;  // out
    bool operator==(const DenseLayer&) const = default;
};

/// Feed-forward net: rectifier on hidden layers, identity on the output.
struct MlpParams {
    std::vector<DenseLayer> layers;

    std::size_t input_size() const { return layers.front().w.cols(); }
    std::size_t output_size() const { return layers.back().w.rows(); }
    bool operator==(const MlpParams&) const = default;
};

inline const std::vector<std::size_t> kDefaultHiddenWidths = {128, 128};

/// widths = {input, hidden..., output}.
MlpParams zero_mlp(std::span<const std::size_t> widths);
MlpParams init_mlp(std::span<const std::size_t> widths, Rng& rng);

std::vector<TensorView<double>> tensors(MlpParams& p);
std::vector<TensorView<const double>> tensors(const MlpParams& p);

/// Throws std::invalid_argument with expected/actual sizes on mismatch.
Vector mlp_forward(const MlpParams& params, std::span<const double> input);

struct QExample {
    Vector input;
    std::size_t action = 0;
    double target = 0.0;
};

struct MlpLossAndGrads {
    double loss = 0.0;
    MlpParams grads;
};

/// Mean over the batch of (Q(x)[action] - target)^2. Only the selected output
/// of each example contributes.
MlpLossAndGrads mlp_loss_and_grads(const MlpParams& params, std::span<const QExample> batch);

/// Extended-precision loss, the finite-difference reference.
long double mlp_loss(const MlpParams& params, std::span<const QExample> batch);

}  // namespace aui::nn
