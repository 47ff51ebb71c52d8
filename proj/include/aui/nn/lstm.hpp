#pragma once

// Embedding + stacked LSTM + softmax output projection with hand-derived
// backpropagation through time.

#include <cstddef>
#include <span>
#include <vector>

#include "aui/domain.hpp"
#include "aui/nn/tensor.hpp"

namespace aui::nn {

/// One LSTM layer. Gate blocks are stacked input|forget|cell|output along the
/// rows of w_x, w_h and b.
struct LstmLayerParams {
    Matrix w_x;  // 4H x D
    Matrix w_h;  // 4H x H
    Vector b;    // 4H

    std::size_t hidden() const { return w_h.cols(); }
    std::size_t input() const { return w_x.cols(); }
    bool operator==(const LstmLayerParams&) const = default;
};

struct PredictorParams {
    Matrix embedding;  // V x D
    std::vector<LstmLayerParams> lstm_layers;
    Matrix w_out;  // V x H
    Vector b_out;  // V

    std::size_t vocab_size() const { return embedding.rows(); }
    std::size_t embed_dim() const { return embedding.cols(); }
    std::size_t hidden() const { return w_out.cols(); }
    bool operator==(const PredictorParams&) const = default;
};

struct PredictorShape {
    std::size_t vocab = 0;
    std::size_t embed = 32;
    std::size_t hidden = 64;
    std::size_t layers = 2;
};

/// All-zero parameters with consistent shapes.
PredictorParams zero_predictor(const PredictorShape& shape);

/// Uniform(-k, k) with k = 1/sqrt(fan_in); forget-gate bias set to 1.
PredictorParams init_predictor(const PredictorShape& shape, Rng& rng);

std::vector<TensorView<double>> tensors(PredictorParams& p);
std::vector<TensorView<const double>> tensors(const PredictorParams& p);

struct LstmOutput {
    std::vector<Vector> hidden;  // top-layer h_t, one per step
    std::vector<Vector> probs;   // softmax(W_out h_t + b_out)
};

/// Throws std::invalid_argument for an empty sequence or a token id >= V
/// (the message names the position).
LstmOutput lstm_forward(const PredictorParams& params, std::span<const TokenId> tokens);

/// Output distribution at the last step only.
Vector lstm_predict_last(const PredictorParams& params, std::span<const TokenId> tokens);

/// One training sequence. targets[t] is the token expected after inputs[0..t];
/// ActionVocab::kPad marks positions excluded from the loss.
struct SequenceExample {
    std::vector<TokenId> inputs;
    std::vector<TokenId> targets;
};

struct LossAndGrads {
    double loss = 0.0;
    PredictorParams grads;
};

/// Mean cross-entropy over all unmasked positions in the batch, and its
/// gradient. Throws if every position is masked.
LossAndGrads predictor_loss_and_grads(const PredictorParams& params, std::span<const SequenceExample> batch);

/// Extended-precision loss, the finite-difference reference.
long double predictor_loss(const PredictorParams& params, std::span<const SequenceExample> batch);

}  // namespace aui::nn
