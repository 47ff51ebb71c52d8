#include "aui/nn/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>
#include <stdexcept>
#include <string>

namespace aui::nn {

namespace {

template <typename T>
T sigmoid(T x) { return T(1) / (T(1) + std::exp(-x)); }

// Per-step activations of one layer, kept for the backward pass.
template <typename T>
struct StepCache {
    std::vector<T> x, h_prev, c_prev;
    std::vector<T> i, f, g, o;
    std::vector<T> c, tanh_c, h;
};

void check_tokens(const PredictorParams& params, std::span<const TokenId> tokens) {
    if (tokens.empty()) throw std::invalid_argument("lstm_forward: empty token sequence");
    for (std::size_t t = 0; t < tokens.size(); ++t)
        if (tokens[t] >= params.vocab_size())
            throw std::invalid_argument("lstm_forward: token id " + std::to_string(tokens[t]) + " at position " +
                                        std::to_string(t) + " is out of range for vocabulary size " +
                                        std::to_string(params.vocab_size()));
}

// out = b + Wx x + Wh h, accumulated in T.
template <typename T>
void gate_preactivations(const LstmLayerParams& layer, const std::vector<T>& x, const std::vector<T>& h,
                         std::vector<T>& out) {
    if constexpr (std::is_same_v<T, double>) {
        out = layer.b;
        gemv_add(layer.w_x, x, out);
        gemv_add(layer.w_h, h, out);
    } else {
        out.assign(layer.b.begin(), layer.b.end());
        for (std::size_t r = 0; r < out.size(); ++r) {
            T acc = out[r];
            for (std::size_t c = 0; c < x.size(); ++c) acc += T(layer.w_x(r, c)) * x[c];
            for (std::size_t c = 0; c < h.size(); ++c) acc += T(layer.w_h(r, c)) * h[c];
            out[r] = acc;
        }
    }
}

// Runs all layers over the sequence; cache[l][t] holds layer l at step t.
template <typename T>
std::vector<std::vector<StepCache<T>>> run_layers(const PredictorParams& params, std::span<const TokenId> tokens) {
    const std::size_t steps = tokens.size();
    std::vector<std::vector<StepCache<T>>> cache(params.lstm_layers.size(), std::vector<StepCache<T>>(steps));

    for (std::size_t l = 0; l < params.lstm_layers.size(); ++l) {
        const auto& layer = params.lstm_layers[l];
        const std::size_t hidden = layer.hidden();
        std::vector<T> h(hidden, T(0)), c(hidden, T(0));
        std::vector<T> z(4 * hidden);
        for (std::size_t t = 0; t < steps; ++t) {
            StepCache<T>& s = cache[l][t];
            if (l == 0) {
                auto row = params.embedding.row(tokens[t]);
                s.x.assign(row.begin(), row.end());
            } else {
                s.x = cache[l - 1][t].h;
            }
            s.h_prev = h;
            s.c_prev = c;
            gate_preactivations(layer, s.x, h, z);
            s.i.resize(hidden);
            s.f.resize(hidden);
            s.g.resize(hidden);
            s.o.resize(hidden);
            s.c.resize(hidden);
            s.tanh_c.resize(hidden);
            s.h.resize(hidden);
            for (std::size_t k = 0; k < hidden; ++k) {
                s.i[k] = sigmoid(z[k]);
                s.f[k] = sigmoid(z[hidden + k]);
                s.g[k] = std::tanh(z[2 * hidden + k]);
                s.o[k] = sigmoid(z[3 * hidden + k]);
                s.c[k] = s.f[k] * c[k] + s.i[k] * s.g[k];
                s.tanh_c[k] = std::tanh(s.c[k]);
                s.h[k] = s.o[k] * s.tanh_c[k];
            }
            h = s.h;
            c = s.c;
        }
    }
    return cache;
}

// -log softmax(W_out h + b_out)[target] in extended precision.
long double extended_nll(const PredictorParams& params, const std::vector<long double>& h, TokenId target) {
    std::vector<long double> logits(params.vocab_size());
    long double mx = -std::numeric_limits<long double>::infinity();
    for (std::size_t v = 0; v < logits.size(); ++v) {
        long double acc = params.b_out[v];
        for (std::size_t k = 0; k < h.size(); ++k) acc += static_cast<long double>(params.w_out(v, k)) * h[k];
        logits[v] = acc;
        mx = std::max(mx, acc);
    }
    long double z = 0.0L;
    for (auto v : logits) z += std::exp(v - mx);
    return -(logits[target] - mx - std::log(z));
}

Vector output_probs(const PredictorParams& params, std::span<const double> h) {
    Vector logits = params.b_out;
    gemv_add(params.w_out, h, logits);
    return softmax(logits);
}

}  // namespace

PredictorParams zero_predictor(const PredictorShape& shape) {
    if (shape.vocab == 0 || shape.embed == 0 || shape.hidden == 0 || shape.layers == 0)
        throw std::invalid_argument("predictor shape dimensions must be positive");
    PredictorParams p;
    p.embedding = Matrix(shape.vocab, shape.embed);
    for (std::size_t l = 0; l < shape.layers; ++l) {
        std::size_t in = l == 0 ? shape.embed : shape.hidden;
        p.lstm_layers.push_back({Matrix(4 * shape.hidden, in), Matrix(4 * shape.hidden, shape.hidden),
                                 Vector(4 * shape.hidden, 0.0)});
    }
    p.w_out = Matrix(shape.vocab, shape.hidden);
    p.b_out = Vector(shape.vocab, 0.0);
    return p;
}

PredictorParams init_predictor(const PredictorShape& shape, Rng& rng) {
    PredictorParams p = zero_predictor(shape);
    fill_uniform(p.embedding.values(), rng, 1.0 / std::sqrt(static_cast<double>(shape.vocab)));
    for (auto& layer : p.lstm_layers) {
        const double k_x = 1.0 / std::sqrt(static_cast<double>(layer.input()));
        const double k_h = 1.0 / std::sqrt(static_cast<double>(layer.hidden()));
        fill_uniform(layer.w_x.values(), rng, k_x);
        fill_uniform(layer.w_h.values(), rng, k_h);
        fill_uniform(layer.b, rng, k_h);
        for (std::size_t k = 0; k < shape.hidden; ++k) layer.b[shape.hidden + k] = 1.0;
    }
    const double k_out = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
    fill_uniform(p.w_out.values(), rng, k_out);
    fill_uniform(p.b_out, rng, k_out);
    return p;
}

namespace {

template <typename P, typename T>
std::vector<TensorView<T>> predictor_tensors(P& p) {
    std::vector<TensorView<T>> out;
    out.push_back({"embedding", p.embedding.rows(), p.embedding.cols(), p.embedding.values()});
    for (std::size_t l = 0; l < p.lstm_layers.size(); ++l) {
        auto& layer = p.lstm_layers[l];
        const std::string prefix = "lstm" + std::to_string(l) + ".";
        out.push_back({prefix + "w_x", layer.w_x.rows(), layer.w_x.cols(), layer.w_x.values()});
        out.push_back({prefix + "w_h", layer.w_h.rows(), layer.w_h.cols(), layer.w_h.values()});
        out.push_back({prefix + "b", layer.b.size(), 1, std::span<T>(layer.b)});
    }
    out.push_back({"out.w", p.w_out.rows(), p.w_out.cols(), p.w_out.values()});
    out.push_back({"out.b", p.b_out.size(), 1, std::span<T>(p.b_out)});
    return out;
}

}  // namespace

std::vector<TensorView<double>> tensors(PredictorParams& p) { return predictor_tensors<PredictorParams, double>(p); }

std::vector<TensorView<const double>> tensors(const PredictorParams& p) {
    return predictor_tensors<const PredictorParams, const double>(p);
}

LstmOutput lstm_forward(const PredictorParams& params, std::span<const TokenId> tokens) {
    check_tokens(params, tokens);
    auto cache = run_layers<double>(params, tokens);
    LstmOutput out;
    for (const auto& step : cache.back()) {
        out.hidden.push_back(step.h);
        out.probs.push_back(output_probs(params, step.h));
    }
    return out;
}

Vector lstm_predict_last(const PredictorParams& params, std::span<const TokenId> tokens) {
    check_tokens(params, tokens);
    auto cache = run_layers<double>(params, tokens);
    return output_probs(params, cache.back().back().h);
}

LossAndGrads predictor_loss_and_grads(const PredictorParams& params, std::span<const SequenceExample> batch) {
    std::size_t counted = 0;
    for (const auto& ex : batch) {
        if (ex.inputs.size() != ex.targets.size())
            throw std::invalid_argument("sequence example inputs and targets differ in length");
        for (TokenId t : ex.targets) {
            if (t >= params.vocab_size()) throw std::invalid_argument("target token id out of range");
            if (t != ActionVocab::kPad) ++counted;
        }
    }
    if (counted == 0) throw std::invalid_argument("batch has no unmasked target positions");

    LossAndGrads result;
    result.grads = zero_predictor({params.vocab_size(), params.embed_dim(), params.hidden(), params.lstm_layers.size()});
    PredictorParams& grads = result.grads;
    const double scale = 1.0 / static_cast<double>(counted);

    for (const auto& ex : batch) {
        check_tokens(params, ex.inputs);
        const std::size_t steps = ex.inputs.size();
        auto cache = run_layers<double>(params, ex.inputs);

        // Gradient w.r.t. top-layer h_t from the output projection.
        std::vector<Vector> dh_above(steps, Vector(params.hidden(), 0.0));
        for (std::size_t t = 0; t < steps; ++t) {
            const TokenId target = ex.targets[t];
            if (target == ActionVocab::kPad) continue;
            const Vector& h = cache.back()[t].h;
            Vector probs = output_probs(params, h);
            result.loss -= std::log(probs[target]) * scale;
            Vector dlogits = std::move(probs);
            dlogits[target] -= 1.0;
            for (double& d : dlogits) d *= scale;
            outer_add(grads.w_out, dlogits, h);
            for (std::size_t k = 0; k < dlogits.size(); ++k) grads.b_out[k] += dlogits[k];
            gemv_t_add(params.w_out, dlogits, dh_above[t]);
        }

        for (std::size_t l = params.lstm_layers.size(); l-- > 0;) {
            const auto& layer = params.lstm_layers[l];
            auto& g = grads.lstm_layers[l];
            const std::size_t hidden = layer.hidden();
            Vector dh_next(hidden, 0.0), dc_next(hidden, 0.0);
            Vector dz(4 * hidden);
            std::vector<Vector> dx(steps, Vector(layer.input(), 0.0));
            for (std::size_t t = steps; t-- > 0;) {
                const StepCache<double>& s = cache[l][t];
                for (std::size_t k = 0; k < hidden; ++k) {
                    const double dh = dh_above[t][k] + dh_next[k];
                    const double dc = dc_next[k] + dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                    const double d_o = dh * s.tanh_c[k];
                    const double d_i = dc * s.g[k];
                    const double d_g = dc * s.i[k];
                    const double d_f = dc * s.c_prev[k];
                    dc_next[k] = dc * s.f[k];
                    dz[k] = d_i * s.i[k] * (1.0 - s.i[k]);
                    dz[hidden + k] = d_f * s.f[k] * (1.0 - s.f[k]);
                    dz[2 * hidden + k] = d_g * (1.0 - s.g[k] * s.g[k]);
                    dz[3 * hidden + k] = d_o * s.o[k] * (1.0 - s.o[k]);
                }
                outer_add(g.w_x, dz, s.x);
                outer_add(g.w_h, dz, s.h_prev);
                for (std::size_t k = 0; k < dz.size(); ++k) g.b[k] += dz[k];
                gemv_t_add(layer.w_x, dz, dx[t]);
                std::fill(dh_next.begin(), dh_next.end(), 0.0);
                gemv_t_add(layer.w_h, dz, dh_next);
            }
            if (l > 0) {
                dh_above = std::move(dx);
            } else {
                for (std::size_t t = 0; t < steps; ++t) {
                    auto row = grads.embedding.row(ex.inputs[t]);
                    for (std::size_t k = 0; k < row.size(); ++k) row[k] += dx[t][k];
                }
            }
        }
    }
    return result;
}

long double predictor_loss(const PredictorParams& params, std::span<const SequenceExample> batch) {
    // Evaluated in extended precision so it can serve as the finite-difference
    // reference for predictor_loss_and_grads.
    std::size_t counted = 0;
    long double total = 0.0L;
    for (const auto& ex : batch) {
        if (ex.inputs.size() != ex.targets.size())
            throw std::invalid_argument("sequence example inputs and targets differ in length");
        check_tokens(params, ex.inputs);
        auto cache = run_layers<long double>(params, ex.inputs);
        for (std::size_t t = 0; t < ex.targets.size(); ++t) {
            if (ex.targets[t] == ActionVocab::kPad) continue;
            if (ex.targets[t] >= params.vocab_size()) throw std::invalid_argument("target token id out of range");
            total += extended_nll(params, cache.back()[t].h, ex.targets[t]);
            ++counted;
        }
    }
    if (counted == 0) throw std::invalid_argument("batch has no unmasked target positions");
    return total / static_cast<long double>(counted);
}

}  // namespace aui::nn
