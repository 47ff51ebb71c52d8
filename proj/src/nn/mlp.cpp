#include "aui/nn/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace aui::nn {

namespace {

void check_input(const MlpParams& params, std::size_t actual) {
    if (params.layers.empty()) throw std::invalid_argument("mlp has no layers");
    if (actual != params.input_size())
        throw std::invalid_argument("mlp input size mismatch: expected " + std::to_string(params.input_size()) +
                                    ", got " + std::to_string(actual));
}

// activations[0] = input, activations[k] = output of layer k-1 (post-ReLU for
// hidden layers).
std::vector<Vector> forward_all(const MlpParams& params, std::span<const double> input) {
    std::vector<Vector> acts;
    acts.reserve(params.layers.size() + 1);
    acts.emplace_back(input.begin(), input.end());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        Vector z = layer.b;
        gemv_add(layer.w, acts.back(), z);
        if (l + 1 < params.layers.size())
            for (double& v : z) v = v > 0.0 ? v : 0.0;
        acts.push_back(std::move(z));
    }
    return acts;
}

}  // namespace

MlpParams zero_mlp(std::span<const std::size_t> widths) {
    if (widths.size() < 2) throw std::invalid_argument("mlp needs at least input and output widths");
    MlpParams p;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        if (widths[i] == 0 || widths[i + 1] == 0) throw std::invalid_argument("mlp widths must be positive");
        p.layers.push_back({Matrix(widths[i + 1], widths[i]), Vector(widths[i + 1], 0.0)});
    }
    return p;
}

MlpParams init_mlp(std::span<const std::size_t> widths, Rng& rng) {
    MlpParams p = zero_mlp(widths);
    for (auto& layer : p.layers) {
        const double k = 1.0 / std::sqrt(static_cast<double>(layer.w.cols()));
        fill_uniform(layer.w.values(), rng, k);
        fill_uniform(layer.b, rng, k);
    }
    return p;
}

namespace {

template <typename P, typename T>
std::vector<TensorView<T>> mlp_tensors(P& p) {
    std::vector<TensorView<T>> out;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& layer = p.layers[l];
        const std::string prefix = "dense" + std::to_string(l) + ".";
        out.push_back({prefix + "w", layer.w.rows(), layer.w.cols(), layer.w.values()});
        out.push_back({prefix + "b", layer.b.size(), 1, std::span<T>(layer.b)});
    }
    return out;
}

}  // namespace

std::vector<TensorView<double>> tensors(MlpParams& p) { return mlp_tensors<MlpParams, double>(p); }
std::vector<TensorView<const double>> tensors(const MlpParams& p) { return mlp_tensors<const MlpParams, const double>(p); }

Vector mlp_forward(const MlpParams& params, std::span<const double> input) {
    check_input(params, input.size());
    return std::move(forward_all(params, input).back());
}

MlpLossAndGrads mlp_loss_and_grads(const MlpParams& params, std::span<const QExample> batch) {
    if (batch.empty()) throw std::invalid_argument("mlp_loss_and_grads: empty batch");
    MlpLossAndGrads result;
    result.grads.layers.reserve(params.layers.size());
    for (const auto& layer : params.layers)
        result.grads.layers.push_back({Matrix(layer.w.rows(), layer.w.cols()), Vector(layer.b.size(), 0.0)});
    const double scale = 1.0 / static_cast<double>(batch.size());

    for (const auto& ex : batch) {
        check_input(params, ex.input.size());
        if (ex.action >= params.output_size())
            throw std::invalid_argument("action index " + std::to_string(ex.action) + " >= output width " +
                                        std::to_string(params.output_size()));
        auto acts = forward_all(params, ex.input);
        const double err = acts.back()[ex.action] - ex.target;
        result.loss += err * err * scale;

        Vector delta(params.output_size(), 0.0);
        delta[ex.action] = 2.0 * err * scale;
        for (std::size_t l = params.layers.size(); l-- > 0;) {
            auto& g = result.grads.layers[l];
            outer_add(g.w, delta, acts[l]);
            for (std::size_t k = 0; k < delta.size(); ++k) g.b[k] += delta[k];
            if (l == 0) break;
            Vector prev(params.layers[l].w.cols(), 0.0);
            gemv_t_add(params.layers[l].w, delta, prev);
            for (std::size_t k = 0; k < prev.size(); ++k)
                if (acts[l][k] <= 0.0) prev[k] = 0.0;
            delta = std::move(prev);
        }
    }
    return result;
}

long double mlp_loss(const MlpParams& params, std::span<const QExample> batch) {
    // Extended-precision forward pass; used as the finite-difference reference.
    if (batch.empty()) throw std::invalid_argument("mlp_loss: empty batch");
    long double total = 0.0L;
    for (const auto& ex : batch) {
        check_input(params, ex.input.size());
        if (ex.action >= params.output_size()) throw std::invalid_argument("action index out of range");
        std::vector<long double> act(ex.input.begin(), ex.input.end());
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            const auto& layer = params.layers[l];
            std::vector<long double> z(layer.b.begin(), layer.b.end());
            for (std::size_t r = 0; r < z.size(); ++r) {
                long double acc = z[r];
                for (std::size_t c = 0; c < act.size(); ++c) acc += static_cast<long double>(layer.w(r, c)) * act[c];
                z[r] = (l + 1 < params.layers.size() && acc < 0.0L) ? 0.0L : acc;
            }
            act = std::move(z);
        }
        const long double err = act[ex.action] - static_cast<long double>(ex.target);
        total += err * err;
    }
    return total / static_cast<long double>(batch.size());
}

}  // namespace aui::nn
