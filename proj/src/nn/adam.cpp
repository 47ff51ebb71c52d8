#include "aui/nn/adam.hpp"

#include <cmath>
#include <string>

namespace aui::nn {

void adam_step(std::span<const TensorView<double>> params, std::span<const TensorView<const double>> grads,
               AdamState& state) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].values.size() != grads[i].values.size())
            throw std::invalid_argument("adam_step: shape mismatch for tensor " + params[i].name);

    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.values.size(), 0.0);
            state.second_moment.emplace_back(p.values.size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size())
        throw std::invalid_argument("adam_step: optimizer state does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (state.first_moment[i].size() != params[i].values.size())
            throw std::invalid_argument("adam_step: moment shape mismatch for tensor " + params[i].name);

    const auto& cfg = state.config;
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].values;
        auto g = grads[i].values;
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            p[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

}  // namespace aui::nn
