#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "aui/nn/tensor.hpp"

namespace aui::nn {

inline constexpr std::size_t kMinGradCheckSamples = 200;

/// Compares analytic gradients with central differences on a random subsample
/// of coordinates (all of them when there are fewer than `samples`). Returns
/// max |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
///
/// The loss is taken in long double so the central difference keeps its
/// precision for gradients near the 1e-8 floor. `params` are perturbed in place
/// and restored. Throws std::invalid_argument
/// if eps is outside [1e-7, 1e-3] or the loss is non-finite.
double finite_diff_check(std::span<const std::span<double>> params, std::span<const std::span<const double>> analytic,
                         const std::function<long double()>& loss, double eps, std::uint64_t seed,
                         std::size_t samples = kMinGradCheckSamples);

/// Same check over a parameter struct. `loss_and_grads(p)` returns
/// {loss, grads-shaped-like-p}; `loss_only(p)` returns the scalar loss.
template <typename Params, typename LossAndGradsFn, typename LossFn>
    requires requires(Params& p) { tensors(p); }
double finite_diff_check(Params params, LossAndGradsFn&& loss_and_grads, LossFn&& loss_only, double eps,
                         std::uint64_t seed, std::size_t samples = kMinGradCheckSamples) {
    auto analytic = loss_and_grads(params).grads;
    std::vector<std::span<double>> p;
    std::vector<std::span<const double>> g;
    for (auto& t : tensors(params)) p.push_back(t.values);
    for (auto& t : tensors(std::as_const(analytic))) g.push_back(t.values);
    return finite_diff_check(std::span<const std::span<double>>(p), std::span<const std::span<const double>>(g),
                             [&] { return loss_only(std::as_const(params)); }, eps, seed, samples);
}

}  // namespace aui::nn
