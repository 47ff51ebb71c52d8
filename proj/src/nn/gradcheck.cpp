#include "aui/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace aui::nn {

double finite_diff_check(std::span<const std::span<double>> params, std::span<const std::span<const double>> analytic,
                         const std::function<long double()>& loss, double eps, std::uint64_t seed, std::size_t samples) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw std::invalid_argument("finite_diff_check: eps must be in [1e-7, 1e-3]");
    if (params.size() != analytic.size()) throw std::invalid_argument("finite_diff_check: tensor count mismatch");

    // (tensor, offset) for every coordinate.
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].size() != analytic[i].size()) throw std::invalid_argument("finite_diff_check: shape mismatch");
        for (std::size_t k = 0; k < params[i].size(); ++k) coords.emplace_back(i, k);
    }
    Rng rng(seed);
    samples = std::max(samples, kMinGradCheckSamples);
    if (coords.size() > samples) {
        // Partial Fisher-Yates.
        for (std::size_t k = 0; k < samples; ++k) std::swap(coords[k], coords[k + uniform_index(rng, coords.size() - k)]);
        coords.resize(samples);
    }

    auto eval = [&] {
        long double v = loss();
        if (!std::isfinite(v)) throw std::invalid_argument("finite_diff_check: non-finite loss");
        return v;
    };
    eval();

    double worst = 0.0;
    for (auto [i, k] : coords) {
        double& x = params[i][k];
        const double saved = x;
        x = saved + eps;
        const long double up = eval();
        x = saved - eps;
        const long double down = eval();
        x = saved;
        const double numeric = static_cast<double>((up - down) / (2.0L * eps));
        const double a = analytic[i][k];
        const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace aui::nn
