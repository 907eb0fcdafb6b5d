#include "fedmr/rng.hpp"

#include <cmath>
#include <numbers>

namespace fedmr {

double Rng::normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double alpha) {
    if (alpha < 1.0) {
        // Boost: G(a) = G(a+1) * U^(1/a).
        const double g = gamma(alpha + 1.0);
        return g * std::pow(uniform_open(), 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform_open();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::vector<double> Rng::dirichlet(double alpha, int n) {
    std::vector<double> draws(static_cast<size_t>(n));
    double total = 0.0;
    for (auto& g : draws) {
        g = gamma(alpha);
        total += g;
    }
    if (total <= 0.0) {
        // All gammas underflowed (tiny alpha); fall back to a uniform corner.
        const size_t winner = uniform_index(static_cast<uint64_t>(n));
        for (size_t i = 0; i < draws.size(); ++i) draws[i] = i == winner ? 1.0 : 0.0;
        return draws;
    }
    for (auto& g : draws) g /= total;
    return draws;
}

std::vector<int> Rng::permutation(int n) {
    std::vector<int> ids(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = i;
    shuffle(ids);
    return ids;
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
    // Partial Fisher-Yates: first k entries of a uniform permutation.
    std::vector<int> ids(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
        const auto j =
            i + static_cast<int>(uniform_index(static_cast<uint64_t>(n - i)));
        std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(j)]);
    }
    ids.resize(static_cast<size_t>(k));
    return ids;
}

}  // namespace fedmr
