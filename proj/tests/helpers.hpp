#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "xrabitq/rng.hpp"

namespace testutil {

inline std::vector<double> gaussian_vec(xrabitq::RandomSource& rng, std::size_t dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.gaussian();
    return v;
}

inline void normalize(std::span<double> v) {
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
}

inline std::vector<double> unit_vec(xrabitq::RandomSource& rng, std::size_t dim) {
    auto v = gaussian_vec(rng, dim);
    normalize(v);
    return v;
}

inline std::vector<float> to_float(std::span<const double> v) {
    return std::vector<float>(v.begin(), v.end());
}

/// Exhaustive search over every grid point of the B-bit codebook: the oracle
/// for the quantizer's argmax claim. Only feasible for tiny D and B.
inline double brute_force_best_cosine(std::span<const double> o_prime, std::uint32_t bits) {
    const std::size_t dim = o_prime.size();
    const std::uint64_t per_dim = 1ull << bits;
    const double offset = (static_cast<double>(per_dim) - 1.0) / 2.0;
    std::uint64_t total = 1;
    for (std::size_t d = 0; d < dim; ++d) total *= per_dim;

    double best = -2.0;
    std::vector<std::uint32_t> digits(dim, 0);
    for (std::uint64_t it = 0; it < total; ++it) {
        double ip = 0.0, norm_sq = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double y = static_cast<double>(digits[d]) - offset;
            ip += y * o_prime[d];
            norm_sq += y * y;
        }
        best = std::max(best, ip / std::sqrt(norm_sq));
        for (std::size_t d = 0; d < dim; ++d) {
            if (++digits[d] < per_dim) break;
            digits[d] = 0;
        }
    }
    return best;
}

/// Naive per-coordinate masked sum, the oracle for the stage-1 kernel.
inline double naive_masked_sum(std::span<const std::uint8_t> plane,
                               std::span<const double> q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if ((plane[i >> 3] >> (i & 7)) & 1u) acc += q[i];
    }
    return acc;
}

struct OlsFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline OlsFit ols(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    OlsFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

inline double l2_sq_ref(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

}  // namespace testutil
