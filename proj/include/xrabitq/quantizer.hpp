#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "xrabitq/rotator.hpp"

namespace xrabitq {

struct QuantizationConfig {
    std::uint32_t bits_per_dim = 1;  // B in [1, 12]
    std::uint32_t dim = 0;           // padded dimensionality, multiple of 64
    double epsilon0 = 1.9;           // error-bound multiplier for pruning

    void validate() const {
        if (bits_per_dim < 1 || bits_per_dim > 12) {
            throw std::invalid_argument("bits_per_dim must be in [1, 12]");
        }
        if (dim == 0 || dim % 64 != 0) {
            throw std::invalid_argument("dim must be a positive multiple of 64");
        }
        if (!(epsilon0 > 0.0)) {
            throw std::invalid_argument("epsilon0 must be positive");
        }
    }
};

/// A packed B-bit quantization code in bit-plane layout. The MSB plane holds
/// one bit per dimension (the sign pattern of the rotated vector, identical
/// to the 1-bit code). The remaining (B-1) bits per dimension are packed
/// dimension-major, little-endian within each field, in 64-dimension blocks.
struct QuantizationCode {
    std::uint32_t dim = 0;
    std::uint32_t bits = 0;
    std::vector<std::uint8_t> msb_plane;    // dim/8 bytes; bit i at byte i>>3, bit i&7
    std::vector<std::uint8_t> rest_planes;  // dim*(bits-1)/8 bytes

    bool msb_bit(std::uint32_t i) const {
        return (msb_plane[i >> 3] >> (i & 7)) & 1u;
    }

    bool operator==(const QuantizationCode&) const = default;
};

struct QuantizeResult {
    std::vector<std::uint16_t> code;  // D unsigned B-bit values
    double ip_oy = 0.0;               // <o', y_bar>
    double norm_y = 0.0;              // ||y_bar||
};

/// Finds the grid point maximizing the cosine to a unit vector by enumerating
/// the critical rescaling factors in ascending order. Magnitudes start at 0.5
/// (t -> 0+) and increment at t = k / |o'[i]|; a min-heap yields the critical
/// values ascending, ties broken by ascending dimension. The tracked optimum
/// is compared squared to avoid square roots in the loop, and the final code
/// is re-derived by rounding t_max * o' and checked against the tracked value.
inline QuantizeResult quantize(std::span<const double> o_prime, std::uint32_t bits) {
    if (bits < 1 || bits > 12) {
        throw std::invalid_argument("bits must be in [1, 12]");
    }
    const std::size_t dim = o_prime.size();
    if (dim == 0) throw std::invalid_argument("empty input vector");

    double norm_sq = 0.0;
    for (double x : o_prime) norm_sq += x * x;
    if (std::abs(std::sqrt(norm_sq) - 1.0) > 1e-4) {
        throw std::invalid_argument("quantize input must be a unit vector");
    }

    const std::uint32_t levels = 1u << (bits - 1);  // magnitudes 0.5 .. levels - 0.5
    std::vector<double> mag(dim);
    std::vector<bool> neg(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        neg[i] = o_prime[i] < 0.0;  // zero coordinates keep sign +
        mag[i] = neg[i] ? -o_prime[i] : o_prime[i];
    }

    // State at t -> 0+: every magnitude 0.5.
    std::vector<std::uint32_t> steps(dim, 0);
    double num = 0.0;  // <y, o'> folded into the positive orthant
    for (std::size_t i = 0; i < dim; ++i) num += 0.5 * mag[i];
    double den = 0.25 * static_cast<double>(dim);  // ||y||^2

    double best_num = num;
    double best_den = den;
    double t_max = 0.0;

    if (levels > 1) {
        using Entry = std::pair<double, std::uint32_t>;  // (critical value, dim)
        std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
        for (std::size_t i = 0; i < dim; ++i) {
            if (mag[i] > 0.0) heap.emplace(1.0 / mag[i], static_cast<std::uint32_t>(i));
        }
        while (!heap.empty()) {
            const auto [t, i] = heap.top();
            heap.pop();
            const std::uint32_t s = ++steps[i];
            num += mag[i];
            den += 2.0 * static_cast<double>(s);
            if (num * num * best_den > best_num * best_num * den) {
                best_num = num;
                best_den = den;
                t_max = t;
            }
            if (s + 1 < levels) {
                heap.emplace(static_cast<double>(s + 1) / mag[i], i);
            }
        }
    }

    // Re-derive the code from t_max. The rounded step count is the number of
    // critical values k/mag[i] <= t_max, evaluated with the same expressions
    // the heap keys used so that ties resolve identically.
    QuantizeResult result;
    result.code.resize(dim);
    double re_num = 0.0;
    double re_den = 0.25 * static_cast<double>(dim);
    const std::uint32_t half = levels;  // unsigned offset for positive signs
    for (std::size_t i = 0; i < dim; ++i) {
        std::uint32_t k = 0;
        if (mag[i] > 0.0 && t_max > 0.0) {
            double f = std::floor(t_max * mag[i]);
            if (f < 0.0) f = 0.0;
            if (f > static_cast<double>(levels - 1)) f = static_cast<double>(levels - 1);
            k = static_cast<std::uint32_t>(f);
            while (k + 1 < levels && static_cast<double>(k + 1) / mag[i] <= t_max) ++k;
            while (k > 0 && static_cast<double>(k) / mag[i] > t_max) --k;
        }
        re_num += mag[i] * (static_cast<double>(k) + 0.5);
        re_den += static_cast<double>(k) * (static_cast<double>(k) + 1.0);
        result.code[i] = neg[i] ? static_cast<std::uint16_t>(half - 1 - k)
                                : static_cast<std::uint16_t>(half + k);
    }

    const double v_best = best_num / std::sqrt(best_den);
    const double v_re = re_num / std::sqrt(re_den);
    if (std::abs(v_re - v_best) > 1e-9 * std::max(1.0, std::abs(v_best))) {
        throw std::logic_error("quantize: re-derived code does not reproduce the tracked optimum");
    }

    result.ip_oy = re_num;
    result.norm_y = std::sqrt(re_den);
    return result;
}

inline QuantizationCode pack_code(std::span<const std::uint16_t> raw, std::uint32_t bits) {
    if (bits < 1 || bits > 12) {
        throw std::invalid_argument("bits must be in [1, 12]");
    }
    const std::size_t dim = raw.size();
    if (dim == 0) throw std::invalid_argument("empty code");
    const std::uint32_t limit = 1u << bits;
    for (std::uint16_t v : raw) {
        if (v >= limit) throw std::invalid_argument("code value out of range for bit width");
    }

    QuantizationCode code;
    code.dim = static_cast<std::uint32_t>(dim);
    code.bits = bits;
    code.msb_plane.assign((dim + 7) / 8, 0);
    const std::uint32_t fb = bits - 1;
    code.rest_planes.assign((dim * fb + 7) / 8, 0);

    for (std::size_t i = 0; i < dim; ++i) {
        const std::uint16_t v = raw[i];
        if (v >> fb) code.msb_plane[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
        const std::uint16_t low = static_cast<std::uint16_t>(v & ((1u << fb) - 1u));
        for (std::uint32_t j = 0; j < fb; ++j) {
            if ((low >> j) & 1u) {
                const std::size_t pos = i * fb + j;
                code.rest_planes[pos >> 3] |= static_cast<std::uint8_t>(1u << (pos & 7));
            }
        }
    }
    return code;
}

inline std::vector<std::uint16_t> unpack_code(const QuantizationCode& code) {
    const std::uint32_t fb = code.bits - 1;
    std::vector<std::uint16_t> raw(code.dim);
    for (std::uint32_t i = 0; i < code.dim; ++i) {
        std::uint16_t low = 0;
        for (std::uint32_t j = 0; j < fb; ++j) {
            const std::size_t pos = static_cast<std::size_t>(i) * fb + j;
            low |= static_cast<std::uint16_t>(((code.rest_planes[pos >> 3] >> (pos & 7)) & 1u) << j);
        }
        raw[i] = static_cast<std::uint16_t>((static_cast<std::uint16_t>(code.msb_bit(i)) << fb) | low);
    }
    return raw;
}

/// Rebuilds the quantized unit vector P * (y_bar / ||y_bar||). Test/oracle
/// path only; never used while searching.
inline std::vector<double> reconstruct(const QuantizationCode& code,
                                       const RandomRotator& rotator) {
    if (rotator.dim() != code.dim) {
        throw std::invalid_argument("rotator dim does not match code dim");
    }
    const std::vector<std::uint16_t> raw = unpack_code(code);
    const double offset = (static_cast<double>(1u << code.bits) - 1.0) / 2.0;
    std::vector<double> y(code.dim);
    double norm_sq = 0.0;
    for (std::uint32_t i = 0; i < code.dim; ++i) {
        y[i] = static_cast<double>(raw[i]) - offset;
        norm_sq += y[i] * y[i];
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& v : y) v *= inv;
    return rotator.apply_forward(y);
}

/// A quantized data vector: the packed code plus the scalar factors the
/// estimator consumes.
struct QuantizedVector {
    QuantizationCode code;
    double dist_to_centroid = 0.0;  // ||o_r - c||
    double f_rescale = 0.0;         // 1 / (||y_bar|| * <o, o_bar>)
    double f_rescale_1bit = 0.0;    // 1 / <o, o_bar_0>
    double f_error = 0.0;           // 2 sqrt(1 - <o,o0>^2) / (<o,o0> sqrt(D-1))
    bool degenerate = false;        // o_r == c
};

namespace detail {

inline QuantizedVector make_degenerate(std::uint32_t dim, std::uint32_t bits) {
    // All signs +, all magnitudes 0.5; factors carry exact-zero-distance
    // semantics (the estimate reduces to ||q_r - c||^2 regardless).
    std::vector<std::uint16_t> raw(dim, static_cast<std::uint16_t>(1u << (bits - 1)));
    QuantizedVector qv;
    qv.code = pack_code(raw, bits);
    qv.degenerate = true;
    return qv;
}

inline QuantizedVector encode_unit(std::span<const double> o_prime,
                                   std::uint32_t bits, double dist) {
    const std::uint32_t dim = static_cast<std::uint32_t>(o_prime.size());
    QuantizeResult qr = quantize(o_prime, bits);
    QuantizedVector qv;
    qv.code = pack_code(qr.code, bits);
    qv.dist_to_centroid = dist;

    double signed_sum = 0.0;  // <o', sign pattern> with signs from the MSB plane
    for (std::uint32_t i = 0; i < dim; ++i) {
        signed_sum += qv.code.msb_bit(i) ? o_prime[i] : -o_prime[i];
    }
    const double ip_oo0 = signed_sum / std::sqrt(static_cast<double>(dim));

    qv.f_rescale = 1.0 / qr.ip_oy;
    qv.f_rescale_1bit = 1.0 / ip_oo0;
    // Stage-1 bound factor: twice the concentration width of the 1-bit
    // estimator, so that epsilon0 ~ 1.9 leaves a negligible failure rate.
    qv.f_error = 2.0 * std::sqrt(std::max(0.0, 1.0 - ip_oo0 * ip_oo0)) /
                 (ip_oo0 * std::sqrt(static_cast<double>(dim) - 1.0));
    qv.degenerate = false;
    return qv;
}

}  // namespace detail

/// Full encoding pipeline: center, normalize, rotate into the codebook frame,
/// quantize, pack, and precompute the estimator factors.
inline QuantizedVector encode_vector(std::span<const float> o_r,
                                     std::span<const float> centroid,
                                     const RandomRotator& rotator,
                                     const QuantizationConfig& config) {
    config.validate();
    if (o_r.size() != config.dim || centroid.size() != config.dim ||
        rotator.dim() != config.dim) {
        throw std::invalid_argument("encode_vector: dimension mismatch");
    }
    const std::uint32_t dim = config.dim;

    std::vector<double> residual(dim);
    double dist_sq = 0.0;
    for (std::uint32_t i = 0; i < dim; ++i) {
        residual[i] = static_cast<double>(o_r[i]) - static_cast<double>(centroid[i]);
        dist_sq += residual[i] * residual[i];
    }
    const double dist = std::sqrt(dist_sq);
    if (dist == 0.0) return detail::make_degenerate(dim, config.bits_per_dim);

    for (double& v : residual) v /= dist;
    const std::vector<double> o_prime = rotator.apply_inverse(residual);
    return detail::encode_unit(o_prime, config.bits_per_dim, dist);
}

/// Appendix-style >32x compression: project the residual to d dimensions,
/// normalize the image, and 1-bit quantize. The stored distance factor is the
/// original D-dimensional ||o_r - c||.
inline QuantizedVector reduced_dim_encode(std::span<const float> o_r,
                                          std::span<const float> centroid,
                                          const ReducedRotator& projector) {
    if (o_r.size() != projector.in_dim() || centroid.size() != projector.in_dim()) {
        throw std::invalid_argument("reduced_dim_encode: dimension mismatch");
    }
    const std::uint32_t d = projector.out_dim();
    if (d % 64 != 0) {
        throw std::invalid_argument("reduced_dim_encode: out_dim must be a multiple of 64");
    }

    std::vector<double> residual(projector.in_dim());
    double dist_sq = 0.0;
    for (std::uint32_t i = 0; i < projector.in_dim(); ++i) {
        residual[i] = static_cast<double>(o_r[i]) - static_cast<double>(centroid[i]);
        dist_sq += residual[i] * residual[i];
    }
    const double dist = std::sqrt(dist_sq);
    if (dist == 0.0) return detail::make_degenerate(d, 1);

    std::vector<double> image = projector.project(residual);
    double img_sq = 0.0;
    for (double v : image) img_sq += v * v;
    if (img_sq == 0.0) {
        // Residual numerically orthogonal to the projector's row space; no
        // directional information survives, so estimates drop the cross term.
        QuantizedVector qv = detail::make_degenerate(d, 1);
        qv.degenerate = false;
        qv.dist_to_centroid = dist;
        return qv;
    }
    const double inv = 1.0 / std::sqrt(img_sq);
    for (double& v : image) v *= inv;
    return detail::encode_unit(image, 1, dist);
}

}  // namespace xrabitq
