#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "xrabitq/quantizer.hpp"
#include "xrabitq/rotator.hpp"

namespace xrabitq {

/// Lookup tables for the batched stage-1 kernel: query coordinates quantized
/// to 8 bits over [q_min, q_max], one 16-entry table per 4 dimensions.
struct Stage1Lut {
    std::vector<std::uint16_t> tables;  // (dim/4) * 16 entries
    double q_min = 0.0;
    double delta = 0.0;            // query quantization step
    double deviation_bound = 0.0;  // <= dim * delta / 2
};

/// Per-query precomputed state, built once per (query, centroid) pair and
/// shared across all data vectors of that cluster.
struct QueryContext {
    std::uint32_t dim = 0;
    std::vector<double> q_prime;  // P^-1 applied to the normalized query
    double sum_qprime = 0.0;
    double dist_q_centroid = 0.0;
    double epsilon0 = 1.9;
    std::optional<Stage1Lut> lut;
};

struct EstimateWithBound {
    double est_sqdist = 0.0;
    double lower_bound = 0.0;
    int stage = 1;
};

inline QueryContext preprocess_query(std::span<const float> q_r,
                                     std::span<const float> centroid,
                                     const RandomRotator& rotator,
                                     const QuantizationConfig& config) {
    config.validate();
    if (q_r.size() != config.dim || centroid.size() != config.dim ||
        rotator.dim() != config.dim) {
        throw std::invalid_argument("preprocess_query: dimension mismatch");
    }
    QueryContext qc;
    qc.dim = config.dim;
    qc.epsilon0 = config.epsilon0;

    std::vector<double> residual(config.dim);
    double dist_sq = 0.0;
    for (std::uint32_t i = 0; i < config.dim; ++i) {
        residual[i] = static_cast<double>(q_r[i]) - static_cast<double>(centroid[i]);
        dist_sq += residual[i] * residual[i];
    }
    qc.dist_q_centroid = std::sqrt(dist_sq);
    if (qc.dist_q_centroid == 0.0) {
        qc.q_prime.assign(config.dim, 0.0);
        qc.sum_qprime = 0.0;
        return qc;
    }
    for (double& v : residual) v /= qc.dist_q_centroid;
    qc.q_prime = rotator.apply_inverse(residual);
    double sum = 0.0;
    for (double v : qc.q_prime) sum += v;
    qc.sum_qprime = sum;
    return qc;
}

/// Query-side counterpart of reduced_dim_encode: the projected residual is
/// normalized in d dimensions while the centroid distance keeps the original
/// D-dimensional norm.
inline QueryContext reduced_query_context(std::span<const float> q_r,
                                          std::span<const float> centroid,
                                          const ReducedRotator& projector,
                                          double epsilon0 = 1.9) {
    if (q_r.size() != projector.in_dim() || centroid.size() != projector.in_dim()) {
        throw std::invalid_argument("reduced_query_context: dimension mismatch");
    }
    QueryContext qc;
    qc.dim = projector.out_dim();
    qc.epsilon0 = epsilon0;

    std::vector<double> residual(projector.in_dim());
    double dist_sq = 0.0;
    for (std::uint32_t i = 0; i < projector.in_dim(); ++i) {
        residual[i] = static_cast<double>(q_r[i]) - static_cast<double>(centroid[i]);
        dist_sq += residual[i] * residual[i];
    }
    qc.dist_q_centroid = std::sqrt(dist_sq);
    qc.q_prime.assign(qc.dim, 0.0);
    qc.sum_qprime = 0.0;
    if (qc.dist_q_centroid == 0.0) return qc;

    std::vector<double> image = projector.project(residual);
    double img_sq = 0.0;
    for (double v : image) img_sq += v * v;
    if (img_sq == 0.0) return qc;
    const double inv = 1.0 / std::sqrt(img_sq);
    double sum = 0.0;
    for (std::uint32_t i = 0; i < qc.dim; ++i) {
        qc.q_prime[i] = image[i] * inv;
        sum += qc.q_prime[i];
    }
    qc.sum_qprime = sum;
    return qc;
}

/// <q', x_bar_b>: the sum of q' coordinates where the MSB plane has a 1 bit.
inline double stage1_ip(std::span<const std::uint8_t> msb_plane,
                        const QueryContext& qc) {
    if (msb_plane.size() * 8 != qc.dim) {
        throw std::invalid_argument("stage1_ip: plane size does not match dim");
    }
    double acc = 0.0;
    const double* q = qc.q_prime.data();
    for (std::uint32_t w = 0; w < qc.dim / 64; ++w) {
        std::uint64_t word;
        std::memcpy(&word, msb_plane.data() + w * 8, 8);
        const double* base = q + w * 64;
        while (word) {
            acc += base[std::countr_zero(word)];
            word &= word - 1;
        }
    }
    return acc;
}

namespace detail {

/// The scalar factors of one quantized vector, viewed independently of how
/// they are stored (QuantizedVector or the index's parallel arrays).
struct FactorView {
    double dist = 0.0;
    double f_rescale = 0.0;
    double f_rescale_1bit = 0.0;
    double f_error = 0.0;
    bool degenerate = false;
};

inline FactorView factors_of(const QuantizedVector& qv) {
    return {qv.dist_to_centroid, qv.f_rescale, qv.f_rescale_1bit, qv.f_error,
            qv.degenerate};
}

/// Stage 1 from a precomputed <q', x_bar_b>. `ip_deviation` is the absolute
/// uncertainty of that inner product (zero in exact mode); it widens only the
/// lower bound.
inline EstimateWithBound stage1_from_ip(const FactorView& f, const QueryContext& qc,
                                        double ip1, double ip_deviation) {
    const double dq = qc.dist_q_centroid;
    if (f.degenerate) {
        const double est = dq * dq;
        return {est, est, 1};
    }
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(qc.dim));
    const double ip_q_obar0 = inv_sqrt_d * (2.0 * ip1 - qc.sum_qprime);
    const double est_ip = ip_q_obar0 * f.f_rescale_1bit;
    double slack = 2.0 * inv_sqrt_d * ip_deviation * std::abs(f.f_rescale_1bit);
    if (f.f_error > 0.0) slack += f.f_error * qc.epsilon0;
    const double d = f.dist;
    const double base = d * d + dq * dq;
    const double cross = 2.0 * d * dq;
    return {base - cross * est_ip, base - cross * (est_ip + slack), 1};
}

/// <y_bar_last, q'>: direct traversal of the packed (B-1)-bit fields.
inline double rest_ip(std::span<const std::uint8_t> rest_planes, std::uint32_t bits,
                      const QueryContext& qc) {
    const std::uint32_t fb = bits - 1;
    const std::uint8_t* p = rest_planes.data();
    std::uint64_t acc_bits = 0;
    std::uint32_t nbits = 0;
    const std::uint32_t mask = (1u << fb) - 1u;
    double acc = 0.0;
    for (std::uint32_t i = 0; i < qc.dim; ++i) {
        while (nbits < fb) {
            acc_bits |= static_cast<std::uint64_t>(*p++) << nbits;
            nbits += 8;
        }
        acc += static_cast<double>(acc_bits & mask) * qc.q_prime[i];
        acc_bits >>= fb;
        nbits -= fb;
    }
    return acc;
}

inline EstimateWithBound stage2_from_ip(const FactorView& f,
                                        std::span<const std::uint8_t> rest_planes,
                                        std::uint32_t bits, const QueryContext& qc,
                                        double stage1_ip_value) {
    const double dq = qc.dist_q_centroid;
    if (f.degenerate) {
        const double est = dq * dq;
        return {est, est, 2};
    }
    const double ip_last = rest_ip(rest_planes, bits, qc);
    const double ip_yu =
        static_cast<double>(1u << (bits - 1)) * stage1_ip_value + ip_last;
    const double offset = (static_cast<double>(1u << bits) - 1.0) / 2.0;
    const double est_ip = (ip_yu - offset * qc.sum_qprime) * f.f_rescale;
    const double d = f.dist;
    const double est = d * d + dq * dq - 2.0 * d * dq * est_ip;
    return {est, est, 2};
}

}  // namespace detail

inline EstimateWithBound stage1_estimate(const QuantizedVector& qv,
                                         const QueryContext& qc) {
    if (!qv.degenerate && qv.code.dim != qc.dim) {
        throw std::invalid_argument("stage1_estimate: dimension mismatch");
    }
    const double ip1 = qv.degenerate ? 0.0 : stage1_ip(qv.code.msb_plane, qc);
    return detail::stage1_from_ip(detail::factors_of(qv), qc, ip1, 0.0);
}

/// Refines a stage-1 result using the remaining bit planes. Requires the
/// exact <q', y_bar_0> for this vector, which stage 1 already computed.
inline EstimateWithBound stage2_estimate(const QuantizedVector& qv,
                                         const QueryContext& qc,
                                         double stage1_ip_value) {
    if (qv.code.bits == 1) {
        throw std::logic_error("stage2_estimate: no stage 2 exists for B = 1");
    }
    if (qv.code.dim != qc.dim) {
        throw std::invalid_argument("stage2_estimate: dimension mismatch");
    }
    return detail::stage2_from_ip(detail::factors_of(qv), qv.code.rest_planes,
                                  qv.code.bits, qc, stage1_ip_value);
}

enum class Stage1Mode { exact, table };

inline void build_stage1_lut(QueryContext& qc) {
    Stage1Lut lut;
    double lo = qc.q_prime[0], hi = qc.q_prime[0];
    for (double v : qc.q_prime) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    lut.q_min = lo;
    lut.delta = (hi - lo) / 255.0;
    lut.deviation_bound = static_cast<double>(qc.dim) * lut.delta / 2.0;

    std::vector<std::uint8_t> quantized(qc.dim, 0);
    if (lut.delta > 0.0) {
        for (std::uint32_t i = 0; i < qc.dim; ++i) {
            const double z = (qc.q_prime[i] - lo) / lut.delta;
            quantized[i] = static_cast<std::uint8_t>(
                std::min(255.0, std::max(0.0, std::floor(z + 0.5))));
        }
    }
    const std::uint32_t groups = qc.dim / 4;
    lut.tables.assign(static_cast<std::size_t>(groups) * 16, 0);
    for (std::uint32_t g = 0; g < groups; ++g) {
        std::uint16_t* t = lut.tables.data() + static_cast<std::size_t>(g) * 16;
        for (std::uint32_t m = 0; m < 16; ++m) {
            std::uint16_t sum = 0;
            for (std::uint32_t j = 0; j < 4; ++j) {
                if ((m >> j) & 1u) sum = static_cast<std::uint16_t>(sum + quantized[g * 4 + j]);
            }
            t[m] = sum;
        }
    }
    qc.lut = std::move(lut);
}

/// A block of 32 packed MSB planes, stored code-major. `valid` flags how many
/// leading entries are real codes; the rest is padding.
struct MsbBlockView {
    const std::uint8_t* planes = nullptr;  // 32 * dim/8 bytes
    std::uint32_t valid = 32;
};

/// Computes <q', x_bar_b> for all 32 codes of a block. Exact mode gives
/// results bit-identical to stage1_ip per code. Table mode accumulates 8-bit
/// quantized query coordinates through the nibble tables (16-bit partial sums
/// widened to 32 bits every 16 groups) and dequantizes; the result deviates
/// from exact by at most qc.lut->deviation_bound.
inline void batch_stage1(const MsbBlockView& block, const QueryContext& qc,
                         Stage1Mode mode, std::span<double> out) {
    if (out.size() != 32 || block.valid > 32) {
        throw std::invalid_argument("batch_stage1: block size must be exactly 32");
    }
    const std::size_t plane_bytes = qc.dim / 8;
    if (mode == Stage1Mode::exact) {
        for (std::uint32_t c = 0; c < 32; ++c) {
            out[c] = stage1_ip({block.planes + c * plane_bytes, plane_bytes}, qc);
        }
        return;
    }
    if (!qc.lut) {
        throw std::invalid_argument("batch_stage1: table mode requires a built LUT");
    }
    const Stage1Lut& lut = *qc.lut;
    const std::uint32_t groups = qc.dim / 4;
    for (std::uint32_t c = 0; c < 32; ++c) {
        const std::uint8_t* plane = block.planes + c * plane_bytes;
        std::uint32_t total = 0;
        std::uint16_t partial = 0;
        for (std::uint32_t g = 0; g < groups; ++g) {
            const std::uint32_t nib = (plane[g >> 1] >> ((g & 1u) * 4)) & 0xFu;
            partial = static_cast<std::uint16_t>(
                partial + lut.tables[static_cast<std::size_t>(g) * 16 + nib]);
            if ((g & 15u) == 15u) {
                total += partial;
                partial = 0;
            }
        }
        total += partial;
        std::uint32_t ones = 0;
        for (std::uint32_t w = 0; w < qc.dim / 64; ++w) {
            std::uint64_t word;
            std::memcpy(&word, plane + w * 8, 8);
            ones += static_cast<std::uint32_t>(std::popcount(word));
        }
        out[c] = lut.q_min * static_cast<double>(ones) +
                 lut.delta * static_cast<double>(total);
    }
}

}  // namespace xrabitq
