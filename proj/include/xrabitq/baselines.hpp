#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace xrabitq {

// Reference scalar quantizers used by the comparative accuracy experiments.
// SQ fits one global value range over all coordinates of all vectors; LVQ
// fits a range per vector. Both round to the nearest of 2^B - 1 uniform
// segment boundaries (half-way cases round up) and estimate distances on the
// decoded reconstructions.

struct SqModel {
    double v_lo = 0.0;
    double v_hi = 0.0;
    std::uint32_t bits = 8;
};

namespace detail {

inline std::uint16_t affine_encode(double x, double lo, double hi, std::uint32_t bits) {
    const std::uint32_t max_code = (1u << bits) - 1u;
    if (hi <= lo) return 0;
    const double z = (x - lo) / (hi - lo) * static_cast<double>(max_code);
    const double r = std::floor(z + 0.5);
    if (r <= 0.0) return 0;
    if (r >= static_cast<double>(max_code)) return static_cast<std::uint16_t>(max_code);
    return static_cast<std::uint16_t>(r);
}

inline double affine_decode(std::uint16_t code, double lo, double hi, std::uint32_t bits) {
    const std::uint32_t max_code = (1u << bits) - 1u;
    if (hi <= lo) return lo;
    return lo + static_cast<double>(code) * (hi - lo) / static_cast<double>(max_code);
}

inline void check_bits(std::uint32_t bits) {
    if (bits < 1 || bits > 16) throw std::invalid_argument("bits must be in [1, 16]");
}

}  // namespace detail

/// Fits the global [min, max] range over a flattened set of coordinates.
inline SqModel sq_fit(std::span<const float> values, std::uint32_t bits) {
    detail::check_bits(bits);
    if (values.empty()) throw std::invalid_argument("sq_fit: empty input");
    double lo = values[0], hi = values[0];
    for (float v : values) {
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
    }
    return {lo, hi, bits};
}

inline std::vector<std::uint16_t> sq_encode(const SqModel& model,
                                            std::span<const float> v) {
    std::vector<std::uint16_t> codes(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        codes[i] = detail::affine_encode(v[i], model.v_lo, model.v_hi, model.bits);
    }
    return codes;
}

inline std::vector<double> sq_decode(const SqModel& model,
                                     std::span<const std::uint16_t> codes) {
    std::vector<double> out(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        out[i] = detail::affine_decode(codes[i], model.v_lo, model.v_hi, model.bits);
    }
    return out;
}

struct LvqCode {
    double v_lo = 0.0;
    double v_hi = 0.0;
    std::uint32_t bits = 8;
    std::vector<std::uint16_t> codes;
};

inline LvqCode lvq_encode(std::span<const float> v, std::uint32_t bits) {
    detail::check_bits(bits);
    if (v.empty()) throw std::invalid_argument("lvq_encode: empty input");
    LvqCode c;
    c.bits = bits;
    double lo = v[0], hi = v[0];
    for (float x : v) {
        lo = std::min(lo, static_cast<double>(x));
        hi = std::max(hi, static_cast<double>(x));
    }
    c.v_lo = lo;
    c.v_hi = hi;
    c.codes.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        c.codes[i] = detail::affine_encode(v[i], lo, hi, bits);
    }
    return c;
}

inline std::vector<double> lvq_decode(const LvqCode& code) {
    std::vector<double> out(code.codes.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = detail::affine_decode(code.codes[i], code.v_lo, code.v_hi, code.bits);
    }
    return out;
}

}  // namespace xrabitq
