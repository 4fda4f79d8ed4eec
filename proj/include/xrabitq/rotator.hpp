#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "xrabitq/rng.hpp"

namespace xrabitq {

namespace detail {

/// Fills a k x n row-major matrix with independent standard Gaussians and
/// orthonormalizes its rows in place with modified Gram-Schmidt. Requires
/// k <= n. Runs in double precision throughout.
inline std::vector<double> sample_orthonormal_rows(std::uint32_t k,
                                                   std::uint32_t n,
                                                   std::uint64_t seed) {
    RandomSource rng(derive_stream_seed(seed, 0x726F74ull));  // rotator stream
    std::vector<double> m(static_cast<std::size_t>(k) * n);
    for (auto& x : m) x = rng.gaussian();

    for (std::uint32_t i = 0; i < k; ++i) {
        double* row = m.data() + static_cast<std::size_t>(i) * n;
        for (int attempt = 0;; ++attempt) {
            for (std::uint32_t j = 0; j < i; ++j) {
                const double* prev = m.data() + static_cast<std::size_t>(j) * n;
                double dot = 0.0;
                for (std::uint32_t c = 0; c < n; ++c) dot += row[c] * prev[c];
                for (std::uint32_t c = 0; c < n; ++c) row[c] -= dot * prev[c];
            }
            double norm_sq = 0.0;
            for (std::uint32_t c = 0; c < n; ++c) norm_sq += row[c] * row[c];
            if (norm_sq > 1e-24) {
                const double inv = 1.0 / std::sqrt(norm_sq);
                for (std::uint32_t c = 0; c < n; ++c) row[c] *= inv;
                break;
            }
            // Degenerate draw (numerically in the span of earlier rows):
            // refill from the stream and retry.
            if (attempt > 8) {
                throw std::runtime_error("orthonormalization failed to converge");
            }
            for (std::uint32_t c = 0; c < n; ++c) row[c] = rng.gaussian();
        }
    }
    return m;
}

}  // namespace detail

/// A random orthogonal matrix P sampled by orthonormalizing a square matrix
/// of independent standard Gaussians. The rotation conceptually defines the
/// quantization codebooks; queries and data vectors are mapped into the
/// codebook's frame with P^-1 = P^T.
///
/// Internally stores P^-1 row-major (as float), so the hot operation
/// apply_inverse is a sequence of row dot products.
class RandomRotator {
   public:
    static RandomRotator sample(std::uint32_t dim, std::uint64_t seed) {
        if (dim == 0) throw std::invalid_argument("rotator dim must be >= 1");
        RandomRotator r;
        r.dim_ = dim;
        r.seed_ = seed;
        const std::vector<double> rows = detail::sample_orthonormal_rows(dim, dim, seed);
        r.inv_.assign(rows.begin(), rows.end());
        return r;
    }

    static RandomRotator identity(std::uint32_t dim) {
        if (dim == 0) throw std::invalid_argument("rotator dim must be >= 1");
        RandomRotator r;
        r.dim_ = dim;
        r.seed_ = 0;
        r.inv_.assign(static_cast<std::size_t>(dim) * dim, 0.0f);
        for (std::uint32_t i = 0; i < dim; ++i) {
            r.inv_[static_cast<std::size_t>(i) * dim + i] = 1.0f;
        }
        return r;
    }

    std::uint32_t dim() const { return dim_; }
    std::uint64_t seed() const { return seed_; }

    /// Entry P[i][j] of the rotation matrix.
    float p_entry(std::uint32_t i, std::uint32_t j) const {
        return inv_[static_cast<std::size_t>(j) * dim_ + i];
    }

    /// out = P^-1 * v.
    void apply_inverse(std::span<const double> v, std::span<double> out) const {
        check_len(v.size());
        check_len(out.size());
        for (std::uint32_t r = 0; r < dim_; ++r) {
            const float* row = inv_.data() + static_cast<std::size_t>(r) * dim_;
            double acc = 0.0;
            for (std::uint32_t c = 0; c < dim_; ++c) acc += static_cast<double>(row[c]) * v[c];
            out[r] = acc;
        }
    }

    std::vector<double> apply_inverse(std::span<const double> v) const {
        std::vector<double> out(dim_);
        apply_inverse(v, out);
        return out;
    }

    /// out = P * v.
    void apply_forward(std::span<const double> v, std::span<double> out) const {
        check_len(v.size());
        check_len(out.size());
        for (std::uint32_t c = 0; c < dim_; ++c) out[c] = 0.0;
        for (std::uint32_t r = 0; r < dim_; ++r) {
            const float* row = inv_.data() + static_cast<std::size_t>(r) * dim_;
            const double vr = v[r];
            for (std::uint32_t c = 0; c < dim_; ++c) out[c] += vr * static_cast<double>(row[c]);
        }
    }

    std::vector<double> apply_forward(std::span<const double> v) const {
        std::vector<double> out(dim_);
        apply_forward(v, out);
        return out;
    }

    /// Serializes as dim (u32), seed (u64), then the D*D entries of P as
    /// float32, row-major, little-endian.
    void write_to(std::ostream& os) const {
        os.write(reinterpret_cast<const char*>(&dim_), sizeof(dim_));
        os.write(reinterpret_cast<const char*>(&seed_), sizeof(seed_));
        for (std::uint32_t i = 0; i < dim_; ++i) {
            for (std::uint32_t j = 0; j < dim_; ++j) {
                const float e = p_entry(i, j);
                os.write(reinterpret_cast<const char*>(&e), sizeof(e));
            }
        }
    }

    static RandomRotator read_from(std::istream& is) {
        RandomRotator r;
        is.read(reinterpret_cast<char*>(&r.dim_), sizeof(r.dim_));
        is.read(reinterpret_cast<char*>(&r.seed_), sizeof(r.seed_));
        if (!is || r.dim_ == 0) {
            throw std::invalid_argument("invalid rotator header");
        }
        r.inv_.resize(static_cast<std::size_t>(r.dim_) * r.dim_);
        for (std::uint32_t i = 0; i < r.dim_; ++i) {
            for (std::uint32_t j = 0; j < r.dim_; ++j) {
                float e;
                is.read(reinterpret_cast<char*>(&e), sizeof(e));
                r.inv_[static_cast<std::size_t>(j) * r.dim_ + i] = e;
            }
        }
        return r;
    }

    bool operator==(const RandomRotator& other) const {
        return dim_ == other.dim_ && seed_ == other.seed_ && inv_ == other.inv_;
    }

   private:
    void check_len(std::size_t len) const {
        if (len != dim_) {
            throw std::invalid_argument("vector length does not match rotator dim");
        }
    }

    std::uint32_t dim_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<float> inv_;  // P^-1, row-major
};

/// Rectangular projector P_d with orthonormal rows, mapping D-dimensional
/// vectors to d <= D dimensions. Used for >32x compression via random
/// projection followed by 1-bit quantization.
class ReducedRotator {
   public:
    static ReducedRotator sample(std::uint32_t in_dim, std::uint32_t out_dim,
                                 std::uint64_t seed) {
        if (out_dim == 0 || out_dim > in_dim) {
            throw std::invalid_argument("require 1 <= out_dim <= in_dim");
        }
        ReducedRotator r;
        r.in_dim_ = in_dim;
        r.out_dim_ = out_dim;
        r.seed_ = seed;
        const std::vector<double> rows =
            detail::sample_orthonormal_rows(out_dim, in_dim, seed);
        r.rows_.assign(rows.begin(), rows.end());
        return r;
    }

    std::uint32_t in_dim() const { return in_dim_; }
    std::uint32_t out_dim() const { return out_dim_; }
    std::uint64_t seed() const { return seed_; }

    float entry(std::uint32_t row, std::uint32_t col) const {
        return rows_[static_cast<std::size_t>(row) * in_dim_ + col];
    }

    /// out = P_d * v.
    void project(std::span<const double> v, std::span<double> out) const {
        if (v.size() != in_dim_ || out.size() != out_dim_) {
            throw std::invalid_argument("vector length does not match projector dims");
        }
        for (std::uint32_t r = 0; r < out_dim_; ++r) {
            const float* row = rows_.data() + static_cast<std::size_t>(r) * in_dim_;
            double acc = 0.0;
            for (std::uint32_t c = 0; c < in_dim_; ++c) acc += static_cast<double>(row[c]) * v[c];
            out[r] = acc;
        }
    }

    std::vector<double> project(std::span<const double> v) const {
        std::vector<double> out(out_dim_);
        project(v, out);
        return out;
    }

   private:
    std::uint32_t in_dim_ = 0;
    std::uint32_t out_dim_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<float> rows_;  // P_d, row-major
};

}  // namespace xrabitq
