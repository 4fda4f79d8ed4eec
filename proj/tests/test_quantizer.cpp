#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "helpers.hpp"
#include "xrabitq/quantizer.hpp"
#include "xrabitq/rotator.hpp"

using namespace xrabitq;

namespace {

/// Independent scalar repacker: reads field bits one by one straight from the
/// byte array, without the library's unpack path.
std::vector<std::uint16_t> oracle_unpack(const QuantizationCode& code) {
    std::vector<std::uint16_t> out(code.dim);
    const std::uint32_t fb = code.bits - 1;
    for (std::uint32_t i = 0; i < code.dim; ++i) {
        std::uint16_t v = static_cast<std::uint16_t>(
            ((code.msb_plane[i / 8] >> (i % 8)) & 1u) << fb);
        for (std::uint32_t j = 0; j < fb; ++j) {
            const std::size_t pos = static_cast<std::size_t>(i) * fb + j;
            v |= static_cast<std::uint16_t>(((code.rest_planes[pos / 8] >> (pos % 8)) & 1u) << j);
        }
        out[i] = v;
    }
    return out;
}

double cosine_of(const QuantizeResult& qr) { return qr.ip_oy / qr.norm_y; }

/// <o, o_bar> recovered from a quantized vector's stored factors.
double ip_o_obar(const QuantizedVector& qv) {
    const auto raw = unpack_code(qv.code);
    const double offset = (static_cast<double>(1u << qv.code.bits) - 1.0) / 2.0;
    double norm_sq = 0.0;
    for (auto v : raw) {
        const double y = static_cast<double>(v) - offset;
        norm_sq += y * y;
    }
    return 1.0 / (qv.f_rescale * std::sqrt(norm_sq));
}

}  // namespace

TEST_CASE("1-bit quantization is the sign pattern") {
    RandomSource rng(100);
    const auto o = testutil::unit_vec(rng, 64);
    const auto qr = quantize(o, 1);
    for (std::size_t i = 0; i < o.size(); ++i) {
        REQUIRE(qr.code[i] == (o[i] >= 0.0 ? 1 : 0));
    }
    REQUIRE(qr.norm_y == Catch::Approx(std::sqrt(64.0 * 0.25)));
}

TEST_CASE("diagonal input reaches cosine 1") {
    const double inv = 1.0 / std::sqrt(2.0);
    const std::vector<double> o{inv, inv};
    const auto qr = quantize(o, 2);
    REQUIRE(cosine_of(qr) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("quantize matches exhaustive grid search") {
    {
        std::vector<double> o{0.9, 0.3, 0.2, 0.1};
        testutil::normalize(o);
        const auto qr = quantize(o, 2);
        const double best = testutil::brute_force_best_cosine(o, 2);
        REQUIRE(std::abs(cosine_of(qr) - best) < 1e-12);
    }
    RandomSource rng(2718);
    for (std::uint32_t dim : {2u, 3u, 5u, 6u}) {
        for (std::uint32_t bits : {1u, 2u, 3u}) {
            for (int t = 0; t < 40; ++t) {
                const auto o = testutil::unit_vec(rng, dim);
                const auto qr = quantize(o, bits);
                const double best = testutil::brute_force_best_cosine(o, bits);
                REQUIRE(std::abs(cosine_of(qr) - best) < 1e-12);
            }
        }
    }
}

TEST_CASE("quantize stays in the input's orthant") {
    RandomSource rng(31);
    for (int t = 0; t < 20; ++t) {
        auto o = testutil::unit_vec(rng, 32);
        o[5] = 0.0;
        o[17] = 0.0;
        testutil::normalize(o);
        const auto qr = quantize(o, 4);
        const double offset = (16.0 - 1.0) / 2.0;
        for (std::size_t i = 0; i < o.size(); ++i) {
            const double y = static_cast<double>(qr.code[i]) - offset;
            if (o[i] > 0.0) REQUIRE(y > 0.0);
            if (o[i] < 0.0) REQUIRE(y < 0.0);
            if (o[i] == 0.0) REQUIRE(y == 0.5);  // sign fixed to +, magnitude stays 0.5
        }
    }
}

TEST_CASE("quantize rejects bad inputs") {
    std::vector<double> not_unit{1.0, 1.0};
    REQUIRE_THROWS_AS(quantize(not_unit, 2), std::invalid_argument);
    std::vector<double> unit{1.0, 0.0};
    REQUIRE_THROWS_AS(quantize(unit, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(quantize(unit, 13), std::invalid_argument);
}

TEST_CASE("mean alignment is non-decreasing in bit width") {
    RandomSource rng(64);
    const std::uint32_t dim = 64;
    std::vector<std::vector<double>> inputs;
    for (int t = 0; t < 1000; ++t) inputs.push_back(testutil::unit_vec(rng, dim));
    double prev = 0.0;
    for (std::uint32_t bits = 1; bits <= 9; ++bits) {
        double sum = 0.0;
        for (const auto& o : inputs) sum += cosine_of(quantize(o, bits));
        const double mean = sum / static_cast<double>(inputs.size());
        REQUIRE(mean >= prev);
        prev = mean;
    }
    REQUIRE(prev > 0.999);  // B = 9 alignment is essentially exact
}

TEST_CASE("pack_code splits planes as documented") {
    {
        const std::vector<std::uint16_t> raw{3, 0, 2, 1};
        const auto code = pack_code(raw, 2);
        REQUIRE(code.msb_bit(0));
        REQUIRE(!code.msb_bit(1));
        REQUIRE(code.msb_bit(2));
        REQUIRE(!code.msb_bit(3));
        const auto back = unpack_code(code);
        REQUIRE(back == raw);
        REQUIRE((code.rest_planes[0] & 0xF) == 0b1001);  // y_last = [1,0,0,1]
    }
    {
        const std::vector<std::uint16_t> raw{1, 0, 1, 1};
        const auto code = pack_code(raw, 1);
        REQUIRE(code.rest_planes.empty());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            REQUIRE(code.msb_bit(i) == (raw[i] == 1));
        }
    }
    const std::vector<std::uint16_t> bad{4, 0, 0, 0};
    REQUIRE_THROWS_AS(pack_code(bad, 2), std::invalid_argument);
}

TEST_CASE("pack/unpack round trip against an independent repacker") {
    RandomSource rng(808);
    for (std::uint32_t bits = 3; bits <= 9; ++bits) {
        for (int t = 0; t < 150; ++t) {
            std::vector<std::uint16_t> raw(64);
            for (auto& v : raw) {
                v = static_cast<std::uint16_t>(rng.bounded(1u << bits));
            }
            const auto code = pack_code(raw, bits);
            REQUIRE(unpack_code(code) == raw);
            REQUIRE(oracle_unpack(code) == raw);
        }
    }
}

TEST_CASE("reconstruct returns a unit vector consistent with quantize") {
    {
        const auto rot = RandomRotator::identity(2);
        const std::vector<std::uint16_t> raw{1, 1};
        const auto rec = reconstruct(pack_code(raw, 1), rot);
        REQUIRE(rec[0] == Catch::Approx(1.0 / std::sqrt(2.0)));
        REQUIRE(rec[1] == Catch::Approx(1.0 / std::sqrt(2.0)));
    }
    RandomSource rng(99);
    const std::uint32_t dim = 64;
    const auto rot = RandomRotator::sample(dim, 321);
    for (std::uint32_t bits : {1u, 3u, 6u}) {
        const auto o = testutil::unit_vec(rng, dim);
        const auto qr = quantize(o, bits);
        const auto rec = reconstruct(pack_code(qr.code, bits), rot);
        double norm_sq = 0.0;
        for (double v : rec) norm_sq += v * v;
        REQUIRE(std::abs(std::sqrt(norm_sq) - 1.0) < 1e-6);

        const auto rotated_o = rot.apply_forward(o);
        double ip = 0.0;
        for (std::uint32_t i = 0; i < dim; ++i) ip += rec[i] * rotated_o[i];
        REQUIRE(ip == Catch::Approx(qr.ip_oy / qr.norm_y).margin(1e-6));
    }
}

TEST_CASE("encode_vector fills factors") {
    const std::uint32_t dim = 64;
    const auto rot = RandomRotator::sample(dim, 7);
    QuantizationConfig config{8, dim, 1.9};
    RandomSource rng(12);

    // Degenerate: the vector sits on its centroid.
    std::vector<float> c = testutil::to_float(testutil::gaussian_vec(rng, dim));
    const auto degen = encode_vector(c, c, rot, config);
    REQUIRE(degen.degenerate);
    REQUIRE(degen.dist_to_centroid == 0.0);
    REQUIRE(degen.f_rescale == 0.0);

    // Alignment floor at B = 8 over random vectors. Observed minimum on this
    // stream is 0.999962; 0.99 is the regression guard.
    double min_align = 1.0;
    for (int t = 0; t < 1000; ++t) {
        const auto v = testutil::to_float(testutil::gaussian_vec(rng, dim));
        const auto qv = encode_vector(v, c, rot, config);
        min_align = std::min(min_align, ip_o_obar(qv));
    }
    REQUIRE(min_align >= 0.99);
}

TEST_CASE("factor invariants hold across bit widths") {
    const std::uint32_t dim = 64;
    const auto rot = RandomRotator::sample(dim, 15);
    RandomSource rng(44);
    const std::vector<float> c(dim, 0.0f);
    for (std::uint32_t bits = 1; bits <= 9; ++bits) {
        QuantizationConfig config{bits, dim, 1.9};
        for (int t = 0; t < 120; ++t) {
            const auto v = testutil::to_float(testutil::gaussian_vec(rng, dim));
            const auto qv = encode_vector(v, c, rot, config);
            REQUIRE(!qv.degenerate);
            REQUIRE(std::isfinite(qv.f_rescale));
            REQUIRE(std::isfinite(qv.f_rescale_1bit));
            REQUIRE(std::isfinite(qv.f_error));
            REQUIRE(qv.f_error > 0.0);
            const double align_full = ip_o_obar(qv);
            const double align_1bit = 1.0 / qv.f_rescale_1bit;
            REQUIRE(align_1bit > 0.0);
            REQUIRE(align_full >= align_1bit - 1e-12);
        }
    }
}

TEST_CASE("MSB plane equals the 1-bit code") {
    const std::uint32_t dim = 64;
    const auto rot = RandomRotator::sample(dim, 52);
    RandomSource rng(7);
    const std::vector<float> c(dim, 0.0f);
    QuantizationConfig one{1, dim, 1.9};
    for (std::uint32_t bits : {2u, 5u, 9u}) {
        QuantizationConfig config{bits, dim, 1.9};
        for (int t = 0; t < 100; ++t) {
            const auto v = testutil::to_float(testutil::gaussian_vec(rng, dim));
            const auto qv = encode_vector(v, c, rot, config);
            const auto qv1 = encode_vector(v, c, rot, one);
            REQUIRE(qv.code.msb_plane == qv1.code.msb_plane);
        }
    }
}

TEST_CASE("reduced-dimension encoding") {
    const std::uint32_t D = 128;
    RandomSource rng(5150);
    const std::vector<float> c(D, 0.0f);

    // Square projector with the rotator's seed reproduces the 1-bit pipeline.
    const std::uint64_t seed = 8899;
    const auto rot = RandomRotator::sample(D, seed);
    const auto rd = ReducedRotator::sample(D, D, seed);
    QuantizationConfig one{1, D, 1.9};
    for (int t = 0; t < 10; ++t) {
        const auto v = testutil::to_float(testutil::gaussian_vec(rng, D));
        const auto a = encode_vector(v, c, rot, one);
        const auto b = reduced_dim_encode(v, c, rd);
        REQUIRE(a.code.msb_plane == b.code.msb_plane);
        REQUIRE(a.dist_to_centroid == Catch::Approx(b.dist_to_centroid));
        REQUIRE(a.f_rescale_1bit == Catch::Approx(b.f_rescale_1bit).epsilon(1e-6));
    }

    const auto degen = reduced_dim_encode(c, c, rd);
    REQUIRE(degen.degenerate);

    const auto rd_half = ReducedRotator::sample(D, 64, seed);
    const auto v = testutil::to_float(testutil::gaussian_vec(rng, D));
    const auto half = reduced_dim_encode(v, c, rd_half);
    REQUIRE(half.code.dim == 64);
    REQUIRE(half.dist_to_centroid == Catch::Approx(std::sqrt(testutil::l2_sq_ref(v, c))));
}
