#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "xrabitq/baselines.hpp"

using namespace xrabitq;

TEST_CASE("SQ rounds to the nearest segment boundary") {
    SqModel model{0.0, 3.0, 2};
    const std::vector<float> v{1.4f, 3.0f, 0.0f, 2.6f};
    const auto codes = sq_encode(model, v);
    REQUIRE(codes == std::vector<std::uint16_t>{1, 3, 0, 3});
    const auto dec = sq_decode(model, codes);
    REQUIRE(dec[0] == Catch::Approx(1.0));
    REQUIRE(dec[1] == Catch::Approx(3.0));
}

TEST_CASE("SQ round-trip error stays inside half a segment") {
    RandomSource rng(808);
    std::vector<float> values(10000);
    for (auto& v : values) v = static_cast<float>(rng.gaussian() * 3.0);
    for (std::uint32_t bits : {2u, 4u, 8u}) {
        const SqModel model = sq_fit(values, bits);
        const double half_seg =
            (model.v_hi - model.v_lo) / (2.0 * ((1u << bits) - 1));
        const auto dec = sq_decode(model, sq_encode(model, values));
        for (std::size_t i = 0; i < values.size(); ++i) {
            REQUIRE(std::abs(values[i] - dec[i]) <= half_seg + 1e-12);
        }
    }
}

TEST_CASE("SQ degenerate range decodes to a constant") {
    const std::vector<float> values(16, 2.5f);
    const SqModel model = sq_fit(values, 4);
    const auto codes = sq_encode(model, values);
    for (auto c : codes) REQUIRE(c == 0);
    for (double d : sq_decode(model, codes)) REQUIRE(d == 2.5);
}

TEST_CASE("LVQ uses the per-vector range") {
    const std::vector<float> constant(8, -1.25f);
    const auto c = lvq_encode(constant, 4);
    for (double d : lvq_decode(c)) REQUIRE(d == -1.25);

    RandomSource rng(11);
    for (std::uint32_t bits : {3u, 6u}) {
        std::vector<float> v(960);
        for (auto& x : v) x = static_cast<float>(rng.gaussian());
        const auto code = lvq_encode(v, bits);
        const double half_seg = (code.v_hi - code.v_lo) / (2.0 * ((1u << bits) - 1));
        const auto dec = lvq_decode(code);
        for (std::size_t i = 0; i < v.size(); ++i) {
            REQUIRE(std::abs(v[i] - dec[i]) <= half_seg + 1e-12);
        }
    }
}

TEST_CASE("baseline estimates are exactly scale-equivariant") {
    RandomSource rng(99);
    const std::uint32_t dim = 64;
    std::vector<float> data(20 * dim), query(dim);
    for (auto& x : data) x = static_cast<float>(rng.gaussian());
    for (auto& x : query) x = static_cast<float>(rng.gaussian());

    const double s = 4.0;  // power of two, so every float op scales exactly
    std::vector<float> data_s(data.size()), query_s(dim);
    for (std::size_t i = 0; i < data.size(); ++i) data_s[i] = static_cast<float>(s) * data[i];
    for (std::size_t i = 0; i < dim; ++i) query_s[i] = static_cast<float>(s) * query[i];

    const SqModel m = sq_fit(data, 5);
    const SqModel ms = sq_fit(data_s, 5);
    for (int vec = 0; vec < 20; ++vec) {
        std::span<const float> row{data.data() + vec * dim, dim};
        std::span<const float> row_s{data_s.data() + vec * dim, dim};

        const auto dec = sq_decode(m, sq_encode(m, row));
        const auto dec_s = sq_decode(ms, sq_encode(ms, row_s));
        double est = 0.0, est_s = 0.0;
        for (std::uint32_t i = 0; i < dim; ++i) {
            const double d = dec[i] - query[i];
            const double d_s = dec_s[i] - query_s[i];
            est += d * d;
            est_s += d_s * d_s;
        }
        REQUIRE(est_s == s * s * est);

        const auto ldec = lvq_decode(lvq_encode(row, 5));
        const auto ldec_s = lvq_decode(lvq_encode(row_s, 5));
        double lest = 0.0, lest_s = 0.0;
        for (std::uint32_t i = 0; i < dim; ++i) {
            const double d = ldec[i] - query[i];
            const double d_s = ldec_s[i] - query_s[i];
            lest += d * d;
            lest_s += d_s * d_s;
        }
        REQUIRE(lest_s == s * s * lest);
    }
}

TEST_CASE("LVQ reconstruction beats SQ on narrow-range vectors") {
    RandomSource rng(2025);
    const std::uint32_t dim = 64;
    const int n = 200;
    // Shift each vector by a large per-vector offset: global range is wide,
    // per-vector ranges stay narrow.
    std::vector<float> data(n * dim);
    for (int v = 0; v < n; ++v) {
        const double offset = rng.gaussian() * 20.0;
        for (std::uint32_t i = 0; i < dim; ++i) {
            data[v * dim + i] = static_cast<float>(offset + rng.gaussian());
        }
    }
    const SqModel model = sq_fit(data, 6);
    double sq_err = 0.0, lvq_err = 0.0;
    for (int v = 0; v < n; ++v) {
        std::span<const float> row{data.data() + v * dim, dim};
        const auto sdec = sq_decode(model, sq_encode(model, row));
        const auto ldec = lvq_decode(lvq_encode(row, 6));
        for (std::uint32_t i = 0; i < dim; ++i) {
            sq_err += (sdec[i] - row[i]) * (sdec[i] - row[i]);
            lvq_err += (ldec[i] - row[i]) * (ldec[i] - row[i]);
        }
    }
    REQUIRE(lvq_err < sq_err);
}
