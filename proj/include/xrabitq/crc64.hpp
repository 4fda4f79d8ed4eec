#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace xrabitq {

// CRC-64/XZ (ECMA-182 polynomial, reflected, init and xorout all-ones).

namespace detail {

inline const std::array<std::uint64_t, 256>& crc64_table() {
    static const std::array<std::uint64_t, 256> table = [] {
        std::array<std::uint64_t, 256> t{};
        const std::uint64_t poly = 0xC96C5795D7870F42ull;  // reflected 0x42F0E1EBA9EA3693
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint64_t crc = i;
            for (int bit = 0; bit < 8; ++bit) {
                crc = (crc & 1) ? (crc >> 1) ^ poly : crc >> 1;
            }
            t[i] = crc;
        }
        return t;
    }();
    return table;
}

}  // namespace detail

inline std::uint64_t crc64(const void* data, std::size_t len,
                           std::uint64_t crc = 0) {
    const auto& table = detail::crc64_table();
    const auto* p = static_cast<const unsigned char*>(data);
    crc = ~crc;
    for (std::size_t i = 0; i < len; ++i) {
        crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
    }
    return ~crc;
}

}  // namespace xrabitq
