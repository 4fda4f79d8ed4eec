#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace xrabitq {

inline constexpr std::uint32_t kIndexFormatVersion = 1;
inline constexpr char kIndexMagic[4] = {'X', 'R', 'B', 'Q'};

/// Base class for errors raised while reading or writing on-disk artifacts.
class io_error : public std::runtime_error {
   public:
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed file contents (bad magic, inconsistent records, bad field values).
class format_error : public io_error {
   public:
    explicit format_error(const std::string& msg) : io_error(msg) {}
};

class version_error : public io_error {
   public:
    version_error(std::uint32_t found, std::uint32_t expected)
        : io_error("index format version mismatch: file has version " +
                   std::to_string(found) + ", this build reads version " +
                   std::to_string(expected)),
          found_(found),
          expected_(expected) {}

    std::uint32_t found() const { return found_; }
    std::uint32_t expected() const { return expected_; }

   private:
    std::uint32_t found_;
    std::uint32_t expected_;
};

class checksum_error : public io_error {
   public:
    explicit checksum_error(const std::string& msg) : io_error(msg) {}
};

/// Dimensionality after zero-padding to the next multiple of 64.
inline std::uint32_t padded_dim(std::uint32_t dim) {
    return (dim + 63u) / 64u * 64u;
}

}  // namespace xrabitq
