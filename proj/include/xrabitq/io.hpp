#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "xrabitq/common.hpp"

namespace xrabitq {

/// A uniform-dimensionality set of float vectors (the fvecs container).
struct Dataset {
    std::uint32_t dim = 0;
    std::size_t count = 0;
    std::vector<float> values;  // count * dim, row-major
    std::string source;

    std::span<const float> row(std::size_t i) const {
        return {values.data() + i * dim, dim};
    }
    std::span<float> row(std::size_t i) {
        return {values.data() + i * dim, dim};
    }
};

/// Integer records with identical framing (the ivecs container).
struct IvecsData {
    std::uint32_t dim = 0;
    std::size_t count = 0;
    std::vector<std::int32_t> values;

    std::span<const std::int32_t> row(std::size_t i) const {
        return {values.data() + i * dim, dim};
    }
};

namespace detail {

template <typename T>
struct VecsTraits;

template <>
struct VecsTraits<float> {
    using Container = Dataset;
    static constexpr const char* name = "fvecs";
};

template <>
struct VecsTraits<std::int32_t> {
    using Container = IvecsData;
    static constexpr const char* name = "ivecs";
};

template <typename T>
typename VecsTraits<T>::Container read_vecs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::size_t size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<char> buf(size);
    if (size > 0 && !in.read(buf.data(), static_cast<std::streamsize>(size))) {
        throw io_error("cannot read " + path);
    }

    typename VecsTraits<T>::Container out;
    out.dim = 0;
    std::size_t off = 0;
    while (off < size) {
        if (off + 4 > size) {
            throw format_error(std::string(VecsTraits<T>::name) + " record header truncated at byte offset " +
                               std::to_string(off) + " in " + path);
        }
        std::uint32_t d;
        std::memcpy(&d, buf.data() + off, 4);
        if (d == 0) {
            throw format_error(std::string(VecsTraits<T>::name) + " record with d = 0 at byte offset " +
                               std::to_string(off) + " in " + path);
        }
        if (out.dim == 0) {
            out.dim = d;
        } else if (d != out.dim) {
            throw format_error(std::string(VecsTraits<T>::name) + " inconsistent dimensionality (" +
                               std::to_string(d) + " vs " + std::to_string(out.dim) +
                               ") at byte offset " + std::to_string(off) + " in " + path);
        }
        off += 4;
        const std::size_t payload = static_cast<std::size_t>(d) * sizeof(T);
        if (off + payload > size) {
            throw format_error(std::string(VecsTraits<T>::name) + " record payload truncated at byte offset " +
                               std::to_string(off) + " in " + path);
        }
        const std::size_t old = out.values.size();
        out.values.resize(old + d);
        std::memcpy(out.values.data() + old, buf.data() + off, payload);
        off += payload;
        ++out.count;
    }
    return out;
}

template <typename T>
void write_vecs(const std::string& path, std::uint32_t dim, std::size_t count,
                const T* values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path + " for writing");
    for (std::size_t i = 0; i < count; ++i) {
        out.write(reinterpret_cast<const char*>(&dim), 4);
        out.write(reinterpret_cast<const char*>(values + i * dim),
                  static_cast<std::streamsize>(static_cast<std::size_t>(dim) * sizeof(T)));
    }
    if (!out) throw io_error("write failed for " + path);
}

}  // namespace detail

inline Dataset read_fvecs(const std::string& path) {
    Dataset d = detail::read_vecs<float>(path);
    d.source = path;
    return d;
}

inline void write_fvecs(const std::string& path, const Dataset& data) {
    detail::write_vecs<float>(path, data.dim, data.count, data.values.data());
}

inline IvecsData read_ivecs(const std::string& path) {
    return detail::read_vecs<std::int32_t>(path);
}

inline void write_ivecs(const std::string& path, const IvecsData& data) {
    detail::write_vecs<std::int32_t>(path, data.dim, data.count, data.values.data());
}

/// Zero-pads every vector to `dim` coordinates.
inline Dataset pad_dataset(const Dataset& in, std::uint32_t dim) {
    if (dim < in.dim) throw std::invalid_argument("pad_dataset: target dim too small");
    if (dim == in.dim) return in;
    Dataset out;
    out.dim = dim;
    out.count = in.count;
    out.source = in.source;
    out.values.assign(static_cast<std::size_t>(dim) * in.count, 0.0f);
    for (std::size_t i = 0; i < in.count; ++i) {
        std::memcpy(out.values.data() + i * dim, in.values.data() + i * in.dim,
                    in.dim * sizeof(float));
    }
    return out;
}

}  // namespace xrabitq
