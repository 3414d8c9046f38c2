#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "dsnet/density.hpp"
#include "dsnet/image.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet {

namespace detail {

// All on-disk integers and floats are little-endian regardless of host.

inline void push_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

inline void push_le64f(std::vector<std::uint8_t>& out, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

inline std::uint32_t take_le32(const std::vector<std::uint8_t>& b, std::size_t& pos,
                               const std::string& origin) {
    if (pos + 4 > b.size()) throw IoError(origin + ": truncated (u32)");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 4;
    return v;
}

inline double take_le64f(const std::vector<std::uint8_t>& b, std::size_t& pos,
                         const std::string& origin) {
    if (pos + 8 > b.size()) throw IoError(origin + ": truncated (f64)");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(v);
}

inline void expect_magic(const std::vector<std::uint8_t>& b, std::size_t& pos, const char* magic,
                         const std::string& origin) {
    if (pos + 4 > b.size() || std::memcmp(&b[pos], magic, 4) != 0) {
        throw IoError(origin + ": bad magic, expected \"" + magic + "\"");
    }
    pos += 4;
}

}  // namespace detail

/// Tensor snapshot: "DCT1", four u32 LE dims (n, c, h, w), f64 LE data
/// row-major.
inline void append_tensor_snapshot(std::vector<std::uint8_t>& out, const Tensor& t) {
    const Shape4 s = t.shape();
    out.insert(out.end(), {'D', 'C', 'T', '1'});
    detail::push_le32(out, static_cast<std::uint32_t>(s.n));
    detail::push_le32(out, static_cast<std::uint32_t>(s.c));
    detail::push_le32(out, static_cast<std::uint32_t>(s.h));
    detail::push_le32(out, static_cast<std::uint32_t>(s.w));
    for (double v : t.vec()) detail::push_le64f(out, v);
}

inline Tensor take_tensor_snapshot(const std::vector<std::uint8_t>& bytes, std::size_t& pos,
                                   const std::string& origin = "DCT1") {
    detail::expect_magic(bytes, pos, "DCT1", origin);
    Shape4 s;
    s.n = detail::take_le32(bytes, pos, origin);
    s.c = detail::take_le32(bytes, pos, origin);
    s.h = detail::take_le32(bytes, pos, origin);
    s.w = detail::take_le32(bytes, pos, origin);
    std::vector<double> data(static_cast<std::size_t>(s.numel()));
    for (double& v : data) v = detail::take_le64f(bytes, pos, origin);
    return Tensor::from_data(s, std::move(data));
}

inline void save_tensor(const std::string& path, const Tensor& t) {
    std::vector<std::uint8_t> out;
    append_tensor_snapshot(out, t);
    detail::write_file_bytes(path, out);
}

inline Tensor load_tensor(const std::string& path) {
    const std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
    std::size_t pos = 0;
    Tensor t = take_tensor_snapshot(bytes, pos, path);
    if (pos != bytes.size()) throw IoError(path + ": trailing bytes after tensor snapshot");
    return t;
}

/// Density map file: "DMP1", two u32 LE dims (height, width), f64 LE grid
/// row-major.
inline void save_density_map(const std::string& path, const DensityMap& map) {
    std::vector<std::uint8_t> out{'D', 'M', 'P', '1'};
    detail::push_le32(out, static_cast<std::uint32_t>(map.height));
    detail::push_le32(out, static_cast<std::uint32_t>(map.width));
    for (double v : map.grid) detail::push_le64f(out, v);
    detail::write_file_bytes(path, out);
}

inline DensityMap load_density_map(const std::string& path) {
    const std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
    std::size_t pos = 0;
    detail::expect_magic(bytes, pos, "DMP1", path);
    const std::int64_t h = detail::take_le32(bytes, pos, path);
    const std::int64_t w = detail::take_le32(bytes, pos, path);
    DensityMap map = DensityMap::zeros(w, h);
    for (double& v : map.grid) v = detail::take_le64f(bytes, pos, path);
    if (pos != bytes.size()) throw IoError(path + ": trailing bytes after density map");
    return map;
}

}  // namespace dsnet
