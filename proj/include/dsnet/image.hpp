#pragma once

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dsnet/common.hpp"

namespace dsnet {

/// 8-bit raster, 1 (gray) or 3 (RGB) interleaved channels, row-major.
struct ImageU8 {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::int64_t channels = 0;
    std::vector<std::uint8_t> pixels;

    static ImageU8 filled(std::int64_t w, std::int64_t h, std::int64_t ch, std::uint8_t value) {
        ImageU8 img;
        img.width = w;
        img.height = h;
        img.channels = ch;
        img.pixels.assign(static_cast<std::size_t>(w * h * ch), value);
        return img;
    }

    std::uint8_t& at(std::int64_t y, std::int64_t x, std::int64_t c) {
        return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
    }
    std::uint8_t at(std::int64_t y, std::int64_t x, std::int64_t c) const {
        return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
    }
};

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    const std::streamoff len = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(len));
    if (len > 0) f.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!f) throw IoError("short read: " + path);
    return bytes;
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open file for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write: " + path);
}

inline std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
           std::uint32_t(p[3]);
}

inline void push_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint8_t paeth(std::uint8_t a, std::uint8_t b, std::uint8_t c) {
    const int p = int(a) + int(b) - int(c);
    const int pa = std::abs(p - int(a));
    const int pb = std::abs(p - int(b));
    const int pc = std::abs(p - int(c));
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

constexpr std::uint8_t kPngSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace detail

/// Decode an 8-bit non-interlaced PNG (gray, gray+alpha, RGB or RGBA;
/// alpha is dropped). Palette, 16-bit and interlaced files are rejected.
inline ImageU8 decode_png(const std::vector<std::uint8_t>& bytes, const std::string& origin = "png") {
    using namespace detail;
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSignature, 8) != 0) {
        throw IoError(origin + ": not a PNG file");
    }
    std::size_t pos = 8;
    std::int64_t width = 0, height = 0;
    int color_type = -1;
    std::vector<std::uint8_t> idat;
    bool seen_iend = false;
    while (pos + 8 <= bytes.size() && !seen_iend) {
        const std::uint32_t len = be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw IoError(origin + ": truncated chunk");
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const std::uint8_t* data = &bytes[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw IoError(origin + ": bad IHDR length");
            width = be32(data);
            height = be32(data + 4);
            const int bit_depth = data[8];
            color_type = data[9];
            const int interlace = data[12];
            if (bit_depth != 8) {
                throw IoError(origin + ": unsupported bit depth " + std::to_string(bit_depth) +
                              " (only 8-bit supported)");
            }
            if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6) {
                throw IoError(origin + ": unsupported color type " + std::to_string(color_type));
            }
            if (interlace != 0) throw IoError(origin + ": interlaced PNG not supported");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            seen_iend = true;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0 || color_type < 0) throw IoError(origin + ": missing IHDR");
    if (idat.empty()) throw IoError(origin + ": missing IDAT");

    const std::int64_t src_ch = (color_type == 0) ? 1 : (color_type == 2) ? 3 : (color_type == 4) ? 2 : 4;
    const std::int64_t stride = width * src_ch;
    const std::size_t raw_size = static_cast<std::size_t>(height * (stride + 1));
    std::vector<std::uint8_t> raw(raw_size);
    uLongf dest_len = static_cast<uLongf>(raw_size);
    const int zret = uncompress(raw.data(), &dest_len, idat.data(), static_cast<uLong>(idat.size()));
    if (zret != Z_OK || dest_len != raw_size) {
        throw IoError(origin + ": zlib inflate failed (" + std::to_string(zret) + ")");
    }

    // Undo per-scanline filters in place.
    std::vector<std::uint8_t> prev(static_cast<std::size_t>(stride), 0);
    std::vector<std::uint8_t> line(static_cast<std::size_t>(stride));
    const std::int64_t out_ch = (src_ch >= 3) ? 3 : 1;
    ImageU8 img = ImageU8::filled(width, height, out_ch, 0);
    for (std::int64_t y = 0; y < height; ++y) {
        const std::uint8_t* src = &raw[static_cast<std::size_t>(y * (stride + 1))];
        const std::uint8_t filter = src[0];
        ++src;
        for (std::int64_t i = 0; i < stride; ++i) {
            const std::uint8_t left = (i >= src_ch) ? line[static_cast<std::size_t>(i - src_ch)] : 0;
            const std::uint8_t up = prev[static_cast<std::size_t>(i)];
            const std::uint8_t ul = (i >= src_ch) ? prev[static_cast<std::size_t>(i - src_ch)] : 0;
            std::uint8_t v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v = static_cast<std::uint8_t>(v + left); break;
                case 2: v = static_cast<std::uint8_t>(v + up); break;
                case 3: v = static_cast<std::uint8_t>(v + ((int(left) + int(up)) >> 1)); break;
                case 4: v = static_cast<std::uint8_t>(v + detail::paeth(left, up, ul)); break;
                default: throw IoError(origin + ": unknown scanline filter " + std::to_string(filter));
            }
            line[static_cast<std::size_t>(i)] = v;
        }
        for (std::int64_t x = 0; x < width; ++x) {
            const std::uint8_t* px = &line[static_cast<std::size_t>(x * src_ch)];
            for (std::int64_t c = 0; c < out_ch; ++c) img.at(y, x, c) = px[c];
        }
        prev = line;
    }
    return img;
}

/// Encode as 8-bit PNG (gray or RGB, filter 0, single IDAT). Deterministic:
/// identical images give identical bytes.
inline std::vector<std::uint8_t> encode_png(const ImageU8& img) {
    using namespace detail;
    if (img.channels != 1 && img.channels != 3) {
        throw IoError("encode_png: image must have 1 or 3 channels, got " +
                      std::to_string(img.channels));
    }
    const std::int64_t stride = img.width * img.channels;
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(img.height * (stride + 1)));
    for (std::int64_t y = 0; y < img.height; ++y) {
        std::uint8_t* dst = &raw[static_cast<std::size_t>(y * (stride + 1))];
        dst[0] = 0;  // filter: none
        std::memcpy(dst + 1, &img.pixels[static_cast<std::size_t>(y * stride)],
                    static_cast<std::size_t>(stride));
    }
    uLongf comp_bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_bound);
    if (compress2(comp.data(), &comp_bound, raw.data(), static_cast<uLong>(raw.size()),
                  Z_DEFAULT_COMPRESSION) != Z_OK) {
        throw IoError("encode_png: zlib deflate failed");
    }
    comp.resize(comp_bound);

    std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);
    auto chunk = [&out](const char* type, const std::vector<std::uint8_t>& data) {
        push_be32(out, static_cast<std::uint32_t>(data.size()));
        const std::size_t crc_start = out.size();
        out.insert(out.end(), type, type + 4);
        out.insert(out.end(), data.begin(), data.end());
        const uLong crc = crc32(0L, &out[crc_start], static_cast<uInt>(4 + data.size()));
        push_be32(out, static_cast<std::uint32_t>(crc));
    };

    std::vector<std::uint8_t> ihdr;
    push_be32(ihdr, static_cast<std::uint32_t>(img.width));
    push_be32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);                                   // bit depth
    ihdr.push_back(img.channels == 1 ? 0 : 2);           // color type
    ihdr.push_back(0);                                   // compression
    ihdr.push_back(0);                                   // filter
    ihdr.push_back(0);                                   // interlace
    chunk("IHDR", ihdr);
    chunk("IDAT", comp);
    chunk("IEND", {});
    return out;
}

namespace detail {

inline int pnm_next_value(const std::vector<std::uint8_t>& b, std::size_t& pos,
                          const std::string& origin) {
    // Skip whitespace and '#' comments.
    while (pos < b.size()) {
        if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<int>(b[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= b.size() || !std::isdigit(static_cast<int>(b[pos]))) {
        throw IoError(origin + ": malformed PNM header");
    }
    int v = 0;
    while (pos < b.size() && std::isdigit(static_cast<int>(b[pos]))) {
        v = v * 10 + (b[pos] - '0');
        ++pos;
    }
    return v;
}

}  // namespace detail

/// Decode a PNM image: P5/P6 binary or P2/P3 ASCII, 8-bit maxval.
inline ImageU8 decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& origin = "pnm") {
    if (bytes.size() < 2 || bytes[0] != 'P') throw IoError(origin + ": not a PNM file");
    const char kind = static_cast<char>(bytes[1]);
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
        throw IoError(origin + ": unsupported PNM type P" + std::string(1, kind));
    }
    const bool ascii = (kind == '2' || kind == '3');
    const std::int64_t channels = (kind == '3' || kind == '6') ? 3 : 1;
    std::size_t pos = 2;
    const int w = detail::pnm_next_value(bytes, pos, origin);
    const int h = detail::pnm_next_value(bytes, pos, origin);
    const int maxval = detail::pnm_next_value(bytes, pos, origin);
    if (maxval <= 0 || maxval > 255) {
        throw IoError(origin + ": unsupported maxval " + std::to_string(maxval) +
                      " (only 8-bit supported)");
    }
    ImageU8 img = ImageU8::filled(w, h, channels, 0);
    const std::size_t count = img.pixels.size();
    if (ascii) {
        for (std::size_t i = 0; i < count; ++i) {
            img.pixels[i] = static_cast<std::uint8_t>(detail::pnm_next_value(bytes, pos, origin));
        }
    } else {
        ++pos;  // single whitespace after maxval
        if (pos + count > bytes.size()) throw IoError(origin + ": truncated PNM pixel data");
        std::memcpy(img.pixels.data(), &bytes[pos], count);
    }
    return img;
}

/// Encode as binary PNM (P5 for gray, P6 for RGB).
inline std::vector<std::uint8_t> encode_pnm(const ImageU8& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw IoError("encode_pnm: image must have 1 or 3 channels");
    }
    const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" +
                               std::to_string(img.width) + " " + std::to_string(img.height) +
                               "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

/// Load an image by sniffing the file signature (PNG or PNM).
inline ImageU8 load_image(const std::string& path) {
    const std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), detail::kPngSignature, 8) == 0) {
        return decode_png(bytes, path);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P') {
        return decode_pnm(bytes, path);
    }
    throw IoError(path + ": unrecognized image format (expected PNG or PNM)");
}

/// Save an image; format chosen by extension (.png, .ppm, .pgm, .pnm).
inline void save_image(const std::string& path, const ImageU8& img) {
    auto ends_with = [&path](const char* suffix) {
        const std::size_t n = std::strlen(suffix);
        return path.size() >= n && path.compare(path.size() - n, n, suffix) == 0;
    };
    if (ends_with(".png")) {
        detail::write_file_bytes(path, encode_png(img));
    } else if (ends_with(".ppm") || ends_with(".pgm") || ends_with(".pnm")) {
        detail::write_file_bytes(path, encode_pnm(img));
    } else {
        throw IoError("save_image: unsupported extension in " + path);
    }
}

/// Bilinear resize with half-pixel center alignment.
inline ImageU8 resize_bilinear(const ImageU8& src, std::int64_t new_w, std::int64_t new_h) {
    if (new_w <= 0 || new_h <= 0) throw ContractError("resize_bilinear: non-positive target size");
    ImageU8 dst = ImageU8::filled(new_w, new_h, src.channels, 0);
    const double sx = static_cast<double>(src.width) / static_cast<double>(new_w);
    const double sy = static_cast<double>(src.height) / static_cast<double>(new_h);
    for (std::int64_t y = 0; y < new_h; ++y) {
        const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        const std::int64_t y0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(fy)), 0,
                                                         src.height - 1);
        const std::int64_t y1 = std::min(y0 + 1, src.height - 1);
        const double wy = std::clamp(fy - static_cast<double>(y0), 0.0, 1.0);
        for (std::int64_t x = 0; x < new_w; ++x) {
            const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            const std::int64_t x0 = std::clamp<std::int64_t>(
                static_cast<std::int64_t>(std::floor(fx)), 0, src.width - 1);
            const std::int64_t x1 = std::min(x0 + 1, src.width - 1);
            const double wx = std::clamp(fx - static_cast<double>(x0), 0.0, 1.0);
            for (std::int64_t c = 0; c < src.channels; ++c) {
                const double top = (1.0 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
                const double bot = (1.0 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
                const double v = (1.0 - wy) * top + wy * bot;
                dst.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
    return dst;
}

}  // namespace dsnet
