// png.hpp - minimal 8-bit grayscale PNG writer (zlib-backed, deterministic).
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "xrforge/errors.hpp"
#include "xrforge/grid.hpp"

namespace xrforge {

namespace png_detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_chunk(std::vector<std::uint8_t>& out, const char type[5],
                      const std::vector<std::uint8_t>& data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t crc_start = out.size();
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(type[i]));
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + data.size()));
    put_u32_be(out, static_cast<std::uint32_t>(crc));
}

} // namespace png_detail

/// Encode an 8-bit grayscale image as a PNG byte stream.
inline std::vector<std::uint8_t> encode_png_gray8(const Grid2D<std::uint8_t>& img) {
    using namespace png_detail;
    const int w = img.nx(), h = img.ny();

    // Filter byte 0 per scanline, then one zlib stream over everything.
    std::vector<std::uint8_t> scan;
    scan.reserve(static_cast<std::size_t>(h) * (w + 1));
    for (int y = 0; y < h; ++y) {
        scan.push_back(0);
        for (int x = 0; x < w; ++x) scan.push_back(img.at(x, y));
    }
    uLongf bound = compressBound(static_cast<uLong>(scan.size()));
    std::vector<std::uint8_t> packed(bound);
    if (compress2(packed.data(), &bound, scan.data(), static_cast<uLong>(scan.size()), 6) != Z_OK)
        throw error("png: deflate failed");
    packed.resize(bound);

    std::vector<std::uint8_t> out;
    const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.insert(out.end(), sig, sig + 8);

    std::vector<std::uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(w));
    put_u32_be(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(0); // grayscale
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter
    ihdr.push_back(0); // no interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", {});
    return out;
}

inline void save_png_gray8(const std::string& path, const Grid2D<std::uint8_t>& img) {
    const auto bytes = encode_png_gray8(img);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open for write: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw format_error("write failed: " + path);
}

} // namespace xrforge
