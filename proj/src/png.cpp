#include "sialign/png.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "sialign/error.hpp"

namespace sialign {

namespace {

void put_u32be(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
    out.push_back(static_cast<unsigned char>(v & 0xFF));
}

void put_chunk(std::vector<unsigned char>& out, const char type[4],
               const std::vector<unsigned char>& body) {
    put_u32be(out, static_cast<std::uint32_t>(body.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), body.begin(), body.end());
    const uLong crc =
        crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + body.size()));
    put_u32be(out, static_cast<std::uint32_t>(crc));
}

} // namespace

void write_png_gray(const std::string& path, int width, int height,
                    const std::vector<unsigned char>& pixels) {
    if (width < 1 || height < 1 ||
        pixels.size() != static_cast<std::size_t>(width) * height)
        raise(ErrorKind::invalid_argument, "png pixel buffer size mismatch");

    // raw scanlines with filter byte 0
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(height) * (width + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), pixels.begin() + static_cast<std::size_t>(y) * width,
                   pixels.begin() + static_cast<std::size_t>(y + 1) * width);
    }

    uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> compressed(compressed_size);
    if (compress2(compressed.data(), &compressed_size, raw.data(),
                  static_cast<uLong>(raw.size()), 6) != Z_OK)
        raise(ErrorKind::io, "png deflate failed");
    compressed.resize(compressed_size);

    std::vector<unsigned char> out;
    const unsigned char signature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    out.insert(out.end(), signature, signature + 8);

    std::vector<unsigned char> ihdr;
    put_u32be(ihdr, static_cast<std::uint32_t>(width));
    put_u32be(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(0); // grayscale
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter
    ihdr.push_back(0); // no interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", compressed);
    put_chunk(out, "IEND", {});

    std::ofstream of(path, std::ios::binary | std::ios::trunc);
    if (!of) raise(ErrorKind::io, "cannot open for writing: " + path);
    of.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
    if (!of) raise(ErrorKind::io, "short write: " + path);
}

std::vector<unsigned char> matrix_to_pixels(const float* values, int rows,
                                            int cols) {
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    float lo = values[0], hi = values[0];
    for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, values[i]);
        hi = std::max(hi, values[i]);
    }
    const float span = hi > lo ? hi - lo : 1.0f;
    std::vector<unsigned char> px(n);
    for (std::size_t i = 0; i < n; ++i)
        px[i] = static_cast<unsigned char>(
            std::lround(255.0f * (values[i] - lo) / span));
    return px;
}

} // namespace sialign
