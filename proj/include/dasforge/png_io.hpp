#ifndef DASFORGE_PNG_IO_HPP
#define DASFORGE_PNG_IO_HPP

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dasforge/common.hpp"

namespace dasforge {

// 8-bit RGB image, row-major, 3 bytes per pixel.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;  // height * width * 3

    Image() = default;
    Image(std::size_t h, std::size_t w) : height(h), width(w), pixels(h * w * 3, 0) {}

    std::uint8_t* px(std::size_t r, std::size_t c) { return pixels.data() + (r * width + c) * 3; }
    const std::uint8_t* px(std::size_t r, std::size_t c) const {
        return pixels.data() + (r * width + c) * 3;
    }

    void set(std::size_t r, std::size_t c, std::uint8_t red, std::uint8_t green, std::uint8_t blue) {
        auto* p = px(r, c);
        p[0] = red; p[1] = green; p[2] = blue;
    }

    bool operator==(const Image& o) const {
        return height == o.height && width == o.width && pixels == o.pixels;
    }
};

namespace pngdetail {

inline const std::uint32_t* crc_table() {
    static std::uint32_t table[256];
    static bool init = [] {
        for (std::uint32_t n = 0; n < 256; ++n) {
            std::uint32_t c = n;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320U ^ (c >> 1) : c >> 1;
            table[n] = c;
        }
        return true;
    }();
    (void)init;
    return table;
}

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t len, std::uint32_t crc = 0) {
    const std::uint32_t* table = crc_table();
    crc ^= 0xffffffffU;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc ^ 0xffffffffU;
}

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

inline std::uint32_t get_be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void write_chunk(std::vector<std::uint8_t>& out, const char type[4],
                        const std::vector<std::uint8_t>& payload) {
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    put_be32(out, crc32_of(out.data() + crc_start, out.size() - crc_start));
}

inline int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace pngdetail

inline void save_png(const std::filesystem::path& path, const Image& img) {
    if (img.height == 0 || img.width == 0) throw IoError("cannot write empty image");
    using namespace pngdetail;

    // raw scanlines with filter byte 0
    const std::size_t stride = img.width * 3;
    std::vector<std::uint8_t> raw((stride + 1) * img.height);
    for (std::size_t r = 0; r < img.height; ++r) {
        raw[r * (stride + 1)] = 0;
        std::memcpy(raw.data() + r * (stride + 1) + 1, img.pixels.data() + r * stride, stride);
    }

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw IoError("zlib compression failed for " + path.string());
    compressed.resize(bound);

    std::vector<std::uint8_t> out;
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.insert(out.end(), sig, sig + 8);

    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(img.width));
    put_be32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type: truecolor
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter method
    ihdr.push_back(0);   // no interlace
    write_chunk(out, "IHDR", ihdr);
    write_chunk(out, "IDAT", compressed);
    write_chunk(out, "IEND", {});

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

// Reads 8-bit RGB or RGBA PNGs (non-interlaced), which covers everything this
// toolkit writes. Alpha, if present, is dropped.
inline Image load_png(const std::filesystem::path& path) {
    using namespace pngdetail;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        throw IoError("not a PNG file: " + path.string());

    std::size_t w = 0, h = 0;
    int bit_depth = 0, color_type = 0, interlace = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        std::uint32_t len = get_be32(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw IoError("truncated PNG chunk in " + path.string());
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const std::uint8_t* payload = bytes.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            w = get_be32(payload);
            h = get_be32(payload + 4);
            bit_depth = payload[8];
            color_type = payload[9];
            interlace = payload[12];
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (w == 0 || h == 0) throw IoError("missing IHDR in " + path.string());
    if (bit_depth != 8 || (color_type != 2 && color_type != 6) || interlace != 0)
        throw IoError("unsupported PNG variant in " + path.string() +
                      " (need 8-bit RGB/RGBA, non-interlaced)");

    const std::size_t channels = color_type == 2 ? 3 : 4;
    const std::size_t stride = w * channels;
    std::vector<std::uint8_t> raw((stride + 1) * h);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw IoError("PNG inflate failed for " + path.string());

    // undo per-scanline filters
    std::vector<std::uint8_t> prev(stride, 0);
    Image img(h, w);
    const std::size_t bpp = channels;
    for (std::size_t r = 0; r < h; ++r) {
        const std::uint8_t filter = raw[r * (stride + 1)];
        std::uint8_t* line = raw.data() + r * (stride + 1) + 1;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= bpp ? line[i - bpp] : 0;
            const int b = prev[i];
            const int c = i >= bpp ? prev[i - bpp] : 0;
            int v = line[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw IoError("bad PNG filter byte in " + path.string());
            }
            line[i] = static_cast<std::uint8_t>(v & 0xff);
        }
        std::memcpy(prev.data(), line, stride);
        for (std::size_t cpx = 0; cpx < w; ++cpx)
            img.set(r, cpx, line[cpx * channels], line[cpx * channels + 1], line[cpx * channels + 2]);
    }
    return img;
}

}  // namespace dasforge

#endif
