#ifndef DASFORGE_TSM_HPP
#define DASFORGE_TSM_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dasforge/common.hpp"

namespace dasforge {

// TSM: temporal-spatial matrix container.
//   bytes  0..3   magic "TSM1"
//   bytes  4..7   u32 rows, little endian
//   bytes  8..11  u32 cols, little endian
//   bytes 12..15  u32 reserved, written as 0
//   bytes 16..    rows*cols IEEE-754 doubles, little endian, row major
//
// Header is 16 bytes, so a 2x3 matrix file is 16 + 48 = 64 bytes.

namespace detail {

inline void put_u32(std::ofstream& os, std::uint32_t v) {
    std::array<unsigned char, 4> b{
        static_cast<unsigned char>(v & 0xff),
        static_cast<unsigned char>((v >> 8) & 0xff),
        static_cast<unsigned char>((v >> 16) & 0xff),
        static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b.data()), 4);
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline bool host_is_little_endian() {
    const std::uint32_t one = 1;
    unsigned char b;
    std::memcpy(&b, &one, 1);
    return b == 1;
}

}  // namespace detail

inline void save_tsm(const std::filesystem::path& path, const RealMatrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os.write("TSM1", 4);
    detail::put_u32(os, static_cast<std::uint32_t>(m.rows));
    detail::put_u32(os, static_cast<std::uint32_t>(m.cols));
    detail::put_u32(os, 0);
    if (detail::host_is_little_endian()) {
        os.write(reinterpret_cast<const char*>(m.data.data()),
                 static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    } else {
        for (double v : m.data) {
            std::uint64_t u;
            std::memcpy(&u, &v, 8);
            unsigned char b[8];
            for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
            os.write(reinterpret_cast<const char*>(b), 8);
        }
    }
    if (!os) throw IoError("write failed: " + path.string());
}

inline RealMatrix load_tsm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    unsigned char header[16];
    is.read(reinterpret_cast<char*>(header), 16);
    if (is.gcount() != 16) throw IoError("truncated TSM header in " + path.string());
    if (std::memcmp(header, "TSM1", 4) != 0)
        throw IoError("bad TSM magic in " + path.string());
    const std::uint64_t rows = detail::get_u32(header + 4);
    const std::uint64_t cols = detail::get_u32(header + 8);
    const std::uint64_t count = rows * cols;
    if (count > (1ULL << 32))
        throw IoError("TSM dimensions overflow in " + path.string());

    RealMatrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    const std::uint64_t want = count * 8;
    if (detail::host_is_little_endian()) {
        is.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(want));
        if (static_cast<std::uint64_t>(is.gcount()) != want)
            throw IoError("truncated TSM payload in " + path.string() + ": expected " +
                          std::to_string(want) + " bytes, got " + std::to_string(is.gcount()));
    } else {
        std::vector<unsigned char> buf(static_cast<std::size_t>(want));
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(want));
        if (static_cast<std::uint64_t>(is.gcount()) != want)
            throw IoError("truncated TSM payload in " + path.string() + ": expected " +
                          std::to_string(want) + " bytes, got " + std::to_string(is.gcount()));
        for (std::uint64_t i = 0; i < count; ++i) {
            std::uint64_t u = 0;
            for (int b = 7; b >= 0; --b) u = (u << 8) | buf[i * 8 + static_cast<std::uint64_t>(b)];
            std::memcpy(&m.data[i], &u, 8);
        }
    }
    return m;
}

}  // namespace dasforge

#endif
