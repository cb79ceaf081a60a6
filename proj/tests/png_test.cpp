#include <gtest/gtest.h>
#include <unistd.h>
#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "dasforge/png_io.hpp"
#include "dasforge/rng.hpp"

using namespace dasforge;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("dasforge_png_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

Image random_image(std::size_t h, std::size_t w, Rng& rng) {
    Image img(h, w);
    for (auto& b : img.pixels) b = static_cast<std::uint8_t>(rng.uniform(0.0, 256.0));
    return img;
}

// Assemble a PNG from pre-filtered scanlines; lets tests exercise decoder
// paths (filters 1-4, RGBA, odd header fields) the writer never produces.
void write_custom_png(const std::filesystem::path& path, std::size_t w, std::size_t h,
                      int bit_depth, int color_type, const std::vector<std::uint8_t>& raw) {
    using namespace pngdetail;
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    ASSERT_EQ(compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6),
              Z_OK);
    compressed.resize(bound);

    std::vector<std::uint8_t> out;
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.insert(out.end(), sig, sig + 8);
    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(w));
    put_be32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(static_cast<std::uint8_t>(bit_depth));
    ihdr.push_back(static_cast<std::uint8_t>(color_type));
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(out, "IHDR", ihdr);
    write_chunk(out, "IDAT", compressed);
    write_chunk(out, "IEND", {});
    std::ofstream os(path, std::ios::binary);
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace

TEST(Png, RoundTripIsPixelExact) {
    TempDir tmp;
    Rng rng(70);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{1, 1}, {5, 3}, {33, 17}, {64, 64}}) {
        const Image img = random_image(h, w, rng);
        const auto file = tmp.path / "img.png";
        save_png(file, img);
        const Image back = load_png(file);
        ASSERT_EQ(back.height, h);
        ASSERT_EQ(back.width, w);
        ASSERT_EQ(back.pixels, img.pixels) << h << "x" << w;
    }
}

TEST(Png, FileStartsWithSignatureAndIhdr) {
    TempDir tmp;
    Rng rng(71);
    const Image img = random_image(4, 7, rng);
    const auto file = tmp.path / "img.png";
    save_png(file, img);
    std::ifstream is(file, std::ios::binary);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    ASSERT_GE(bytes.size(), 33u);
    EXPECT_EQ(std::memcmp(bytes.data(), sig, 8), 0);
    EXPECT_EQ(std::memcmp(bytes.data() + 12, "IHDR", 4), 0);
    EXPECT_EQ(pngdetail::get_be32(bytes.data() + 16), 7u);   // width
    EXPECT_EQ(pngdetail::get_be32(bytes.data() + 20), 4u);   // height
    EXPECT_EQ(bytes[24], 8u);                                // bit depth
    EXPECT_EQ(bytes[25], 2u);                                // truecolor
}

TEST(Png, DecodesAllFilterTypes) {
    TempDir tmp;
    Rng rng(72);
    const std::size_t w = 3, h = 5;
    const Image img = random_image(h, w, rng);
    const std::size_t stride = w * 3, bpp = 3;

    // encode row r with filter r (0=none, 1=sub, 2=up, 3=average, 4=paeth)
    std::vector<std::uint8_t> raw((stride + 1) * h);
    std::vector<std::uint8_t> prev(stride, 0);
    for (std::size_t r = 0; r < h; ++r) {
        const std::uint8_t filter = static_cast<std::uint8_t>(r);
        raw[r * (stride + 1)] = filter;
        const std::uint8_t* line = img.pixels.data() + r * stride;
        std::uint8_t* enc = raw.data() + r * (stride + 1) + 1;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= bpp ? line[i - bpp] : 0;
            const int b = prev[i];
            const int c = i >= bpp ? prev[i - bpp] : 0;
            int pred = 0;
            switch (filter) {
                case 0: pred = 0; break;
                case 1: pred = a; break;
                case 2: pred = b; break;
                case 3: pred = (a + b) / 2; break;
                case 4: pred = pngdetail::paeth(a, b, c); break;
            }
            enc[i] = static_cast<std::uint8_t>((line[i] - pred) & 0xff);
        }
        std::memcpy(prev.data(), line, stride);
    }

    const auto file = tmp.path / "filtered.png";
    write_custom_png(file, w, h, 8, 2, raw);
    const Image back = load_png(file);
    EXPECT_EQ(back.pixels, img.pixels);
}

TEST(Png, RgbaAlphaIsDropped) {
    TempDir tmp;
    const std::size_t w = 2, h = 2;
    std::vector<std::uint8_t> raw((w * 4 + 1) * h, 0);
    const std::uint8_t px[4][4] = {
        {10, 20, 30, 0xab}, {40, 50, 60, 0xcd}, {70, 80, 90, 0x00}, {100, 110, 120, 0xff}};
    for (std::size_t r = 0; r < h; ++r) {
        raw[r * (w * 4 + 1)] = 0;
        for (std::size_t c = 0; c < w; ++c)
            std::memcpy(raw.data() + r * (w * 4 + 1) + 1 + c * 4, px[r * w + c], 4);
    }
    const auto file = tmp.path / "rgba.png";
    write_custom_png(file, w, h, 8, 6, raw);
    const Image back = load_png(file);
    ASSERT_EQ(back.height, h);
    ASSERT_EQ(back.width, w);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(back.pixels[i * 3 + 0], px[i][0]);
        EXPECT_EQ(back.pixels[i * 3 + 1], px[i][1]);
        EXPECT_EQ(back.pixels[i * 3 + 2], px[i][2]);
    }
}

TEST(Png, RejectsUnsupportedVariantsAndDamage) {
    TempDir tmp;

    const auto missing = tmp.path / "missing.png";
    EXPECT_THROW(load_png(missing), IoError);

    const auto not_png = tmp.path / "not.png";
    std::ofstream(not_png, std::ios::binary) << "plain text, no signature";
    EXPECT_THROW(load_png(not_png), IoError);

    // 16-bit depth is declared unsupported
    std::vector<std::uint8_t> raw((2 * 3 + 1) * 1, 0);
    const auto deep = tmp.path / "deep.png";
    write_custom_png(deep, 2, 1, 16, 2, raw);
    EXPECT_THROW(load_png(deep), IoError);

    // bad filter byte
    std::vector<std::uint8_t> badraw{9, 1, 2, 3, 4, 5, 6};  // filter 9 on a 2x1 row
    const auto badf = tmp.path / "badfilter.png";
    write_custom_png(badf, 2, 1, 8, 2, badraw);
    EXPECT_THROW(load_png(badf), IoError);

    // truncated mid-IDAT (dropping only the 12-byte IEND stays loadable)
    Rng rng(73);
    const auto trunc = tmp.path / "trunc.png";
    save_png(trunc, random_image(8, 8, rng));
    std::filesystem::resize_file(trunc, std::filesystem::file_size(trunc) - 20);
    EXPECT_THROW(load_png(trunc), IoError);
}

TEST(Png, RejectsEmptyImageOnSave) {
    TempDir tmp;
    EXPECT_THROW(save_png(tmp.path / "empty.png", Image{}), IoError);
}
