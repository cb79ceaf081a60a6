#ifndef DASFORGE_IMAGE_HPP
#define DASFORGE_IMAGE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dasforge/common.hpp"
#include "dasforge/png_io.hpp"

namespace dasforge {

enum class Colormap { grayscale3, lut256 };

inline const char* to_string(Colormap c) {
    return c == Colormap::grayscale3 ? "grayscale3" : "lut256";
}

inline Colormap colormap_from_string(const std::string& s) {
    if (s == "grayscale3") return Colormap::grayscale3;
    if (s == "lut256") return Colormap::lut256;
    throw ConfigError("unknown colormap '" + s + "' (expected grayscale3 or lut256)");
}

using ColorLut = std::vector<std::array<std::uint8_t, 3>>;

// CSV with one "r,g,b" line per entry; exactly 256 entries.
inline ColorLut load_lut_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open LUT file: " + path.string());
    ColorLut lut;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::array<int, 3> v{};
        char comma;
        if (!(ls >> v[0] >> comma >> v[1] >> comma >> v[2]))
            throw IoError("malformed LUT line in " + path.string() + ": " + line);
        for (int ch : v)
            if (ch < 0 || ch > 255)
                throw IoError("LUT channel out of range in " + path.string() + ": " + line);
        lut.push_back({static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]),
                       static_cast<std::uint8_t>(v[2])});
    }
    if (lut.size() != 256)
        throw IoError("LUT must have 256 entries, got " + std::to_string(lut.size()) + " in " +
                      path.string());
    return lut;
}

struct RenderSpec {
    std::size_t out_height = 64;
    std::size_t out_width = 64;
    Colormap colormap = Colormap::grayscale3;
    ColorLut lut;  // required (256 entries) iff colormap == lut256

    void validate() const {
        if (out_height < 8 || out_width < 8)
            throw ConfigError("render dimensions must be at least 8x8");
        if (colormap == Colormap::lut256 && lut.size() != 256)
            throw ConfigError("lut256 colormap requires a 256-entry LUT");
    }
};

// Min-max to [0,1]; a constant matrix maps to all zeros.
inline RealMatrix min_max_normalize(const RealMatrix& m) {
    if (m.data.empty()) return m;
    auto [lo_it, hi_it] = std::minmax_element(m.data.begin(), m.data.end());
    const double lo = *lo_it, hi = *hi_it;
    RealMatrix out(m.rows, m.cols);
    if (hi > lo) {
        const double inv = 1.0 / (hi - lo);
        for (std::size_t i = 0; i < m.data.size(); ++i) out.data[i] = (m.data[i] - lo) * inv;
    }
    return out;
}

namespace imgdetail {

// One axis of the separable resize: area averaging when shrinking, bilinear
// (half-pixel centers) when growing, identity when equal.
inline void resize_axis(const double* src, std::size_t n_in, std::size_t stride_in, double* dst,
                        std::size_t n_out, std::size_t stride_out) {
    if (n_out == n_in) {
        for (std::size_t i = 0; i < n_out; ++i) dst[i * stride_out] = src[i * stride_in];
        return;
    }
    if (n_out < n_in) {
        const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
        for (std::size_t i = 0; i < n_out; ++i) {
            const double left = i * scale;
            const double right = (i + 1) * scale;
            const std::size_t first = static_cast<std::size_t>(std::floor(left));
            std::size_t last = static_cast<std::size_t>(std::ceil(right)) - 1;
            last = std::min(last, n_in - 1);
            double acc = 0.0;
            for (std::size_t k = first; k <= last; ++k) {
                const double overlap =
                    std::min(right, static_cast<double>(k + 1)) - std::max(left, static_cast<double>(k));
                acc += src[k * stride_in] * overlap;
            }
            dst[i * stride_out] = acc / scale;
        }
        return;
    }
    const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
    for (std::size_t i = 0; i < n_out; ++i) {
        double pos = (i + 0.5) * scale - 0.5;
        pos = std::clamp(pos, 0.0, static_cast<double>(n_in - 1));
        const std::size_t k0 = static_cast<std::size_t>(std::floor(pos));
        const std::size_t k1 = std::min(k0 + 1, n_in - 1);
        const double t = pos - static_cast<double>(k0);
        dst[i * stride_out] = src[k0 * stride_in] * (1.0 - t) + src[k1 * stride_in] * t;
    }
}

}  // namespace imgdetail

inline RealMatrix resize_matrix(const RealMatrix& m, std::size_t out_rows, std::size_t out_cols) {
    if (m.rows == 0 || m.cols == 0) throw ConfigError("cannot resize an empty matrix");
    if (out_rows == 0 || out_cols == 0) throw ConfigError("resize target must be nonzero");
    // columns first, then rows (separable, order-independent result)
    RealMatrix mid(m.rows, out_cols);
    for (std::size_t r = 0; r < m.rows; ++r)
        imgdetail::resize_axis(m.data.data() + r * m.cols, m.cols, 1, mid.data.data() + r * out_cols,
                               out_cols, 1);
    RealMatrix out(out_rows, out_cols);
    for (std::size_t c = 0; c < out_cols; ++c)
        imgdetail::resize_axis(mid.data.data() + c, m.rows, out_cols, out.data.data() + c, out_rows,
                               out_cols);
    return out;
}

inline Image render_image(const RealMatrix& m, const RenderSpec& spec) {
    spec.validate();
    if (!m.all_finite()) throw ConfigError("render input must be finite");
    const RealMatrix norm = min_max_normalize(m);
    const RealMatrix sized = resize_matrix(norm, spec.out_height, spec.out_width);
    Image img(spec.out_height, spec.out_width);
    for (std::size_t r = 0; r < spec.out_height; ++r) {
        for (std::size_t c = 0; c < spec.out_width; ++c) {
            const double v = std::clamp(sized.at(r, c), 0.0, 1.0);
            const int idx = static_cast<int>(std::lround(v * 255.0));
            if (spec.colormap == Colormap::grayscale3) {
                const auto g = static_cast<std::uint8_t>(idx);
                img.set(r, c, g, g, g);
            } else {
                const auto& e = spec.lut[static_cast<std::size_t>(idx)];
                img.set(r, c, e[0], e[1], e[2]);
            }
        }
    }
    return img;
}

}  // namespace dasforge

#endif
