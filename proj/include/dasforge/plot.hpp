#ifndef DASFORGE_PLOT_HPP
#define DASFORGE_PLOT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "dasforge/common.hpp"
#include "dasforge/png_io.hpp"

namespace dasforge::plot {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

inline Rgb hsv(double h, double s, double v) {
    h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0) / 60.0;
    const int i = static_cast<int>(h);
    const double f = h - i;
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double r, g, b;
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    return {static_cast<std::uint8_t>(std::lround(r * 255)),
            static_cast<std::uint8_t>(std::lround(g * 255)),
            static_cast<std::uint8_t>(std::lround(b * 255))};
}

// Evenly spaced hues; stable palette for class coloring.
inline Rgb class_color(std::size_t index, std::size_t n_classes) {
    return hsv(360.0 * static_cast<double>(index) / std::max<std::size_t>(n_classes, 1), 0.75, 0.85);
}

namespace plotdetail {

// 5×7 glyphs, '#' marks lit pixels. Uppercase-only; unknown chars render as a
// hollow box so missing glyphs are visible rather than silent.
inline const std::map<char, std::array<const char*, 7>>& font() {
    static const std::map<char, std::array<const char*, 7>> table = {
        {' ', {"     ", "     ", "     ", "     ", "     ", "     ", "     "}},
        {'.', {"     ", "     ", "     ", "     ", "     ", " ##  ", " ##  "}},
        {',', {"     ", "     ", "     ", "     ", " ##  ", "  #  ", " #   "}},
        {'-', {"     ", "     ", "     ", "#####", "     ", "     ", "     "}},
        {'_', {"     ", "     ", "     ", "     ", "     ", "     ", "#####"}},
        {':', {"     ", " ##  ", " ##  ", "     ", " ##  ", " ##  ", "     "}},
        {'/', {"    #", "    #", "   # ", "  #  ", " #   ", "#    ", "#    "}},
        {'%', {"##  #", "## # ", "   # ", "  #  ", " #   ", "# ## ", "#  ##"}},
        {'(', {"  #  ", " #   ", "#    ", "#    ", "#    ", " #   ", "  #  "}},
        {')', {"  #  ", "   # ", "    #", "    #", "    #", "   # ", "  #  "}},
        {'=', {"     ", "     ", "#####", "     ", "#####", "     ", "     "}},
        {'0', {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "}},
        {'1', {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
        {'2', {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"}},
        {'3', {" ### ", "#   #", "    #", "  ## ", "    #", "#   #", " ### "}},
        {'4', {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "}},
        {'5', {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "}},
        {'6', {" ### ", "#    ", "#    ", "#### ", "#   #", "#   #", " ### "}},
        {'7', {"#####", "    #", "   # ", "  #  ", "  #  ", "  #  ", "  #  "}},
        {'8', {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "}},
        {'9', {" ### ", "#   #", "#   #", " ####", "    #", "    #", " ### "}},
        {'A', {" ### ", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"}},
        {'B', {"#### ", "#   #", "#   #", "#### ", "#   #", "#   #", "#### "}},
        {'C', {" ### ", "#   #", "#    ", "#    ", "#    ", "#   #", " ### "}},
        {'D', {"#### ", "#   #", "#   #", "#   #", "#   #", "#   #", "#### "}},
        {'E', {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#####"}},
        {'F', {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#    "}},
        {'G', {" ### ", "#   #", "#    ", "# ###", "#   #", "#   #", " ### "}},
        {'H', {"#   #", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"}},
        {'I', {" ### ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
        {'J', {"  ###", "   # ", "   # ", "   # ", "   # ", "#  # ", " ##  "}},
        {'K', {"#   #", "#  # ", "# #  ", "##   ", "# #  ", "#  # ", "#   #"}},
        {'L', {"#    ", "#    ", "#    ", "#    ", "#    ", "#    ", "#####"}},
        {'M', {"#   #", "## ##", "# # #", "# # #", "#   #", "#   #", "#   #"}},
        {'N', {"#   #", "##  #", "# # #", "#  ##", "#   #", "#   #", "#   #"}},
        {'O', {" ### ", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "}},
        {'P', {"#### ", "#   #", "#   #", "#### ", "#    ", "#    ", "#    "}},
        {'Q', {" ### ", "#   #", "#   #", "#   #", "# # #", "#  # ", " ## #"}},
        {'R', {"#### ", "#   #", "#   #", "#### ", "# #  ", "#  # ", "#   #"}},
        {'S', {" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "}},
        {'T', {"#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "}},
        {'U', {"#   #", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "}},
        {'V', {"#   #", "#   #", "#   #", "#   #", "#   #", " # # ", "  #  "}},
        {'W', {"#   #", "#   #", "#   #", "# # #", "# # #", "## ##", "#   #"}},
        {'X', {"#   #", "#   #", " # # ", "  #  ", " # # ", "#   #", "#   #"}},
        {'Y', {"#   #", "#   #", " # # ", "  #  ", "  #  ", "  #  ", "  #  "}},
        {'Z', {"#####", "    #", "   # ", "  #  ", " #   ", "#    ", "#####"}},
    };
    return table;
}

}  // namespace plotdetail

struct Canvas {
    Image img;

    Canvas(std::size_t height, std::size_t width, Rgb background = {255, 255, 255})
        : img(height, width) {
        fill(background);
    }

    void fill(Rgb c) {
        for (std::size_t r = 0; r < img.height; ++r)
            for (std::size_t q = 0; q < img.width; ++q) img.set(r, q, c.r, c.g, c.b);
    }

    void put(std::ptrdiff_t r, std::ptrdiff_t c, Rgb color) {
        if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(img.height) ||
            c >= static_cast<std::ptrdiff_t>(img.width))
            return;
        img.set(static_cast<std::size_t>(r), static_cast<std::size_t>(c), color.r, color.g,
                color.b);
    }

    void rect_fill(std::ptrdiff_t r0, std::ptrdiff_t c0, std::ptrdiff_t h, std::ptrdiff_t w,
                   Rgb color) {
        for (std::ptrdiff_t r = r0; r < r0 + h; ++r)
            for (std::ptrdiff_t c = c0; c < c0 + w; ++c) put(r, c, color);
    }

    void rect_outline(std::ptrdiff_t r0, std::ptrdiff_t c0, std::ptrdiff_t h, std::ptrdiff_t w,
                      Rgb color) {
        for (std::ptrdiff_t c = c0; c < c0 + w; ++c) {
            put(r0, c, color);
            put(r0 + h - 1, c, color);
        }
        for (std::ptrdiff_t r = r0; r < r0 + h; ++r) {
            put(r, c0, color);
            put(r, c0 + w - 1, color);
        }
    }

    void line(std::ptrdiff_t r0, std::ptrdiff_t c0, std::ptrdiff_t r1, std::ptrdiff_t c1,
              Rgb color) {
        const std::ptrdiff_t dr = std::abs(r1 - r0), dc = std::abs(c1 - c0);
        const std::ptrdiff_t sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
        std::ptrdiff_t err = (dc > dr ? dc : -dr) / 2;
        for (;;) {
            put(r0, c0, color);
            if (r0 == r1 && c0 == c1) break;
            const std::ptrdiff_t e = err;
            if (e > -dc) {
                err -= dr;
                c0 += sc;
            }
            if (e < dr) {
                err += dc;
                r0 += sr;
            }
        }
    }

    void disc(std::ptrdiff_t r0, std::ptrdiff_t c0, std::ptrdiff_t radius, Rgb color) {
        for (std::ptrdiff_t r = -radius; r <= radius; ++r)
            for (std::ptrdiff_t c = -radius; c <= radius; ++c)
                if (r * r + c * c <= radius * radius) put(r0 + r, c0 + c, color);
    }

    // Uppercases input; ~6px advance per char.
    void text(std::ptrdiff_t r0, std::ptrdiff_t c0, const std::string& s, Rgb color) {
        const auto& table = plotdetail::font();
        std::ptrdiff_t c = c0;
        for (char raw : s) {
            const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
            auto it = table.find(ch);
            if (it == table.end()) {
                rect_outline(r0, c, 7, 5, color);
            } else {
                for (int rr = 0; rr < 7; ++rr)
                    for (int cc = 0; cc < 5; ++cc)
                        if (it->second[rr][cc] == '#') put(r0 + rr, c + cc, color);
            }
            c += 6;
        }
    }
};

namespace plotdetail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

struct Frame {
    std::ptrdiff_t top, left, height, width;
    double x_min, x_max, y_min, y_max;

    std::ptrdiff_t px(double x) const {
        const double t = x_max > x_min ? (x - x_min) / (x_max - x_min) : 0.5;
        return left + static_cast<std::ptrdiff_t>(std::lround(t * static_cast<double>(width - 1)));
    }
    std::ptrdiff_t py(double y) const {
        const double t = y_max > y_min ? (y - y_min) / (y_max - y_min) : 0.5;
        return top + height - 1 -
               static_cast<std::ptrdiff_t>(std::lround(t * static_cast<double>(height - 1)));
    }
};

inline void draw_frame(Canvas& cv, const Frame& f, const std::string& title) {
    const Rgb axis{60, 60, 60};
    cv.rect_outline(f.top, f.left, f.height, f.width, axis);
    cv.text(f.top - 14, f.left, title, {0, 0, 0});
    for (int i = 0; i <= 4; ++i) {
        const double ty = f.y_min + (f.y_max - f.y_min) * i / 4.0;
        const std::ptrdiff_t r = f.py(ty);
        cv.line(r, f.left - 3, r, f.left, axis);
        cv.text(r - 3, f.left - 52, fmt(ty), axis);
        const double tx = f.x_min + (f.x_max - f.x_min) * i / 4.0;
        const std::ptrdiff_t c = f.px(tx);
        cv.line(f.top + f.height, c, f.top + f.height + 3, c, axis);
        cv.text(f.top + f.height + 6, c - 8, fmt(tx), axis);
    }
}

}  // namespace plotdetail

struct Series {
    std::string name;
    std::vector<double> values;  // y per integer x (epoch)
};

inline Image plot_curves(const std::vector<Series>& series, const std::string& title,
                         std::size_t height = 480, std::size_t width = 640) {
    if (series.empty()) throw ConfigError("no series to plot");
    double lo = 0.0, hi = 1.0;
    bool first = true;
    std::size_t n = 0;
    for (const auto& s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values) {
            if (first) {
                lo = hi = v;
                first = false;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (n < 1) throw ConfigError("series are empty");
    if (hi <= lo) hi = lo + 1.0;
    const double pad = (hi - lo) * 0.05;

    Canvas cv(height, width);
    plotdetail::Frame f{30, 60, static_cast<std::ptrdiff_t>(height) - 60,
                        static_cast<std::ptrdiff_t>(width) - 80,
                        1.0, static_cast<double>(n), lo - pad, hi + pad};
    plotdetail::draw_frame(cv, f, title);
    for (std::size_t si = 0; si < series.size(); ++si) {
        const Rgb color = class_color(si, std::max<std::size_t>(series.size(), 3));
        const auto& v = series[si].values;
        for (std::size_t i = 1; i < v.size(); ++i)
            cv.line(f.py(v[i - 1]), f.px(static_cast<double>(i)), f.py(v[i]),
                    f.px(static_cast<double>(i + 1)), color);
        cv.rect_fill(f.top + 6 + static_cast<std::ptrdiff_t>(si) * 12, f.left + f.width - 90, 8, 8,
                     color);
        cv.text(f.top + 6 + static_cast<std::ptrdiff_t>(si) * 12, f.left + f.width - 78,
                series[si].name, {0, 0, 0});
    }
    return cv.img;
}

struct BoxStats {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

inline Image plot_boxplot(const std::vector<std::pair<std::string, BoxStats>>& groups,
                          const std::string& title, std::size_t height = 480,
                          std::size_t width = 640) {
    if (groups.empty()) throw ConfigError("no groups to plot");
    double lo = groups[0].second.min, hi = groups[0].second.max;
    for (const auto& [name, st] : groups) {
        lo = std::min(lo, st.min);
        hi = std::max(hi, st.max);
    }
    if (hi <= lo) {
        hi += 0.05;
        lo -= 0.05;
    }
    const double pad = (hi - lo) * 0.1;

    Canvas cv(height, width);
    plotdetail::Frame f{30, 60, static_cast<std::ptrdiff_t>(height) - 60,
                        static_cast<std::ptrdiff_t>(width) - 80,
                        0.0, static_cast<double>(groups.size()), lo - pad, hi + pad};
    plotdetail::draw_frame(cv, f, title);
    const Rgb box{40, 90, 170}, whisker{60, 60, 60}, med{190, 60, 40};
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& st = groups[gi].second;
        const double xc = static_cast<double>(gi) + 0.5;
        const std::ptrdiff_t c = f.px(xc);
        const std::ptrdiff_t half = std::max<std::ptrdiff_t>(f.width / (3 * static_cast<std::ptrdiff_t>(groups.size())), 6);
        cv.line(f.py(st.min), c, f.py(st.q1), c, whisker);
        cv.line(f.py(st.q3), c, f.py(st.max), c, whisker);
        cv.line(f.py(st.min), c - half / 2, f.py(st.min), c + half / 2, whisker);
        cv.line(f.py(st.max), c - half / 2, f.py(st.max), c + half / 2, whisker);
        cv.rect_outline(f.py(st.q3), c - half, f.py(st.q1) - f.py(st.q3) + 1, 2 * half, box);
        cv.line(f.py(st.median), c - half, f.py(st.median), c + half, med);
        cv.text(f.top + f.height + 16, c - 10, groups[gi].first, {0, 0, 0});
    }
    return cv.img;
}

inline Image plot_heatmap(const std::vector<std::vector<double>>& m, const std::string& title,
                          std::size_t height = 520, std::size_t width = 560) {
    if (m.empty() || m[0].empty()) throw ConfigError("empty heatmap");
    const std::size_t R = m.size(), C = m[0].size();
    double hi = 0.0;
    for (const auto& row : m) {
        if (row.size() != C) throw ConfigError("ragged heatmap rows");
        for (double v : row) hi = std::max(hi, v);
    }
    Canvas cv(height, width);
    plotdetail::Frame f{30, 60, static_cast<std::ptrdiff_t>(height) - 70,
                        static_cast<std::ptrdiff_t>(width) - 90, 0, 1, 0, 1};
    cv.text(f.top - 14, f.left, title, {0, 0, 0});
    const std::ptrdiff_t ch = f.height / static_cast<std::ptrdiff_t>(R);
    const std::ptrdiff_t cw = f.width / static_cast<std::ptrdiff_t>(C);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < C; ++c) {
            const double t = hi > 0.0 ? m[r][c] / hi : 0.0;
            const auto shade = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t)));
            cv.rect_fill(f.top + static_cast<std::ptrdiff_t>(r) * ch,
                         f.left + static_cast<std::ptrdiff_t>(c) * cw, ch, cw,
                         {shade, shade, 255});
        }
        cv.text(f.top + static_cast<std::ptrdiff_t>(r) * ch + ch / 2 - 3, f.left - 24,
                std::to_string(r), {0, 0, 0});
    }
    for (std::size_t c = 0; c < C; ++c)
        cv.text(f.top + static_cast<std::ptrdiff_t>(R) * ch + 6,
                f.left + static_cast<std::ptrdiff_t>(c) * cw + cw / 2 - 3, std::to_string(c),
                {0, 0, 0});
    cv.rect_outline(f.top, f.left, static_cast<std::ptrdiff_t>(R) * ch,
                    static_cast<std::ptrdiff_t>(C) * cw, {60, 60, 60});
    return cv.img;
}

inline Image plot_scatter(const std::vector<double>& xy, const std::vector<int>& labels,
                          std::size_t n_classes, const std::string& title,
                          std::size_t height = 520, std::size_t width = 640) {
    const std::size_t n = labels.size();
    if (xy.size() != 2 * n || n == 0) throw ConfigError("scatter: bad point buffer");
    double xlo = xy[0], xhi = xy[0], ylo = xy[1], yhi = xy[1];
    for (std::size_t i = 0; i < n; ++i) {
        xlo = std::min(xlo, xy[2 * i]);
        xhi = std::max(xhi, xy[2 * i]);
        ylo = std::min(ylo, xy[2 * i + 1]);
        yhi = std::max(yhi, xy[2 * i + 1]);
    }
    if (xhi <= xlo) xhi = xlo + 1;
    if (yhi <= ylo) yhi = ylo + 1;
    const double padx = (xhi - xlo) * 0.05, pady = (yhi - ylo) * 0.05;

    Canvas cv(height, width);
    plotdetail::Frame f{30, 60, static_cast<std::ptrdiff_t>(height) - 60,
                        static_cast<std::ptrdiff_t>(width) - 140,
                        xlo - padx, xhi + padx, ylo - pady, yhi + pady};
    plotdetail::draw_frame(cv, f, title);
    for (std::size_t i = 0; i < n; ++i)
        cv.disc(f.py(xy[2 * i + 1]), f.px(xy[2 * i]), 2,
                class_color(static_cast<std::size_t>(labels[i]), n_classes));
    for (std::size_t k = 0; k < n_classes; ++k) {
        cv.rect_fill(f.top + 4 + static_cast<std::ptrdiff_t>(k) * 12, f.left + f.width + 10, 8, 8,
                     class_color(k, n_classes));
        cv.text(f.top + 4 + static_cast<std::ptrdiff_t>(k) * 12, f.left + f.width + 24,
                "C" + std::to_string(k), {0, 0, 0});
    }
    return cv.img;
}

}  // namespace dasforge::plot

#endif
