#ifndef DASFORGE_COMMON_HPP
#define DASFORGE_COMMON_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dasforge {

using cd = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

// Group velocity index of standard single-mode fiber at 1550 nm.
inline constexpr double kFiberIndex = 1.468;
inline constexpr double kSpeedOfLight = 299792458.0;

// Thrown when a configuration or argument violates a documented invariant.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown on file-format or filesystem failures.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major matrix of doubles. Rows are slow time (one trace per row),
// columns are fast time / fiber position throughout this library.
struct RealMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    RealMatrix() = default;
    RealMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    std::size_t size() const { return data.size(); }

    bool same_shape(const RealMatrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

struct ComplexMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::complex<double>> data;

    ComplexMatrix() = default;
    ComplexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

    std::complex<double>& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const std::complex<double>& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::complex<double>* row(std::size_t r) { return data.data() + r * cols; }
    const std::complex<double>* row(std::size_t r) const { return data.data() + r * cols; }
};

// x mod 2*pi mapped into [0, 2*pi); the 2*pi boundary maps to 0.
inline double wrap_two_pi(double x) {
    double y = std::fmod(x, kTwoPi);
    if (y < 0.0) y += kTwoPi;
    if (y >= kTwoPi) y = 0.0;
    return y;
}

// Quantile by linear interpolation between order statistics; input sorted.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw ConfigError("quantile of an empty sample");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace dasforge

#endif
