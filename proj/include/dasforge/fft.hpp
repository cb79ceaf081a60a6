#ifndef DASFORGE_FFT_HPP
#define DASFORGE_FFT_HPP

#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "dasforge/common.hpp"

namespace dasforge {

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place iterative radix-2 DIT transform. sign = -1 forward, +1 inverse
// (unscaled).
inline void fft_pow2(std::vector<cd>& a, int sign) {
    const std::size_t n = a.size();
    if (n < 2) return;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * kTwoPi / static_cast<double>(len);
        const cd wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                cd u = a[i + k];
                cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

// Precomputed chirp data for a Bluestein transform of one length.
struct BluesteinPlan {
    std::size_t n = 0;
    std::size_t m = 0;          // power-of-two convolution length >= 2n-1
    std::vector<cd> chirp;      // exp(+i pi k^2 / n)
    std::vector<cd> kernel_fft; // FFT of the zero-padded chirp kernel
};

inline std::shared_ptr<const BluesteinPlan> bluestein_plan(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, std::shared_ptr<const BluesteinPlan>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    auto plan = std::make_shared<BluesteinPlan>();
    plan->n = n;
    plan->m = next_pow2(2 * n - 1);
    plan->chirp.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        // reduce k^2 mod 2n to keep the trig argument small
        std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % (2 * n);
        double ang = kPi * static_cast<double>(k2) / static_cast<double>(n);
        plan->chirp[k] = cd(std::cos(ang), std::sin(ang));
    }
    std::vector<cd> b(plan->m, cd(0.0, 0.0));
    b[0] = plan->chirp[0];
    for (std::size_t k = 1; k < n; ++k) b[k] = b[plan->m - k] = plan->chirp[k];
    fft_pow2(b, -1);
    plan->kernel_fft = std::move(b);

    cache.emplace(n, plan);
    return cache.at(n);
}

// Forward DFT of arbitrary length via Bluestein's identity
//   nk = (n^2 + k^2 - (k-n)^2) / 2
// which turns the transform into one circular convolution of power-of-two
// length.
inline void fft_bluestein_forward(std::vector<cd>& a) {
    const std::size_t n = a.size();
    auto plan = bluestein_plan(n);
    std::vector<cd> x(plan->m, cd(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * std::conj(plan->chirp[k]);
    fft_pow2(x, -1);
    for (std::size_t k = 0; k < plan->m; ++k) x[k] *= plan->kernel_fft[k];
    fft_pow2(x, +1);
    const double inv_m = 1.0 / static_cast<double>(plan->m);
    for (std::size_t k = 0; k < n; ++k) a[k] = std::conj(plan->chirp[k]) * (x[k] * inv_m);
}

}  // namespace detail

// Forward DFT, X[k] = sum_n x[n] exp(-2*pi*i*k*n/N). Any length.
inline void fft_inplace(std::vector<cd>& a) {
    if (a.size() < 2) return;
    if (detail::is_pow2(a.size()))
        detail::fft_pow2(a, -1);
    else
        detail::fft_bluestein_forward(a);
}

// Inverse DFT including the 1/N scale.
inline void ifft_inplace(std::vector<cd>& a) {
    const std::size_t n = a.size();
    if (n < 2) return;
    if (detail::is_pow2(n)) {
        detail::fft_pow2(a, +1);
    } else {
        for (auto& v : a) v = std::conj(v);
        detail::fft_bluestein_forward(a);
        for (auto& v : a) v = std::conj(v);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= inv_n;
}

inline std::vector<cd> fft(std::vector<cd> a) {
    fft_inplace(a);
    return a;
}

inline std::vector<cd> ifft(std::vector<cd> a) {
    ifft_inplace(a);
    return a;
}

inline std::vector<cd> fft_real(const std::vector<double>& x) {
    std::vector<cd> a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = cd(x[i], 0.0);
    fft_inplace(a);
    return a;
}

}  // namespace dasforge

#endif
