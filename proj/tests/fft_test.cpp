#include <gtest/gtest.h>

#include <complex>
#include <vector>

#include "dasforge/fft.hpp"
#include "dasforge/rng.hpp"
#include "oracles.hpp"

using namespace dasforge;

namespace {

std::vector<cd> random_signal(std::size_t n, Rng& rng) {
    std::vector<cd> x(n);
    for (auto& v : x) v = cd(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    return x;
}

double max_abs_diff(const std::vector<cd>& a, const std::vector<cd>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Radix-2 path, Bluestein path (prime, odd-composite), and the live trace length.
const std::size_t kSizes[] = {1, 2, 3, 7, 8, 12, 64, 100, 235, 256, 4700};

}  // namespace

TEST(Fft, MatchesDirectSummation) {
    for (std::size_t n : kSizes) {
        Rng rng(derive_seed(40, "fft.direct", n));
        const auto x = random_signal(n, rng);
        const auto got = fft(x);
        const auto want = oracles::naive_dft(x, -1);
        EXPECT_LT(max_abs_diff(got, want), 1e-7 * static_cast<double>(n) + 1e-12) << "n=" << n;
    }
}

TEST(Fft, ImpulseGivesFlatSpectrum) {
    std::vector<cd> x(12, cd(0.0, 0.0));
    x[0] = cd(1.0, 0.0);
    const auto X = fft(x);
    for (const auto& v : X) EXPECT_NEAR(std::abs(v - cd(1.0, 0.0)), 0.0, 1e-12);
}

TEST(Fft, SingleToneConcentratesInOneBin) {
    const std::size_t n = 45;
    const std::size_t bin = 7;
    std::vector<cd> x(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double ang = kTwoPi * static_cast<double>(bin * t) / static_cast<double>(n);
        x[t] = cd(std::cos(ang), std::sin(ang));
    }
    const auto X = fft(x);
    for (std::size_t k = 0; k < n; ++k) {
        const double want = k == bin ? static_cast<double>(n) : 0.0;
        EXPECT_NEAR(std::abs(X[k]), want, 1e-9) << "k=" << k;
    }
}

TEST(Fft, LinearInItsInput) {
    const std::size_t n = 30;
    Rng rng(41);
    const auto x = random_signal(n, rng);
    const auto y = random_signal(n, rng);
    std::vector<cd> z(n);
    const cd a(1.7, -0.3), b(-0.8, 2.1);
    for (std::size_t i = 0; i < n; ++i) z[i] = a * x[i] + b * y[i];
    const auto X = fft(x), Y = fft(y), Z = fft(z);
    for (std::size_t k = 0; k < n; ++k)
        EXPECT_NEAR(std::abs(Z[k] - (a * X[k] + b * Y[k])), 0.0, 1e-10);
}

TEST(Fft, InverseUndoesForward) {
    for (std::size_t n : kSizes) {
        Rng rng(derive_seed(42, "fft.round", n));
        const auto x = random_signal(n, rng);
        const auto back = ifft(fft(x));
        EXPECT_LT(max_abs_diff(back, x), 1e-9) << "n=" << n;
    }
}

TEST(Fft, ParsevalEnergyMatch) {
    for (std::size_t n : {16u, 23u, 100u}) {
        Rng rng(derive_seed(43, "fft.parseval", n));
        const auto x = random_signal(n, rng);
        const auto X = fft(x);
        double et = 0.0, ef = 0.0;
        for (const auto& v : x) et += std::norm(v);
        for (const auto& v : X) ef += std::norm(v);
        EXPECT_NEAR(et, ef / static_cast<double>(n), 1e-9 * et);
    }
}

TEST(Fft, RealInputHasHermitianSpectrum) {
    const std::size_t n = 50;
    Rng rng(44);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    const auto X = fft_real(x);
    ASSERT_EQ(X.size(), n);
    for (std::size_t k = 1; k < n; ++k)
        EXPECT_NEAR(std::abs(X[k] - std::conj(X[n - k])), 0.0, 1e-10);
}

TEST(Fft, TinySizesAreIdentityOrSum) {
    std::vector<cd> one{cd(3.5, -2.0)};
    EXPECT_EQ(fft(one)[0], one[0]);
    std::vector<cd> two{cd(1.0, 0.0), cd(2.0, 0.0)};
    const auto X = fft(two);
    EXPECT_NEAR(std::abs(X[0] - cd(3.0, 0.0)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(X[1] - cd(-1.0, 0.0)), 0.0, 1e-12);
    std::vector<cd> empty;
    EXPECT_TRUE(fft(empty).empty());
}
