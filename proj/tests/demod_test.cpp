#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "dasforge/demod.hpp"
#include "dasforge/rng.hpp"
#include "dasforge/sim.hpp"

using namespace dasforge;
using demod::BandpassSpec;

namespace {

constexpr double kFastRate = 1e9;

// integer number of cycles over the window keeps DFT tests exact
std::vector<double> tone(std::size_t n, double cycles, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = std::cos(kTwoPi * cycles * static_cast<double>(i) / static_cast<double>(n) + phase);
    return x;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

sim::RawTraceMatrix wrap_rows(RealMatrix m, double fast_rate) {
    sim::RawTraceMatrix raw;
    raw.config.fast_rate_hz = fast_rate;
    raw.config.fiber_length_m = static_cast<double>(m.cols) * raw.config.sample_spacing_m;
    raw.config.n_traces = m.rows;
    raw.data = std::move(m);
    return raw;
}

sim::SimConfig tiny_config() {
    sim::SimConfig c = sim::desk_preset();
    c.fiber_length_m = 47.0;
    c.pzt_start_m = 23.2;
    c.pzt_end_m = 23.6;
    c.n_traces = 80;
    c.snr_db.reset();
    c.laser_phase_drift = false;
    return c;
}

}  // namespace

TEST(Bandpass, InBandToneUnchanged) {
    const std::size_t n = 1000;
    const auto x = tone(n, 160.0);  // 160 cycles / 1000 samples at 1 GHz = 160 MHz
    const auto y = demod::bandpass(x, BandpassSpec{}, kFastRate);
    ASSERT_EQ(y.size(), n);
    EXPECT_LT(max_abs_diff(x, y), 1e-9);
}

TEST(Bandpass, OutOfBandToneRejected) {
    const std::size_t n = 1000;
    const auto x = tone(n, 40.0);  // f_aom / 4
    const auto y = demod::bandpass(x, BandpassSpec{}, kFastRate);
    for (double v : y) EXPECT_LT(std::abs(v), 1e-9);
}

TEST(Bandpass, SuperpositionKeepsOnlyInBandPart) {
    const std::size_t n = 1000;
    const auto in_band = tone(n, 165.0);
    const auto out_band = tone(n, 40.0, 0.3);
    std::vector<double> both(n);
    for (std::size_t i = 0; i < n; ++i) both[i] = in_band[i] + out_band[i];
    const auto y = demod::bandpass(both, BandpassSpec{}, kFastRate);
    EXPECT_LT(max_abs_diff(y, in_band), 1e-9);
}

TEST(Bandpass, WorksOnNonPowerOfTwoLength) {
    const std::size_t n = 470;
    const auto x = tone(n, 75.0);  // 75/470 * 1 GHz = 159.57 MHz, in band
    const auto y = demod::bandpass(x, BandpassSpec{}, kFastRate);
    EXPECT_LT(max_abs_diff(x, y), 1e-9);
}

TEST(Bandpass, RejectsBandOutsideNyquist) {
    const auto x = tone(64, 10.0);
    EXPECT_THROW(demod::bandpass(x, BandpassSpec{480e6, 60e6}, kFastRate), ConfigError);
    EXPECT_THROW(demod::bandpass(x, BandpassSpec{5e6, 20e6}, kFastRate), ConfigError);
    EXPECT_THROW(demod::bandpass(x, BandpassSpec{160e6, -1.0}, kFastRate), ConfigError);
}

TEST(AnalyticSignal, IntegerCycleCosineBecomesComplexExponential) {
    const std::size_t n = 8;
    const auto x = tone(n, 1.0);
    const auto a = demod::analytic_signal(x);
    for (std::size_t i = 0; i < n; ++i) {
        const double ang = kTwoPi * static_cast<double>(i) / static_cast<double>(n);
        EXPECT_NEAR(std::abs(a[i]), 1.0, 1e-9);
        EXPECT_NEAR(a[i].real(), std::cos(ang), 1e-9);
        EXPECT_NEAR(a[i].imag(), std::sin(ang), 1e-9);  // Hilbert pair of cos
    }
}

TEST(AnalyticSignal, RealPartReproducesInput) {
    Rng rng(60);
    for (std::size_t n : {64u, 255u}) {
        std::vector<double> x(n);
        for (auto& v : x) v = rng.normal();
        const auto a = demod::analytic_signal(x);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(a[i].real(), x[i], 1e-9);
    }
}

TEST(AnalyticSignal, RejectsTooShortInput) {
    EXPECT_THROW(demod::analytic_signal({}), ConfigError);
    EXPECT_THROW(demod::analytic_signal({1.0}), ConfigError);
}

TEST(Demodulate, ConstantPhaseOffsetRecoveredEverywhere) {
    const std::size_t n = 1000;
    RealMatrix m(2, n);
    const auto x = tone(n, 160.0, 0.7);
    for (std::size_t r = 0; r < 2; ++r)
        std::copy(x.begin(), x.end(), m.row(r));
    const auto raw = wrap_rows(std::move(m), kFastRate);
    const auto [amp, phase] = demod::demodulate(raw, BandpassSpec{});
    for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(amp.at(0, i), 1.0, 1e-9);
        const double w = wrap_two_pi(phase.at(0, i) - 0.7);
        EXPECT_NEAR(std::min(w, kTwoPi - w), 0.0, 1e-9) << "i=" << i;  // circular distance
    }
}

TEST(Demodulate, KnownEnvelopeRecoveredAwayFromEdges) {
    const std::size_t n = 1000;
    RealMatrix m(2, n);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = 1.0 + 0.3 * std::sin(kTwoPi * 3.0 * static_cast<double>(i) / static_cast<double>(n));
        const double carrier = std::cos(kTwoPi * 160.0 * static_cast<double>(i) / static_cast<double>(n));
        m.at(0, i) = m.at(1, i) = g[i] * carrier;
    }
    const auto raw = wrap_rows(std::move(m), kFastRate);
    const auto [amp, phase] = demod::demodulate(raw, BandpassSpec{});
    for (std::size_t i = n / 100; i < n - n / 100; ++i)
        EXPECT_NEAR(amp.at(0, i), g[i], 0.01 * g[i]) << "i=" << i;
}

TEST(Demodulate, StaticFiberGivesIdenticalAmplitudeRows) {
    const auto c = tiny_config();
    const auto rec = sim::synthesize(c, sim::build_scatterers(c), std::nullopt);
    const auto [amp, phase] = demod::demodulate(rec, BandpassSpec{});
    for (std::size_t m = 1; m < amp.rows; ++m)
        for (std::size_t i = 0; i < amp.cols; ++i) ASSERT_EQ(amp.at(m, i), amp.at(0, i));
}

TEST(Demodulate, AmplitudeNonNegative) {
    auto c = tiny_config();
    c.snr_db = 20.0;
    c.laser_phase_drift = true;
    const auto rec = sim::synthesize(c, sim::build_scatterers(c), sim::EventLabel{1.0, 100.0});
    const auto [amp, phase] = demod::demodulate(rec, BandpassSpec{});
    for (double v : amp.data) ASSERT_GE(v, 0.0);
}

TEST(DifferentialAmplitude, HandValueAndZeroFirstRow) {
    RealMatrix amp(2, 2);
    amp.at(0, 0) = 1.0;
    amp.at(0, 1) = 2.0;
    amp.at(1, 0) = 4.0;
    amp.at(1, 1) = 6.0;
    const auto d = demod::differential_amplitude(amp);
    EXPECT_EQ(d.at(0, 0), 0.0);
    EXPECT_EQ(d.at(0, 1), 0.0);
    EXPECT_EQ(d.at(1, 0), 3.0);
    EXPECT_EQ(d.at(1, 1), 4.0);
}

TEST(DifferentialAmplitude, IdenticalRowsGiveZeroMatrix) {
    RealMatrix amp(3, 4);
    for (std::size_t m = 0; m < 3; ++m)
        for (std::size_t i = 0; i < 4; ++i) amp.at(m, i) = static_cast<double>(i) + 0.5;
    const auto d = demod::differential_amplitude(amp);
    for (double v : d.data) EXPECT_EQ(v, 0.0);
}

TEST(DifferentialAmplitude, ReapplicationIsIdentity) {
    Rng rng(61);
    RealMatrix amp(4, 6);
    for (auto& v : amp.data) v = rng.uniform();
    const auto once = demod::differential_amplitude(amp);
    const auto twice = demod::differential_amplitude(once);
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(twice.data[i], once.data[i]);
}

TEST(RemoveInitialPhase, HandValueAndZeroFirstColumn) {
    RealMatrix phase(2, 2);
    phase.at(0, 0) = 0.5;
    phase.at(0, 1) = 1.5;
    phase.at(1, 0) = 1.0;
    phase.at(1, 1) = 3.0;
    const auto out = demod::remove_initial_phase(phase);
    EXPECT_EQ(out.at(0, 0), 0.0);
    EXPECT_EQ(out.at(0, 1), 1.0);
    EXPECT_EQ(out.at(1, 0), 0.0);
    EXPECT_EQ(out.at(1, 1), 2.0);
}

TEST(RemoveInitialPhase, CancelsPerRowConstantOffsets) {
    Rng rng(62);
    RealMatrix phase(5, 9);
    for (auto& v : phase.data) v = rng.normal();
    RealMatrix shifted = phase;
    for (std::size_t m = 0; m < phase.rows; ++m) {
        const double theta = rng.uniform(0.0, kTwoPi);
        for (std::size_t i = 0; i < phase.cols; ++i) shifted.at(m, i) += theta;
    }
    const auto a = demod::remove_initial_phase(phase);
    const auto b = demod::remove_initial_phase(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data[i], b.data[i], 1e-12);
}

TEST(RemoveInitialPhase, ReapplicationIsIdentity) {
    Rng rng(63);
    RealMatrix phase(4, 6);
    for (auto& v : phase.data) v = rng.normal();
    const auto once = demod::remove_initial_phase(phase);
    const auto twice = demod::remove_initial_phase(once);
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(twice.data[i], once.data[i]);
}

TEST(WrapMod2Pi, PinnedValuesAndRange) {
    RealMatrix phase(1, 3);
    phase.data = {3.0 * kPi, -kPi / 2.0, kTwoPi};
    const auto w = demod::wrap_mod_2pi(phase);
    EXPECT_NEAR(w.data[0], kPi, 1e-12);
    EXPECT_NEAR(w.data[1], 3.0 * kPi / 2.0, 1e-12);
    EXPECT_NEAR(w.data[2], 0.0, 1e-12);

    Rng rng(64);
    RealMatrix big(3, 50);
    for (auto& v : big.data) v = rng.uniform(-50.0, 50.0);
    const auto wb = demod::wrap_mod_2pi(big);
    for (std::size_t i = 0; i < big.size(); ++i) {
        EXPECT_GE(wb.data[i], 0.0);
        EXPECT_LT(wb.data[i], kTwoPi);
        const double k = (big.data[i] - wb.data[i]) / kTwoPi;
        EXPECT_NEAR(k, std::round(k), 1e-9);  // differs by an exact multiple of 2 pi
    }
}

TEST(UnwrapSlowTime, SmoothSequenceUnchanged) {
    std::vector<double> x(20);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * static_cast<double>(i);
    const auto u = demod::unwrap_slow_time(x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(u[i], x[i], 1e-12);
}

TEST(UnwrapSlowTime, HandUnwrapOfWrappedRamp) {
    const std::vector<double> wrapped{0.0, wrap_two_pi(-0.1), wrap_two_pi(-0.2)};
    const auto u = demod::unwrap_slow_time(wrapped);
    EXPECT_NEAR(u[0], 0.0, 1e-12);
    EXPECT_NEAR(u[1], -0.1, 1e-12);
    EXPECT_NEAR(u[2], -0.2, 1e-12);
}

TEST(UnwrapSlowTime, RoundTripUpToGlobalMultipleOf2Pi) {
    Rng rng(65);
    std::vector<double> x(200);
    x[0] = 12.0;  // starts away from [0, 2 pi)
    for (std::size_t i = 1; i < x.size(); ++i) x[i] = x[i - 1] + rng.uniform(-3.0, 3.0);
    std::vector<double> wrapped(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) wrapped[i] = wrap_two_pi(x[i]);
    const auto u = demod::unwrap_slow_time(wrapped);
    const double shift = u[0] - x[0];
    EXPECT_NEAR(shift / kTwoPi, std::round(shift / kTwoPi), 1e-9);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(u[i] - x[i], shift, 1e-9);
}

TEST(Preprocess, MatchesManualCompositionBitwise) {
    auto c = tiny_config();
    c.snr_db = 20.0;
    c.laser_phase_drift = true;
    const auto rec = sim::synthesize(c, sim::build_scatterers(c), sim::EventLabel{2.0, 500.0});
    const BandpassSpec spec{};
    const auto [damp, wphase] = demod::preprocess(rec, spec);

    const auto [amp, phase] = demod::demodulate(rec, spec);
    const auto damp2 = demod::differential_amplitude(amp);
    const auto wphase2 = demod::wrap_mod_2pi(demod::remove_initial_phase(phase));
    for (std::size_t i = 0; i < damp.size(); ++i) ASSERT_EQ(damp.data[i], damp2.data[i]);
    for (std::size_t i = 0; i < wphase.size(); ++i) ASSERT_EQ(wphase.data[i], wphase2.data[i]);
}

TEST(Preprocess, OutputContracts) {
    auto c = tiny_config();
    c.laser_phase_drift = true;
    const auto rec = sim::synthesize(c, sim::build_scatterers(c), sim::EventLabel{1.0, 1000.0});
    const auto [damp, wphase] = demod::preprocess(rec, BandpassSpec{});
    EXPECT_EQ(damp.rows, c.n_traces);
    EXPECT_EQ(wphase.cols, c.n_samples());
    for (std::size_t i = 0; i < damp.cols; ++i) EXPECT_EQ(damp.at(0, i), 0.0);
    for (std::size_t m = 0; m < wphase.rows; ++m) EXPECT_EQ(wphase.at(m, 0), 0.0);
    for (double v : wphase.data) {
        ASSERT_GE(v, 0.0);
        ASSERT_LT(v, kTwoPi);
    }
}

TEST(Preprocess, RecoversEventToneAcrossPzt) {
    // Cross-PZT unwrapped phase difference carries the drive waveform: exact
    // peak bin and amplitude within 10% of k_pzt * A. Pickup columns clear the
    // pulse window (10.2 m) and the bandpass smear (~5 m) behind the PZT.
    auto c = tiny_config();  // noise-free, drift off, 80 traces
    c.laser_phase_drift = true;
    const sim::EventLabel event{2.0, 500.0};
    const auto rec = sim::synthesize(c, sim::build_scatterers(c), event);
    const auto [damp, wphase] = demod::preprocess(rec, BandpassSpec{});

    const auto col_at = [&](double z_m) {
        return static_cast<std::size_t>(std::llround(z_m / c.sample_spacing_m));
    };
    const std::size_t before = col_at(c.pzt_start_m - 8.0);
    const std::size_t after = col_at(c.pzt_end_m + 2.0 * c.pulse_window_m());
    ASSERT_LT(after, c.n_samples());

    std::vector<double> cb(c.n_traces), ca(c.n_traces);
    for (std::size_t m = 0; m < c.n_traces; ++m) {
        cb[m] = wphase.at(m, before);
        ca[m] = wphase.at(m, after);
    }
    const auto ub = demod::unwrap_slow_time(cb);
    const auto ua = demod::unwrap_slow_time(ca);
    std::vector<double> diff(c.n_traces);
    double mean = 0.0;
    for (std::size_t m = 0; m < c.n_traces; ++m) mean += (diff[m] = ua[m] - ub[m]);
    mean /= static_cast<double>(c.n_traces);
    for (auto& v : diff) v -= mean;

    // peak bin over 1..N/2
    const std::size_t n = c.n_traces;
    std::size_t peak = 1;
    double best = -1.0;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        cd acc(0.0, 0.0);
        for (std::size_t m = 0; m < n; ++m) {
            const double ang = -kTwoPi * static_cast<double>(k * m) / static_cast<double>(n);
            acc += diff[m] * cd(std::cos(ang), std::sin(ang));
        }
        if (std::norm(acc) > best) {
            best = std::norm(acc);
            peak = k;
        }
    }
    const auto want_bin = static_cast<std::size_t>(
        std::llround(event.frequency_hz * static_cast<double>(n) / c.prf_hz));
    EXPECT_EQ(peak, want_bin);

    // least-squares sinusoid at the drive frequency
    double ss = 0.0, sc = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
        const double t = static_cast<double>(m) / c.prf_hz;
        ss += diff[m] * std::sin(kTwoPi * event.frequency_hz * t);
        sc += diff[m] * std::cos(kTwoPi * event.frequency_hz * t);
    }
    const double fitted = 2.0 * std::hypot(ss, sc) / static_cast<double>(n);
    const double want = c.k_pzt_rad_per_volt * event.amplitude_v;
    EXPECT_NEAR(fitted, want, 0.10 * want);
}
