#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <set>
#include <vector>

#include "dasforge/fft.hpp"
#include "dasforge/sim.hpp"
#include "oracles.hpp"

using namespace dasforge;
using sim::EventLabel;
using sim::SimConfig;

namespace {

// Shrunk geometry: full desk column arithmetic is exercised in the
// acceptance suite, these tests want fast synthesis.
SimConfig tiny_config() {
    SimConfig c = sim::desk_preset();
    c.fiber_length_m = 47.0;
    c.pzt_start_m = 23.2;
    c.pzt_end_m = 23.6;
    c.n_traces = 64;
    c.snr_db.reset();
    c.laser_phase_drift = false;
    return c;
}

}  // namespace

TEST(EventLabel, ClassIndexRoundTripsAllFifteen) {
    std::set<int> seen;
    for (int c = 0; c < EventLabel::n_classes; ++c) {
        const EventLabel e = EventLabel::from_class(c);
        EXPECT_EQ(e.class_index(), c);
        seen.insert(c);
        EXPECT_TRUE(std::find(EventLabel::amplitudes().begin(), EventLabel::amplitudes().end(),
                              e.amplitude_v) != EventLabel::amplitudes().end());
        EXPECT_TRUE(std::find(EventLabel::frequencies().begin(), EventLabel::frequencies().end(),
                              e.frequency_hz) != EventLabel::frequencies().end());
    }
    EXPECT_EQ(seen.size(), 15u);
}

TEST(EventLabel, RejectsOutOfGridValues) {
    EXPECT_THROW(EventLabel::from_class(-1), ConfigError);
    EXPECT_THROW(EventLabel::from_class(15), ConfigError);
    EXPECT_THROW((EventLabel{1.5, 50.0}.class_index()), ConfigError);
    EXPECT_THROW((EventLabel{1.0, 60.0}.class_index()), ConfigError);
}

TEST(SimConfig, DeskPresetColumnArithmetic) {
    const SimConfig c = sim::desk_preset();
    EXPECT_EQ(c.n_samples(), 4700u);
    EXPECT_EQ(c.n_traces, 256u);
    // 100 ns pulse in glass: half-extent c/n * tau / 2 = 10.2 m
    EXPECT_NEAR(c.pulse_window_m(), 10.2, 0.15);
    EXPECT_NEAR(c.pzt_start_m / c.sample_spacing_m, 2320.0, 1e-9);
    EXPECT_NEAR(c.pzt_end_m / c.sample_spacing_m, 2360.0, 1e-9);
}

TEST(SimConfig, ValidateRejectsDegenerateInput) {
    SimConfig c = tiny_config();
    c.scatterers_per_cell = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny_config();
    c.pzt_start_m = c.pzt_end_m;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny_config();
    c.f_aom_hz = c.fast_rate_hz;  // at/above fast-time Nyquist
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny_config();
    c.n_traces = 1;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Scatterers, DeterministicFromSeed) {
    SimConfig c = tiny_config();
    c.seed = 7;
    const auto a = sim::build_scatterers(c);
    const auto b = sim::build_scatterers(c);
    ASSERT_EQ(a.position_m.size(), b.position_m.size());
    for (std::size_t i = 0; i < a.position_m.size(); ++i) {
        ASSERT_EQ(a.position_m[i], b.position_m[i]);
        ASSERT_EQ(a.reflectivity[i], b.reflectivity[i]);
        ASSERT_EQ(a.intrinsic_phase[i], b.intrinsic_phase[i]);
    }
    c.seed = 8;
    const auto other = sim::build_scatterers(c);
    bool differs = false;
    for (std::size_t i = 0; i < a.position_m.size(); ++i)
        if (a.position_m[i] != other.position_m[i]) differs = true;
    EXPECT_TRUE(differs);
}

TEST(Scatterers, CellCountAndValueRanges) {
    const SimConfig c = tiny_config();
    const auto f = sim::build_scatterers(c);
    EXPECT_EQ(f.n_cells, c.n_samples());
    EXPECT_EQ(f.position_m.size(), f.n_cells * c.scatterers_per_cell);
    for (std::size_t cell = 0; cell < f.n_cells; ++cell) {
        const double z0 = static_cast<double>(cell) * c.sample_spacing_m;
        for (std::size_t k = 0; k < f.per_cell; ++k) {
            const std::size_t i = cell * f.per_cell + k;
            EXPECT_GE(f.position_m[i], z0);
            EXPECT_LT(f.position_m[i], z0 + c.sample_spacing_m);
            EXPECT_GE(f.reflectivity[i], 0.0);
            EXPECT_GE(f.intrinsic_phase[i], 0.0);
            EXPECT_LT(f.intrinsic_phase[i], kTwoPi);
            if (k > 0) {
                EXPECT_LE(f.position_m[i - 1], f.position_m[i]);
            }
        }
    }
}

TEST(Scatterers, DeskPresetHas4700Cells) {
    EXPECT_EQ(sim::build_scatterers(sim::desk_preset()).n_cells, 4700u);
}

TEST(IdealWaveform, ZeroAmplitudeIsAllZeros) {
    const SimConfig c = tiny_config();
    const auto w = sim::ideal_phase_waveform(EventLabel{0.0, 50.0}, c);
    ASSERT_EQ(w.size(), c.n_traces);
    for (double v : w) EXPECT_EQ(v, 0.0);
}

TEST(IdealWaveform, HandValueAtQuarterPeriod) {
    SimConfig c = tiny_config();
    c.prf_hz = 2e4;
    c.n_traces = 128;
    // m=100: t = 5 ms, sin(2*pi*50*0.005) = sin(pi/2) = 1
    const auto w = sim::ideal_phase_waveform(EventLabel{1.0, 50.0}, c);
    EXPECT_NEAR(w[100], c.k_pzt_rad_per_volt, 1e-12);
}

TEST(IdealWaveform, DftPeakAtExpectedBin) {
    SimConfig c = tiny_config();
    c.n_traces = 256;
    for (int cls = 0; cls < EventLabel::n_classes; ++cls) {
        const EventLabel e = EventLabel::from_class(cls);
        const auto w = sim::ideal_phase_waveform(e, c);
        std::vector<cd> x(w.begin(), w.end());
        const auto X = oracles::naive_dft(x, -1);
        std::size_t peak = 1;
        for (std::size_t k = 1; k <= c.n_traces / 2; ++k)
            if (std::abs(X[k]) > std::abs(X[peak])) peak = k;
        const auto want = static_cast<std::size_t>(
            std::llround(e.frequency_hz * static_cast<double>(c.n_traces) / c.prf_hz));
        EXPECT_EQ(peak, want) << "class " << cls;
    }
}

TEST(Synthesize, ShapeFinitenessAndConfigEcho) {
    const SimConfig c = tiny_config();
    const auto field = sim::build_scatterers(c);
    const auto rec = sim::synthesize(c, field, EventLabel{2.0, 500.0});
    EXPECT_EQ(rec.data.rows, c.n_traces);
    EXPECT_EQ(rec.data.cols, c.n_samples());
    for (double v : rec.data.data) ASSERT_TRUE(std::isfinite(v));
    ASSERT_TRUE(rec.label.has_value());
    EXPECT_EQ(rec.label->class_index(), (EventLabel{2.0, 500.0}.class_index()));
    EXPECT_EQ(rec.config.n_traces, c.n_traces);
}

TEST(Synthesize, QuietFiberGivesIdenticalRows) {
    SimConfig c = tiny_config();  // noise off, drift off
    const auto field = sim::build_scatterers(c);
    const auto rec = sim::synthesize(c, field, std::nullopt);
    const double* row0 = rec.data.row(0);
    for (std::size_t m = 1; m < rec.data.rows; ++m) {
        const double* row = rec.data.row(m);
        for (std::size_t i = 0; i < rec.data.cols; ++i) ASSERT_EQ(row[i], row0[i]);
    }
}

TEST(Synthesize, DeterministicWithNoiseAndDrift) {
    SimConfig c = tiny_config();
    c.snr_db = 20.0;
    c.laser_phase_drift = true;
    const auto field = sim::build_scatterers(c);
    const auto a = sim::synthesize(c, field, EventLabel{1.0, 100.0});
    const auto b = sim::synthesize(c, field, EventLabel{1.0, 100.0});
    for (std::size_t i = 0; i < a.data.data.size(); ++i) ASSERT_EQ(a.data.data[i], b.data.data[i]);
}

TEST(Synthesize, ThreadCountDoesNotChangeOutput) {
    SimConfig c = tiny_config();
    c.snr_db = 20.0;
    c.laser_phase_drift = true;
    const auto field = sim::build_scatterers(c);
    const auto one = sim::synthesize(c, field, EventLabel{3.0, 200.0}, 1);
    const auto four = sim::synthesize(c, field, EventLabel{3.0, 200.0}, 4);
    for (std::size_t i = 0; i < one.data.data.size(); ++i)
        ASSERT_EQ(one.data.data[i], four.data.data[i]);
}

TEST(Synthesize, RejectsSlowTimeAliasedEvent) {
    SimConfig c = tiny_config();
    c.prf_hz = 1800.0;  // Nyquist 900 Hz < 1000 Hz event
    const auto field = sim::build_scatterers(c);
    EXPECT_THROW(sim::synthesize(c, field, EventLabel{1.0, 1000.0}), ConfigError);
}

TEST(Synthesize, RejectsMismatchedField) {
    const SimConfig c = tiny_config();
    SimConfig other = c;
    other.fiber_length_m = 94.0;
    const auto field = sim::build_scatterers(other);
    EXPECT_THROW(sim::synthesize(c, field, std::nullopt), ConfigError);
}

TEST(Synthesize, DriftRotatesRowsOfQuietFiber) {
    SimConfig c = tiny_config();
    c.laser_phase_drift = true;
    const auto field = sim::build_scatterers(c);
    const auto rec = sim::synthesize(c, field, std::nullopt);
    // same fiber state, different carrier offset: rows must differ
    bool differs = false;
    const double* row0 = rec.data.row(0);
    const double* row1 = rec.data.row(1);
    for (std::size_t i = 0; i < rec.data.cols; ++i)
        if (row0[i] != row1[i]) differs = true;
    EXPECT_TRUE(differs);
}

TEST(Synthesize, CarrierEnergyConcentratesNearAom) {
    // Rectangular pulse => sinc^2 speckle spectrum: >= 99% of row energy within
    // +/-100 MHz of the 160 MHz carrier, and the 20 MHz bandpass band still
    // dominates (>= 85%). Needs the full-length fiber: a short one spends a
    // visible fraction of the row inside the broadband pulse ramp-in.
    SimConfig c = sim::desk_preset();
    c.snr_db.reset();
    c.laser_phase_drift = false;
    c.n_traces = 2;
    const auto field = sim::build_scatterers(c);
    const auto rec = sim::synthesize(c, field, std::nullopt);

    const std::size_t n = rec.data.cols;
    std::vector<double> row(rec.data.row(0), rec.data.row(0) + n);
    const auto X = fft_real(row);
    const double bin_hz = c.fast_rate_hz / static_cast<double>(n);

    double total = 0.0, wide = 0.0, band = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        // signed frequency of bin k
        const double f = (k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n)) * bin_hz;
        const double e = std::norm(X[k]);
        total += e;
        if (std::abs(std::abs(f) - c.f_aom_hz) <= 100e6) wide += e;
        if (std::abs(std::abs(f) - c.f_aom_hz) <= 10e6) band += e;
    }
    EXPECT_GT(wide / total, 0.99);
    EXPECT_GT(band / total, 0.85);
}

TEST(Synthesize, SnrControlsResidualPower) {
    // difference between noisy and noise-free equals the injected noise;
    // its power must track the requested SNR within a few percent
    SimConfig c = tiny_config();
    const auto field = sim::build_scatterers(c);
    const auto clean = sim::synthesize(c, field, std::nullopt);
    c.snr_db = 20.0;
    const auto noisy = sim::synthesize(c, field, std::nullopt);

    double sig = 0.0, noise = 0.0;
    for (std::size_t i = 0; i < clean.data.data.size(); ++i) {
        sig += clean.data.data[i] * clean.data.data[i];
        const double d = noisy.data.data[i] - clean.data.data[i];
        noise += d * d;
    }
    const double snr_db = 10.0 * std::log10(sig / noise);
    EXPECT_NEAR(snr_db, 20.0, 0.2);
}
