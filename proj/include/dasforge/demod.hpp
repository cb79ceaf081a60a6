#ifndef DASFORGE_DEMOD_HPP
#define DASFORGE_DEMOD_HPP

#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "dasforge/common.hpp"
#include "dasforge/fft.hpp"
#include "dasforge/parallel.hpp"
#include "dasforge/sim.hpp"

namespace dasforge::demod {

struct BandpassSpec {
    double center_hz = 160e6;
    double bandwidth_hz = 20e6;  // 2 / pulse_width

    void validate(double fast_rate_hz) const {
        if (!(bandwidth_hz > 0.0)) throw ConfigError("bandpass bandwidth must be positive");
        if (!(center_hz - bandwidth_hz / 2.0 > 0.0))
            throw ConfigError("bandpass band extends to or below DC");
        if (!(center_hz + bandwidth_hz / 2.0 < fast_rate_hz / 2.0))
            throw ConfigError("bandpass band extends to or beyond Nyquist");
    }
};

// DFT-domain brick-wall bandpass: bins whose |frequency| lies inside the band
// are kept (both signed bands), everything else is zeroed.
inline std::vector<double> bandpass(const std::vector<double>& row, const BandpassSpec& spec,
                                    double fast_rate_hz) {
    spec.validate(fast_rate_hz);
    if (row.size() < 2) throw ConfigError("bandpass requires at least 2 samples");
    const std::size_t n = row.size();
    std::vector<cd> spectrum = fft_real(row);
    const double f_lo = spec.center_hz - spec.bandwidth_hz / 2.0;
    const double f_hi = spec.center_hz + spec.bandwidth_hz / 2.0;
    const double df = fast_rate_hz / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = df * static_cast<double>(std::min(k, n - k));
        if (f < f_lo || f > f_hi) spectrum[k] = cd(0.0, 0.0);
    }
    ifft_inplace(spectrum);
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = spectrum[k].real();
    return out;
}

// DFT analytic signal: keep DC and Nyquist, double positive frequencies,
// zero negative frequencies. Re(out) equals the input up to rounding.
inline std::vector<cd> analytic_signal(const std::vector<double>& row) {
    if (row.size() < 2) throw ConfigError("analytic_signal requires at least 2 samples");
    const std::size_t n = row.size();
    std::vector<cd> spectrum = fft_real(row);
    const std::size_t half = n / 2;
    for (std::size_t k = 1; k < n; ++k) {
        if (n % 2 == 0 && k == half) continue;  // Nyquist bin untouched
        if (k < half || (n % 2 == 1 && k <= half)) {
            if (k != 0) spectrum[k] *= 2.0;
        } else {
            spectrum[k] = cd(0.0, 0.0);
        }
    }
    ifft_inplace(spectrum);
    return spectrum;
}

using AmplitudeMatrix = RealMatrix;
using PhaseMatrix = RealMatrix;
using DiffAmplitudeMatrix = RealMatrix;
using WrappedPhaseMatrix = RealMatrix;

// Per-row bandpass + analytic signal, then magnitude and carrier-removed
// angle. The returned phase is not wrapped.
inline std::pair<AmplitudeMatrix, PhaseMatrix> demodulate(const sim::RawTraceMatrix& raw,
                                                          const BandpassSpec& spec,
                                                          unsigned threads = 1) {
    const std::size_t rows = raw.data.rows, cols = raw.data.cols;
    const double fast_rate = raw.config.fast_rate_hz;
    spec.validate(fast_rate);
    AmplitudeMatrix amp(rows, cols);
    PhaseMatrix phase(rows, cols);
    parallel_for(rows, threads, [&](std::size_t m) {
        std::vector<double> r(raw.data.row(m), raw.data.row(m) + cols);
        std::vector<double> filtered = bandpass(r, spec, fast_rate);
        std::vector<cd> a = analytic_signal(filtered);
        for (std::size_t i = 0; i < cols; ++i) {
            amp.at(m, i) = std::abs(a[i]);
            const double t = static_cast<double>(i) / fast_rate;
            phase.at(m, i) = std::arg(a[i]) - kTwoPi * spec.center_hz * t;
        }
    });
    return {std::move(amp), std::move(phase)};
}

// Subtract the first trace from every trace; row 0 becomes identically 0.
inline DiffAmplitudeMatrix differential_amplitude(const AmplitudeMatrix& amp) {
    if (amp.rows < 1) throw ConfigError("differential_amplitude requires at least one row");
    DiffAmplitudeMatrix out(amp.rows, amp.cols);
    const double* first = amp.row(0);
    for (std::size_t m = 0; m < amp.rows; ++m) {
        const double* src = amp.row(m);
        double* dst = out.row(m);
        for (std::size_t i = 0; i < amp.cols; ++i) dst[i] = src[i] - first[i];
    }
    return out;
}

// Subtract each trace's first sample, removing the per-trace initial phase
// contributed by the laser source; column 0 becomes identically 0.
inline PhaseMatrix remove_initial_phase(const PhaseMatrix& phase) {
    if (phase.cols < 1) throw ConfigError("remove_initial_phase requires at least one column");
    PhaseMatrix out(phase.rows, phase.cols);
    for (std::size_t m = 0; m < phase.rows; ++m) {
        const double* src = phase.row(m);
        double* dst = out.row(m);
        const double ref = src[0];
        for (std::size_t i = 0; i < phase.cols; ++i) dst[i] = src[i] - ref;
    }
    return out;
}

inline WrappedPhaseMatrix wrap_mod_2pi(const PhaseMatrix& phase) {
    WrappedPhaseMatrix out(phase.rows, phase.cols);
    for (std::size_t i = 0; i < phase.size(); ++i) out.data[i] = wrap_two_pi(phase.data[i]);
    return out;
}

// Standard 1-D unwrap along slow time: each successive difference is shifted
// by a multiple of 2*pi into (-pi, pi]; the first element is preserved.
inline std::vector<double> unwrap_slow_time(const std::vector<double>& column) {
    if (column.size() < 2) throw ConfigError("unwrap_slow_time requires at least 2 samples");
    std::vector<double> out(column.size());
    out[0] = column[0];
    for (std::size_t m = 1; m < column.size(); ++m) {
        double d = column[m] - column[m - 1];
        d -= kTwoPi * std::floor((d + kPi) / kTwoPi);
        if (d <= -kPi) d += kTwoPi;  // keep the (-pi, pi] convention at the boundary
        out[m] = out[m - 1] + d;
    }
    return out;
}

// Full preprocessing chain in the published order: bandpass, analytic
// signal, magnitude/angle with carrier removal, then differential amplitude
// and initial-phase removal, and finally the mod-2pi wrap of the phase.
inline std::pair<DiffAmplitudeMatrix, WrappedPhaseMatrix> preprocess(const sim::RawTraceMatrix& raw,
                                                                     const BandpassSpec& spec,
                                                                     unsigned threads = 1) {
    auto [amp, phase] = demodulate(raw, spec, threads);
    DiffAmplitudeMatrix damp = differential_amplitude(amp);
    PhaseMatrix centered = remove_initial_phase(phase);
    return {std::move(damp), wrap_mod_2pi(centered)};
}

}  // namespace dasforge::demod

#endif
