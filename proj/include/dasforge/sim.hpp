#ifndef DASFORGE_SIM_HPP
#define DASFORGE_SIM_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dasforge/common.hpp"
#include "dasforge/parallel.hpp"
#include "dasforge/rng.hpp"

namespace dasforge::sim {

// One of the 15 PZT drive settings: amplitude in {1,2,3} V crossed with
// frequency in {50,100,200,500,1000} Hz.
struct EventLabel {
    double amplitude_v = 1.0;
    double frequency_hz = 50.0;

    static const std::vector<double>& amplitudes() {
        static const std::vector<double> a{1.0, 2.0, 3.0};
        return a;
    }
    static const std::vector<double>& frequencies() {
        static const std::vector<double> f{50.0, 100.0, 200.0, 500.0, 1000.0};
        return f;
    }
    static constexpr int n_classes = 15;

    static EventLabel from_class(int class_index) {
        if (class_index < 0 || class_index >= n_classes)
            throw ConfigError("class_index out of range: " + std::to_string(class_index));
        return EventLabel{amplitudes()[class_index / 5], frequencies()[class_index % 5]};
    }

    int class_index() const {
        int ai = -1, fi = -1;
        for (int i = 0; i < 3; ++i)
            if (amplitudes()[i] == amplitude_v) ai = i;
        for (int i = 0; i < 5; ++i)
            if (frequencies()[i] == frequency_hz) fi = i;
        if (ai < 0 || fi < 0)
            throw ConfigError("event (" + std::to_string(amplitude_v) + " V, " +
                              std::to_string(frequency_hz) + " Hz) is not one of the 15 classes");
        return 5 * ai + fi;
    }
};

struct SimConfig {
    double fiber_length_m = 4700.0;
    double sample_spacing_m = 0.1;
    double fast_rate_hz = 1e9;
    double prf_hz = 2e4;
    std::size_t n_traces = 600;
    double pulse_width_s = 100e-9;
    double f_aom_hz = 160e6;
    double wavelength_m = 1552.51e-9;
    double pzt_start_m = 2320.0;
    double pzt_end_m = 2360.0;
    double k_pzt_rad_per_volt = 2.0;
    std::optional<double> snr_db;      // absent -> noise-free
    bool laser_phase_drift = true;
    std::size_t scatterers_per_cell = 10;
    std::uint64_t seed = 1;

    std::size_t n_samples() const {
        return static_cast<std::size_t>(std::llround(fiber_length_m / sample_spacing_m));
    }

    // Half-pulse extent along the fiber; scatterers within this window behind
    // a sampling position interfere in that sample.
    double pulse_window_m() const {
        return pulse_width_s * (kSpeedOfLight / kFiberIndex) / 2.0;
    }

    void validate() const {
        if (!(fiber_length_m > 0.0) || !(sample_spacing_m > 0.0))
            throw ConfigError("fiber_length_m and sample_spacing_m must be positive");
        if (n_samples() == 0) throw ConfigError("n_samples must be > 0");
        if (n_traces < 2) throw ConfigError("n_traces must be >= 2");
        if (!(0.0 <= pzt_start_m && pzt_start_m < pzt_end_m && pzt_end_m <= fiber_length_m))
            throw ConfigError("require 0 <= pzt_start_m < pzt_end_m <= fiber_length_m");
        if (!(f_aom_hz < fast_rate_hz / 2.0))
            throw ConfigError("f_aom_hz must lie below the fast-time Nyquist rate");
        if (scatterers_per_cell == 0) throw ConfigError("scatterers_per_cell must be >= 1");
        if (!(prf_hz > 0.0) || !(fast_rate_hz > 0.0) || !(pulse_width_s > 0.0) ||
            !(wavelength_m > 0.0))
            throw ConfigError("rates, pulse width and wavelength must be positive");
    }
};

// Desk preset: 1/10-scale fiber with identical column arithmetic (PZT sits at
// one tenth of the distance, same sample spacing and carrier).
inline SimConfig desk_preset() {
    SimConfig c;
    c.fiber_length_m = 470.0;
    c.pzt_start_m = 232.0;
    c.pzt_end_m = 236.0;
    c.n_traces = 256;
    c.snr_db = 20.0;
    return c;
}

// Full-scale preset matching the acquisition geometry: 4.7 km fiber, PZT on
// 2320..2360 m, 30 ms slow-time window at 20 kHz PRF.
inline SimConfig full_preset() {
    SimConfig c;
    c.snr_db = 20.0;
    return c;
}

// Discrete random scatterers, one cell per spatial sample. Positions are
// kept sorted along the fiber.
struct ScattererField {
    std::size_t n_cells = 0;
    std::size_t per_cell = 0;
    std::vector<double> position_m;     // sorted ascending
    std::vector<double> reflectivity;   // Rayleigh magnitudes, >= 0
    std::vector<double> intrinsic_phase;// uniform [0, 2pi)
};

inline ScattererField build_scatterers(const SimConfig& config) {
    config.validate();
    ScattererField field;
    field.n_cells = config.n_samples();
    field.per_cell = config.scatterers_per_cell;
    const std::size_t total = field.n_cells * field.per_cell;
    field.position_m.resize(total);
    field.reflectivity.resize(total);
    field.intrinsic_phase.resize(total);

    Rng rng(derive_seed(config.seed, "scatterers"));
    for (std::size_t cell = 0; cell < field.n_cells; ++cell) {
        const double z0 = static_cast<double>(cell) * config.sample_spacing_m;
        for (std::size_t k = 0; k < field.per_cell; ++k) {
            const std::size_t i = cell * field.per_cell + k;
            field.position_m[i] = z0 + rng.uniform() * config.sample_spacing_m;
            field.reflectivity[i] = rng.rayleigh(1.0);
            field.intrinsic_phase[i] = rng.uniform() * kTwoPi;
        }
        std::sort(field.position_m.begin() + static_cast<std::ptrdiff_t>(cell * field.per_cell),
                  field.position_m.begin() + static_cast<std::ptrdiff_t>((cell + 1) * field.per_cell));
    }
    return field;
}

struct RawTraceMatrix {
    RealMatrix data;                 // n_traces x n_samples
    SimConfig config;
    std::optional<EventLabel> label;
};

// Ground-truth PZT phase waveform, k_pzt * A * sin(2 pi f m / prf). Total in
// (event, config); grid membership is the labeling layer's concern.
inline std::vector<double> ideal_phase_waveform(const EventLabel& event, const SimConfig& config) {
    std::vector<double> w(config.n_traces);
    const double amp = config.k_pzt_rad_per_volt * event.amplitude_v;
    for (std::size_t m = 0; m < config.n_traces; ++m) {
        const double t = static_cast<double>(m) / config.prf_hz;
        w[m] = amp * std::sin(kTwoPi * event.frequency_hz * t);
    }
    return w;
}

namespace detail {

// Per-trace accumulation uses three prefix-sum pools over the sorted
// scatterers: static phasors before the PZT, phase-ramped phasors across it
// (rebuilt each trace) and post-PZT phasors that pick up the full event
// phase as a single rotation. Each fast-time sample then reduces to a few
// range sums instead of a loop over every scatterer in the pulse window.
struct SynthPlan {
    std::vector<cd> base_phasor;       // r_k * exp(i(psi_k + 4 pi n / lambda * z_k))
    std::vector<double> ramp;          // event-phase weight w(z_k) in [0,1]
    std::vector<cd> prefix_static;     // prefix sums of base_phasor where ramp == 0
    std::vector<cd> prefix_post;       // prefix sums of base_phasor where ramp == 1
    std::size_t pzt_lo = 0, pzt_hi = 0;  // index range with 0 < ramp < 1
    std::vector<std::size_t> win_lo, win_hi;  // scatterer index range per sample
};

inline SynthPlan make_plan(const SimConfig& config, const ScattererField& field) {
    const std::size_t total = field.position_m.size();
    SynthPlan plan;
    plan.base_phasor.resize(total);
    plan.ramp.resize(total);
    const double k_prop = 4.0 * kPi * kFiberIndex / config.wavelength_m;
    const double span = config.pzt_end_m - config.pzt_start_m;
    for (std::size_t k = 0; k < total; ++k) {
        const double z = field.position_m[k];
        const double phase = field.intrinsic_phase[k] + std::fmod(k_prop * z, kTwoPi);
        plan.base_phasor[k] = field.reflectivity[k] * cd(std::cos(phase), std::sin(phase));
        if (z < config.pzt_start_m)
            plan.ramp[k] = 0.0;
        else if (z >= config.pzt_end_m)
            plan.ramp[k] = 1.0;
        else
            plan.ramp[k] = (z - config.pzt_start_m) / span;
    }
    plan.pzt_lo = static_cast<std::size_t>(
        std::lower_bound(field.position_m.begin(), field.position_m.end(), config.pzt_start_m) -
        field.position_m.begin());
    plan.pzt_hi = static_cast<std::size_t>(
        std::lower_bound(field.position_m.begin(), field.position_m.end(), config.pzt_end_m) -
        field.position_m.begin());

    plan.prefix_static.assign(total + 1, cd(0, 0));
    plan.prefix_post.assign(total + 1, cd(0, 0));
    for (std::size_t k = 0; k < total; ++k) {
        plan.prefix_static[k + 1] = plan.prefix_static[k] + (k < plan.pzt_lo ? plan.base_phasor[k] : cd(0, 0));
        plan.prefix_post[k + 1] = plan.prefix_post[k] + (k >= plan.pzt_hi ? plan.base_phasor[k] : cd(0, 0));
    }

    const std::size_t n_samples = config.n_samples();
    const double window = config.pulse_window_m();
    plan.win_lo.resize(n_samples);
    plan.win_hi.resize(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double zi = static_cast<double>(i) * config.sample_spacing_m;
        // window is (zi - W, zi]
        plan.win_lo[i] = static_cast<std::size_t>(
            std::upper_bound(field.position_m.begin(), field.position_m.end(), zi - window) -
            field.position_m.begin());
        plan.win_hi[i] = static_cast<std::size_t>(
            std::upper_bound(field.position_m.begin(), field.position_m.end(), zi) -
            field.position_m.begin());
    }
    return plan;
}

}  // namespace detail

// Synthesize the photodetected beat-signal matrix: one row per pulse. The
// complex backscatter field per sample is the coherent sum of all scatterers
// within the trailing half-pulse window; the PZT event enters as an extra
// phase, ramped linearly across the driven section and fully accumulated
// beyond it. The detected sample is the real part after mixing with the AOM
// carrier, plus optional white Gaussian noise at snr_db.
inline RawTraceMatrix synthesize(const SimConfig& config, const ScattererField& field,
                                 const std::optional<EventLabel>& event, unsigned threads = 1) {
    config.validate();
    if (field.n_cells != config.n_samples() || field.per_cell != config.scatterers_per_cell)
        throw ConfigError("scatterer field does not match the simulation config");
    if (event && !(event->frequency_hz < config.prf_hz / 2.0))
        throw ConfigError("event frequency must lie below prf/2 (slow-time Nyquist)");

    const std::size_t n_samples = config.n_samples();
    const std::size_t n_traces = config.n_traces;
    const auto plan = detail::make_plan(config, field);

    std::vector<double> event_phase(n_traces, 0.0);
    if (event) event_phase = ideal_phase_waveform(*event, config);

    // carrier phasor per fast-time sample, rotated per trace by the laser offset
    std::vector<cd> carrier(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double ang = kTwoPi * config.f_aom_hz * (static_cast<double>(i) / config.fast_rate_hz);
        carrier[i] = cd(std::cos(ang), std::sin(ang));
    }

    RawTraceMatrix out;
    out.config = config;
    out.label = event;
    out.data = RealMatrix(n_traces, n_samples);

    const std::size_t n_pzt = plan.pzt_hi - plan.pzt_lo;

    parallel_for(n_traces, threads, [&](std::size_t m) {
        const double delta = event_phase[m];
        const cd post_rot(std::cos(delta), std::sin(delta));

        // phasors across the PZT section pick up ramp-weighted event phase
        std::vector<cd> prefix_pzt(n_pzt + 1, cd(0, 0));
        for (std::size_t k = 0; k < n_pzt; ++k) {
            const std::size_t g = plan.pzt_lo + k;
            const double ang = plan.ramp[g] * delta;
            prefix_pzt[k + 1] = prefix_pzt[k] + plan.base_phasor[g] * cd(std::cos(ang), std::sin(ang));
        }

        double theta = 0.0;
        if (config.laser_phase_drift) {
            Rng drift_rng(derive_seed(config.seed, "drift", m));
            theta = drift_rng.uniform() * kTwoPi;
        }
        const cd trace_rot(std::cos(theta), std::sin(theta));

        double* row = out.data.row(m);
        for (std::size_t i = 0; i < n_samples; ++i) {
            const std::size_t lo = plan.win_lo[i], hi = plan.win_hi[i];
            cd e = plan.prefix_static[hi] - plan.prefix_static[lo];
            e += (plan.prefix_post[hi] - plan.prefix_post[lo]) * post_rot;
            if (n_pzt > 0) {
                const std::size_t a = std::clamp(lo, plan.pzt_lo, plan.pzt_hi) - plan.pzt_lo;
                const std::size_t b = std::clamp(hi, plan.pzt_lo, plan.pzt_hi) - plan.pzt_lo;
                if (b > a) e += prefix_pzt[b] - prefix_pzt[a];
            }
            row[i] = (e * carrier[i] * trace_rot).real();
        }
    });

    if (config.snr_db) {
        // noise power from the mean square of the noise-free matrix
        double power = 0.0;
        for (double v : out.data.data) power += v * v;
        power /= static_cast<double>(out.data.size());
        const double sigma = std::sqrt(power / std::pow(10.0, *config.snr_db / 10.0));
        parallel_for(n_traces, threads, [&](std::size_t m) {
            Rng noise_rng(derive_seed(config.seed, "noise", m));
            double* row = out.data.row(m);
            for (std::size_t i = 0; i < n_samples; ++i) row[i] += sigma * noise_rng.normal();
        });
    }
    return out;
}

}  // namespace dasforge::sim

#endif
