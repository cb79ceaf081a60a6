#ifndef DASFORGE_CONFIG_HPP
#define DASFORGE_CONFIG_HPP

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"

#include "dasforge/common.hpp"
#include "dasforge/dataset.hpp"
#include "dasforge/demod.hpp"
#include "dasforge/harness.hpp"
#include "dasforge/image.hpp"
#include "dasforge/model.hpp"
#include "dasforge/sim.hpp"
#include "dasforge/tsm.hpp"
#include "dasforge/tsne.hpp"

namespace dasforge::config {

namespace cfgdetail {

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config field '" + key + "': " + e.what());
    }
}

}  // namespace cfgdetail

// ---- sim -------------------------------------------------------------------

inline nlohmann::json to_json(const sim::SimConfig& c) {
    nlohmann::json j{{"fiber_length_m", c.fiber_length_m},
                     {"sample_spacing_m", c.sample_spacing_m},
                     {"fast_rate_hz", c.fast_rate_hz},
                     {"prf_hz", c.prf_hz},
                     {"n_traces", c.n_traces},
                     {"pulse_width_s", c.pulse_width_s},
                     {"f_aom_hz", c.f_aom_hz},
                     {"wavelength_m", c.wavelength_m},
                     {"pzt_start_m", c.pzt_start_m},
                     {"pzt_end_m", c.pzt_end_m},
                     {"k_pzt_rad_per_volt", c.k_pzt_rad_per_volt},
                     {"laser_phase_drift", c.laser_phase_drift},
                     {"scatterers_per_cell", c.scatterers_per_cell},
                     {"seed", c.seed}};
    if (c.snr_db) j["snr_db"] = *c.snr_db;
    return j;
}

inline sim::SimConfig sim_config_from_json(const nlohmann::json& j, sim::SimConfig base = {}) {
    using cfgdetail::get_or;
    sim::SimConfig c = base;
    c.fiber_length_m = get_or(j, "fiber_length_m", c.fiber_length_m);
    c.sample_spacing_m = get_or(j, "sample_spacing_m", c.sample_spacing_m);
    c.fast_rate_hz = get_or(j, "fast_rate_hz", c.fast_rate_hz);
    c.prf_hz = get_or(j, "prf_hz", c.prf_hz);
    c.n_traces = get_or(j, "n_traces", c.n_traces);
    c.pulse_width_s = get_or(j, "pulse_width_s", c.pulse_width_s);
    c.f_aom_hz = get_or(j, "f_aom_hz", c.f_aom_hz);
    c.wavelength_m = get_or(j, "wavelength_m", c.wavelength_m);
    c.pzt_start_m = get_or(j, "pzt_start_m", c.pzt_start_m);
    c.pzt_end_m = get_or(j, "pzt_end_m", c.pzt_end_m);
    c.k_pzt_rad_per_volt = get_or(j, "k_pzt_rad_per_volt", c.k_pzt_rad_per_volt);
    c.laser_phase_drift = get_or(j, "laser_phase_drift", c.laser_phase_drift);
    c.scatterers_per_cell = get_or(j, "scatterers_per_cell", c.scatterers_per_cell);
    c.seed = get_or(j, "seed", c.seed);
    if (j.contains("snr_db")) {
        if (j.at("snr_db").is_null())
            c.snr_db.reset();
        else
            c.snr_db = j.at("snr_db").get<double>();
    }
    return c;
}

// ---- pipeline --------------------------------------------------------------

struct PipelineConfig {
    sim::SimConfig sim = sim::desk_preset();
    demod::BandpassSpec bandpass{};
    dataset::AugmentSpec augment{};
    RenderSpec render{};
    model::ModelConfig model{};
    harness::TrainConfig train{};
    tsne::TsneConfig tsne{};
};

inline PipelineConfig desk_pipeline() { return {}; }

inline PipelineConfig full_pipeline() {
    PipelineConfig p;
    p.sim = sim::full_preset();
    p.augment.event_columns = {22000, 25000};
    p.render.out_height = 1000;
    p.render.out_width = 1000;
    p.model.extractor.in_height = 1000;  // full-scale images; desk tests never build this
    p.model.extractor.in_width = 1000;
    p.train.n_runs = 50;
    return p;
}

inline PipelineConfig pipeline_from_preset(const std::string& name) {
    if (name == "desk") return desk_pipeline();
    if (name == "full") return full_pipeline();
    throw ConfigError("unknown preset '" + name + "' (expected desk or full)");
}

inline nlohmann::json to_json(const PipelineConfig& p) {
    nlohmann::json j;
    j["sim"] = to_json(p.sim);
    j["bandpass"] = {{"center_hz", p.bandpass.center_hz}, {"bandwidth_hz", p.bandpass.bandwidth_hz}};
    j["augment"] = {{"event_col_begin", p.augment.event_columns.begin},
                    {"event_col_end", p.augment.event_columns.end},
                    {"n_offsets", p.augment.n_offsets},
                    {"flip", p.augment.flip},
                    {"seed", p.augment.seed}};
    j["render"] = {{"out_height", p.render.out_height},
                   {"out_width", p.render.out_width},
                   {"colormap", to_string(p.render.colormap)}};
    j["model"] = {{"variant", model::to_string(p.model.extractor.variant)},
                  {"in_height", p.model.extractor.in_height},
                  {"in_width", p.model.extractor.in_width},
                  {"channels", p.model.extractor.channels},
                  {"freeze_extractor", p.model.freeze_extractor},
                  {"lstm_hidden", p.model.lstm_hidden},
                  {"n_classes", p.model.n_classes},
                  {"seq_steps", p.model.seq_steps}};
    j["train"] = {{"batch_size", p.train.batch_size},
                  {"epochs", p.train.epochs},
                  {"train_fraction", p.train.train_fraction},
                  {"n_runs", p.train.n_runs},
                  {"seed", p.train.seed}};
    j["tsne"] = {{"perplexity", p.tsne.perplexity},
                 {"iters", p.tsne.iters},
                 {"seed", p.tsne.seed}};
    return j;
}

inline PipelineConfig pipeline_from_json(const nlohmann::json& j, PipelineConfig base = {}) {
    using cfgdetail::get_or;
    PipelineConfig p = base;
    if (j.contains("preset")) p = pipeline_from_preset(j.at("preset").get<std::string>());
    if (j.contains("sim")) p.sim = sim_config_from_json(j.at("sim"), p.sim);
    if (j.contains("bandpass")) {
        const auto& b = j.at("bandpass");
        p.bandpass.center_hz = get_or(b, "center_hz", p.bandpass.center_hz);
        p.bandpass.bandwidth_hz = get_or(b, "bandwidth_hz", p.bandpass.bandwidth_hz);
    }
    if (j.contains("augment")) {
        const auto& a = j.at("augment");
        p.augment.event_columns.begin = get_or(a, "event_col_begin", p.augment.event_columns.begin);
        p.augment.event_columns.end = get_or(a, "event_col_end", p.augment.event_columns.end);
        p.augment.n_offsets = get_or(a, "n_offsets", p.augment.n_offsets);
        p.augment.flip = get_or(a, "flip", p.augment.flip);
        p.augment.seed = get_or(a, "seed", p.augment.seed);
    }
    if (j.contains("render")) {
        const auto& r = j.at("render");
        p.render.out_height = get_or(r, "out_height", p.render.out_height);
        p.render.out_width = get_or(r, "out_width", p.render.out_width);
        if (r.contains("colormap"))
            p.render.colormap = colormap_from_string(r.at("colormap").get<std::string>());
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        if (m.contains("variant"))
            p.model.extractor.variant =
                model::extractor_variant_from_string(m.at("variant").get<std::string>());
        p.model.extractor.in_height = get_or(m, "in_height", p.model.extractor.in_height);
        p.model.extractor.in_width = get_or(m, "in_width", p.model.extractor.in_width);
        p.model.extractor.channels = get_or(m, "channels", p.model.extractor.channels);
        p.model.freeze_extractor = get_or(m, "freeze_extractor", p.model.freeze_extractor);
        p.model.lstm_hidden = get_or(m, "lstm_hidden", p.model.lstm_hidden);
        p.model.n_classes = get_or(m, "n_classes", p.model.n_classes);
        p.model.seq_steps = get_or(m, "seq_steps", p.model.seq_steps);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        p.train.batch_size = get_or(t, "batch_size", p.train.batch_size);
        p.train.epochs = get_or(t, "epochs", p.train.epochs);
        p.train.train_fraction = get_or(t, "train_fraction", p.train.train_fraction);
        p.train.n_runs = get_or(t, "n_runs", p.train.n_runs);
        p.train.seed = get_or(t, "seed", p.train.seed);
    }
    if (j.contains("tsne")) {
        const auto& t = j.at("tsne");
        p.tsne.perplexity = get_or(t, "perplexity", p.tsne.perplexity);
        p.tsne.iters = get_or(t, "iters", p.tsne.iters);
        p.tsne.seed = get_or(t, "seed", p.tsne.seed);
    }
    return p;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path,
                                           PipelineConfig base = {}) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed config " + path.string() + ": " + e.what());
    }
    return pipeline_from_json(j, std::move(base));
}

// ---- recording I/O ---------------------------------------------------------
// A recording is a TSM matrix plus a JSON sidecar holding the generating
// configuration and, when present, the event label.

inline void save_recording(const std::filesystem::path& base, const sim::RawTraceMatrix& rec) {
    save_tsm(base.string() + ".tsm", rec.data);
    nlohmann::json j;
    j["config"] = to_json(rec.config);
    if (rec.label) {
        j["label"] = {{"amplitude_v", rec.label->amplitude_v},
                      {"frequency_hz", rec.label->frequency_hz},
                      {"class", rec.label->class_index()}};
    }
    std::ofstream os(base.string() + ".json");
    if (!os) throw IoError("cannot open for writing: " + base.string() + ".json");
    os << j.dump(2) << '\n';
}

inline sim::RawTraceMatrix load_recording(const std::filesystem::path& base) {
    sim::RawTraceMatrix rec;
    rec.data = load_tsm(base.string() + ".tsm");
    std::ifstream is(base.string() + ".json");
    if (!is) throw IoError("cannot open: " + base.string() + ".json");
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed recording sidecar " + base.string() + ".json: " + e.what());
    }
    rec.config = sim_config_from_json(j.at("config"));
    if (j.contains("label"))
        rec.label = sim::EventLabel{j.at("label").at("amplitude_v").get<double>(),
                                    j.at("label").at("frequency_hz").get<double>()};
    return rec;
}

}  // namespace dasforge::config

#endif
