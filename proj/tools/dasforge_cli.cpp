// dasforge command-line front end: simulate -> demod -> dataset build ->
// train/eval/runs/embed, plus a standalone TSM renderer. One binary, one
// subcommand per stage; every stochastic stage takes --seed and every
// parallel stage takes --threads (env DAS_FORGE_THREADS as fallback).
//
// Exit codes: 0 ok, 2 usage (unknown flag / bad arguments), 3 missing or
// unreadable file, 4 invalid configuration, 1 anything else. Errors are a
// single line on stderr: "error: <kind>: <message>".

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dasforge/dasforge.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ';');
    return s;
}

void require_exists(const fs::path& p) {
    if (!fs::exists(p)) throw dasforge::IoError("no such file: " + p.string());
}

std::string class_stem(std::size_t idx) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "class%02zu", idx);
    return buf;
}

// Options shared by every subcommand. seed/threads apply only where the
// stage is stochastic/parallel; config points at a pipeline JSON whose
// values the remaining flags override.
struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    unsigned threads = 0;
    int verbose = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "pipeline config JSON (desk defaults otherwise)");
        seed_opt = cmd->add_option("--seed", seed, "master seed override");
        cmd->add_option("--threads", threads, "worker threads (0 = DAS_FORGE_THREADS or hardware)");
        cmd->add_flag("-v,--verbose", verbose, "per-item progress output");
    }

    dasforge::config::PipelineConfig pipeline(const std::string& preset = "desk") const {
        auto p = dasforge::config::pipeline_from_preset(preset);
        if (!config_path.empty()) {
            require_exists(config_path);
            p = dasforge::config::load_pipeline_config(config_path, p);
        }
        return p;
    }
};

void write_json(const fs::path& path, const json& j) {
    dasforge::report::atomic_write_text(path, j.dump(2) + "\n");
}

// ---- simulate ---------------------------------------------------------------

struct SimulateOpts {
    CommonOpts common;
    std::string preset = "desk";
    std::string out_dir;
    bool noise_free = false;
};

void run_simulate(const SimulateOpts& o) {
    using namespace dasforge;
    auto p = o.common.pipeline(o.preset);
    if (o.common.seed_opt->count()) p.sim.seed = o.common.seed;
    if (o.noise_free) p.sim.snr_db.reset();
    p.sim.validate();
    const unsigned threads = resolve_threads(o.common.threads);

    fs::create_directories(o.out_dir);
    const auto field = sim::build_scatterers(p.sim);
    for (int c = 0; c < sim::EventLabel::n_classes; ++c) {
        sim::SimConfig cfg = p.sim;
        // fresh noise/drift per recording, same fiber
        cfg.seed = derive_seed(p.sim.seed, "recording", static_cast<std::uint64_t>(c));
        const auto label = sim::EventLabel::from_class(c);
        const auto rec = sim::synthesize(cfg, field, label, threads);
        const fs::path base = fs::path(o.out_dir) / class_stem(static_cast<std::size_t>(c));
        config::save_recording(base, rec);
        if (o.common.verbose)
            std::cout << "wrote " << base.string() << ".tsm (" << rec.data.rows << "x"
                      << rec.data.cols << ", A=" << label.amplitude_v << "V f=" << label.frequency_hz
                      << "Hz)\n";
    }
    std::cout << "simulate: " << sim::EventLabel::n_classes << " recordings in " << o.out_dir
              << " (seed " << p.sim.seed << ")\n";
}

// ---- demod ------------------------------------------------------------------

struct DemodOpts {
    CommonOpts common;
    std::string in_path;
    std::string out_amp;
    std::string out_phase;
    std::string meta_path;
    double band_center = 160e6;
    double band_width = 20e6;
};

void run_demod(const DemodOpts& o) {
    using namespace dasforge;
    fs::path in(o.in_path);
    require_exists(in);
    fs::path base = in;
    if (base.extension() == ".tsm") base.replace_extension();
    require_exists(base.string() + ".json");

    const auto rec = config::load_recording(base);
    demod::BandpassSpec spec;
    spec.center_hz = o.band_center;
    spec.bandwidth_hz = o.band_width;
    const unsigned threads = resolve_threads(o.common.threads);
    auto [amp, phase] = demod::preprocess(rec, spec, threads);

    if (fs::path(o.out_amp).has_parent_path()) fs::create_directories(fs::path(o.out_amp).parent_path());
    if (fs::path(o.out_phase).has_parent_path()) fs::create_directories(fs::path(o.out_phase).parent_path());
    save_tsm(o.out_amp, amp);
    save_tsm(o.out_phase, phase);

    // Sidecar consumed by `dataset build`: names the two planes and the label.
    fs::path meta = o.meta_path.empty()
                        ? fs::path(o.out_amp).parent_path() / (base.stem().string() + ".meta.json")
                        : fs::path(o.meta_path);
    json j;
    j["base_id"] = base.stem().string();
    j["amp_tsm"] = fs::path(o.out_amp).filename().string();
    j["phase_tsm"] = fs::path(o.out_phase).filename().string();
    if (rec.label)
        j["label"] = {{"amplitude_v", rec.label->amplitude_v},
                      {"frequency_hz", rec.label->frequency_hz},
                      {"class", rec.label->class_index()}};
    write_json(meta, j);
    std::cout << "demod: " << o.in_path << " -> " << o.out_amp << " + " << o.out_phase << " ("
              << amp.rows << "x" << amp.cols << ")\n";
}

// ---- dataset build ----------------------------------------------------------

struct DatasetBuildOpts {
    CommonOpts common;
    std::string base_dir;
    std::string out_dir;
    unsigned offsets = 0;
    CLI::Option* offsets_opt = nullptr;
    bool flip = false;
    bool no_flip = false;
    unsigned img_size = 0;
    CLI::Option* img_size_opt = nullptr;
    std::string colormap;
    std::string lut_path;
};

void run_dataset_build(const DatasetBuildOpts& o) {
    using namespace dasforge;
    require_exists(o.base_dir);
    auto p = o.common.pipeline();
    if (o.common.seed_opt->count()) p.augment.seed = o.common.seed;
    if (o.offsets_opt->count()) p.augment.n_offsets = o.offsets;
    if (o.flip) p.augment.flip = true;
    if (o.no_flip) p.augment.flip = false;
    if (o.img_size_opt->count()) {
        p.render.out_height = o.img_size;
        p.render.out_width = o.img_size;
    }
    if (!o.colormap.empty()) p.render.colormap = colormap_from_string(o.colormap);
    if (!o.lut_path.empty()) {
        require_exists(o.lut_path);
        p.render.lut = load_lut_csv(o.lut_path);
    }

    std::vector<fs::path> metas;
    for (const auto& e : fs::directory_iterator(o.base_dir)) {
        const auto name = e.path().filename().string();
        if (name.size() > 10 && name.substr(name.size() - 10) == ".meta.json") metas.push_back(e.path());
    }
    std::sort(metas.begin(), metas.end());
    if (metas.empty()) throw IoError("no *.meta.json recordings under " + o.base_dir);

    std::vector<dataset::LabeledMatrixPair> bases;
    for (const auto& m : metas) {
        std::ifstream is(m);
        json j;
        is >> j;
        if (!j.contains("label"))
            throw ConfigError("recording " + m.string() + " has no label; cannot build a dataset");
        dataset::LabeledMatrixPair pair;
        pair.base_id = j.at("base_id").get<std::string>();
        pair.label = sim::EventLabel{j.at("label").at("amplitude_v").get<double>(),
                                     j.at("label").at("frequency_hz").get<double>()};
        const fs::path dir = m.parent_path();
        require_exists(dir / j.at("amp_tsm").get<std::string>());
        require_exists(dir / j.at("phase_tsm").get<std::string>());
        pair.amp = load_tsm(dir / j.at("amp_tsm").get<std::string>());
        pair.phase = load_tsm(dir / j.at("phase_tsm").get<std::string>());
        bases.push_back(std::move(pair));
        if (o.common.verbose) std::cout << "loaded " << pair.base_id << "\n";
    }

    const auto manifest = dataset::build_dataset(bases, p.augment, p.render, o.out_dir);
    std::cout << "dataset build: " << manifest.samples.size() << " samples ("
              << bases.size() << " bases x " << (1 + p.augment.n_offsets) << " placements"
              << (p.augment.flip ? " x 2 flips" : "") << ") -> " << o.out_dir << "/manifest.json\n";
}

// ---- train ------------------------------------------------------------------

struct TrainOpts {
    CommonOpts common;
    std::string dataset_dir;
    std::string out_dir;
    std::string variant;
    unsigned epochs = 0;
    CLI::Option* epochs_opt = nullptr;
    unsigned batch = 0;
    CLI::Option* batch_opt = nullptr;
    bool freeze = false;
    std::string init_weights;
};

dasforge::model::ModelConfig model_config_from(const dasforge::config::PipelineConfig& p,
                                               const std::string& variant, bool freeze) {
    auto cfg = p.model;
    if (!variant.empty()) {
        cfg.extractor = dasforge::model::FeatureExtractorSpec::desk_default(
            dasforge::model::extractor_variant_from_string(variant));
        cfg.extractor.in_height = p.model.extractor.in_height;
        cfg.extractor.in_width = p.model.extractor.in_width;
    }
    if (freeze) cfg.freeze_extractor = true;
    return cfg;
}

void print_epochs(const dasforge::harness::RunReport& rep) {
    for (std::size_t e = 0; e < rep.train_loss.size(); ++e)
        std::cout << "  epoch " << (e + 1) << ": train_loss=" << rep.train_loss[e]
                  << " train_acc=" << rep.train_accuracy[e] << " test_acc=" << rep.test_accuracy[e]
                  << "\n";
}

void run_train(const TrainOpts& o) {
    using namespace dasforge;
    const fs::path manifest_path = fs::path(o.dataset_dir) / "manifest.json";
    require_exists(manifest_path);
    if (!o.init_weights.empty()) require_exists(o.init_weights);

    auto p = o.common.pipeline();
    if (o.common.seed_opt->count()) p.train.seed = o.common.seed;
    if (o.epochs_opt->count()) p.train.epochs = o.epochs;
    if (o.batch_opt->count()) p.train.batch_size = o.batch;
    const auto model_cfg = model_config_from(p, o.variant, o.freeze);

    const auto manifest = dataset::load_manifest(manifest_path);
    const auto all = harness::load_samples(manifest, o.dataset_dir);
    const auto [train_set, test_set] = harness::split_samples(all, manifest, p.train.train_fraction,
                                                              p.train.seed);

    model::Classifier clf(model_cfg);
    clf.init(p.train.seed);
    if (!o.init_weights.empty()) clf.load_weights(o.init_weights);

    const auto rep = harness::train(clf, train_set, test_set, p.train);

    fs::create_directories(o.out_dir);
    clf.save_weights(fs::path(o.out_dir) / "weights.wgt1");
    harness::RunsReport runs;
    runs.runs.push_back(rep);
    runs.accuracy_stats = harness::box_stats({rep.final_accuracy});
    report::export_reports(runs, o.out_dir);
    if (o.common.verbose) print_epochs(rep);
    std::cout << "train: " << train_set.size() << "/" << test_set.size()
              << " train/test, final test accuracy " << rep.final_accuracy << " ("
              << rep.wall_seconds << " s) -> " << o.out_dir << "\n";
}

// ---- eval -------------------------------------------------------------------

struct EvalOpts {
    CommonOpts common;
    std::string dataset_dir;
    std::string weights;
    std::string out_path;
    std::string variant;
    bool freeze = false;
    bool all = false;
};

void run_eval(const EvalOpts& o) {
    using namespace dasforge;
    const fs::path manifest_path = fs::path(o.dataset_dir) / "manifest.json";
    require_exists(manifest_path);
    require_exists(o.weights);

    auto p = o.common.pipeline();
    if (o.common.seed_opt->count()) p.train.seed = o.common.seed;
    const auto model_cfg = model_config_from(p, o.variant, o.freeze);

    const auto manifest = dataset::load_manifest(manifest_path);
    const auto samples = harness::load_samples(manifest, o.dataset_dir);
    std::vector<model::Sample> subject = samples;
    if (!o.all) {
        auto [train_set, test_set] =
            harness::split_samples(samples, manifest, p.train.train_fraction, p.train.seed);
        subject = std::move(test_set);
    }

    model::Classifier clf(model_cfg);
    clf.init(p.train.seed);
    clf.load_weights(o.weights);
    const auto res = harness::evaluate(clf, subject);

    json j;
    j["schema_version"] = report::kSchemaVersion;
    j["n_samples"] = subject.size();
    j["split"] = o.all ? "all" : "test";
    j["accuracy"] = res.accuracy;
    j["mean_loss"] = res.mean_loss;
    j["confusion"] = report::to_json(res.confusion);
    if (!o.out_path.empty()) write_json(o.out_path, j);
    std::cout << "eval: accuracy " << res.accuracy << " mean_loss " << res.mean_loss << " on "
              << subject.size() << " samples" << (o.all ? " (all)" : " (test split)") << "\n";
}

// ---- runs -------------------------------------------------------------------

struct RunsOpts {
    CommonOpts common;
    std::string dataset_dir;
    std::string out_dir;
    std::string variant;
    unsigned n_runs = 0;
    CLI::Option* n_opt = nullptr;
    unsigned epochs = 0;
    CLI::Option* epochs_opt = nullptr;
    unsigned batch = 0;
    CLI::Option* batch_opt = nullptr;
    bool freeze = false;
};

void run_runs(const RunsOpts& o) {
    using namespace dasforge;
    const fs::path manifest_path = fs::path(o.dataset_dir) / "manifest.json";
    require_exists(manifest_path);

    auto p = o.common.pipeline();
    if (o.common.seed_opt->count()) p.train.seed = o.common.seed;
    if (o.n_opt->count()) p.train.n_runs = o.n_runs;
    if (o.epochs_opt->count()) p.train.epochs = o.epochs;
    if (o.batch_opt->count()) p.train.batch_size = o.batch;
    const auto model_cfg = model_config_from(p, o.variant, o.freeze);

    const auto manifest = dataset::load_manifest(manifest_path);
    const auto runs = harness::repeated_runs(manifest, o.dataset_dir, model_cfg, p.train);
    fs::create_directories(o.out_dir);
    report::export_reports(runs, o.out_dir);
    std::cout << "runs: n=" << runs.runs.size() << " mean accuracy " << runs.accuracy_stats.mean
              << " (min " << runs.accuracy_stats.min << ", max " << runs.accuracy_stats.max
              << ") -> " << o.out_dir << "/report.json\n";
}

// ---- embed ------------------------------------------------------------------

struct EmbedOpts {
    CommonOpts common;
    std::string dataset_dir;
    std::string weights;
    std::string out_dir;
    std::string variant;
    unsigned stage = 2;
};

void run_embed(const EmbedOpts& o) {
    using namespace dasforge;
    const fs::path manifest_path = fs::path(o.dataset_dir) / "manifest.json";
    require_exists(manifest_path);
    require_exists(o.weights);
    if (o.stage != 1 && o.stage != 2) throw ConfigError("--stage must be 1 or 2");

    auto p = o.common.pipeline();
    if (o.common.seed_opt->count()) p.tsne.seed = o.common.seed;
    const auto model_cfg = model_config_from(p, o.variant, false);

    const auto manifest = dataset::load_manifest(manifest_path);
    const auto samples = harness::load_samples(manifest, o.dataset_dir);
    model::Classifier clf(model_cfg);
    clf.init(p.train.seed);
    clf.load_weights(o.weights);

    const auto set = harness::extract_embeddings(clf, samples, o.stage, p.tsne);
    fs::create_directories(o.out_dir);
    report::export_embedding(set, o.out_dir, model_cfg.n_classes);
    std::cout << "embed: stage " << o.stage << ", " << set.embedding.n << " points, 1-NN agreement "
              << tsne::knn_agreement(set.embedding, set.labels) << " -> " << o.out_dir << "\n";
}

// ---- render -----------------------------------------------------------------

struct RenderOpts {
    CommonOpts common;
    std::string in_path;
    std::string out_path;
    unsigned img_size = 64;
    std::string colormap = "grayscale3";
    std::string lut_path;
};

void run_render(const RenderOpts& o) {
    using namespace dasforge;
    require_exists(o.in_path);
    RenderSpec spec;
    spec.out_height = o.img_size;
    spec.out_width = o.img_size;
    spec.colormap = colormap_from_string(o.colormap);
    if (!o.lut_path.empty()) {
        require_exists(o.lut_path);
        spec.lut = load_lut_csv(o.lut_path);
    }
    const auto m = load_tsm(o.in_path);
    const auto img = render_image(m, spec);
    if (fs::path(o.out_path).has_parent_path())
        fs::create_directories(fs::path(o.out_path).parent_path());
    save_png(o.out_path, img);
    std::cout << "render: " << o.in_path << " (" << m.rows << "x" << m.cols << ") -> " << o.out_path
              << " (" << img.height << "x" << img.width << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dasforge: phase-OTDR vibration sensing - simulation, demodulation, dataset "
                 "construction and CNN+BiLSTM classification"};
    app.require_subcommand(1);

    SimulateOpts sim_o;
    auto* sim_cmd = app.add_subcommand("simulate", "synthesize one labeled raw recording per class");
    sim_o.common.attach(sim_cmd);
    sim_cmd->add_option("--preset", sim_o.preset, "desk or full")->check(CLI::IsMember({"desk", "full"}));
    sim_cmd->add_option("--out", sim_o.out_dir, "output directory")->required();
    sim_cmd->add_flag("--noise-free", sim_o.noise_free, "disable additive noise");
    sim_cmd->callback([&] { run_simulate(sim_o); });

    DemodOpts dem_o;
    auto* dem_cmd = app.add_subcommand("demod", "demodulate a raw recording into amplitude/phase planes");
    dem_o.common.attach(dem_cmd);
    dem_cmd->add_option("--in", dem_o.in_path, "raw recording TSM (with .json sidecar)")->required();
    dem_cmd->add_option("--out-amp", dem_o.out_amp, "differential-amplitude TSM")->required();
    dem_cmd->add_option("--out-phase", dem_o.out_phase, "wrapped-phase TSM")->required();
    dem_cmd->add_option("--meta", dem_o.meta_path, "label sidecar path (default: next to --out-amp)");
    dem_cmd->add_option("--band-center", dem_o.band_center, "bandpass center, Hz");
    dem_cmd->add_option("--band-width", dem_o.band_width, "bandpass width, Hz");
    dem_cmd->callback([&] { run_demod(dem_o); });

    auto* ds_cmd = app.add_subcommand("dataset", "dataset construction");
    ds_cmd->require_subcommand(1);
    DatasetBuildOpts db_o;
    auto* db_cmd = ds_cmd->add_subcommand("build", "augment, render and index image pairs");
    db_o.common.attach(db_cmd);
    db_cmd->add_option("--base-dir", db_o.base_dir, "directory of demodulated recordings")->required();
    db_cmd->add_option("--out-dir", db_o.out_dir, "dataset output directory")->required();
    db_o.offsets_opt = db_cmd->add_option("--offsets", db_o.offsets, "relocated copies per base");
    db_cmd->add_flag("--flip", db_o.flip, "add vertically flipped copies");
    db_cmd->add_flag("--no-flip", db_o.no_flip, "disable flipped copies");
    db_o.img_size_opt = db_cmd->add_option("--img-size", db_o.img_size, "square output image side");
    db_cmd->add_option("--colormap", db_o.colormap, "grayscale3 or lut256");
    db_cmd->add_option("--lut", db_o.lut_path, "256-entry colormap CSV (for lut256)");
    db_cmd->callback([&] { run_dataset_build(db_o); });

    TrainOpts tr_o;
    auto* tr_cmd = app.add_subcommand("train", "train a classifier on a dataset split");
    tr_o.common.attach(tr_cmd);
    tr_cmd->add_option("--dataset", tr_o.dataset_dir, "dataset directory (manifest.json)")->required();
    tr_cmd->add_option("--out", tr_o.out_dir, "output directory (weights + reports)")->required();
    tr_cmd->add_option("--variant", tr_o.variant, "extractor variant: vgg_s, plain_s, depthwise_s");
    tr_o.epochs_opt = tr_cmd->add_option("--epochs", tr_o.epochs, "training epochs");
    tr_o.batch_opt = tr_cmd->add_option("--batch", tr_o.batch, "batch size");
    tr_cmd->add_flag("--freeze", tr_o.freeze, "freeze extractor weights");
    tr_cmd->add_option("--init-weights", tr_o.init_weights, "WGT1 file loaded before training");
    tr_cmd->callback([&] { run_train(tr_o); });

    EvalOpts ev_o;
    auto* ev_cmd = app.add_subcommand("eval", "evaluate saved weights");
    ev_o.common.attach(ev_cmd);
    ev_cmd->add_option("--dataset", ev_o.dataset_dir, "dataset directory")->required();
    ev_cmd->add_option("--weights", ev_o.weights, "WGT1 weights file")->required();
    ev_cmd->add_option("--out", ev_o.out_path, "JSON report path");
    ev_cmd->add_option("--variant", ev_o.variant, "extractor variant");
    ev_cmd->add_flag("--all", ev_o.all, "evaluate on all samples instead of the test split");
    ev_cmd->callback([&] { run_eval(ev_o); });

    RunsOpts rn_o;
    auto* rn_cmd = app.add_subcommand("runs", "repeated seeded trainings with aggregate statistics");
    rn_o.common.attach(rn_cmd);
    rn_cmd->add_option("--dataset", rn_o.dataset_dir, "dataset directory")->required();
    rn_cmd->add_option("--out", rn_o.out_dir, "report output directory")->required();
    rn_o.n_opt = rn_cmd->add_option("--n", rn_o.n_runs, "number of runs");
    rn_cmd->add_option("--variant", rn_o.variant, "extractor variant");
    rn_o.epochs_opt = rn_cmd->add_option("--epochs", rn_o.epochs, "training epochs");
    rn_o.batch_opt = rn_cmd->add_option("--batch", rn_o.batch, "batch size");
    rn_cmd->add_flag("--freeze", rn_o.freeze, "freeze extractor weights");
    rn_cmd->callback([&] { run_runs(rn_o); });

    EmbedOpts em_o;
    auto* em_cmd = app.add_subcommand("embed", "t-SNE embedding of stage-1/stage-2 features");
    em_o.common.attach(em_cmd);
    em_cmd->add_option("--dataset", em_o.dataset_dir, "dataset directory")->required();
    em_cmd->add_option("--weights", em_o.weights, "WGT1 weights file")->required();
    em_cmd->add_option("--out", em_o.out_dir, "output directory")->required();
    em_cmd->add_option("--stage", em_o.stage, "1 = post-extractor features, 2 = BiLSTM state")
        ->required();
    em_cmd->add_option("--variant", em_o.variant, "extractor variant");
    em_cmd->callback([&] { run_embed(em_o); });

    RenderOpts re_o;
    auto* re_cmd = app.add_subcommand("render", "render a TSM matrix to a PNG image");
    re_o.common.attach(re_cmd);
    re_cmd->add_option("--in", re_o.in_path, "input TSM")->required();
    re_cmd->add_option("--out", re_o.out_path, "output PNG")->required();
    re_cmd->add_option("--img-size", re_o.img_size, "square output side");
    re_cmd->add_option("--colormap", re_o.colormap, "grayscale3 or lut256");
    re_cmd->add_option("--lut", re_o.lut_path, "256-entry colormap CSV");
    re_cmd->callback([&] { run_render(re_o); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::cerr << "error: usage: " << one_line(e.what()) << "\n";
        return 2;
    } catch (const dasforge::IoError& e) {
        std::cerr << "error: io: " << one_line(e.what()) << "\n";
        return 3;
    } catch (const dasforge::ConfigError& e) {
        std::cerr << "error: config: " << one_line(e.what()) << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << one_line(e.what()) << "\n";
        return 1;
    }
    return 0;
}
