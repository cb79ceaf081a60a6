#ifndef DASFORGE_HARNESS_HPP
#define DASFORGE_HARNESS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dasforge/common.hpp"
#include "dasforge/dataset.hpp"
#include "dasforge/model.hpp"
#include "dasforge/nn.hpp"
#include "dasforge/plot.hpp"
#include "dasforge/rng.hpp"
#include "dasforge/tsne.hpp"

namespace dasforge::harness {

struct TrainConfig {
    std::size_t batch_size = 16;
    std::size_t epochs = 25;
    double train_fraction = 0.7;
    std::size_t n_runs = 5;
    std::uint64_t seed = 1;
    nn::AdamHyper adam{};

    void validate() const {
        if (batch_size < 2) throw ConfigError("batch size must be at least 2");
        if (epochs < 1) throw ConfigError("need at least one epoch");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw ConfigError("train fraction must lie in (0,1)");
        if (n_runs < 1) throw ConfigError("need at least one run");
    }
};

struct ConfusionMatrix {
    std::size_t n = 15;
    std::vector<std::size_t> counts;  // n×n, rows = true class, cols = predicted

    explicit ConfusionMatrix(std::size_t classes = 15) : n(classes), counts(classes * classes, 0) {}

    std::size_t& at(std::size_t truth, std::size_t pred) { return counts[truth * n + pred]; }
    std::size_t at(std::size_t truth, std::size_t pred) const { return counts[truth * n + pred]; }

    std::size_t total() const {
        std::size_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
    std::size_t trace() const {
        std::size_t s = 0;
        for (std::size_t i = 0; i < n; ++i) s += at(i, i);
        return s;
    }
    double accuracy() const {
        const std::size_t t = total();
        return t == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(t);
    }
    std::size_t row_sum(std::size_t truth) const {
        std::size_t s = 0;
        for (std::size_t p = 0; p < n; ++p) s += at(truth, p);
        return s;
    }
};

struct RunReport {
    std::uint64_t seed = 0;
    std::vector<double> train_loss, train_accuracy, test_loss, test_accuracy;  // per epoch
    ConfusionMatrix confusion{15};
    double final_accuracy = 0.0;
    double wall_seconds = 0.0;
};

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
    ConfusionMatrix confusion{15};
};

// Manifest samples → model inputs. The classifier consumes the rendered PNGs.
inline std::vector<model::Sample> load_samples(const dataset::DatasetManifest& manifest,
                                               const std::filesystem::path& dir) {
    std::vector<model::Sample> samples;
    samples.reserve(manifest.samples.size());
    for (const auto& entry : manifest.samples) {
        model::Sample s;
        s.amp = model::image_to_tensor(load_png(dir / entry.amp_png));
        s.phase = model::image_to_tensor(load_png(dir / entry.phase_png));
        s.label = entry.class_index;
        samples.push_back(std::move(s));
    }
    return samples;
}

inline EvalResult evaluate(model::Classifier& clf, const std::vector<model::Sample>& test) {
    if (test.empty()) throw ConfigError("cannot evaluate on an empty test set");
    EvalResult result{0.0, 0.0, ConfusionMatrix(clf.config().n_classes)};
    for (const auto& s : test) {
        const nn::Tensor probs = clf.predict(s.amp, s.phase);
        const int pred = static_cast<int>(
            std::max_element(probs.data.begin(), probs.data.end()) - probs.data.begin());
        result.confusion.at(static_cast<std::size_t>(s.label), static_cast<std::size_t>(pred))++;
        result.mean_loss += -std::log(std::max(probs[static_cast<std::size_t>(s.label)], 1e-300));
    }
    result.mean_loss /= static_cast<double>(test.size());
    result.accuracy = result.confusion.accuracy();
    return result;
}

// Mini-batch Adam training with a fresh seeded shuffle each epoch; the final
// partial batch is kept. With a frozen extractor the frozen tensors are
// checked bit-for-bit after every epoch.
inline RunReport train(model::Classifier& clf, const std::vector<model::Sample>& train_set,
                       const std::vector<model::Sample>& test_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty()) throw ConfigError("training set is empty");
    if (cfg.batch_size > train_set.size())
        throw ConfigError("batch size " + std::to_string(cfg.batch_size) +
                          " exceeds training set size " + std::to_string(train_set.size()));
    if (train_set.size() % cfg.batch_size == 1)
        throw ConfigError("final batch would hold a single sample, which batch norm rejects; "
                          "adjust batch size");

    const auto t0 = std::chrono::steady_clock::now();
    RunReport report;
    report.seed = cfg.seed;

    const auto trainable = clf.trainable_names();
    const auto frozen = clf.frozen_names();
    std::map<std::string, std::vector<double>> frozen_snapshot;
    for (const auto& name : frozen) frozen_snapshot[name] = clf.params().at(name).data;

    std::map<std::string, nn::AdamState> opt;
    std::map<std::string, nn::Tensor> grads;
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", epoch));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            std::vector<model::Sample> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);

            std::vector<int> preds;
            double batch_loss;
            try {
                batch_loss = clf.run_batch(batch, true, &grads, &preds);
            } catch (const ConfigError& e) {
                throw ConfigError("epoch " + std::to_string(epoch + 1) + ", batch " +
                                  std::to_string(start / cfg.batch_size + 1) + ": " + e.what());
            }
            loss_sum += batch_loss * static_cast<double>(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i)
                if (preds[i] == batch[i].label) ++correct;
            for (const auto& name : trainable)
                nn::adam_step(clf.params().at(name), grads.at(name), opt[name], cfg.adam);
        }
        report.train_loss.push_back(loss_sum / static_cast<double>(train_set.size()));
        report.train_accuracy.push_back(static_cast<double>(correct) /
                                        static_cast<double>(train_set.size()));

        const EvalResult ev = evaluate(clf, test_set);
        report.test_loss.push_back(ev.mean_loss);
        report.test_accuracy.push_back(ev.accuracy);

        for (const auto& name : frozen)
            if (clf.params().at(name).data != frozen_snapshot.at(name))
                throw ConfigError("frozen tensor '" + name + "' changed during epoch " +
                                  std::to_string(epoch + 1));
    }

    const EvalResult final_eval = evaluate(clf, test_set);
    report.confusion = final_eval.confusion;
    report.final_accuracy = final_eval.accuracy;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

struct RunsReport {
    std::vector<RunReport> runs;
    plot::BoxStats accuracy_stats;
};

inline plot::BoxStats box_stats(std::vector<double> values) {
    if (values.empty()) throw ConfigError("no values to summarize");
    std::sort(values.begin(), values.end());
    plot::BoxStats st;
    st.min = values.front();
    st.q1 = quantile_sorted(values, 0.25);
    st.median = quantile_sorted(values, 0.5);
    st.q3 = quantile_sorted(values, 0.75);
    st.max = values.back();
    st.mean = 0.0;
    for (double v : values) st.mean += v;
    st.mean /= static_cast<double>(values.size());
    return st;
}

// Split already-loaded samples along the manifest split: the sample list
// must be in manifest order (as load_samples produces it).
inline std::pair<std::vector<model::Sample>, std::vector<model::Sample>> split_samples(
    const std::vector<model::Sample>& all, const dataset::DatasetManifest& manifest,
    double train_fraction, std::uint64_t seed) {
    if (all.size() != manifest.samples.size())
        throw ConfigError("sample list does not match the manifest");
    auto [train_manifest, test_manifest] = dataset::split(manifest, train_fraction, seed);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < manifest.samples.size(); ++i) index[manifest.samples[i].id] = i;
    std::pair<std::vector<model::Sample>, std::vector<model::Sample>> out;
    for (const auto& e : train_manifest.samples) out.first.push_back(all[index.at(e.id)]);
    for (const auto& e : test_manifest.samples) out.second.push_back(all[index.at(e.id)]);
    return out;
}

// Fresh split + init per run, all reseeded from the run index, mirroring the
// paper's protocol of re-splitting the data for every training.
inline RunsReport repeated_runs(const dataset::DatasetManifest& manifest,
                                const std::filesystem::path& dataset_dir,
                                const model::ModelConfig& model_cfg, const TrainConfig& cfg) {
    cfg.validate();
    const auto all = load_samples(manifest, dataset_dir);
    RunsReport out;
    std::vector<double> accuracies;
    for (std::size_t run = 0; run < cfg.n_runs; ++run) {
        const std::uint64_t run_seed = derive_seed(cfg.seed, "run", run);
        auto [train_set, test_set] = split_samples(all, manifest, cfg.train_fraction, run_seed);

        model::Classifier clf(model_cfg);
        clf.init(run_seed);
        TrainConfig run_cfg = cfg;
        run_cfg.seed = run_seed;
        out.runs.push_back(train(clf, train_set, test_set, run_cfg));
        accuracies.push_back(out.runs.back().final_accuracy);
    }
    out.accuracy_stats = box_stats(accuracies);
    return out;
}

// stage 1: concatenated post-batch-norm branch features (what the Bi-LSTM
// sees); stage 2: the final Bi-LSTM state feeding the dense head.
struct EmbeddingSet {
    std::string stage;
    tsne::Embedding embedding;
    std::vector<int> labels;
};

struct FeatureSet {
    std::vector<double> features;  // n × dim
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<int> labels;
};

inline nn::BiLstmParams bilstm_of(model::Classifier& clf, const std::string& prefix) {
    return nn::BiLstmParams{{clf.params().at(prefix + ".fwd.w"), clf.params().at(prefix + ".fwd.u"),
                             clf.params().at(prefix + ".fwd.b")},
                            {clf.params().at(prefix + ".bwd.w"), clf.params().at(prefix + ".bwd.u"),
                             clf.params().at(prefix + ".bwd.b")}};
}

inline FeatureSet extract_features(model::Classifier& clf,
                                   const std::vector<model::Sample>& samples, int stage) {
    if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
    if (samples.empty()) throw ConfigError("no samples to embed");
    FeatureSet fs;
    fs.n = samples.size();
    const std::size_t L = clf.config().extractor.feature_len();
    const std::size_t H = clf.config().lstm_hidden;
    fs.dim = stage == 1 ? 2 * L : 2 * H;
    fs.features.reserve(fs.n * fs.dim);
    for (const auto& s : samples) {
        const auto amp = clf.extract_spatial(s.amp, "amp");
        const auto phase = clf.extract_spatial(s.phase, "phase");
        nn::Tensor xa({1, L}), xp({1, L});
        xa.data = amp.flat.data;
        xp.data = phase.flat.data;
        const nn::Tensor ya =
            nn::batchnorm_forward(xa, clf.params().at("bn.amp.gamma"),
                                  clf.params().at("bn.amp.beta"), false, clf.bn_state("amp"),
                                  nullptr);
        const nn::Tensor yp =
            nn::batchnorm_forward(xp, clf.params().at("bn.phase.gamma"),
                                  clf.params().at("bn.phase.beta"), false, clf.bn_state("phase"),
                                  nullptr);
        if (stage == 1) {
            fs.features.insert(fs.features.end(), ya.data.begin(), ya.data.end());
            fs.features.insert(fs.features.end(), yp.data.begin(), yp.data.end());
        } else {
            const std::size_t T = clf.config().steps();
            const std::size_t band = L / T;
            nn::Tensor seq({T, 2 * band});
            for (std::size_t t = 0; t < T; ++t) {
                std::copy_n(ya.data.data() + t * band, band, seq.data.data() + t * 2 * band);
                std::copy_n(yp.data.data() + t * band, band,
                            seq.data.data() + t * 2 * band + band);
            }
            const auto l1 = nn::bilstm_forward(seq, bilstm_of(clf, "lstm1"));
            const auto l2 = nn::bilstm_forward(l1.y, bilstm_of(clf, "lstm2"));
            fs.features.insert(fs.features.end(), l2.y.data.data() + (T - 1) * 2 * H,
                               l2.y.data.data() + (T - 1) * 2 * H + H);
            fs.features.insert(fs.features.end(), l2.y.data.data() + H,
                               l2.y.data.data() + 2 * H);
        }
        fs.labels.push_back(s.label);
    }
    return fs;
}

inline EmbeddingSet extract_embeddings(model::Classifier& clf,
                                       const std::vector<model::Sample>& samples, int stage,
                                       tsne::TsneConfig tsne_cfg = {}) {
    const FeatureSet fs = extract_features(clf, samples, stage);
    EmbeddingSet out;
    out.stage = "stage" + std::to_string(stage);
    out.labels = fs.labels;
    out.embedding = tsne::tsne_2d(fs.features, fs.n, fs.dim, tsne_cfg);
    return out;
}

}  // namespace dasforge::harness

#endif
