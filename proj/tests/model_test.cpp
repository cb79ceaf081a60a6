#include <gtest/gtest.h>
#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "dasforge/model.hpp"
#include "dasforge/rng.hpp"

using namespace dasforge;
using model::Classifier;
using model::ModelConfig;
using model::Sample;
using nn::Tensor;

namespace {

// Small enough for finite differences over every parameter.
ModelConfig toy_config() {
    ModelConfig cfg;
    cfg.extractor.variant = model::ExtractorVariant::vgg_s;
    cfg.extractor.in_height = 8;
    cfg.extractor.in_width = 8;
    cfg.extractor.channels = {2};
    cfg.lstm_hidden = 3;
    cfg.n_classes = 4;
    cfg.validate();
    return cfg;
}

Tensor random_image(std::size_t h, std::size_t w, Rng& rng) {
    Tensor t({h, w, 3});
    for (auto& v : t.data) v = rng.uniform();
    return t;
}

std::vector<Sample> toy_batch(const ModelConfig& cfg, Rng& rng, std::size_t n) {
    std::vector<Sample> batch;
    for (std::size_t i = 0; i < n; ++i)
        batch.push_back({random_image(cfg.extractor.in_height, cfg.extractor.in_width, rng),
                         random_image(cfg.extractor.in_height, cfg.extractor.in_width, rng),
                         static_cast<int>(i % cfg.n_classes)});
    return batch;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("dasforge_model_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

void write_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

// Minimal little-endian WGT1 writer for crafting subset/bogus files.
void write_wgt1(const std::filesystem::path& path,
                const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    std::ofstream os(path, std::ios::binary);
    os.write("WGT1", 4);
    write_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(t->rank()));
        for (std::size_t d : t->dims) write_u32(os, static_cast<std::uint32_t>(d));
        for (double v : t->data) {
            std::uint64_t bits = 0;
            std::memcpy(&bits, &v, 8);
            unsigned char b[8];
            for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
            os.write(reinterpret_cast<const char*>(b), 8);
        }
    }
}

}  // namespace

TEST(ExtractorSpec, DeskShapeArithmetic) {
    const auto spec = model::FeatureExtractorSpec::desk_default(model::ExtractorVariant::vgg_s);
    EXPECT_EQ(spec.in_height, 64u);
    EXPECT_EQ(spec.n_blocks(), 3u);
    EXPECT_EQ(spec.out_height(), 8u);
    EXPECT_EQ(spec.out_width(), 8u);
    EXPECT_EQ(spec.feature_len(), 64u * spec.out_channels());
}

TEST(ExtractorSpec, RejectsIndivisibleInput) {
    model::FeatureExtractorSpec spec;
    spec.in_height = 60;  // not divisible by 8
    spec.in_width = 64;
    spec.channels = {4, 8, 16};
    EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Extractor, ZeroImageGivesZeroFeatures) {
    const auto cfg = toy_config();
    Classifier clf(cfg);
    clf.init(3);
    const Tensor zero({cfg.extractor.in_height, cfg.extractor.in_width, 3});
    const auto feats = clf.extract_spatial(zero, "amp");
    for (double v : feats.flat.data) EXPECT_DOUBLE_EQ(v, 0.0);
    EXPECT_EQ(feats.flat.size(), cfg.extractor.feature_len());
}

TEST(Extractor, Deterministic) {
    const auto cfg = toy_config();
    Classifier clf(cfg);
    clf.init(4);
    Rng rng(8);
    const Tensor img = random_image(8, 8, rng);
    const auto a = clf.extract_spatial(img, "amp");
    const auto b = clf.extract_spatial(img, "amp");
    for (std::size_t i = 0; i < a.flat.size(); ++i) EXPECT_DOUBLE_EQ(a.flat[i], b.flat[i]);
}

TEST(Forward, ProbabilityVector) {
    const auto cfg = toy_config();
    Classifier clf(cfg);
    clf.init(5);
    Rng rng(9);
    const Tensor probs = clf.predict(random_image(8, 8, rng), random_image(8, 8, rng));
    ASSERT_EQ(probs.size(), cfg.n_classes);
    double sum = 0.0;
    for (double p : probs.data) {
        EXPECT_GE(p, 0.0);
        sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Forward, ZeroDownstreamWeightsGiveUniformProbabilities) {
    ModelConfig cfg = toy_config();
    cfg.n_classes = 15;
    Classifier clf(cfg);
    clf.init(6);
    for (auto& [name, t] : clf.params())
        if (name.starts_with("lstm") || name.starts_with("head."))
            std::fill(t.data.begin(), t.data.end(), 0.0);
    Rng rng(10);
    const Tensor probs = clf.predict(random_image(8, 8, rng), random_image(8, 8, rng));
    for (double p : probs.data) EXPECT_NEAR(p, 1.0 / 15.0, 1e-15);
}

TEST(Forward, BranchSwapSymmetry) {
    // Swapping the two input images equals swapping branch parameters and
    // rotating each sequence step's amp/phase halves in the lstm1 input weights.
    const auto cfg = toy_config();
    Classifier a(cfg);
    a.init(7);
    Classifier b(cfg);
    b.init(8);

    const std::size_t d = cfg.step_dim(), half = d / 2;
    for (const auto& [name, t] : a.params()) {
        std::string target = name;
        auto swap_branch = [&](const std::string& pre) {
            if (name.starts_with(pre + "amp.")) target = pre + "phase." + name.substr(pre.size() + 4);
            if (name.starts_with(pre + "phase."))
                target = pre + "amp." + name.substr(pre.size() + 6);
        };
        swap_branch("extractor.");
        swap_branch("bn.");
        if (name == "lstm1.fwd.w" || name == "lstm1.bwd.w") {
            Tensor& w = b.params().at(name);
            for (std::size_t r = 0; r < t.dims[0]; ++r)
                for (std::size_t c = 0; c < d; ++c)
                    w.at2(r, (c + half) % d) = t.at2(r, c);
            continue;
        }
        b.params().at(target) = t;
    }

    Rng rng(11);
    const Tensor amp = random_image(8, 8, rng), phase = random_image(8, 8, rng);
    const Tensor pa = a.predict(amp, phase);
    const Tensor pb = b.predict(phase, amp);
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa[i], pb[i], 1e-12);
}

TEST(Training, FrozenExtractorStaysBitIdentical) {
    ModelConfig cfg = toy_config();
    cfg.freeze_extractor = true;
    Classifier clf(cfg);
    clf.init(12);
    Rng rng(13);
    const auto batch = toy_batch(cfg, rng, 3);

    std::map<std::string, Tensor> before;
    for (const auto& name : clf.frozen_names()) before[name] = clf.params().at(name);
    ASSERT_FALSE(before.empty());

    std::map<std::string, nn::AdamState> opt;
    std::map<std::string, Tensor> grads;
    for (int step = 0; step < 10; ++step) {
        clf.run_batch(batch, true, &grads);
        for (const auto& name : clf.trainable_names())
            nn::adam_step(clf.params().at(name), grads.at(name), opt[name]);
    }
    for (const auto& [name, t] : before) {
        const Tensor& now = clf.params().at(name);
        for (std::size_t i = 0; i < t.size(); ++i)
            ASSERT_EQ(t[i], now[i]) << name << " drifted at " << i;
    }
}

TEST(Training, UnfrozenExtractorMovesAfterOneStep) {
    const auto cfg = toy_config();
    Classifier clf(cfg);
    clf.init(14);
    Rng rng(15);
    const auto batch = toy_batch(cfg, rng, 2);
    const Tensor before = clf.params().at("extractor.amp.b0.conv0.k");
    std::map<std::string, nn::AdamState> opt;
    std::map<std::string, Tensor> grads;
    clf.run_batch(batch, true, &grads);
    for (const auto& name : clf.trainable_names())
        nn::adam_step(clf.params().at(name), grads.at(name), opt[name]);
    const Tensor& after = clf.params().at("extractor.amp.b0.conv0.k");
    bool moved = false;
    for (std::size_t i = 0; i < before.size(); ++i)
        if (before[i] != after[i]) moved = true;
    EXPECT_TRUE(moved);
}

TEST(Training, TrainabilityMaskPartitionsParameters) {
    ModelConfig cfg = toy_config();
    cfg.freeze_extractor = true;
    Classifier clf(cfg);
    clf.init(16);
    const auto trainable = clf.trainable_names();
    const auto frozen = clf.frozen_names();
    EXPECT_EQ(trainable.size() + frozen.size(), clf.params().size());
    for (const auto& name : trainable)
        EXPECT_TRUE(std::find(frozen.begin(), frozen.end(), name) == frozen.end());
    for (const auto& name : frozen) EXPECT_TRUE(name.starts_with("extractor."));
}

TEST(Training, FullModelGradientCheck) {
    const auto cfg = toy_config();
    Classifier clf(cfg);
    clf.init(17);
    Rng rng(18);
    const auto batch = toy_batch(cfg, rng, 2);

    std::map<std::string, Tensor> grads;
    clf.run_batch(batch, true, &grads);

    auto loss = [&] { return clf.run_batch(batch, false, nullptr); };
    std::vector<Tensor*> params;
    std::vector<const Tensor*> analytic;
    for (auto& [name, t] : clf.params()) {
        params.push_back(&t);
        analytic.push_back(&grads.at(name));
    }
    const auto rep = nn::grad_check(loss, params, analytic);
    EXPECT_LT(rep.max_err, 1e-4);
}

TEST(Weights, SaveLoadForwardIdentical) {
    TempDir tmp;
    const auto cfg = toy_config();
    Classifier a(cfg);
    a.init(19);
    Rng rng(20);
    const Tensor amp = random_image(8, 8, rng), phase = random_image(8, 8, rng);
    // make running stats nontrivial so the buffer round trip is exercised
    const auto batch = toy_batch(cfg, rng, 2);
    a.run_batch(batch, false, nullptr);
    const Tensor pa = a.predict(amp, phase);

    const auto file = tmp.path / "weights.wgt1";
    a.save_weights(file);
    Classifier b(cfg);
    b.init(999);
    b.load_weights(file);
    const Tensor pb = b.predict(amp, phase);
    for (std::size_t i = 0; i < pa.size(); ++i) ASSERT_EQ(pa[i], pb[i]);
}

TEST(Weights, TamperedRankNamesTensor) {
    TempDir tmp;
    const auto cfg = toy_config();
    Classifier a(cfg);
    a.init(21);
    const auto file = tmp.path / "weights.wgt1";
    a.save_weights(file);

    // first record: u32 name_len, name, u32 rank — corrupt the rank field
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    char lenbuf[4];
    f.seekg(8);
    f.read(lenbuf, 4);
    std::uint32_t name_len = 0;
    std::memcpy(&name_len, lenbuf, 4);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    f.seekp(static_cast<std::streamoff>(12 + name_len));
    const std::uint32_t bad_rank = 9;
    f.write(reinterpret_cast<const char*>(&bad_rank), 4);
    f.close();

    Classifier b(cfg);
    b.init(22);
    try {
        b.load_weights(file);
        FAIL() << "tampered rank accepted";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find(name), std::string::npos)
            << "error does not name the tensor: " << e.what();
    }
}

TEST(Weights, PartialExtractorImportLeavesLstmUntouched) {
    TempDir tmp;
    const auto cfg = toy_config();
    Classifier donor(cfg);
    donor.init(23);
    std::vector<std::pair<std::string, const Tensor*>> subset;
    for (const auto& [name, t] : donor.params())
        if (name.starts_with("extractor.")) subset.emplace_back(name, &t);
    ASSERT_FALSE(subset.empty());
    const auto file = tmp.path / "extractor.wgt1";
    write_wgt1(file, subset);

    Classifier target(cfg);
    target.init(24);
    const Tensor lstm_before = target.params().at("lstm1.fwd.w");
    const Tensor conv_before = target.params().at("extractor.amp.b0.conv0.k");
    target.load_weights(file);
    const Tensor& lstm_after = target.params().at("lstm1.fwd.w");
    const Tensor& conv_after = target.params().at("extractor.amp.b0.conv0.k");
    for (std::size_t i = 0; i < lstm_before.size(); ++i)
        ASSERT_EQ(lstm_before[i], lstm_after[i]);
    bool conv_changed = false;
    for (std::size_t i = 0; i < conv_before.size(); ++i)
        if (conv_before[i] != conv_after[i]) conv_changed = true;
    EXPECT_TRUE(conv_changed);
    for (std::size_t i = 0; i < conv_after.size(); ++i)
        ASSERT_EQ(conv_after[i], donor.params().at("extractor.amp.b0.conv0.k")[i]);
}

TEST(Weights, UnknownTensorNameRejected) {
    TempDir tmp;
    const Tensor stray({2, 2});
    const auto file = tmp.path / "stray.wgt1";
    write_wgt1(file, {{"no.such.tensor", &stray}});
    Classifier target(toy_config());
    target.init(26);
    try {
        target.load_weights(file);
        FAIL() << "stray tensor accepted";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("no.such.tensor"), std::string::npos);
    }
}

TEST(Weights, ShapeMismatchRejected) {
    TempDir tmp;
    const Tensor wrong({3, 3});  // head.b is n_classes = 4
    const auto file = tmp.path / "wrong.wgt1";
    write_wgt1(file, {{"head.b", &wrong}});
    Classifier target(toy_config());
    target.init(27);
    EXPECT_THROW(target.load_weights(file), IoError);
}

TEST(Weights, TruncatedFileRejected) {
    TempDir tmp;
    const auto cfg = toy_config();
    Classifier a(cfg);
    a.init(28);
    const auto file = tmp.path / "trunc.wgt1";
    a.save_weights(file);
    const auto full = std::filesystem::file_size(file);
    std::filesystem::resize_file(file, full - 5);
    Classifier b(cfg);
    b.init(29);
    EXPECT_THROW(b.load_weights(file), IoError);
}
