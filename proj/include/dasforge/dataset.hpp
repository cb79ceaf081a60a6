#ifndef DASFORGE_DATASET_HPP
#define DASFORGE_DATASET_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "dasforge/common.hpp"
#include "dasforge/image.hpp"
#include "dasforge/rng.hpp"
#include "dasforge/sim.hpp"
#include "dasforge/tsm.hpp"

namespace dasforge::dataset {

using sim::EventLabel;

struct ColumnRange {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive

    std::size_t width() const { return end - begin; }
    bool overlaps(const ColumnRange& o) const { return begin < o.end && o.begin < end; }
    bool operator==(const ColumnRange& o) const { return begin == o.begin && end == o.end; }
};

// Candidate destination blocks: width-sized tiles covering the columns outside
// src, shuffled by seed, first `count` taken. All base samples share them.
inline std::vector<std::size_t> make_relocation_offsets(std::size_t n_cols, ColumnRange src,
                                                        std::size_t count, std::uint64_t seed) {
    if (src.begin >= src.end || src.end > n_cols)
        throw ConfigError("source column range out of bounds");
    const std::size_t w = src.width();
    std::vector<std::size_t> tiles;
    for (std::size_t b = 0; b + w <= src.begin; b += w) tiles.push_back(b);
    for (std::size_t b = src.end; b + w <= n_cols; b += w) tiles.push_back(b);
    if (tiles.size() < count)
        throw ConfigError("matrix too narrow: only " + std::to_string(tiles.size()) +
                          " relocation blocks fit, need " + std::to_string(count));
    Rng rng(derive_seed(seed, "offsets"));
    rng.shuffle(tiles);
    tiles.resize(count);
    return tiles;
}

// One output per destination offset: a copy of the matrix with the block at
// that offset overwritten by the src block. A destination equal to src is a
// no-op copy; a partial overlap would shear the event and is rejected.
inline std::vector<RealMatrix> relocate_event_columns(const RealMatrix& m, ColumnRange src,
                                                      const std::vector<std::size_t>& offsets) {
    if (src.begin >= src.end || src.end > m.cols)
        throw ConfigError("source column range out of bounds");
    const std::size_t w = src.width();
    std::vector<RealMatrix> out;
    out.reserve(offsets.size());
    for (std::size_t off : offsets) {
        ColumnRange dst{off, off + w};
        if (dst.end > m.cols) throw ConfigError("destination block out of bounds");
        if (dst.overlaps(src) && !(dst == src))
            throw ConfigError("destination block partially overlaps the source");
        RealMatrix copy = m;
        for (std::size_t r = 0; r < m.rows; ++r)
            std::copy_n(m.row(r) + src.begin, w, copy.row(r) + off);
        out.push_back(std::move(copy));
    }
    return out;
}

inline RealMatrix vertical_flip(const RealMatrix& m) {
    RealMatrix out(m.rows, m.cols);
    for (std::size_t r = 0; r < m.rows; ++r)
        std::copy_n(m.row(r), m.cols, out.row(m.rows - 1 - r));
    return out;
}

inline Image vertical_flip(const Image& img) {
    Image out(img.height, img.width);
    const std::size_t stride = img.width * 3;
    for (std::size_t r = 0; r < img.height; ++r)
        std::copy_n(img.pixels.data() + r * stride, stride,
                    out.pixels.data() + (img.height - 1 - r) * stride);
    return out;
}

struct LabeledMatrixPair {
    std::string base_id;
    EventLabel label;
    RealMatrix amp;
    RealMatrix phase;
};

struct SampleEntry {
    std::string id;
    int class_index = 0;
    double amplitude = 0.0;
    double frequency = 0.0;
    std::string base_id;
    std::string augmentation;  // "orig", "off<col>", with optional "_flip"
    std::string amp_tsm, phase_tsm, amp_png, phase_png;  // relative to manifest dir

    bool operator==(const SampleEntry& o) const {
        return id == o.id && class_index == o.class_index && amplitude == o.amplitude &&
               frequency == o.frequency && base_id == o.base_id && augmentation == o.augmentation &&
               amp_tsm == o.amp_tsm && phase_tsm == o.phase_tsm && amp_png == o.amp_png &&
               phase_png == o.phase_png;
    }
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    std::size_t image_height = 0;
    std::size_t image_width = 0;
    std::string colormap = "grayscale3";
    std::vector<SampleEntry> samples;

    bool operator==(const DatasetManifest& o) const {
        return seed == o.seed && image_height == o.image_height && image_width == o.image_width &&
               colormap == o.colormap && samples == o.samples;
    }

    std::map<int, std::size_t> counts_per_class() const {
        std::map<int, std::size_t> counts;
        for (const auto& s : samples) ++counts[s.class_index];
        return counts;
    }
};

namespace datasetdetail {

inline nlohmann::json to_json(const SampleEntry& s) {
    return nlohmann::json{{"id", s.id},
                          {"class", s.class_index},
                          {"amplitude", s.amplitude},
                          {"frequency", s.frequency},
                          {"base", s.base_id},
                          {"augmentation", s.augmentation},
                          {"amp_tsm", s.amp_tsm},
                          {"phase_tsm", s.phase_tsm},
                          {"amp_png", s.amp_png},
                          {"phase_png", s.phase_png}};
}

inline SampleEntry sample_from_json(const nlohmann::json& j) {
    SampleEntry s;
    s.id = j.at("id").get<std::string>();
    s.class_index = j.at("class").get<int>();
    s.amplitude = j.at("amplitude").get<double>();
    s.frequency = j.at("frequency").get<double>();
    s.base_id = j.at("base").get<std::string>();
    s.augmentation = j.at("augmentation").get<std::string>();
    s.amp_tsm = j.at("amp_tsm").get<std::string>();
    s.phase_tsm = j.at("phase_tsm").get<std::string>();
    s.amp_png = j.at("amp_png").get<std::string>();
    s.phase_png = j.at("phase_png").get<std::string>();
    if (s.class_index < 0 || s.class_index >= EventLabel::n_classes)
        throw IoError("manifest sample '" + s.id + "' has class " +
                      std::to_string(s.class_index) + " outside 0..14");
    return s;
}

}  // namespace datasetdetail

inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    nlohmann::json j;
    j["seed"] = m.seed;
    j["image_height"] = m.image_height;
    j["image_width"] = m.image_width;
    j["colormap"] = m.colormap;
    j["samples"] = nlohmann::json::array();
    for (const auto& s : m.samples) j["samples"].push_back(datasetdetail::to_json(s));
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failed: " + path.string());
}

// check_files: verify every referenced file exists next to the manifest.
inline DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + path.string() + ": " + e.what());
    }
    DatasetManifest m;
    try {
        m.seed = j.at("seed").get<std::uint64_t>();
        m.image_height = j.at("image_height").get<std::size_t>();
        m.image_width = j.at("image_width").get<std::size_t>();
        m.colormap = j.at("colormap").get<std::string>();
        for (const auto& js : j.at("samples")) m.samples.push_back(datasetdetail::sample_from_json(js));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + path.string() + ": " + e.what());
    }
    if (check_files) {
        const auto dir = path.parent_path();
        for (const auto& s : m.samples)
            for (const auto& rel : {s.amp_tsm, s.phase_tsm, s.amp_png, s.phase_png})
                if (!std::filesystem::exists(dir / rel))
                    throw IoError("manifest references missing file: " + (dir / rel).string());
    }
    return m;
}

struct AugmentSpec {
    ColumnRange event_columns{2200, 2500};
    std::size_t n_offsets = 9;
    bool flip = true;
    std::uint64_t seed = 1;
};

// Full augmentation chain per base pair: original + n_offsets relocations,
// then vertical flips of all of those. The stored matrices are the rendered
// (normalized + resized) grayscale planes, at image resolution, so the numeric
// record matches what the classifier consumes.
inline DatasetManifest build_dataset(const std::vector<LabeledMatrixPair>& base,
                                     const AugmentSpec& aug, const RenderSpec& render,
                                     const std::filesystem::path& out_dir) {
    if (base.empty()) throw ConfigError("no base recordings given");
    render.validate();
    for (const auto& b : base)
        if (!b.amp.same_shape(b.phase))
            throw ConfigError("base pair '" + b.base_id + "' has mismatched matrix shapes");

    std::filesystem::create_directories(out_dir);
    const auto offsets =
        make_relocation_offsets(base.front().amp.cols, aug.event_columns, aug.n_offsets, aug.seed);

    DatasetManifest manifest;
    manifest.seed = aug.seed;
    manifest.image_height = render.out_height;
    manifest.image_width = render.out_width;
    manifest.colormap = to_string(render.colormap);

    auto emit = [&](const std::string& id, const EventLabel& label, const std::string& base_id,
                    const std::string& tag, const RealMatrix& amp, const RealMatrix& phase) {
        SampleEntry s;
        s.id = id;
        s.class_index = label.class_index();
        s.amplitude = label.amplitude_v;
        s.frequency = label.frequency_hz;
        s.base_id = base_id;
        s.augmentation = tag;
        s.amp_tsm = id + "_amp.tsm";
        s.phase_tsm = id + "_phase.tsm";
        s.amp_png = id + "_amp.png";
        s.phase_png = id + "_phase.png";
        const RealMatrix amp_plane = resize_matrix(min_max_normalize(amp), render.out_height,
                                                   render.out_width);
        const RealMatrix phase_plane = resize_matrix(min_max_normalize(phase), render.out_height,
                                                     render.out_width);
        save_tsm(out_dir / s.amp_tsm, amp_plane);
        save_tsm(out_dir / s.phase_tsm, phase_plane);
        save_png(out_dir / s.amp_png, render_image(amp, render));
        save_png(out_dir / s.phase_png, render_image(phase, render));
        manifest.samples.push_back(std::move(s));
    };

    for (const auto& b : base) {
        if (!b.amp.same_shape(base.front().amp))
            throw ConfigError("base recordings disagree on matrix shape");
        std::vector<std::pair<std::string, std::pair<RealMatrix, RealMatrix>>> variants;
        variants.emplace_back("orig", std::make_pair(b.amp, b.phase));
        const auto amp_moved = relocate_event_columns(b.amp, aug.event_columns, offsets);
        const auto phase_moved = relocate_event_columns(b.phase, aug.event_columns, offsets);
        for (std::size_t i = 0; i < offsets.size(); ++i)
            variants.emplace_back("off" + std::to_string(offsets[i]),
                                  std::make_pair(amp_moved[i], phase_moved[i]));
        const std::size_t n_unflipped = variants.size();
        if (aug.flip)
            for (std::size_t i = 0; i < n_unflipped; ++i)
                variants.emplace_back(variants[i].first + "_flip",
                                      std::make_pair(vertical_flip(variants[i].second.first),
                                                     vertical_flip(variants[i].second.second)));
        for (const auto& [tag, pair] : variants)
            emit(b.base_id + "_" + tag, b.label, b.base_id, tag, pair.first, pair.second);
    }

    const std::size_t expect = base.size() * (1 + aug.n_offsets) * (aug.flip ? 2 : 1);
    if (manifest.samples.size() != expect)
        throw IoError("augmentation arithmetic broke: " + std::to_string(manifest.samples.size()) +
                      " samples, expected " + std::to_string(expect));
    save_manifest(out_dir / "manifest.json", manifest);
    return manifest;
}

// Uniform random split without replacement: round(fraction*N) train samples.
inline std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& m,
                                                         double train_fraction,
                                                         std::uint64_t seed) {
    if (m.samples.empty()) throw ConfigError("cannot split an empty manifest");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train fraction must lie in (0,1)");
    const std::size_t n = m.samples.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(order);

    DatasetManifest train = m, test = m;
    train.samples.clear();
    test.samples.clear();
    for (std::size_t i = 0; i < n; ++i)
        (i < n_train ? train : test).samples.push_back(m.samples[order[i]]);
    return {train, test};
}

}  // namespace dasforge::dataset

#endif
