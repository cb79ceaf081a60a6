#ifndef DASFORGE_REPORT_HPP
#define DASFORGE_REPORT_HPP

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dasforge/common.hpp"
#include "dasforge/harness.hpp"
#include "dasforge/plot.hpp"

namespace dasforge::report {

inline constexpr int kSchemaVersion = 1;

// Write-to-temp + rename, so readers never observe a half-written file.
inline void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot open for writing: " + tmp);
        os << content;
        if (!os) throw IoError("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline void atomic_save_png(const std::filesystem::path& path, const Image& img) {
    const auto tmp = path.string() + ".tmp.png";
    save_png(tmp, img);
    std::filesystem::rename(tmp, path);
}

inline nlohmann::json to_json(const plot::BoxStats& st) {
    return {{"min", st.min}, {"q1", st.q1},   {"median", st.median},
            {"q3", st.q3},   {"max", st.max}, {"mean", st.mean}};
}

inline plot::BoxStats box_stats_from_json(const nlohmann::json& j) {
    plot::BoxStats st;
    st.min = j.at("min").get<double>();
    st.q1 = j.at("q1").get<double>();
    st.median = j.at("median").get<double>();
    st.q3 = j.at("q3").get<double>();
    st.max = j.at("max").get<double>();
    st.mean = j.at("mean").get<double>();
    return st;
}

inline nlohmann::json to_json(const harness::ConfusionMatrix& cm) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t t = 0; t < cm.n; ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t p = 0; p < cm.n; ++p) row.push_back(cm.at(t, p));
        rows.push_back(row);
    }
    return rows;
}

inline harness::ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
    harness::ConfusionMatrix cm(j.size());
    for (std::size_t t = 0; t < cm.n; ++t)
        for (std::size_t p = 0; p < cm.n; ++p) cm.at(t, p) = j.at(t).at(p).get<std::size_t>();
    return cm;
}

inline nlohmann::json to_json(const harness::RunReport& r) {
    return {{"seed", r.seed},
            {"train_loss", r.train_loss},
            {"train_accuracy", r.train_accuracy},
            {"test_loss", r.test_loss},
            {"test_accuracy", r.test_accuracy},
            {"confusion", to_json(r.confusion)},
            {"final_accuracy", r.final_accuracy},
            {"wall_seconds", r.wall_seconds}};
}

inline harness::RunReport run_report_from_json(const nlohmann::json& j) {
    harness::RunReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.train_loss = j.at("train_loss").get<std::vector<double>>();
    r.train_accuracy = j.at("train_accuracy").get<std::vector<double>>();
    r.test_loss = j.at("test_loss").get<std::vector<double>>();
    r.test_accuracy = j.at("test_accuracy").get<std::vector<double>>();
    r.confusion = confusion_from_json(j.at("confusion"));
    r.final_accuracy = j.at("final_accuracy").get<double>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    return r;
}

inline std::string curves_csv(const harness::RunReport& r) {
    std::ostringstream os;
    os << "epoch,train_loss,train_accuracy,test_loss,test_accuracy\n";
    os.precision(17);
    for (std::size_t e = 0; e < r.train_loss.size(); ++e)
        os << (e + 1) << ',' << r.train_loss[e] << ',' << r.train_accuracy[e] << ','
           << r.test_loss[e] << ',' << r.test_accuracy[e] << '\n';
    return os.str();
}

// report.json + per-run curve CSVs and PNGs + accuracy boxplot + confusion
// heatmaps, all written atomically.
inline void export_reports(const harness::RunsReport& runs, const std::filesystem::path& out_dir) {
    if (runs.runs.empty()) throw ConfigError("no runs to export");
    std::filesystem::create_directories(out_dir);

    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["accuracy_stats"] = to_json(runs.accuracy_stats);
    j["runs"] = nlohmann::json::array();
    for (const auto& r : runs.runs) j["runs"].push_back(to_json(r));
    atomic_write_text(out_dir / "report.json", j.dump(2) + "\n");

    for (std::size_t i = 0; i < runs.runs.size(); ++i) {
        const auto& r = runs.runs[i];
        const std::string tag = "run" + std::to_string(i);
        atomic_write_text(out_dir / ("curves_" + tag + ".csv"), curves_csv(r));
        atomic_save_png(out_dir / ("curves_" + tag + ".png"),
                        plot::plot_curves({{"train loss", r.train_loss},
                                           {"test loss", r.test_loss},
                                           {"train acc", r.train_accuracy},
                                           {"test acc", r.test_accuracy}},
                                          "loss and accuracy " + tag));
        std::vector<std::vector<double>> cm(r.confusion.n, std::vector<double>(r.confusion.n));
        for (std::size_t t = 0; t < r.confusion.n; ++t)
            for (std::size_t p = 0; p < r.confusion.n; ++p)
                cm[t][p] = static_cast<double>(r.confusion.at(t, p));
        atomic_save_png(out_dir / ("confusion_" + tag + ".png"),
                        plot::plot_heatmap(cm, "confusion " + tag));
    }

    atomic_save_png(out_dir / "accuracy_boxplot.png",
                    plot::plot_boxplot({{"runs", runs.accuracy_stats}}, "test accuracy"));
}

inline void export_embedding(const harness::EmbeddingSet& set,
                             const std::filesystem::path& out_dir, std::size_t n_classes = 15) {
    std::filesystem::create_directories(out_dir);
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["stage"] = set.stage;
    j["labels"] = set.labels;
    j["points"] = nlohmann::json::array();
    for (std::size_t i = 0; i < set.embedding.n; ++i)
        j["points"].push_back({set.embedding.x_of(i), set.embedding.y_of(i)});
    j["final_kl"] = set.embedding.kl_history.empty() ? 0.0 : set.embedding.kl_history.back();
    atomic_write_text(out_dir / ("embedding_" + set.stage + ".json"), j.dump(2) + "\n");
    atomic_save_png(out_dir / ("embedding_" + set.stage + ".png"),
                    plot::plot_scatter(set.embedding.y, set.labels, n_classes,
                                       "t-sne " + set.stage));
}

}  // namespace dasforge::report

#endif
