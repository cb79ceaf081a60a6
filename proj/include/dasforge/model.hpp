#ifndef DASFORGE_MODEL_HPP
#define DASFORGE_MODEL_HPP

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dasforge/common.hpp"
#include "dasforge/nn.hpp"
#include "dasforge/png_io.hpp"
#include "dasforge/rng.hpp"
#include "dasforge/tsm.hpp"

namespace dasforge::model {

using nn::Tensor;

enum class ExtractorVariant { vgg_s, plain_s, depthwise_s };

inline const char* to_string(ExtractorVariant v) {
    switch (v) {
        case ExtractorVariant::vgg_s: return "vgg_s";
        case ExtractorVariant::plain_s: return "plain_s";
        default: return "depthwise_s";
    }
}

inline ExtractorVariant extractor_variant_from_string(const std::string& s) {
    if (s == "vgg_s") return ExtractorVariant::vgg_s;
    if (s == "plain_s") return ExtractorVariant::plain_s;
    if (s == "depthwise_s") return ExtractorVariant::depthwise_s;
    throw ConfigError("unknown extractor variant '" + s + "'");
}

// Each block halves the spatial dims with a stride-2 max pool; channel counts
// are per block. vgg_s stacks two 3×3 convs per block, plain_s uses one,
// depthwise_s uses depthwise 3×3 + pointwise 1×1 after the stem block.
struct FeatureExtractorSpec {
    ExtractorVariant variant = ExtractorVariant::vgg_s;
    std::size_t in_height = 64;
    std::size_t in_width = 64;
    std::size_t in_channels = 3;
    std::vector<std::size_t> channels = {6, 12, 24};

    std::size_t n_blocks() const { return channels.size(); }
    std::size_t out_height() const { return in_height >> n_blocks(); }
    std::size_t out_width() const { return in_width >> n_blocks(); }
    std::size_t out_channels() const { return channels.back(); }
    std::size_t feature_len() const { return out_height() * out_width() * out_channels(); }

    void validate() const {
        if (channels.empty()) throw ConfigError("extractor needs at least one block");
        const std::size_t div = std::size_t{1} << n_blocks();
        if (in_height % div != 0 || in_width % div != 0)
            throw ConfigError("input dims must be divisible by 2^blocks = " + std::to_string(div));
        if (out_height() == 0 || out_width() == 0)
            throw ConfigError("too many blocks for the input resolution");
        for (std::size_t c : channels)
            if (c == 0) throw ConfigError("block channel count must be positive");
    }

    static FeatureExtractorSpec desk_default(ExtractorVariant v) {
        FeatureExtractorSpec spec;
        spec.variant = v;
        switch (v) {
            case ExtractorVariant::vgg_s: spec.channels = {6, 12, 24}; break;
            case ExtractorVariant::plain_s: spec.channels = {8, 16, 32}; break;
            case ExtractorVariant::depthwise_s: spec.channels = {8, 16, 32}; break;
        }
        return spec;
    }
};

struct ModelConfig {
    FeatureExtractorSpec extractor;
    bool freeze_extractor = false;
    std::size_t lstm_hidden = 64;
    std::size_t n_classes = 15;
    std::size_t seq_steps = 0;  // 0 → extractor output height

    std::size_t steps() const { return seq_steps == 0 ? extractor.out_height() : seq_steps; }
    // per-step feature width: both branches contribute their row-band
    std::size_t step_dim() const {
        return 2 * extractor.feature_len() / steps();
    }

    void validate() const {
        extractor.validate();
        if (lstm_hidden == 0) throw ConfigError("lstm hidden size must be positive");
        if (n_classes < 2) throw ConfigError("need at least two classes");
        if (extractor.out_height() % steps() != 0)
            throw ConfigError("sequence steps " + std::to_string(steps()) +
                              " must divide extractor output height " +
                              std::to_string(extractor.out_height()));
    }
};

namespace modeldetail {

struct LayerDesc {
    enum Kind { conv, dwconv, relu, pool } kind;
    std::string name;       // parameter key fragment for conv/dwconv
    std::size_t stride = 1;
    std::size_t pad = 1;
    std::size_t window = 2;
};

inline std::vector<LayerDesc> extractor_layers(const FeatureExtractorSpec& spec) {
    std::vector<LayerDesc> layers;
    for (std::size_t bi = 0; bi < spec.channels.size(); ++bi) {
        const std::string b = "b" + std::to_string(bi);
        switch (spec.variant) {
            case ExtractorVariant::vgg_s:
                layers.push_back({LayerDesc::conv, b + ".conv0", 1, 1, 0});
                layers.push_back({LayerDesc::relu, "", 1, 0, 0});
                layers.push_back({LayerDesc::conv, b + ".conv1", 1, 1, 0});
                layers.push_back({LayerDesc::relu, "", 1, 0, 0});
                break;
            case ExtractorVariant::plain_s:
                layers.push_back({LayerDesc::conv, b + ".conv0", 1, 1, 0});
                layers.push_back({LayerDesc::relu, "", 1, 0, 0});
                break;
            case ExtractorVariant::depthwise_s:
                if (bi == 0) {
                    layers.push_back({LayerDesc::conv, b + ".conv0", 1, 1, 0});
                    layers.push_back({LayerDesc::relu, "", 1, 0, 0});
                } else {
                    layers.push_back({LayerDesc::dwconv, b + ".dw", 1, 1, 0});
                    layers.push_back({LayerDesc::relu, "", 1, 0, 0});
                    layers.push_back({LayerDesc::conv, b + ".pw", 1, 0, 0});  // 1×1
                    layers.push_back({LayerDesc::relu, "", 1, 0, 0});
                }
                break;
        }
        layers.push_back({LayerDesc::pool, "", 2, 0, 2});
    }
    return layers;
}

// kernel shape for a named extractor conv layer
inline std::vector<std::size_t> conv_kernel_dims(const FeatureExtractorSpec& spec,
                                                 const LayerDesc& layer) {
    // channel in/out per block from the layer name prefix "b<i>."
    const std::size_t bi = static_cast<std::size_t>(std::stoul(layer.name.substr(1)));
    const std::size_t cin_block = bi == 0 ? spec.in_channels : spec.channels[bi - 1];
    const std::size_t cout = spec.channels[bi];
    if (layer.kind == LayerDesc::dwconv) return {3, 3, cin_block};
    if (layer.name.ends_with(".pw")) return {1, 1, cin_block, cout};
    if (spec.variant == ExtractorVariant::vgg_s && layer.name.ends_with(".conv1"))
        return {3, 3, cout, cout};
    return {3, 3, cin_block, cout};
}

}  // namespace modeldetail

// Per-branch forward cache: input to every layer, pool caches by layer index.
struct BranchCache {
    std::vector<Tensor> inputs;
    std::map<std::size_t, nn::MaxPoolCache> pools;
    Tensor out_map;
    Tensor flat;
};

struct SpatialFeatures {
    Tensor map;   // H_f×W_f×C_f
    Tensor flat;  // feature_len
};

// One labeled input pair, images scaled to [0,1], H×W×3 tensors.
struct Sample {
    Tensor amp;
    Tensor phase;
    int label = 0;
};

inline Tensor image_to_tensor(const Image& img) {
    Tensor t({img.height, img.width, 3});
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<double>(img.pixels[i]) / 255.0;
    return t;
}

class Classifier {
  public:
    explicit Classifier(ModelConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        layers_ = modeldetail::extractor_layers(cfg_.extractor);
        const std::size_t L = cfg_.extractor.feature_len();
        const std::size_t H = cfg_.lstm_hidden;
        const std::size_t D = cfg_.step_dim();

        for (const char* branch : {"amp", "phase"}) {
            for (const auto& layer : layers_) {
                if (layer.kind != modeldetail::LayerDesc::conv &&
                    layer.kind != modeldetail::LayerDesc::dwconv)
                    continue;
                const auto kd = modeldetail::conv_kernel_dims(cfg_.extractor, layer);
                const std::string key = std::string("extractor.") + branch + "." + layer.name;
                params_[key + ".k"] = Tensor(kd);
                params_[key + ".b"] = Tensor({kd.size() == 4 ? kd[3] : kd[2]});
            }
            params_[std::string("bn.") + branch + ".gamma"] = Tensor({L});
            params_[std::string("bn.") + branch + ".beta"] = Tensor({L});
        }
        bn_amp_ = nn::BatchNormState(L);
        bn_phase_ = nn::BatchNormState(L);

        auto add_lstm = [&](const std::string& prefix, std::size_t input_dim) {
            for (const char* dir : {"fwd", "bwd"}) {
                params_[prefix + "." + dir + ".w"] = Tensor({4 * H, input_dim});
                params_[prefix + "." + dir + ".u"] = Tensor({4 * H, H});
                params_[prefix + "." + dir + ".b"] = Tensor({4 * H});
            }
        };
        add_lstm("lstm1", D);
        add_lstm("lstm2", 2 * H);
        params_["head.w"] = Tensor({2 * H, cfg_.n_classes});
        params_["head.b"] = Tensor({cfg_.n_classes});
    }

    const ModelConfig& config() const { return cfg_; }
    std::map<std::string, Tensor>& params() { return params_; }
    const std::map<std::string, Tensor>& params() const { return params_; }
    nn::BatchNormState& bn_state(const std::string& branch) {
        return branch == "amp" ? bn_amp_ : bn_phase_;
    }

    // He for conv/dense, uniform ±1/√H for LSTM, forget-gate bias 1; γ=1 β=0.
    // Seeds derive from the tensor name, so init order never matters.
    void init(std::uint64_t seed) {
        const std::size_t H = cfg_.lstm_hidden;
        for (auto& [name, t] : params_) {
            Rng rng(derive_seed(seed, "init." + name));
            if (name.ends_with(".gamma")) {
                std::fill(t.data.begin(), t.data.end(), 1.0);
            } else if (name.ends_with(".beta")) {
                std::fill(t.data.begin(), t.data.end(), 0.0);
            } else if (name.starts_with("lstm")) {
                if (name.ends_with(".b")) {
                    std::fill(t.data.begin(), t.data.end(), 0.0);
                    for (std::size_t j = H; j < 2 * H; ++j) t[j] = 1.0;  // forget gate
                } else {
                    nn::uniform_fill(t, 1.0 / std::sqrt(static_cast<double>(H)), rng);
                }
            } else if (name.ends_with(".k")) {
                const auto& d = t.dims;
                const std::size_t fan_in =
                    d.size() == 4 ? d[0] * d[1] * d[2] : d[0] * d[1];  // depthwise: per-channel k×k
                nn::he_fill(t, fan_in, rng);
            } else if (name == "head.w") {
                nn::he_fill(t, t.dims[0], rng);
            } else {
                std::fill(t.data.begin(), t.data.end(), 0.0);  // biases
            }
        }
        bn_amp_ = nn::BatchNormState(cfg_.extractor.feature_len());
        bn_phase_ = nn::BatchNormState(cfg_.extractor.feature_len());
    }

    // Trainability mask: frozen mode excludes "extractor." tensors; batch-norm
    // γ/β sit downstream of the extractor and stay trainable.
    std::vector<std::string> trainable_names() const {
        std::vector<std::string> names;
        for (const auto& [name, t] : params_)
            if (!(cfg_.freeze_extractor && name.starts_with("extractor."))) names.push_back(name);
        return names;
    }

    std::vector<std::string> frozen_names() const {
        std::vector<std::string> names;
        for (const auto& [name, t] : params_)
            if (cfg_.freeze_extractor && name.starts_with("extractor.")) names.push_back(name);
        return names;
    }

    SpatialFeatures extract_spatial(const Tensor& image, const std::string& branch) const {
        BranchCache cache;
        branch_forward(image, branch, cache);
        return SpatialFeatures{cache.out_map, cache.flat};
    }

    // Single-pair inference with running batch-norm statistics.
    Tensor predict(const Tensor& amp_img, const Tensor& phase_img) {
        BranchCache ca, cp;
        branch_forward(amp_img, "amp", ca);
        branch_forward(phase_img, "phase", cp);
        Tensor xa({1, ca.flat.size()}), xp({1, cp.flat.size()});
        xa.data = ca.flat.data;
        xp.data = cp.flat.data;
        const Tensor ya = nn::batchnorm_forward(xa, params_.at("bn.amp.gamma"),
                                                params_.at("bn.amp.beta"), false, bn_amp_, nullptr);
        const Tensor yp = nn::batchnorm_forward(xp, params_.at("bn.phase.gamma"),
                                                params_.at("bn.phase.beta"), false, bn_phase_,
                                                nullptr);
        const Tensor seq = make_sequence(ya.data.data(), yp.data.data());
        const auto l1 = nn::bilstm_forward(seq, lstm_params("lstm1"));
        const auto l2 = nn::bilstm_forward(l1.y, lstm_params("lstm2"));
        const Tensor fin = final_state(l2.y);
        const Tensor logits = nn::dense_forward(fin, params_.at("head.w"), params_.at("head.b"));
        Tensor probs = nn::softmax(logits);
        if (!probs.all_finite()) throw ConfigError("non-finite activations in forward pass");
        return probs;
    }

    int predict_class(const Tensor& amp_img, const Tensor& phase_img) {
        const Tensor p = predict(amp_img, phase_img);
        return static_cast<int>(std::max_element(p.data.begin(), p.data.end()) - p.data.begin());
    }

    // Train-mode forward over a batch; fills `grads` (pre-zeroed here) with
    // mean-loss gradients when backward is requested. Deterministic: samples
    // are processed and reduced in index order.
    double run_batch(const std::vector<Sample>& batch, bool backward,
                     std::map<std::string, Tensor>* grads,
                     std::vector<int>* predictions = nullptr) {
        const std::size_t N = batch.size();
        if (N < 2) throw ConfigError("train-mode batch needs at least 2 samples");
        if (backward && grads == nullptr)
            throw ConfigError("backward pass needs a gradient map");
        const std::size_t L = cfg_.extractor.feature_len();
        const std::size_t T = cfg_.steps();
        const std::size_t H = cfg_.lstm_hidden;

        std::map<std::string, Tensor> grads_unused;
        std::map<std::string, Tensor>& gm = grads != nullptr ? *grads : grads_unused;
        if (grads != nullptr) {
            gm.clear();
            for (const auto& [name, t] : params_) gm[name] = Tensor(t.dims);
        }

        std::vector<BranchCache> bca(N), bcp(N);
        Tensor xa({N, L}), xp({N, L});
        for (std::size_t n = 0; n < N; ++n) {
            branch_forward(batch[n].amp, "amp", bca[n]);
            branch_forward(batch[n].phase, "phase", bcp[n]);
            std::copy(bca[n].flat.data.begin(), bca[n].flat.data.end(), xa.data.begin() + n * L);
            std::copy(bcp[n].flat.data.begin(), bcp[n].flat.data.end(), xp.data.begin() + n * L);
        }

        nn::BatchNormCache cache_a = nn::make_batchnorm_cache(N, L);
        nn::BatchNormCache cache_p = nn::make_batchnorm_cache(N, L);
        const Tensor ya = nn::batchnorm_forward(xa, params_.at("bn.amp.gamma"),
                                                params_.at("bn.amp.beta"), true, bn_amp_, &cache_a);
        const Tensor yp = nn::batchnorm_forward(xp, params_.at("bn.phase.gamma"),
                                                params_.at("bn.phase.beta"), true, bn_phase_,
                                                &cache_p);

        const auto p1 = lstm_params("lstm1");
        const auto p2 = lstm_params("lstm2");
        double loss_sum = 0.0;
        Tensor dya({N, L}), dyp({N, L});
        for (std::size_t n = 0; n < N; ++n) {
            const Tensor seq = make_sequence(ya.data.data() + n * L, yp.data.data() + n * L);
            const auto l1 = nn::bilstm_forward(seq, p1);
            const auto l2 = nn::bilstm_forward(l1.y, p2);
            const Tensor fin = final_state(l2.y);
            const Tensor logits =
                nn::dense_forward(fin, params_.at("head.w"), params_.at("head.b"));
            Tensor onehot({cfg_.n_classes});
            if (batch[n].label < 0 || static_cast<std::size_t>(batch[n].label) >= cfg_.n_classes)
                throw ConfigError("sample label out of range");
            onehot[static_cast<std::size_t>(batch[n].label)] = 1.0;
            const auto sx = nn::softmax_xent(logits, onehot);
            if (!std::isfinite(sx.loss))
                throw ConfigError("non-finite loss at batch sample " + std::to_string(n));
            loss_sum += sx.loss;
            if (predictions)
                predictions->push_back(static_cast<int>(
                    std::max_element(sx.probs.data.begin(), sx.probs.data.end()) -
                    sx.probs.data.begin()));
            if (!backward || grads == nullptr) continue;

            Tensor dlogits = nn::softmax_xent_backward(sx, onehot);
            for (double& v : dlogits.data) v /= static_cast<double>(N);
            auto gd = nn::dense_backward(fin, params_.at("head.w"), dlogits);
            accumulate(gm, "head.w", gd.dw);
            accumulate(gm, "head.b", gd.db);

            Tensor dy2({T, 2 * H});
            for (std::size_t j = 0; j < H; ++j) {
                dy2.at2(T - 1, j) = gd.dx[j];        // forward direction final step
                dy2.at2(0, H + j) = gd.dx[H + j];    // backward direction final step
            }
            auto g2 = nn::bilstm_backward(l2, p2, dy2);
            accumulate_lstm(gm, "lstm2", g2.dp);
            auto g1 = nn::bilstm_backward(l1, p1, g2.dx);
            accumulate_lstm(gm, "lstm1", g1.dp);
            split_sequence_grad(g1.dx, dya.data.data() + n * L, dyp.data.data() + n * L);
        }

        if (backward && grads != nullptr) {
            auto ga = nn::batchnorm_backward(cache_a, params_.at("bn.amp.gamma"), dya);
            auto gp = nn::batchnorm_backward(cache_p, params_.at("bn.phase.gamma"), dyp);
            accumulate(gm, "bn.amp.gamma", ga.dgamma);
            accumulate(gm, "bn.amp.beta", ga.dbeta);
            accumulate(gm, "bn.phase.gamma", gp.dgamma);
            accumulate(gm, "bn.phase.beta", gp.dbeta);
            for (std::size_t n = 0; n < N; ++n) {
                Tensor da({L}), dp({L});
                std::copy_n(ga.dx.data.data() + n * L, L, da.data.begin());
                std::copy_n(gp.dx.data.data() + n * L, L, dp.data.begin());
                branch_backward("amp", bca[n], da, gm);
                branch_backward("phase", bcp[n], dp, gm);
            }
        }
        return loss_sum / static_cast<double>(N);
    }

    void save_weights(const std::filesystem::path& path) const;
    void load_weights(const std::filesystem::path& path);

  private:
    ModelConfig cfg_;
    std::map<std::string, Tensor> params_;
    std::vector<modeldetail::LayerDesc> layers_;
    nn::BatchNormState bn_amp_, bn_phase_;

    nn::BiLstmParams lstm_params(const std::string& prefix) const {
        nn::BiLstmParams p{{params_.at(prefix + ".fwd.w"), params_.at(prefix + ".fwd.u"),
                            params_.at(prefix + ".fwd.b")},
                           {params_.at(prefix + ".bwd.w"), params_.at(prefix + ".bwd.u"),
                            params_.at(prefix + ".bwd.b")}};
        return p;
    }

    static void accumulate(std::map<std::string, Tensor>& grads, const std::string& name,
                           const Tensor& g) {
        Tensor& slot = grads.at(name);
        for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
    }

    static void accumulate_lstm(std::map<std::string, Tensor>& grads, const std::string& prefix,
                                const nn::BiLstmParams& g) {
        accumulate(grads, prefix + ".fwd.w", g.fwd.w);
        accumulate(grads, prefix + ".fwd.u", g.fwd.u);
        accumulate(grads, prefix + ".fwd.b", g.fwd.b);
        accumulate(grads, prefix + ".bwd.w", g.bwd.w);
        accumulate(grads, prefix + ".bwd.u", g.bwd.u);
        accumulate(grads, prefix + ".bwd.b", g.bwd.b);
    }

    // Timestep t carries the t-th row-band of both branches (amplitude block
    // first), so the sequence follows the image's slow-time axis.
    Tensor make_sequence(const double* amp_feat, const double* phase_feat) const {
        const std::size_t T = cfg_.steps();
        const std::size_t band = cfg_.extractor.feature_len() / T;
        Tensor seq({T, 2 * band});
        for (std::size_t t = 0; t < T; ++t) {
            std::copy_n(amp_feat + t * band, band, seq.data.data() + t * 2 * band);
            std::copy_n(phase_feat + t * band, band, seq.data.data() + t * 2 * band + band);
        }
        return seq;
    }

    void split_sequence_grad(const Tensor& dseq, double* damp, double* dphase) const {
        const std::size_t T = cfg_.steps();
        const std::size_t band = cfg_.extractor.feature_len() / T;
        for (std::size_t t = 0; t < T; ++t) {
            std::copy_n(dseq.data.data() + t * 2 * band, band, damp + t * band);
            std::copy_n(dseq.data.data() + t * 2 * band + band, band, dphase + t * band);
        }
    }

    // Second Bi-LSTM emits the final state per direction: forward's last step
    // and backward's step 0 (where the reversed scan ends).
    Tensor final_state(const Tensor& y) const {
        const std::size_t T = y.dims[0];
        const std::size_t H = cfg_.lstm_hidden;
        Tensor fin({2 * H});
        std::copy_n(y.data.data() + (T - 1) * 2 * H, H, fin.data.begin());
        std::copy_n(y.data.data() + H, H, fin.data.begin() + H);
        return fin;
    }

    void branch_forward(const Tensor& image, const std::string& branch, BranchCache& cache) const {
        const auto& spec = cfg_.extractor;
        if (image.dims != std::vector<std::size_t>{spec.in_height, spec.in_width, spec.in_channels})
            throw ConfigError("input image has shape " + image.shape_str() + ", expected " +
                              std::to_string(spec.in_height) + "x" + std::to_string(spec.in_width) +
                              "x" + std::to_string(spec.in_channels));
        Tensor x = image;
        cache.inputs.clear();
        cache.pools.clear();
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            const auto& layer = layers_[li];
            cache.inputs.push_back(x);
            switch (layer.kind) {
                case modeldetail::LayerDesc::conv: {
                    const std::string key = "extractor." + branch + "." + layer.name;
                    x = nn::conv2d_forward(x, params_.at(key + ".k"), params_.at(key + ".b"),
                                           layer.stride, layer.pad);
                    break;
                }
                case modeldetail::LayerDesc::dwconv: {
                    const std::string key = "extractor." + branch + "." + layer.name;
                    x = nn::depthwise_conv2d_forward(x, params_.at(key + ".k"),
                                                     params_.at(key + ".b"), layer.stride,
                                                     layer.pad);
                    break;
                }
                case modeldetail::LayerDesc::relu:
                    x = nn::relu_forward(x);
                    break;
                case modeldetail::LayerDesc::pool: {
                    auto pc = nn::maxpool2d_forward(x, layer.window, layer.stride);
                    x = pc.y;
                    cache.pools.emplace(li, std::move(pc));
                    break;
                }
            }
        }
        cache.out_map = x;
        cache.flat = Tensor({x.size()});
        cache.flat.data = x.data;  // row-major flatten
    }

    void branch_backward(const std::string& branch, const BranchCache& cache, const Tensor& dflat,
                         std::map<std::string, Tensor>& grads) const {
        Tensor dy(cache.out_map.dims);
        dy.data = dflat.data;
        for (std::size_t li = layers_.size(); li-- > 0;) {
            const auto& layer = layers_[li];
            const Tensor& x = cache.inputs[li];
            switch (layer.kind) {
                case modeldetail::LayerDesc::conv: {
                    const std::string key = "extractor." + branch + "." + layer.name;
                    auto g = nn::conv2d_backward(x, params_.at(key + ".k"), layer.stride, layer.pad,
                                                 dy);
                    accumulate(grads, key + ".k", g.dk);
                    accumulate(grads, key + ".b", g.db);
                    dy = std::move(g.dx);
                    break;
                }
                case modeldetail::LayerDesc::dwconv: {
                    const std::string key = "extractor." + branch + "." + layer.name;
                    auto g = nn::depthwise_conv2d_backward(x, params_.at(key + ".k"), layer.stride,
                                                           layer.pad, dy);
                    accumulate(grads, key + ".k", g.dk);
                    accumulate(grads, key + ".b", g.db);
                    dy = std::move(g.dx);
                    break;
                }
                case modeldetail::LayerDesc::relu:
                    dy = nn::relu_backward(x, dy);
                    break;
                case modeldetail::LayerDesc::pool:
                    dy = nn::maxpool2d_backward(cache.pools.at(li), dy);
                    break;
            }
        }
    }
};

// ---- WGT1 weights format ---------------------------------------------------
// magic "WGT1"; u32 tensor count; per tensor: u32 name length + UTF-8 name,
// u32 rank, u32 dims, then 64-bit little-endian reals.

namespace modeldetail {

inline void put_f64_block(std::ofstream& os, const std::vector<double>& v) {
    if (detail::host_is_little_endian()) {
        os.write(reinterpret_cast<const char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * 8));
        return;
    }
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
        os.write(reinterpret_cast<const char*>(buf), 8);
    }
}

inline std::map<std::string, Tensor> read_wgt1(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || std::memcmp(bytes.data(), "WGT1", 4) != 0)
        throw IoError("bad weights magic in " + path.string());
    std::size_t pos = 4;
    auto need = [&](std::size_t n) {
        if (pos + n > bytes.size())
            throw IoError("truncated weights file " + path.string() + " (need " +
                          std::to_string(pos + n) + " bytes, have " +
                          std::to_string(bytes.size()) + ")");
    };
    auto read_u32 = [&]() {
        need(4);
        const std::uint32_t v = detail::get_u32(bytes.data() + pos);
        pos += 4;
        return v;
    };
    const std::uint32_t count = read_u32();
    std::map<std::string, Tensor> tensors;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32();
        need(name_len);
        std::string name(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
        pos += name_len;
        const std::uint32_t rank = read_u32();
        if (rank == 0 || rank > 4)
            throw IoError("tensor '" + name + "' has invalid rank " + std::to_string(rank) +
                          " in " + path.string());
        std::vector<std::size_t> dims(rank);
        std::size_t total = 1;
        for (auto& d : dims) {
            d = read_u32();
            if (d == 0) throw IoError("tensor '" + name + "' has a zero dimension");
            if (d > (std::size_t{1} << 28) / total)
                throw IoError("tensor '" + name + "' dimension overflow in " + path.string());
            total *= d;
        }
        need(total * 8);
        Tensor t(dims);
        if (detail::host_is_little_endian()) {
            std::memcpy(t.data.data(), bytes.data() + pos, total * 8);
        } else {
            for (std::size_t k = 0; k < total; ++k) {
                std::uint64_t bits = 0;
                for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[pos + k * 8 + b];
                std::memcpy(&t.data[k], &bits, 8);
            }
        }
        pos += total * 8;
        if (!tensors.emplace(name, std::move(t)).second)
            throw IoError("duplicate tensor name '" + name + "' in " + path.string());
    }
    return tensors;
}

}  // namespace modeldetail

inline void Classifier::save_weights(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os.write("WGT1", 4);
    std::map<std::string, const Tensor*> all;
    for (const auto& [name, t] : params_) all[name] = &t;
    all["bn.amp.running_mean"] = &bn_amp_.running_mean;
    all["bn.amp.running_var"] = &bn_amp_.running_var;
    all["bn.phase.running_mean"] = &bn_phase_.running_mean;
    all["bn.phase.running_var"] = &bn_phase_.running_var;
    detail::put_u32(os, static_cast<std::uint32_t>(all.size()));
    for (const auto& [name, t] : all) {
        detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_u32(os, static_cast<std::uint32_t>(t->rank()));
        for (std::size_t d : t->dims) detail::put_u32(os, static_cast<std::uint32_t>(d));
        modeldetail::put_f64_block(os, t->data);
    }
    if (!os) throw IoError("write failed: " + path.string());
}

// Partial loads are allowed (e.g. importing a pretrained extractor); every
// tensor present in the file must exist in the model with a matching shape.
inline void Classifier::load_weights(const std::filesystem::path& path) {
    auto tensors = modeldetail::read_wgt1(path);
    std::map<std::string, Tensor*> slots;
    for (auto& [name, t] : params_) slots[name] = &t;
    slots["bn.amp.running_mean"] = &bn_amp_.running_mean;
    slots["bn.amp.running_var"] = &bn_amp_.running_var;
    slots["bn.phase.running_mean"] = &bn_phase_.running_mean;
    slots["bn.phase.running_var"] = &bn_phase_.running_var;
    for (auto& [name, t] : tensors) {
        auto it = slots.find(name);
        if (it == slots.end()) throw IoError("unknown tensor '" + name + "' in " + path.string());
        if (it->second->dims != t.dims)
            throw IoError("tensor '" + name + "' has shape " + t.shape_str() + ", model expects " +
                          it->second->shape_str());
        *it->second = std::move(t);
    }
}

}  // namespace dasforge::model

#endif
