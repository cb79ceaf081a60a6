#ifndef DASFORGE_TSNE_HPP
#define DASFORGE_TSNE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dasforge/common.hpp"
#include "dasforge/rng.hpp"

namespace dasforge::tsne {

struct TsneConfig {
    double perplexity = 30.0;
    std::size_t iters = 1000;
    double eta = 200.0;
    double exaggeration = 12.0;
    std::size_t exaggeration_iters = 250;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;  // after exaggeration ends
    std::uint64_t seed = 1;

    void validate() const {
        if (perplexity <= 0.0) throw ConfigError("perplexity must be positive");
        if (iters == 0) throw ConfigError("t-SNE needs at least one iteration");
    }
};

struct Embedding {
    std::size_t n = 0;
    std::vector<double> y;           // N×2 row-major
    std::vector<double> kl_history;  // objective per iteration (true P, no exaggeration)

    double x_of(std::size_t i) const { return y[2 * i]; }
    double y_of(std::size_t i) const { return y[2 * i + 1]; }
};

namespace tsnedetail {

// Conditional p_{j|i} with the bandwidth matched to the target perplexity by
// bisection on beta = 1/(2 sigma^2).
inline void row_affinities(const std::vector<double>& d2, std::size_t i, double target_entropy,
                           std::vector<double>& p_row) {
    const std::size_t n = p_row.size();
    double beta = 1.0, beta_min = 0.0, beta_max = 0.0;
    bool has_min = false, has_max = false;
    for (int iter = 0; iter < 200; ++iter) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            p_row[j] = j == i ? 0.0 : std::exp(-beta * d2[i * n + j]);
            sum += p_row[j];
        }
        if (sum <= 0.0) sum = 1e-300;
        double entropy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (p_row[j] <= 0.0) continue;
            const double p = p_row[j] / sum;
            entropy -= p * std::log(p);
        }
        const double diff = entropy - target_entropy;
        if (std::abs(diff) < 1e-7) {
            for (std::size_t j = 0; j < n; ++j) p_row[j] /= sum;
            return;
        }
        if (diff > 0.0) {  // too flat → sharpen
            beta_min = beta;
            has_min = true;
            beta = has_max ? (beta + beta_max) / 2.0 : beta * 2.0;
        } else {
            beta_max = beta;
            has_max = true;
            beta = has_min ? (beta + beta_min) / 2.0 : beta / 2.0;
        }
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += p_row[j];
    if (sum <= 0.0) sum = 1e-300;
    for (std::size_t j = 0; j < n; ++j) p_row[j] /= sum;
}

}  // namespace tsnedetail

// Exact O(N²) t-SNE to two dimensions. Deterministic given the seed.
inline Embedding tsne_2d(const std::vector<double>& features, std::size_t n, std::size_t dim,
                         TsneConfig cfg = {}) {
    cfg.validate();
    if (n < 4) throw ConfigError("t-SNE needs at least 4 points");
    if (features.size() != n * dim) throw ConfigError("feature buffer does not match n×dim");

    // Perplexity must leave room for (N−1) neighbors.
    const double max_perp = static_cast<double>(n - 1) / 3.0;
    if (cfg.perplexity > max_perp) cfg.perplexity = max_perp;

    // Tiny jitter breaks exact duplicates; far below any meaningful distance.
    std::vector<double> x = features;
    Rng jitter_rng(derive_seed(cfg.seed, "tsne.jitter"));
    for (double& v : x) v += jitter_rng.normal() * 1e-10;

    std::vector<double> d2(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double d = x[i * dim + k] - x[j * dim + k];
                s += d * d;
            }
            d2[i * n + j] = d2[j * n + i] = s;
        }

    // symmetrized joint distribution
    std::vector<double> p(n * n, 0.0);
    {
        const double target_entropy = std::log(cfg.perplexity);
        std::vector<double> row(n);
        for (std::size_t i = 0; i < n; ++i) {
            tsnedetail::row_affinities(d2, i, target_entropy, row);
            for (std::size_t j = 0; j < n; ++j) p[i * n + j] = row[j];
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double v = (p[i * n + j] + p[j * n + i]) / (2.0 * static_cast<double>(n));
                p[i * n + j] = p[j * n + i] = std::max(v, 1e-12);
            }
        for (std::size_t i = 0; i < n; ++i) p[i * n + i] = 0.0;
    }

    Embedding emb;
    emb.n = n;
    emb.y.resize(2 * n);
    Rng init_rng(derive_seed(cfg.seed, "tsne.init"));
    for (double& v : emb.y) v = init_rng.normal() * 1e-4;

    std::vector<double> inc(2 * n, 0.0), gains(2 * n, 1.0), grad(2 * n);
    std::vector<double> qnum(n * n);
    emb.kl_history.reserve(cfg.iters);

    for (std::size_t iter = 0; iter < cfg.iters; ++iter) {
        const bool exaggerated = iter < cfg.exaggeration_iters;
        const double pscale = exaggerated ? cfg.exaggeration : 1.0;
        const double momentum =
            iter < cfg.exaggeration_iters ? cfg.momentum_initial : cfg.momentum_final;

        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = emb.y[2 * i] - emb.y[2 * j];
                const double dy = emb.y[2 * i + 1] - emb.y[2 * j + 1];
                const double q = 1.0 / (1.0 + dx * dx + dy * dy);
                qnum[i * n + j] = qnum[j * n + i] = q;
                z += 2.0 * q;
            }

        std::fill(grad.begin(), grad.end(), 0.0);
        double kl = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double pij = p[i * n + j];
                const double qn = qnum[i * n + j];
                const double qij = std::max(qn / z, 1e-300);
                const double mult = 4.0 * (pscale * pij - qij) * qn;
                grad[2 * i] += mult * (emb.y[2 * i] - emb.y[2 * j]);
                grad[2 * i + 1] += mult * (emb.y[2 * i + 1] - emb.y[2 * j + 1]);
                if (j > i) kl += 2.0 * pij * std::log(pij / qij);
            }
        }
        emb.kl_history.push_back(kl);

        for (std::size_t k = 0; k < 2 * n; ++k) {
            gains[k] = (grad[k] > 0.0) != (inc[k] > 0.0) ? gains[k] + 0.2 : gains[k] * 0.8;
            gains[k] = std::max(gains[k], 0.01);
            inc[k] = momentum * inc[k] - cfg.eta * gains[k] * grad[k];
            emb.y[k] += inc[k];
        }
        double mean_x = 0.0, mean_y = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean_x += emb.y[2 * i];
            mean_y += emb.y[2 * i + 1];
        }
        mean_x /= static_cast<double>(n);
        mean_y /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            emb.y[2 * i] -= mean_x;
            emb.y[2 * i + 1] -= mean_y;
        }
    }
    for (double v : emb.y)
        if (!std::isfinite(v)) throw ConfigError("t-SNE diverged to non-finite coordinates");
    return emb;
}

// Fraction of points whose nearest neighbor (excluding self, ties to the
// lowest index) carries the same label.
inline double knn_agreement(const Embedding& emb, const std::vector<int>& labels) {
    if (labels.size() != emb.n) throw ConfigError("label count does not match embedding");
    if (emb.n < 2) throw ConfigError("need at least two points");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < emb.n; ++i) {
        double best = 0.0;
        std::size_t best_j = emb.n;
        for (std::size_t j = 0; j < emb.n; ++j) {
            if (j == i) continue;
            const double dx = emb.x_of(i) - emb.x_of(j);
            const double dy = emb.y_of(i) - emb.y_of(j);
            const double d = dx * dx + dy * dy;
            if (best_j == emb.n || d < best) {
                best = d;
                best_j = j;
            }
        }
        if (labels[best_j] == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(emb.n);
}

}  // namespace dasforge::tsne

#endif
