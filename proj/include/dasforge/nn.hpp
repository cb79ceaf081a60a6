#ifndef DASFORGE_NN_HPP
#define DASFORGE_NN_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "dasforge/common.hpp"
#include "dasforge/rng.hpp"

namespace dasforge::nn {

struct Tensor {
    std::vector<std::size_t> dims;
    std::vector<double> data;  // row-major

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> d)
        : dims(std::move(d)),
          data(std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>()), 0.0) {}

    static Tensor from(std::vector<std::size_t> d, std::vector<double> values) {
        Tensor t(std::move(d));
        if (values.size() != t.data.size()) throw ConfigError("tensor data does not match dims");
        t.data = std::move(values);
        return t;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return dims.size(); }
    bool same_shape(const Tensor& o) const { return dims == o.dims; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double& at2(std::size_t i, std::size_t j) { return data[i * dims[1] + j]; }
    double at2(std::size_t i, std::size_t j) const { return data[i * dims[1] + j]; }
    double& at3(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * dims[1] + j) * dims[2] + k];
    }
    double at3(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * dims[1] + j) * dims[2] + k];
    }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < dims.size(); ++i)
            s += (i ? "x" : "") + std::to_string(dims[i]);
        return s + "]";
    }
};

inline void check(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

// ---- initializers --------------------------------------------------------

inline void he_fill(Tensor& t, std::size_t fan_in, Rng& rng) {
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : t.data) v = rng.normal() * sd;
}

inline void uniform_fill(Tensor& t, double bound, Rng& rng) {
    for (double& v : t.data) v = (rng.uniform() * 2.0 - 1.0) * bound;
}

// ---- conv2d --------------------------------------------------------------
// Input H×W×C, kernels kh×kw×C×F, bias F. Cross-correlation:
//   y[p,q,f] = Σ_{u,v,c} K[u,v,c,f] · x[p·s+u−pad, q·s+v−pad, c] + b[f]

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride,
                                std::size_t pad) {
    check(in + 2 * pad >= k, "conv window larger than padded input");
    return (in + 2 * pad - k) / stride + 1;
}

inline Tensor conv2d_forward(const Tensor& x, const Tensor& k, const Tensor& b,
                             std::size_t stride, std::size_t pad) {
    check(x.rank() == 3 && k.rank() == 4 && b.rank() == 1, "conv2d: bad tensor ranks");
    check(stride >= 1, "conv2d: stride must be >= 1");
    const std::size_t H = x.dims[0], W = x.dims[1], C = x.dims[2];
    const std::size_t kh = k.dims[0], kw = k.dims[1], F = k.dims[3];
    check(k.dims[2] == C, "conv2d: kernel channels " + std::to_string(k.dims[2]) +
                              " != input channels " + std::to_string(C));
    check(b.dims[0] == F, "conv2d: bias length != filter count");
    const std::size_t Ho = conv_out_dim(H, kh, stride, pad);
    const std::size_t Wo = conv_out_dim(W, kw, stride, pad);

    Tensor y({Ho, Wo, F});
    std::vector<double> acc(F);
    for (std::size_t p = 0; p < Ho; ++p) {
        const std::ptrdiff_t bi = static_cast<std::ptrdiff_t>(p * stride) - static_cast<std::ptrdiff_t>(pad);
        for (std::size_t q = 0; q < Wo; ++q) {
            const std::ptrdiff_t bj = static_cast<std::ptrdiff_t>(q * stride) - static_cast<std::ptrdiff_t>(pad);
            std::copy(b.data.begin(), b.data.end(), acc.begin());
            for (std::size_t u = 0; u < kh; ++u) {
                const std::ptrdiff_t i = bi + static_cast<std::ptrdiff_t>(u);
                if (i < 0 || i >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t v = 0; v < kw; ++v) {
                    const std::ptrdiff_t j = bj + static_cast<std::ptrdiff_t>(v);
                    if (j < 0 || j >= static_cast<std::ptrdiff_t>(W)) continue;
                    const double* xp = x.data.data() + (static_cast<std::size_t>(i) * W +
                                                        static_cast<std::size_t>(j)) * C;
                    const double* kp = k.data.data() + (u * kw + v) * C * F;
                    for (std::size_t c = 0; c < C; ++c) {
                        const double xv = xp[c];
                        const double* kr = kp + c * F;
                        for (std::size_t f = 0; f < F; ++f) acc[f] += xv * kr[f];
                    }
                }
            }
            std::copy(acc.begin(), acc.end(), y.data.begin() + (p * Wo + q) * F);
        }
    }
    return y;
}

struct Conv2dGrads {
    Tensor dx, dk, db;
};

inline Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& k, std::size_t stride,
                                   std::size_t pad, const Tensor& dy) {
    const std::size_t H = x.dims[0], W = x.dims[1], C = x.dims[2];
    const std::size_t kh = k.dims[0], kw = k.dims[1], F = k.dims[3];
    const std::size_t Ho = dy.dims[0], Wo = dy.dims[1];
    check(dy.rank() == 3 && dy.dims[2] == F, "conv2d backward: bad dy shape");

    Conv2dGrads g{Tensor({H, W, C}), Tensor({kh, kw, C, F}), Tensor({F})};
    for (std::size_t p = 0; p < Ho; ++p) {
        const std::ptrdiff_t bi = static_cast<std::ptrdiff_t>(p * stride) - static_cast<std::ptrdiff_t>(pad);
        for (std::size_t q = 0; q < Wo; ++q) {
            const std::ptrdiff_t bj = static_cast<std::ptrdiff_t>(q * stride) - static_cast<std::ptrdiff_t>(pad);
            const double* dyp = dy.data.data() + (p * Wo + q) * F;
            for (std::size_t f = 0; f < F; ++f) g.db[f] += dyp[f];
            for (std::size_t u = 0; u < kh; ++u) {
                const std::ptrdiff_t i = bi + static_cast<std::ptrdiff_t>(u);
                if (i < 0 || i >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t v = 0; v < kw; ++v) {
                    const std::ptrdiff_t j = bj + static_cast<std::ptrdiff_t>(v);
                    if (j < 0 || j >= static_cast<std::ptrdiff_t>(W)) continue;
                    const std::size_t xoff = (static_cast<std::size_t>(i) * W +
                                              static_cast<std::size_t>(j)) * C;
                    const double* xp = x.data.data() + xoff;
                    double* dxp = g.dx.data.data() + xoff;
                    const std::size_t koff = (u * kw + v) * C * F;
                    for (std::size_t c = 0; c < C; ++c) {
                        const double xv = xp[c];
                        const double* kr = k.data.data() + koff + c * F;
                        double* dkr = g.dk.data.data() + koff + c * F;
                        double acc = 0.0;
                        for (std::size_t f = 0; f < F; ++f) {
                            dkr[f] += xv * dyp[f];
                            acc += kr[f] * dyp[f];
                        }
                        dxp[c] += acc;
                    }
                }
            }
        }
    }
    return g;
}

// ---- depthwise conv2d ----------------------------------------------------
// One kh×kw filter per input channel: y[p,q,c] = Σ_{u,v} K[u,v,c]·x[..,c] + b[c]

inline Tensor depthwise_conv2d_forward(const Tensor& x, const Tensor& k, const Tensor& b,
                                       std::size_t stride, std::size_t pad) {
    check(x.rank() == 3 && k.rank() == 3 && b.rank() == 1, "depthwise conv: bad tensor ranks");
    const std::size_t H = x.dims[0], W = x.dims[1], C = x.dims[2];
    const std::size_t kh = k.dims[0], kw = k.dims[1];
    check(k.dims[2] == C && b.dims[0] == C, "depthwise conv: channel mismatch");
    const std::size_t Ho = conv_out_dim(H, kh, stride, pad);
    const std::size_t Wo = conv_out_dim(W, kw, stride, pad);

    Tensor y({Ho, Wo, C});
    for (std::size_t p = 0; p < Ho; ++p) {
        const std::ptrdiff_t bi = static_cast<std::ptrdiff_t>(p * stride) - static_cast<std::ptrdiff_t>(pad);
        for (std::size_t q = 0; q < Wo; ++q) {
            const std::ptrdiff_t bj = static_cast<std::ptrdiff_t>(q * stride) - static_cast<std::ptrdiff_t>(pad);
            double* yp = y.data.data() + (p * Wo + q) * C;
            std::copy(b.data.begin(), b.data.end(), yp);
            for (std::size_t u = 0; u < kh; ++u) {
                const std::ptrdiff_t i = bi + static_cast<std::ptrdiff_t>(u);
                if (i < 0 || i >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t v = 0; v < kw; ++v) {
                    const std::ptrdiff_t j = bj + static_cast<std::ptrdiff_t>(v);
                    if (j < 0 || j >= static_cast<std::ptrdiff_t>(W)) continue;
                    const double* xp = x.data.data() + (static_cast<std::size_t>(i) * W +
                                                        static_cast<std::size_t>(j)) * C;
                    const double* kp = k.data.data() + (u * kw + v) * C;
                    for (std::size_t c = 0; c < C; ++c) yp[c] += xp[c] * kp[c];
                }
            }
        }
    }
    return y;
}

inline Conv2dGrads depthwise_conv2d_backward(const Tensor& x, const Tensor& k, std::size_t stride,
                                             std::size_t pad, const Tensor& dy) {
    const std::size_t H = x.dims[0], W = x.dims[1], C = x.dims[2];
    const std::size_t kh = k.dims[0], kw = k.dims[1];
    const std::size_t Ho = dy.dims[0], Wo = dy.dims[1];
    check(dy.rank() == 3 && dy.dims[2] == C, "depthwise conv backward: bad dy shape");

    Conv2dGrads g{Tensor({H, W, C}), Tensor({kh, kw, C}), Tensor({C})};
    for (std::size_t p = 0; p < Ho; ++p) {
        const std::ptrdiff_t bi = static_cast<std::ptrdiff_t>(p * stride) - static_cast<std::ptrdiff_t>(pad);
        for (std::size_t q = 0; q < Wo; ++q) {
            const std::ptrdiff_t bj = static_cast<std::ptrdiff_t>(q * stride) - static_cast<std::ptrdiff_t>(pad);
            const double* dyp = dy.data.data() + (p * Wo + q) * C;
            for (std::size_t c = 0; c < C; ++c) g.db[c] += dyp[c];
            for (std::size_t u = 0; u < kh; ++u) {
                const std::ptrdiff_t i = bi + static_cast<std::ptrdiff_t>(u);
                if (i < 0 || i >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t v = 0; v < kw; ++v) {
                    const std::ptrdiff_t j = bj + static_cast<std::ptrdiff_t>(v);
                    if (j < 0 || j >= static_cast<std::ptrdiff_t>(W)) continue;
                    const std::size_t xoff = (static_cast<std::size_t>(i) * W +
                                              static_cast<std::size_t>(j)) * C;
                    const std::size_t koff = (u * kw + v) * C;
                    for (std::size_t c = 0; c < C; ++c) {
                        g.dk[koff + c] += x[xoff + c] * dyp[c];
                        g.dx[xoff + c] += k[koff + c] * dyp[c];
                    }
                }
            }
        }
    }
    return g;
}

// ---- max pooling ---------------------------------------------------------

struct MaxPoolCache {
    Tensor y;
    std::vector<std::size_t> argmax;  // flat input index per output element
    std::vector<std::size_t> in_dims;
};

inline MaxPoolCache maxpool2d_forward(const Tensor& x, std::size_t window, std::size_t stride) {
    check(x.rank() == 3, "maxpool: input must be H×W×C");
    const std::size_t H = x.dims[0], W = x.dims[1], C = x.dims[2];
    check(window >= 1 && window <= H && window <= W, "maxpool: window larger than input");
    const std::size_t Ho = (H - window) / stride + 1;
    const std::size_t Wo = (W - window) / stride + 1;

    MaxPoolCache cache{Tensor({Ho, Wo, C}), {}, x.dims};
    cache.argmax.resize(Ho * Wo * C);
    for (std::size_t p = 0; p < Ho; ++p) {
        for (std::size_t q = 0; q < Wo; ++q) {
            for (std::size_t c = 0; c < C; ++c) {
                // ties go to the first element in row-major window scan
                std::size_t best_idx = ((p * stride) * W + q * stride) * C + c;
                double best = x[best_idx];
                for (std::size_t u = 0; u < window; ++u) {
                    for (std::size_t v = 0; v < window; ++v) {
                        const std::size_t idx = ((p * stride + u) * W + (q * stride + v)) * C + c;
                        if (x[idx] > best) {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t out = (p * Wo + q) * C + c;
                cache.y[out] = best;
                cache.argmax[out] = best_idx;
            }
        }
    }
    return cache;
}

inline Tensor maxpool2d_backward(const MaxPoolCache& cache, const Tensor& dy) {
    check(dy.same_shape(cache.y), "maxpool backward: dy shape mismatch");
    Tensor dx(cache.in_dims);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[cache.argmax[i]] += dy[i];
    return dx;
}

// ---- relu ----------------------------------------------------------------

inline Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

// derivative at exactly 0 is taken as 0
inline Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    check(x.same_shape(dy), "relu backward: shape mismatch");
    Tensor dx = dy;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i] > 0.0)) dx[i] = 0.0;
    return dx;
}

// ---- dense ---------------------------------------------------------------
// y = Wᵀx + b with W stored D×K.

inline Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    check(x.rank() == 1 && w.rank() == 2 && b.rank() == 1, "dense: bad tensor ranks");
    const std::size_t D = x.dims[0], K = b.dims[0];
    check(w.dims[0] == D && w.dims[1] == K, "dense: weight shape " + w.shape_str() +
                                                " incompatible with input length " + std::to_string(D));
    Tensor y({K});
    y.data = b.data;
    for (std::size_t d = 0; d < D; ++d) {
        const double xv = x[d];
        const double* wr = w.data.data() + d * K;
        for (std::size_t k = 0; k < K; ++k) y[k] += xv * wr[k];
    }
    return y;
}

struct DenseGrads {
    Tensor dx, dw, db;
};

inline DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy) {
    const std::size_t D = x.dims[0], K = dy.dims[0];
    check(w.dims[0] == D && w.dims[1] == K, "dense backward: shape mismatch");
    DenseGrads g{Tensor({D}), Tensor({D, K}), dy};
    for (std::size_t d = 0; d < D; ++d) {
        const double xv = x[d];
        const double* wr = w.data.data() + d * K;
        double* dwr = g.dw.data.data() + d * K;
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            dwr[k] = xv * dy[k];
            acc += wr[k] * dy[k];
        }
        g.dx[d] = acc;
    }
    return g;
}

// ---- batch norm ----------------------------------------------------------
// Operates on an N×D batch; biased batch variance both for normalization and
// for the running estimate, so train and inference share one convention.

struct BatchNormState {
    Tensor running_mean, running_var;

    BatchNormState() = default;
    explicit BatchNormState(std::size_t d) : running_mean({d}), running_var({d}) {
        for (double& v : running_var.data) v = 1.0;
    }
};

struct BatchNormCache {
    Tensor xhat;    // N×D
    Tensor invstd;  // D
};

inline Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                bool training, BatchNormState& state, BatchNormCache* cache,
                                double momentum = 0.9, double eps = 1e-5) {
    check(x.rank() == 2, "batchnorm: input must be N×D");
    const std::size_t N = x.dims[0], D = x.dims[1];
    check(gamma.dims == std::vector<std::size_t>{D} && beta.dims == gamma.dims,
          "batchnorm: gamma/beta length mismatch");
    check(state.running_mean.dims == gamma.dims, "batchnorm: state dimension mismatch");

    Tensor y({N, D});
    if (training) {
        check(N >= 2, "batchnorm requires batch size >= 2 in train mode");
        for (std::size_t d = 0; d < D; ++d) {
            double mean = 0.0;
            for (std::size_t n = 0; n < N; ++n) mean += x.at2(n, d);
            mean /= static_cast<double>(N);
            double var = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const double dev = x.at2(n, d) - mean;
                var += dev * dev;
            }
            var /= static_cast<double>(N);
            const double invstd = 1.0 / std::sqrt(var + eps);
            for (std::size_t n = 0; n < N; ++n) {
                const double xhat = (x.at2(n, d) - mean) * invstd;
                y.at2(n, d) = gamma[d] * xhat + beta[d];
                if (cache) cache->xhat.at2(n, d) = xhat;
            }
            if (cache) cache->invstd[d] = invstd;
            state.running_mean[d] = momentum * state.running_mean[d] + (1.0 - momentum) * mean;
            state.running_var[d] = momentum * state.running_var[d] + (1.0 - momentum) * var;
        }
    } else {
        for (std::size_t d = 0; d < D; ++d) {
            const double invstd = 1.0 / std::sqrt(state.running_var[d] + eps);
            for (std::size_t n = 0; n < N; ++n)
                y.at2(n, d) = gamma[d] * (x.at2(n, d) - state.running_mean[d]) * invstd + beta[d];
        }
    }
    return y;
}

inline BatchNormCache make_batchnorm_cache(std::size_t n, std::size_t d) {
    return BatchNormCache{Tensor({n, d}), Tensor({d})};
}

struct BatchNormGrads {
    Tensor dx, dgamma, dbeta;
};

inline BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma,
                                         const Tensor& dy) {
    const std::size_t N = dy.dims[0], D = dy.dims[1];
    check(cache.xhat.same_shape(dy), "batchnorm backward: shape mismatch");
    BatchNormGrads g{Tensor({N, D}), Tensor({D}), Tensor({D})};
    for (std::size_t d = 0; d < D; ++d) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            sum_dy += dy.at2(n, d);
            sum_dy_xhat += dy.at2(n, d) * cache.xhat.at2(n, d);
        }
        g.dbeta[d] = sum_dy;
        g.dgamma[d] = sum_dy_xhat;
        const double scale = gamma[d] * cache.invstd[d] / static_cast<double>(N);
        for (std::size_t n = 0; n < N; ++n)
            g.dx.at2(n, d) = scale * (static_cast<double>(N) * dy.at2(n, d) - sum_dy -
                                      cache.xhat.at2(n, d) * sum_dy_xhat);
    }
    return g;
}

// ---- LSTM ----------------------------------------------------------------
// Gate blocks ordered i, f, g, o inside the 4H dimension. W: 4H×D, U: 4H×H,
// b: 4H. Standard recurrences; h and c start at zero.

struct LstmParams {
    Tensor w, u, b;

    static LstmParams zeros(std::size_t input, std::size_t hidden) {
        return {Tensor({4 * hidden, input}), Tensor({4 * hidden, hidden}), Tensor({4 * hidden})};
    }
    std::size_t hidden() const { return b.dims[0] / 4; }
    std::size_t input() const { return w.dims[1]; }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LstmCache {
    Tensor x;      // T×D
    Tensor h;      // T×H
    Tensor c;      // T×H
    Tensor gates;  // T×4H, post-activation, blocks i,f,g,o
};

inline LstmCache lstm_forward(const Tensor& x, const LstmParams& p) {
    check(x.rank() == 2, "lstm: input must be T×D");
    const std::size_t T = x.dims[0], D = x.dims[1], H = p.hidden();
    check(p.w.dims[0] == 4 * H && p.w.dims[1] == D, "lstm: W shape mismatch");
    check(p.u.dims[0] == 4 * H && p.u.dims[1] == H, "lstm: U shape mismatch");

    LstmCache cache{x, Tensor({T, H}), Tensor({T, H}), Tensor({T, 4 * H})};
    std::vector<double> z(4 * H);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t r = 0; r < 4 * H; ++r) {
            double acc = p.b[r];
            const double* wr = p.w.data.data() + r * D;
            const double* xr = x.data.data() + t * D;
            for (std::size_t d = 0; d < D; ++d) acc += wr[d] * xr[d];
            if (t > 0) {
                const double* ur = p.u.data.data() + r * H;
                const double* hr = cache.h.data.data() + (t - 1) * H;
                for (std::size_t j = 0; j < H; ++j) acc += ur[j] * hr[j];
            }
            z[r] = acc;
        }
        for (std::size_t j = 0; j < H; ++j) {
            const double i = sigmoid(z[j]);
            const double f = sigmoid(z[H + j]);
            const double g = std::tanh(z[2 * H + j]);
            const double o = sigmoid(z[3 * H + j]);
            const double c_prev = t > 0 ? cache.c.at2(t - 1, j) : 0.0;
            const double c = f * c_prev + i * g;
            cache.gates.at2(t, j) = i;
            cache.gates.at2(t, H + j) = f;
            cache.gates.at2(t, 2 * H + j) = g;
            cache.gates.at2(t, 3 * H + j) = o;
            cache.c.at2(t, j) = c;
            cache.h.at2(t, j) = o * std::tanh(c);
        }
    }
    return cache;
}

struct LstmGrads {
    Tensor dx;
    LstmParams dp;
};

// dh_out: T×H gradient w.r.t. every emitted hidden state.
inline LstmGrads lstm_backward(const LstmCache& cache, const LstmParams& p, const Tensor& dh_out) {
    const std::size_t T = cache.x.dims[0], D = cache.x.dims[1], H = p.hidden();
    check(dh_out.dims == cache.h.dims, "lstm backward: dh shape mismatch");

    LstmGrads g{Tensor({T, D}), LstmParams::zeros(D, H)};
    std::vector<double> dh(H, 0.0), dc(H, 0.0), dz(4 * H);
    for (std::size_t tt = T; tt-- > 0;) {
        for (std::size_t j = 0; j < H; ++j) {
            dh[j] += dh_out.at2(tt, j);
            const double i = cache.gates.at2(tt, j);
            const double f = cache.gates.at2(tt, H + j);
            const double gg = cache.gates.at2(tt, 2 * H + j);
            const double o = cache.gates.at2(tt, 3 * H + j);
            const double tanc = std::tanh(cache.c.at2(tt, j));
            const double c_prev = tt > 0 ? cache.c.at2(tt - 1, j) : 0.0;
            const double do_ = dh[j] * tanc;
            dc[j] += dh[j] * o * (1.0 - tanc * tanc);
            const double di = dc[j] * gg;
            const double df = dc[j] * c_prev;
            const double dg = dc[j] * i;
            dz[j] = di * i * (1.0 - i);
            dz[H + j] = df * f * (1.0 - f);
            dz[2 * H + j] = dg * (1.0 - gg * gg);
            dz[3 * H + j] = do_ * o * (1.0 - o);
            dc[j] *= f;  // carried to t-1
        }
        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t r = 0; r < 4 * H; ++r) {
            const double dzr = dz[r];
            g.dp.b[r] += dzr;
            double* dwr = g.dp.w.data.data() + r * D;
            const double* xr = cache.x.data.data() + tt * D;
            const double* wr = p.w.data.data() + r * D;
            double* dxr = g.dx.data.data() + tt * D;
            for (std::size_t d = 0; d < D; ++d) {
                dwr[d] += dzr * xr[d];
                dxr[d] += dzr * wr[d];
            }
            if (tt > 0) {
                double* dur = g.dp.u.data.data() + r * H;
                const double* hr = cache.h.data.data() + (tt - 1) * H;
                const double* ur = p.u.data.data() + r * H;
                for (std::size_t j = 0; j < H; ++j) {
                    dur[j] += dzr * hr[j];
                    dh[j] += dzr * ur[j];
                }
            }
        }
    }
    return g;
}

// ---- Bi-LSTM -------------------------------------------------------------
// Forward direction consumes t = 0..T−1, backward direction T−1..0; the
// output row t is [h_fwd(t), h_bwd(t)], so column blocks are per-direction.

struct BiLstmParams {
    LstmParams fwd, bwd;

    static BiLstmParams zeros(std::size_t input, std::size_t hidden) {
        return {LstmParams::zeros(input, hidden), LstmParams::zeros(input, hidden)};
    }
    std::size_t hidden() const { return fwd.hidden(); }
};

struct BiLstmCache {
    LstmCache fwd, bwd;  // bwd runs on the time-reversed input
    Tensor y;            // T×2H
};

inline Tensor reverse_rows(const Tensor& x) {
    Tensor out(x.dims);
    const std::size_t T = x.dims[0], D = x.dims[1];
    for (std::size_t t = 0; t < T; ++t)
        std::copy_n(x.data.data() + t * D, D, out.data.data() + (T - 1 - t) * D);
    return out;
}

inline BiLstmCache bilstm_forward(const Tensor& x, const BiLstmParams& p) {
    const std::size_t T = x.dims[0], H = p.hidden();
    check(p.bwd.hidden() == H && p.bwd.input() == p.fwd.input(),
          "bilstm: direction parameter shapes disagree");
    BiLstmCache cache{lstm_forward(x, p.fwd), lstm_forward(reverse_rows(x), p.bwd),
                      Tensor({T, 2 * H})};
    for (std::size_t t = 0; t < T; ++t) {
        std::copy_n(cache.fwd.h.data.data() + t * H, H, cache.y.data.data() + t * 2 * H);
        std::copy_n(cache.bwd.h.data.data() + (T - 1 - t) * H, H,
                    cache.y.data.data() + t * 2 * H + H);
    }
    return cache;
}

struct BiLstmGrads {
    Tensor dx;
    BiLstmParams dp;
};

inline BiLstmGrads bilstm_backward(const BiLstmCache& cache, const BiLstmParams& p,
                                   const Tensor& dy) {
    const std::size_t T = cache.y.dims[0], H = p.hidden();
    check(dy.same_shape(cache.y), "bilstm backward: dy shape mismatch");
    Tensor dh_f({T, H}), dh_b({T, H});
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < H; ++j) {
            dh_f.at2(t, j) = dy.at2(t, j);
            dh_b.at2(T - 1 - t, j) = dy.at2(t, H + j);  // undo the time reversal
        }
    LstmGrads gf = lstm_backward(cache.fwd, p.fwd, dh_f);
    LstmGrads gb = lstm_backward(cache.bwd, p.bwd, dh_b);
    Tensor dxb = reverse_rows(gb.dx);
    for (std::size_t i = 0; i < gf.dx.size(); ++i) gf.dx[i] += dxb[i];
    return BiLstmGrads{std::move(gf.dx), {std::move(gf.dp), std::move(gb.dp)}};
}

// ---- softmax + cross-entropy ---------------------------------------------

inline Tensor softmax(const Tensor& logits) {
    check(logits.rank() == 1 && logits.dims[0] >= 2, "softmax: need a vector of length >= 2");
    Tensor p = logits;
    const double mx = *std::max_element(p.data.begin(), p.data.end());
    double sum = 0.0;
    for (double& v : p.data) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : p.data) v /= sum;
    return p;
}

struct SoftmaxXent {
    Tensor probs;
    double loss = 0.0;
};

inline SoftmaxXent softmax_xent(const Tensor& logits, const Tensor& onehot) {
    check(logits.same_shape(onehot), "softmax_xent: shape mismatch");
    std::size_t ones = 0, true_idx = 0;
    for (std::size_t i = 0; i < onehot.size(); ++i) {
        if (onehot[i] == 1.0) {
            ++ones;
            true_idx = i;
        } else if (onehot[i] != 0.0) {
            throw ConfigError("softmax_xent: target is not one-hot");
        }
    }
    check(ones == 1, "softmax_xent: target must have exactly one 1");
    SoftmaxXent out{softmax(logits), 0.0};
    out.loss = -std::log(std::max(out.probs[true_idx], 1e-300));
    return out;
}

inline Tensor softmax_xent_backward(const SoftmaxXent& cache, const Tensor& onehot) {
    Tensor d = cache.probs;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= onehot[i];
    return d;
}

// ---- Adam ----------------------------------------------------------------

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Tensor m, v;
    long step = 0;
};

inline void adam_step(Tensor& param, const Tensor& grad, AdamState& state,
                      const AdamHyper& hp = {}) {
    check(param.same_shape(grad), "adam: gradient shape mismatch");
    if (state.m.data.empty()) {
        state.m = Tensor(param.dims);
        state.v = Tensor(param.dims);
    }
    check(state.m.same_shape(param), "adam: state shape mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * grad[i];
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        param[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
    }
}

// ---- gradient checking ----------------------------------------------------
// Central differences against analytic gradients. Error metric is relative
// with a unit floor: |a−n| / max(1, |a|, |n|) — relative for large gradients,
// absolute near zero, so finite-difference roundoff cannot dominate.

struct GradCheckReport {
    double max_err = 0.0;
    std::size_t worst_param = 0;
    std::size_t worst_index = 0;
};

template <typename LossFn>
GradCheckReport grad_check(LossFn&& loss, const std::vector<Tensor*>& params,
                           const std::vector<const Tensor*>& analytic, double eps = 1e-5) {
    check(params.size() == analytic.size(), "grad_check: params/grads count mismatch");
    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        const Tensor& a = *analytic[pi];
        check(p.same_shape(a), "grad_check: gradient shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p[i];
            p[i] = saved + eps;
            const double up = loss();
            p[i] = saved - eps;
            const double down = loss();
            p[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double err = std::abs(a[i] - numeric) /
                               std::max({1.0, std::abs(a[i]), std::abs(numeric)});
            if (err > report.max_err) {
                report.max_err = err;
                report.worst_param = pi;
                report.worst_index = i;
            }
        }
    }
    return report;
}

}  // namespace dasforge::nn

#endif
