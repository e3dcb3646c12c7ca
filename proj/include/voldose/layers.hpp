#pragma once

// Layer primitives with explicit forward and backward passes. Templated on
// the scalar type so the finite-difference tests can instantiate them in
// double precision while the network runs in float.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "voldose/parallel.hpp"
#include "voldose/tensor.hpp"

namespace voldose {

// ---------------------------------------------------------------------------
// convolution, symmetric zero padding, spatial size preserved

template <class T>
Tensor4<T> conv2d_same(const Tensor4<T>& x, const Tensor4<T>& w, const std::vector<T>& bias) {
    if (w.c != x.c) throw std::runtime_error("conv2d_same: channel mismatch");
    if (w.h != w.w || w.h % 2 == 0) throw std::runtime_error("conv2d_same: kernel must be odd square");
    if (static_cast<int>(bias.size()) != w.n) throw std::runtime_error("conv2d_same: bias size");
    const int k = w.h, pad = k / 2, H = x.h, W = x.w;
    Tensor4<T> y(x.n, w.n, H, W);

    parallel_for(static_cast<std::int64_t>(x.n) * w.n, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / w.n);
        const int oc = static_cast<int>(idx % w.n);
        T* yp = y.plane_ptr(in, oc);
        const std::size_t np = y.plane();
        for (std::size_t i = 0; i < np; ++i) yp[i] = bias[static_cast<std::size_t>(oc)];
        for (int ic = 0; ic < x.c; ++ic) {
            const T* xp = x.plane_ptr(in, ic);
            for (int ky = 0; ky < k; ++ky) {
                const int dy = ky - pad;
                const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                for (int kx = 0; kx < k; ++kx) {
                    const int dx = kx - pad;
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    const T wv = w.at(oc, ic, ky, kx);
                    if (wv == T(0)) continue;
                    for (int yy = y0; yy < y1; ++yy) {
                        T* yrow = yp + static_cast<std::size_t>(yy) * W;
                        const T* xrow = xp + static_cast<std::size_t>(yy + dy) * W + dx;
                        for (int xx = x0; xx < x1; ++xx) yrow[xx] += wv * xrow[xx];
                    }
                }
            }
        }
    });
    return y;
}

template <class T>
void conv2d_same_backward(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& dy,
                          Tensor4<T>& dx, Tensor4<T>& dw, std::vector<T>& db) {
    const int k = w.h, pad = k / 2, H = x.h, W = x.w;
    dx = Tensor4<T>(x.n, x.c, H, W);
    dw = Tensor4<T>(w.n, w.c, k, k);
    db.assign(static_cast<std::size_t>(w.n), T(0));

    // input gradient: disjoint (n, ic) planes
    parallel_for(static_cast<std::int64_t>(x.n) * x.c, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / x.c);
        const int ic = static_cast<int>(idx % x.c);
        T* dxp = dx.plane_ptr(in, ic);
        for (int oc = 0; oc < w.n; ++oc) {
            const T* dyp = dy.plane_ptr(in, oc);
            for (int ky = 0; ky < k; ++ky) {
                const int dyo = ky - pad;
                const int y0 = std::max(0, -dyo), y1 = std::min(H, H - dyo);
                for (int kx = 0; kx < k; ++kx) {
                    const int dxo = kx - pad;
                    const int x0 = std::max(0, -dxo), x1 = std::min(W, W - dxo);
                    const T wv = w.at(oc, ic, ky, kx);
                    if (wv == T(0)) continue;
                    for (int yy = y0; yy < y1; ++yy) {
                        const T* drow = dyp + static_cast<std::size_t>(yy) * W;
                        T* xrow = dxp + static_cast<std::size_t>(yy + dyo) * W + dxo;
                        for (int xx = x0; xx < x1; ++xx) xrow[xx] += wv * drow[xx];
                    }
                }
            }
        }
    });

    // weight gradient: disjoint oc slices, batch summed in fixed order
    parallel_for(w.n, [&](std::int64_t oc64) {
        const int oc = static_cast<int>(oc64);
        T bsum = T(0);
        for (int in = 0; in < x.n; ++in) {
            const T* dyp = dy.plane_ptr(in, oc);
            const std::size_t np = dy.plane();
            for (std::size_t i = 0; i < np; ++i) bsum += dyp[i];
            for (int ic = 0; ic < x.c; ++ic) {
                const T* xp = x.plane_ptr(in, ic);
                for (int ky = 0; ky < k; ++ky) {
                    const int dyo = ky - pad;
                    const int y0 = std::max(0, -dyo), y1 = std::min(H, H - dyo);
                    for (int kx = 0; kx < k; ++kx) {
                        const int dxo = kx - pad;
                        const int x0 = std::max(0, -dxo), x1 = std::min(W, W - dxo);
                        T acc = T(0);
                        for (int yy = y0; yy < y1; ++yy) {
                            const T* drow = dyp + static_cast<std::size_t>(yy) * W;
                            const T* xrow = xp + static_cast<std::size_t>(yy + dyo) * W + dxo;
                            for (int xx = x0; xx < x1; ++xx) acc += drow[xx] * xrow[xx];
                        }
                        dw.at(oc, ic, ky, kx) += acc;
                    }
                }
            }
        }
        db[static_cast<std::size_t>(oc)] = bsum;
    });
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2

template <class T>
Tensor4<T> maxpool2(const Tensor4<T>& x, std::vector<std::int64_t>* argmax = nullptr) {
    if (x.h % 2 != 0 || x.w % 2 != 0) throw std::runtime_error("maxpool2: odd spatial size");
    Tensor4<T> y(x.n, x.c, x.h / 2, x.w / 2);
    if (argmax) argmax->assign(y.size(), 0);
    const int HW = x.w;
    parallel_for(static_cast<std::int64_t>(x.n) * x.c, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / x.c);
        const int ic = static_cast<int>(idx % x.c);
        const T* xp = x.plane_ptr(in, ic);
        const std::size_t xbase = (static_cast<std::size_t>(in) * x.c + ic) * x.plane();
        T* yp = y.plane_ptr(in, ic);
        std::size_t yi = (static_cast<std::size_t>(in) * x.c + ic) * y.plane();
        for (int yy = 0; yy < y.h; ++yy) {
            for (int xx = 0; xx < y.w; ++xx) {
                const std::size_t o = static_cast<std::size_t>(2 * yy) * HW + 2 * xx;
                // ties resolve to the first element in scan order
                std::size_t best = o;
                T bv = xp[o];
                if (xp[o + 1] > bv) { bv = xp[o + 1]; best = o + 1; }
                if (xp[o + HW] > bv) { bv = xp[o + HW]; best = o + HW; }
                if (xp[o + HW + 1] > bv) { bv = xp[o + HW + 1]; best = o + HW + 1; }
                yp[static_cast<std::size_t>(yy) * y.w + xx] = bv;
                if (argmax) (*argmax)[yi] = static_cast<std::int64_t>(xbase + best);
                ++yi;
            }
        }
    });
    return y;
}

template <class T>
Tensor4<T> maxpool2_backward(const Tensor4<T>& dy, const std::vector<std::int64_t>& argmax,
                             int in_h, int in_w) {
    Tensor4<T> dx(dy.n, dy.c, in_h, in_w);
    for (std::size_t i = 0; i < dy.size(); ++i)
        dx.v[static_cast<std::size_t>(argmax[i])] += dy.v[i];
    return dx;
}

// ---------------------------------------------------------------------------
// 2x2 deconvolution (transposed conv), stride 2: doubles the spatial size.
// Kernel equals stride, so every output pixel receives exactly one input.

template <class T>
Tensor4<T> deconv2_stride2(const Tensor4<T>& x, const Tensor4<T>& w, const std::vector<T>& bias) {
    if (w.n != x.c) throw std::runtime_error("deconv2_stride2: channel mismatch");
    if (w.h != 2 || w.w != 2) throw std::runtime_error("deconv2_stride2: kernel must be 2x2");
    const int oc_n = w.c;
    if (static_cast<int>(bias.size()) != oc_n) throw std::runtime_error("deconv2_stride2: bias size");
    Tensor4<T> y(x.n, oc_n, x.h * 2, x.w * 2);

    parallel_for(static_cast<std::int64_t>(x.n) * oc_n, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / oc_n);
        const int oc = static_cast<int>(idx % oc_n);
        T* yp = y.plane_ptr(in, oc);
        const std::size_t np = y.plane();
        for (std::size_t i = 0; i < np; ++i) yp[i] = bias[static_cast<std::size_t>(oc)];
        for (int ic = 0; ic < x.c; ++ic) {
            const T* xp = x.plane_ptr(in, ic);
            const T w00 = w.at(ic, oc, 0, 0), w01 = w.at(ic, oc, 0, 1);
            const T w10 = w.at(ic, oc, 1, 0), w11 = w.at(ic, oc, 1, 1);
            for (int yy = 0; yy < x.h; ++yy) {
                const T* xrow = xp + static_cast<std::size_t>(yy) * x.w;
                T* y0 = yp + static_cast<std::size_t>(2 * yy) * y.w;
                T* y1 = y0 + y.w;
                for (int xx = 0; xx < x.w; ++xx) {
                    const T v = xrow[xx];
                    y0[2 * xx] += w00 * v;
                    y0[2 * xx + 1] += w01 * v;
                    y1[2 * xx] += w10 * v;
                    y1[2 * xx + 1] += w11 * v;
                }
            }
        }
    });
    return y;
}

template <class T>
void deconv2_stride2_backward(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& dy,
                              Tensor4<T>& dx, Tensor4<T>& dw, std::vector<T>& db) {
    const int oc_n = w.c;
    dx = Tensor4<T>(x.n, x.c, x.h, x.w);
    dw = Tensor4<T>(w.n, w.c, 2, 2);
    db.assign(static_cast<std::size_t>(oc_n), T(0));

    parallel_for(static_cast<std::int64_t>(x.n) * x.c, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / x.c);
        const int ic = static_cast<int>(idx % x.c);
        T* dxp = dx.plane_ptr(in, ic);
        for (int oc = 0; oc < oc_n; ++oc) {
            const T* dyp = dy.plane_ptr(in, oc);
            const T w00 = w.at(ic, oc, 0, 0), w01 = w.at(ic, oc, 0, 1);
            const T w10 = w.at(ic, oc, 1, 0), w11 = w.at(ic, oc, 1, 1);
            for (int yy = 0; yy < x.h; ++yy) {
                const T* d0 = dyp + static_cast<std::size_t>(2 * yy) * dy.w;
                const T* d1 = d0 + dy.w;
                T* xrow = dxp + static_cast<std::size_t>(yy) * x.w;
                for (int xx = 0; xx < x.w; ++xx)
                    xrow[xx] += w00 * d0[2 * xx] + w01 * d0[2 * xx + 1] +
                                w10 * d1[2 * xx] + w11 * d1[2 * xx + 1];
            }
        }
    });

    for (int in = 0; in < x.n; ++in)
        for (int oc = 0; oc < oc_n; ++oc) {
            const T* dyp = dy.plane_ptr(in, oc);
            T bsum = T(0);
            const std::size_t np = dy.plane();
            for (std::size_t i = 0; i < np; ++i) bsum += dyp[i];
            db[static_cast<std::size_t>(oc)] += bsum;
            for (int ic = 0; ic < x.c; ++ic) {
                const T* xp = x.plane_ptr(in, ic);
                T a00 = T(0), a01 = T(0), a10 = T(0), a11 = T(0);
                for (int yy = 0; yy < x.h; ++yy) {
                    const T* xrow = xp + static_cast<std::size_t>(yy) * x.w;
                    const T* d0 = dyp + static_cast<std::size_t>(2 * yy) * dy.w;
                    const T* d1 = d0 + dy.w;
                    for (int xx = 0; xx < x.w; ++xx) {
                        const T v = xrow[xx];
                        a00 += v * d0[2 * xx];
                        a01 += v * d0[2 * xx + 1];
                        a10 += v * d1[2 * xx];
                        a11 += v * d1[2 * xx + 1];
                    }
                }
                dw.at(ic, oc, 0, 0) += a00;
                dw.at(ic, oc, 0, 1) += a01;
                dw.at(ic, oc, 1, 0) += a10;
                dw.at(ic, oc, 1, 1) += a11;
            }
        }
}

// ---------------------------------------------------------------------------
// batch normalization over (N, H, W) per channel

template <class T>
struct BnCache {
    Tensor4<T> xhat;
    std::vector<T> inv_std;
};

template <class T>
Tensor4<T> batchnorm_train(const Tensor4<T>& x, const std::vector<T>& gamma,
                           const std::vector<T>& beta, std::vector<T>& run_mean,
                           std::vector<T>& run_var, T eps, T momentum, BnCache<T>& cache) {
    const std::int64_t per_c = static_cast<std::int64_t>(x.n) * x.h * x.w;
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    cache.xhat = Tensor4<T>(x.n, x.c, x.h, x.w);
    cache.inv_std.assign(static_cast<std::size_t>(x.c), T(0));

    for (int ic = 0; ic < x.c; ++ic) {
        double sum = 0.0;
        for (int in = 0; in < x.n; ++in) {
            const T* xp = x.plane_ptr(in, ic);
            for (std::size_t i = 0; i < x.plane(); ++i) sum += static_cast<double>(xp[i]);
        }
        const double mean = sum / static_cast<double>(per_c);
        double ss = 0.0;
        for (int in = 0; in < x.n; ++in) {
            const T* xp = x.plane_ptr(in, ic);
            for (std::size_t i = 0; i < x.plane(); ++i) {
                const double dv = static_cast<double>(xp[i]) - mean;
                ss += dv * dv;
            }
        }
        const double var = ss / static_cast<double>(per_c);
        const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        cache.inv_std[static_cast<std::size_t>(ic)] = istd;
        const T m = static_cast<T>(mean);
        const T g = gamma[static_cast<std::size_t>(ic)], b = beta[static_cast<std::size_t>(ic)];
        for (int in = 0; in < x.n; ++in) {
            const T* xp = x.plane_ptr(in, ic);
            T* hp = cache.xhat.plane_ptr(in, ic);
            T* yp = y.plane_ptr(in, ic);
            for (std::size_t i = 0; i < x.plane(); ++i) {
                const T xh = (xp[i] - m) * istd;
                hp[i] = xh;
                yp[i] = g * xh + b;
            }
        }
        run_mean[static_cast<std::size_t>(ic)] =
            momentum * run_mean[static_cast<std::size_t>(ic)] + (T(1) - momentum) * m;
        run_var[static_cast<std::size_t>(ic)] =
            momentum * run_var[static_cast<std::size_t>(ic)] + (T(1) - momentum) * static_cast<T>(var);
    }
    return y;
}

template <class T>
Tensor4<T> batchnorm_infer(const Tensor4<T>& x, const std::vector<T>& gamma,
                           const std::vector<T>& beta, const std::vector<T>& run_mean,
                           const std::vector<T>& run_var, T eps) {
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    for (int ic = 0; ic < x.c; ++ic) {
        const T istd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(run_var[static_cast<std::size_t>(ic)]) +
                                                      static_cast<double>(eps)));
        const T m = run_mean[static_cast<std::size_t>(ic)];
        const T g = gamma[static_cast<std::size_t>(ic)], b = beta[static_cast<std::size_t>(ic)];
        for (int in = 0; in < x.n; ++in) {
            const T* xp = x.plane_ptr(in, ic);
            T* yp = y.plane_ptr(in, ic);
            for (std::size_t i = 0; i < x.plane(); ++i) yp[i] = g * (xp[i] - m) * istd + b;
        }
    }
    return y;
}

template <class T>
Tensor4<T> batchnorm_backward(const Tensor4<T>& dy, const BnCache<T>& cache,
                              const std::vector<T>& gamma, std::vector<T>& dgamma,
                              std::vector<T>& dbeta) {
    const Tensor4<T>& xh = cache.xhat;
    const std::int64_t per_c = static_cast<std::int64_t>(dy.n) * dy.h * dy.w;
    Tensor4<T> dx(dy.n, dy.c, dy.h, dy.w);
    dgamma.assign(static_cast<std::size_t>(dy.c), T(0));
    dbeta.assign(static_cast<std::size_t>(dy.c), T(0));

    for (int ic = 0; ic < dy.c; ++ic) {
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (int in = 0; in < dy.n; ++in) {
            const T* dp = dy.plane_ptr(in, ic);
            const T* hp = xh.plane_ptr(in, ic);
            for (std::size_t i = 0; i < dy.plane(); ++i) {
                sum_dy += static_cast<double>(dp[i]);
                sum_dy_xh += static_cast<double>(dp[i]) * static_cast<double>(hp[i]);
            }
        }
        dgamma[static_cast<std::size_t>(ic)] = static_cast<T>(sum_dy_xh);
        dbeta[static_cast<std::size_t>(ic)] = static_cast<T>(sum_dy);
        const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(per_c));
        const T mean_dy_xh = static_cast<T>(sum_dy_xh / static_cast<double>(per_c));
        const T scale = gamma[static_cast<std::size_t>(ic)] * cache.inv_std[static_cast<std::size_t>(ic)];
        for (int in = 0; in < dy.n; ++in) {
            const T* dp = dy.plane_ptr(in, ic);
            const T* hp = xh.plane_ptr(in, ic);
            T* xp = dx.plane_ptr(in, ic);
            for (std::size_t i = 0; i < dy.plane(); ++i)
                xp[i] = scale * (dp[i] - mean_dy - hp[i] * mean_dy_xh);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// elementwise

template <class T>
Tensor4<T> relu(const Tensor4<T>& x) {
    Tensor4<T> y = x;
    for (auto& v : y.v) v = v > T(0) ? v : T(0);
    return y;
}

// mask taken from the forward output (y > 0 iff x > 0)
template <class T>
Tensor4<T> relu_backward(const Tensor4<T>& y, const Tensor4<T>& dy) {
    Tensor4<T> dx(dy.n, dy.c, dy.h, dy.w);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.v[i] = y.v[i] > T(0) ? dy.v[i] : T(0);
    return dx;
}

template <class T>
Tensor4<T> sigmoid(const Tensor4<T>& x) {
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i)
        y.v[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x.v[i]))));
    return y;
}

template <class T>
Tensor4<T> sigmoid_backward(const Tensor4<T>& y, const Tensor4<T>& dy) {
    Tensor4<T> dx(dy.n, dy.c, dy.h, dy.w);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.v[i] = dy.v[i] * y.v[i] * (T(1) - y.v[i]);
    return dx;
}

// ---------------------------------------------------------------------------
// channel concatenation

template <class T>
Tensor4<T> concat_channels(const std::vector<const Tensor4<T>*>& parts) {
    if (parts.empty()) throw std::runtime_error("concat_channels: no inputs");
    int ctot = 0;
    for (const auto* p : parts) {
        if (p->n != parts[0]->n || p->h != parts[0]->h || p->w != parts[0]->w)
            throw std::runtime_error("concat_channels: spatial/batch mismatch");
        ctot += p->c;
    }
    Tensor4<T> y(parts[0]->n, ctot, parts[0]->h, parts[0]->w);
    for (int in = 0; in < y.n; ++in) {
        int oc = 0;
        for (const auto* p : parts)
            for (int ic = 0; ic < p->c; ++ic, ++oc)
                std::copy_n(p->plane_ptr(in, ic), p->plane(), y.plane_ptr(in, oc));
    }
    return y;
}

template <class T>
std::vector<Tensor4<T>> concat_channels_backward(const Tensor4<T>& dy,
                                                 const std::vector<int>& channel_counts) {
    std::vector<Tensor4<T>> parts;
    parts.reserve(channel_counts.size());
    for (int c : channel_counts) parts.emplace_back(dy.n, c, dy.h, dy.w);
    for (int in = 0; in < dy.n; ++in) {
        int oc = 0;
        for (auto& p : parts)
            for (int ic = 0; ic < p.c; ++ic, ++oc)
                std::copy_n(dy.plane_ptr(in, oc), dy.plane(), p.plane_ptr(in, ic));
    }
    return parts;
}

// ---------------------------------------------------------------------------
// binary cross-entropy against soft targets in [0,1)

inline constexpr double kBceEps = 1e-7;

template <class T>
double bce_loss(const Tensor4<T>& pred, const Tensor4<T>& target) {
    if (!pred.same_shape(target)) throw std::runtime_error("bce_loss: shape mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(static_cast<double>(pred.v[i]), kBceEps, 1.0 - kBceEps);
        const double t = static_cast<double>(target.v[i]);
        sum += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    }
    return sum / static_cast<double>(pred.size());
}

// gradient of the mean BCE w.r.t. pre-sigmoid logits: (p - t) / count,
// with an optional extra scale for multi-output averaging
template <class T>
Tensor4<T> bce_logit_grad(const Tensor4<T>& pred, const Tensor4<T>& target, double scale = 1.0) {
    if (!pred.same_shape(target)) throw std::runtime_error("bce_logit_grad: shape mismatch");
    Tensor4<T> g(pred.n, pred.c, pred.h, pred.w);
    const double inv = scale / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
        g.v[i] = static_cast<T>((static_cast<double>(pred.v[i]) - target.v[i]) * inv);
    return g;
}

} // namespace voldose
