#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "latentbridge/common.hpp"
#include "latentbridge/graph.hpp"
#include "latentbridge/kernels.hpp"
#include "latentbridge/tensor.hpp"

// Differentiable ops over Graph<T>, plus the eager single-tensor entry points
// built on top of them. Convolutions are stride-1/same-padding; spatial
// resampling is exclusively space2depth / depth2space.

namespace lb {

enum class Norm { instance, batch, none };
enum class Act { relu, leaky_relu, tanh, none };

constexpr double kNormEps = 1e-5;
constexpr double kLeakySlope = 0.2;

struct LayerConfig {
    int kernel_size = 3;
    int in_channels = 0;
    int out_channels = 0;
    Norm norm = Norm::instance;
    Act activation = Act::relu;
    int pack_factor = 2;
};

namespace ops {

template <typename T>
void check4d(const Tensor<T>& t, const char* op) {
    if (t.ndim() != 4) throw ShapeError(std::string(op) + ": expected 4-d NCHW input, got " +
                                        shape_str(t.shape));
}

// --- convolution -----------------------------------------------------------

template <typename T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b) {
    const Tensor<T>& xv = g.val(x);
    const Tensor<T>& wv = g.val(w);
    check4d(xv, "conv2d");
    if (wv.ndim() != 4 || wv.dim(2) != wv.dim(3) || wv.dim(2) % 2 == 0)
        throw ShapeError("conv2d: weight must be (out,in,k,k) with odd k, got " +
                         shape_str(wv.shape));
    if (wv.dim(1) != xv.dim(1))
        throw ShapeError("conv2d: input has " + std::to_string(xv.dim(1)) +
                         " channels, weight expects " + std::to_string(wv.dim(1)));
    const Tensor<T>& bv = g.val(b);
    if (bv.numel() != wv.dim(0)) throw ShapeError("conv2d: bias size mismatch");

    kernels::Conv2dDims d{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3), wv.dim(0), wv.dim(2)};
    Tensor<T> y({d.n, d.cout, d.h, d.w});
    {
        const T* xp = xv.ptr();
        const T* wp = wv.ptr();
        const T* bp = bv.ptr();
        T* yp = y.ptr();
        parallel_for(d.n, [&](int64_t n) {
            std::vector<T> scratch;
            kernels::conv2d_fwd_sample(xp + n * d.cin * d.h * d.w, wp, bp,
                                       yp + n * d.cout * d.h * d.w, d, scratch);
        });
    }
    bool rg = g.requires_grad(x) || g.requires_grad(w) || g.requires_grad(b);
    auto bw = [x, w, b, d](Graph<T>& gg, int self) {
        const Tensor<T>& dy = gg.grad_buf(self);
        const Tensor<T>& xv2 = gg.val(x);
        const Tensor<T>& wv2 = gg.val(w);
        if (gg.requires_grad(x)) {
            Tensor<T>& dx = gg.grad_buf(x.id);
            Tensor<T> tmp({d.n, d.cin, d.h, d.w});
            const T* dyp = dy.ptr();
            const T* wp = wv2.ptr();
            T* dxp = tmp.ptr();
            parallel_for(d.n, [&](int64_t n) {
                std::vector<T> scratch;
                kernels::conv2d_bwd_data_sample(dyp + n * d.cout * d.h * d.w, wp,
                                                dxp + n * d.cin * d.h * d.w, d, scratch);
            });
            for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += tmp[i];
        }
        if (gg.requires_grad(w) || gg.requires_grad(b)) {
            // per-sample partials reduced in batch order: bitwise identical
            // result for any worker count
            std::vector<Tensor<T>> dws(static_cast<size_t>(d.n));
            std::vector<Tensor<T>> dbs(static_cast<size_t>(d.n));
            const T* xp = xv2.ptr();
            const T* dyp = dy.ptr();
            parallel_for(d.n, [&](int64_t n) {
                dws[n] = Tensor<T>::zeros(wv2.shape);
                dbs[n] = Tensor<T>::zeros({d.cout});
                std::vector<T> scratch;
                kernels::conv2d_bwd_weights_sample(xp + n * d.cin * d.h * d.w,
                                                   dyp + n * d.cout * d.h * d.w, dws[n].ptr(),
                                                   dbs[n].ptr(), d, scratch);
            });
            if (gg.requires_grad(w)) {
                Tensor<T>& dw = gg.grad_buf(w.id);
                for (int64_t n = 0; n < d.n; ++n)
                    for (int64_t i = 0; i < dw.numel(); ++i) dw[i] += dws[n][i];
            }
            if (gg.requires_grad(b)) {
                Tensor<T>& db = gg.grad_buf(b.id);
                for (int64_t n = 0; n < d.n; ++n)
                    for (int64_t i = 0; i < db.numel(); ++i) db[i] += dbs[n][i];
            }
        }
    };
    return g.make(std::move(y), rg, bw, "conv2d");
}

// Transposed convolution, weight layout (in, out, k, k). For stride 1 this is
// a correlation with the spatially flipped, channel-swapped kernel, so it
// reuses the conv2d node after rearranging the weight (an involution, applied
// again to route the weight gradient back).
template <typename T>
Tensor<T> flip_swap_weight(const Tensor<T>& w) {
    const int64_t ci = w.dim(0), co = w.dim(1), k = w.dim(2);
    Tensor<T> out({co, ci, k, k});
    for (int64_t i = 0; i < ci; ++i)
        for (int64_t o = 0; o < co; ++o)
            for (int64_t ky = 0; ky < k; ++ky)
                for (int64_t kx = 0; kx < k; ++kx)
                    out.data[((o * ci + i) * k + ky) * k + kx] =
                        w.data[((i * co + o) * k + (k - 1 - ky)) * k + (k - 1 - kx)];
    return out;
}

template <typename T>
Var conv_transpose2d(Graph<T>& g, Var x, Var w, Var b) {
    const Tensor<T>& wv = g.val(w);
    if (wv.ndim() != 4 || wv.dim(2) != wv.dim(3) || wv.dim(2) % 2 == 0)
        throw ShapeError("conv_transpose2d: weight must be (in,out,k,k) with odd k, got " +
                         shape_str(wv.shape));
    bool wgrad = g.requires_grad(w);
    Var wt = g.make(flip_swap_weight(wv), wgrad,
                    [w](Graph<T>& gg, int self) {
                        if (!gg.requires_grad(w)) return;
                        Tensor<T> back = flip_swap_weight(gg.grad_buf(self));
                        // flip_swap on a (co,ci,k,k) gradient yields (ci,co,k,k)
                        Tensor<T>& dw = gg.grad_buf(w.id);
                        for (int64_t i = 0; i < dw.numel(); ++i) dw[i] += back[i];
                    },
                    "conv_transpose2d.weight");
    return conv2d(g, x, wt, b);
}

// Shared 3-D filter over the folded pack dimension: x viewed as
// (N, C, r^2, H, W), one (r^2, k, k) kernel and scalar bias for all (n, c).
template <typename T>
Var pack_conv3d(Graph<T>& g, Var x, Var w, Var b, int factor) {
    const Tensor<T>& xv = g.val(x);
    const Tensor<T>& wv = g.val(w);
    check4d(xv, "pack_conv3d");
    const int64_t r2 = int64_t(factor) * factor;
    if (xv.dim(1) % r2 != 0)
        throw ShapeError("pack_conv3d: channels " + std::to_string(xv.dim(1)) +
                         " not divisible by factor^2 = " + std::to_string(r2));
    if (wv.ndim() != 3 || wv.dim(0) != r2 || wv.dim(1) != wv.dim(2))
        throw ShapeError("pack_conv3d: kernel must be (factor^2,k,k), got " +
                         shape_str(wv.shape));
    if (g.val(b).numel() != 1) throw ShapeError("pack_conv3d: bias must be scalar");

    kernels::PackConv3dDims d{xv.dim(0), xv.dim(1) / r2, r2, xv.dim(2), xv.dim(3), wv.dim(1)};
    const int64_t slice = d.dpth * d.h * d.w;
    Tensor<T> y(xv.shape);
    {
        const T* xp = xv.ptr();
        const T* wp = wv.ptr();
        const T bias = g.val(b).data[0];
        T* yp = y.ptr();
        parallel_for(d.n * d.c, [&](int64_t i) {
            kernels::pack_conv3d_fwd_slice(xp + i * slice, wp, bias, yp + i * slice, d);
        });
    }
    bool rg = g.requires_grad(x) || g.requires_grad(w) || g.requires_grad(b);
    auto bw = [x, w, b, d, slice](Graph<T>& gg, int self) {
        const Tensor<T>& dy = gg.grad_buf(self);
        if (gg.requires_grad(x)) {
            Tensor<T>& dx = gg.grad_buf(x.id);
            Tensor<T> tmp(dy.shape);
            const T* dyp = dy.ptr();
            const T* wp = gg.val(w).ptr();
            T* dxp = tmp.ptr();
            parallel_for(d.n * d.c, [&](int64_t i) {
                kernels::pack_conv3d_bwd_data_slice(dyp + i * slice, wp, dxp + i * slice, d);
            });
            for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += tmp[i];
        }
        if (gg.requires_grad(w) || gg.requires_grad(b)) {
            Tensor<T> dw = Tensor<T>::zeros(gg.val(w).shape);
            Tensor<T> db = Tensor<T>::zeros({1});
            const T* xp = gg.val(x).ptr();
            const T* dyp = dy.ptr();
            for (int64_t i = 0; i < d.n * d.c; ++i)
                kernels::pack_conv3d_bwd_weights_slice(xp + i * slice, dyp + i * slice, dw.ptr(),
                                                       db.ptr(), d);
            if (gg.requires_grad(w)) {
                Tensor<T>& acc = gg.grad_buf(w.id);
                for (int64_t i = 0; i < acc.numel(); ++i) acc[i] += dw[i];
            }
            if (gg.requires_grad(b)) gg.grad_buf(b.id)[0] += db[0];
        }
    };
    return g.make(std::move(y), rg, bw, "pack_conv3d");
}

// --- normalization ---------------------------------------------------------

template <typename T>
Var instance_norm(Graph<T>& g, Var x, T eps = T(kNormEps)) {
    const Tensor<T>& xv = g.val(x);
    check4d(xv, "instance_norm");
    const int64_t groups = xv.dim(0) * xv.dim(1), m = xv.dim(2) * xv.dim(3);
    Tensor<T> y(xv.shape);
    auto invstd = std::make_shared<std::vector<T>>(static_cast<size_t>(groups));
    {
        const T* xp = xv.ptr();
        T* yp = y.ptr();
        T* is = invstd->data();
        parallel_for(groups, [&](int64_t i) {
            kernels::norm_group_fwd(xp + i * m, m, eps, yp + i * m, is + i);
        });
    }
    auto bw = [x, invstd, groups, m](Graph<T>& gg, int self) {
        if (!gg.requires_grad(x)) return;
        const Tensor<T>& dy = gg.grad_buf(self);
        const Tensor<T>& yv = gg.val(Var{self});
        Tensor<T>& dx = gg.grad_buf(x.id);
        const T* dyp = dy.ptr();
        const T* yp = yv.ptr();
        T* dxp = dx.ptr();
        const T* is = invstd->data();
        parallel_for(groups, [&](int64_t i) {
            kernels::norm_group_bwd(dyp + i * m, yp + i * m, is[i], m, dxp + i * m);
        });
    };
    return g.make(std::move(y), g.requires_grad(x), bw, "instance_norm");
}

// Uses current-batch statistics in every mode; with a single sample this
// coincides with per-channel normalization over H*W.
template <typename T>
Var batch_norm(Graph<T>& g, Var x, T eps = T(kNormEps)) {
    const Tensor<T>& xv = g.val(x);
    check4d(xv, "batch_norm");
    const int64_t n = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
    const int64_t stride = c * hw;
    Tensor<T> y(xv.shape);
    auto invstd = std::make_shared<std::vector<T>>(static_cast<size_t>(c));
    {
        const T* xp = xv.ptr();
        T* yp = y.ptr();
        T* is = invstd->data();
        parallel_for(c, [&](int64_t ci) {
            kernels::norm_channel_fwd(xp + ci * hw, n, stride, hw, eps, yp + ci * hw, is + ci);
        });
    }
    auto bw = [x, invstd, n, c, hw, stride](Graph<T>& gg, int self) {
        if (!gg.requires_grad(x)) return;
        const Tensor<T>& dy = gg.grad_buf(self);
        const Tensor<T>& yv = gg.val(Var{self});
        Tensor<T>& dx = gg.grad_buf(x.id);
        const T* dyp = dy.ptr();
        const T* yp = yv.ptr();
        T* dxp = dx.ptr();
        const T* is = invstd->data();
        parallel_for(c, [&](int64_t ci) {
            kernels::norm_channel_bwd(dyp + ci * hw, yp + ci * hw, is[ci], n, stride, hw,
                                      dxp + ci * hw);
        });
    };
    return g.make(std::move(y), g.requires_grad(x), bw, "batch_norm");
}

template <typename T>
Var norm_layer(Graph<T>& g, Var x, Norm kind) {
    switch (kind) {
        case Norm::instance: return instance_norm(g, x);
        case Norm::batch: return batch_norm(g, x);
        case Norm::none: return x;
    }
    throw ConfigError("unknown norm kind");
}

// --- pointwise -------------------------------------------------------------

template <typename T>
Var relu(Graph<T>& g, Var x) {
    const Tensor<T>& xv = g.val(x);
    Tensor<T> y(xv.shape);
    // NaN must pass through, not flush to zero, so poisoned values reach the
    // loss check instead of silently vanishing (comparisons with NaN are false).
    for (int64_t i = 0; i < xv.numel(); ++i)
        y[i] = xv[i] > T(0) ? xv[i] : (xv[i] == xv[i] ? T(0) : xv[i]);
    auto bw = [x](Graph<T>& gg, int self) {
        if (!gg.requires_grad(x)) return;
        const Tensor<T>& dy = gg.grad_buf(self);
        const Tensor<T>& xv2 = gg.val(x);
        Tensor<T>& dx = gg.grad_buf(x.id);
        for (int64_t i = 0; i < dx.numel(); ++i)
            if (xv2[i] > T(0)) dx[i] += dy[i];
    };
    return g.make(std::move(y), g.requires_grad(x), bw, "relu");
}

template <typename T>
Var leaky_relu(Graph<T>& g, Var x, T slope = T(kLeakySlope)) {
    const Tensor<T>& xv = g.val(x);
    Tensor<T> y(xv.shape);
    for (int64_t i = 0; i < xv.numel(); ++i) y[i] = xv[i] > T(0) ? xv[i] : slope * xv[i];
    auto bw = [x, slope](Graph<T>& gg, int self) {
        if (!gg.requires_grad(x)) return;
        const Tensor<T>& dy = gg.grad_buf(self);
        const Tensor<T>& xv2 = gg.val(x);
        Tensor<T>& dx = gg.grad_buf(x.id);
        for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += xv2[i] > T(0) ? dy[i] : slope * dy[i];
    };
    return g.make(std::move(y), g.requires_grad(x), bw, "leaky_relu");
}

template <typename T>
Var tanh_act(Graph<T>& g, Var x) {
    const Tensor<T>& xv = g.val(x);
    Tensor<T> y(xv.shape);
    for (int64_t i = 0; i < xv.numel(); ++i) y[i] = std::tanh(xv[i]);
    auto bw = [x](Graph<T>& gg, int self) {
        if (!gg.requires_grad(x)) return;
        const Tensor<T>& dy = gg.grad_buf(self);
        const Tensor<T>& yv = gg.val(Var{self});
        Tensor<T>& dx = gg.grad_buf(x.id);
        for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += dy[i] * (T(1) - yv[i] * yv[i]);
    };
    return g.make(std::move(y), g.requires_grad(x), bw, "tanh");
}

template <typename T>
Var activation(Graph<T>& g, Var x, Act kind) {
    switch (kind) {
        case Act::relu: return relu(g, x);
        case Act::leaky_relu: return leaky_relu(g, x);
        case Act::tanh: return tanh_act(g, x);
        case Act::none: return x;
    }
    throw ConfigError("unknown activation kind");
}

template <typename T>
Var clamp(Graph<T>& g, Var x, T lo, T hi) {
    const Tensor<T>& xv = g.val(x);
    Tensor<T> y(xv.shape);
    for (int64_t i = 0; i < xv.numel(); ++i)  // NaN passes through, as in relu
        y[i] = xv[i] == xv[i] ? std::min(hi, std::max(lo, xv[i])) : xv[i];
    auto bw = [x, lo, hi](Graph<T>& gg, int self) {
        if (!gg.requires_grad(x)) return;
        const Tensor<T>& dy = gg.grad_buf(self);
        const Tensor<T>& xv2 = gg.val(x);
        Tensor<T>& dx = gg.grad_buf(x.id);
        for (int64_t i = 0; i < dx.numel(); ++i)
            if (xv2[i] > lo && xv2[i] < hi) dx[i] += dy[i];
    };
    return g.make(std::move(y), g.requires_grad(x), bw, "clamp");
}

// --- structure -------------------------------------------------------------

template <typename T>
Var space2depth(Graph<T>& g, Var x, int factor) {
    const Tensor<T>& xv = g.val(x);
    check4d(xv, "space2depth");
    if (factor < 1) throw ConfigError("space2depth: factor must be >= 1");
    if (xv.dim(2) % factor != 0 || xv.dim(3) % factor != 0)
        throw ShapeError("space2depth: spatial dims " + shape_str(xv.shape) +
                         " not divisible by factor " + std::to_string(factor));
    const int64_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    Tensor<T> y({n, c * factor * factor, h / factor, w / factor});
    kernels::space2depth_kern(xv.ptr(), y.ptr(), n, c, h, w, factor);
    auto bw = [x, n, c, h, w, factor](Graph<T>& gg, int self) {
        if (!gg.requires_grad(x)) return;
        const Tensor<T>& dy = gg.grad_buf(self);
        Tensor<T> tmp({n, c, h, w});
        kernels::depth2space_kern(dy.ptr(), tmp.ptr(), n, c, h, w, factor);
        Tensor<T>& dx = gg.grad_buf(x.id);
        for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += tmp[i];
    };
    return g.make(std::move(y), g.requires_grad(x), bw, "space2depth");
}

template <typename T>
Var depth2space(Graph<T>& g, Var x, int factor) {
    const Tensor<T>& xv = g.val(x);
    check4d(xv, "depth2space");
    if (factor < 1) throw ConfigError("depth2space: factor must be >= 1");
    const int64_t r2 = int64_t(factor) * factor;
    if (xv.dim(1) % r2 != 0)
        throw ShapeError("depth2space: channels " + std::to_string(xv.dim(1)) +
                         " not divisible by factor^2 = " + std::to_string(r2));
    const int64_t n = xv.dim(0), co = xv.dim(1) / r2;
    const int64_t oh = xv.dim(2) * factor, ow = xv.dim(3) * factor;
    Tensor<T> y({n, co, oh, ow});
    kernels::depth2space_kern(xv.ptr(), y.ptr(), n, co, oh, ow, factor);
    auto bw = [x, n, co, oh, ow, factor](Graph<T>& gg, int self) {
        if (!gg.requires_grad(x)) return;
        const Tensor<T>& dy = gg.grad_buf(self);
        Tensor<T> tmp({n, co * factor * factor, oh / factor, ow / factor});
        kernels::space2depth_kern(dy.ptr(), tmp.ptr(), n, co, oh, ow, factor);
        Tensor<T>& dx = gg.grad_buf(x.id);
        for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += tmp[i];
    };
    return g.make(std::move(y), g.requires_grad(x), bw, "depth2space");
}

template <typename T>
Var reshape(Graph<T>& g, Var x, Shape s) {
    Tensor<T> y = g.val(x).reshaped(s);
    Shape orig = g.val(x).shape;
    auto bw = [x, orig](Graph<T>& gg, int self) {
        if (!gg.requires_grad(x)) return;
        const Tensor<T>& dy = gg.grad_buf(self);
        Tensor<T>& dx = gg.grad_buf(x.id);
        for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += dy[i];
    };
    return g.make(std::move(y), g.requires_grad(x), bw, "reshape");
}

template <typename T>
Var detach(Graph<T>& g, Var x) {
    return g.leaf(g.val(x), false);
}

// --- arithmetic ------------------------------------------------------------

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
    const Tensor<T>& av = g.val(a);
    const Tensor<T>& bv = g.val(b);
    if (!same_shape(av, bv))
        throw ShapeError("add: shape mismatch " + shape_str(av.shape) + " vs " +
                         shape_str(bv.shape));
    Tensor<T> y(av.shape);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = av[i] + bv[i];
    auto bw = [a, b](Graph<T>& gg, int self) {
        const Tensor<T>& dy = gg.grad_buf(self);
        if (gg.requires_grad(a)) {
            Tensor<T>& da = gg.grad_buf(a.id);
            for (int64_t i = 0; i < da.numel(); ++i) da[i] += dy[i];
        }
        if (gg.requires_grad(b)) {
            Tensor<T>& db = gg.grad_buf(b.id);
            for (int64_t i = 0; i < db.numel(); ++i) db[i] += dy[i];
        }
    };
    return g.make(std::move(y), g.requires_grad(a) || g.requires_grad(b), bw, "add");
}

template <typename T>
Var sub(Graph<T>& g, Var a, Var b) {
    const Tensor<T>& av = g.val(a);
    const Tensor<T>& bv = g.val(b);
    if (!same_shape(av, bv))
        throw ShapeError("sub: shape mismatch " + shape_str(av.shape) + " vs " +
                         shape_str(bv.shape));
    Tensor<T> y(av.shape);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = av[i] - bv[i];
    auto bw = [a, b](Graph<T>& gg, int self) {
        const Tensor<T>& dy = gg.grad_buf(self);
        if (gg.requires_grad(a)) {
            Tensor<T>& da = gg.grad_buf(a.id);
            for (int64_t i = 0; i < da.numel(); ++i) da[i] += dy[i];
        }
        if (gg.requires_grad(b)) {
            Tensor<T>& db = gg.grad_buf(b.id);
            for (int64_t i = 0; i < db.numel(); ++i) db[i] -= dy[i];
        }
    };
    return g.make(std::move(y), g.requires_grad(a) || g.requires_grad(b), bw, "sub");
}

template <typename T>
Var mul(Graph<T>& g, Var a, Var b) {
    const Tensor<T>& av = g.val(a);
    const Tensor<T>& bv = g.val(b);
    if (!same_shape(av, bv))
        throw ShapeError("mul: shape mismatch " + shape_str(av.shape) + " vs " +
                         shape_str(bv.shape));
    Tensor<T> y(av.shape);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = av[i] * bv[i];
    auto bw = [a, b](Graph<T>& gg, int self) {
        const Tensor<T>& dy = gg.grad_buf(self);
        const Tensor<T>& av2 = gg.val(a);
        const Tensor<T>& bv2 = gg.val(b);
        if (gg.requires_grad(a)) {
            Tensor<T>& da = gg.grad_buf(a.id);
            for (int64_t i = 0; i < da.numel(); ++i) da[i] += dy[i] * bv2[i];
        }
        if (gg.requires_grad(b)) {
            Tensor<T>& db = gg.grad_buf(b.id);
            for (int64_t i = 0; i < db.numel(); ++i) db[i] += dy[i] * av2[i];
        }
    };
    return g.make(std::move(y), g.requires_grad(a) || g.requires_grad(b), bw, "mul");
}

template <typename T>
Var sum(Graph<T>& g, Var x) {
    const Tensor<T>& xv = g.val(x);
    T s = 0;
    for (int64_t i = 0; i < xv.numel(); ++i) s += xv[i];
    Tensor<T> y({1});
    y[0] = s;
    auto bw = [x](Graph<T>& gg, int self) {
        if (!gg.requires_grad(x)) return;
        const T go = gg.grad_buf(self)[0];
        Tensor<T>& dx = gg.grad_buf(x.id);
        for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += go;
    };
    return g.make(std::move(y), g.requires_grad(x), bw, "sum");
}

template <typename T>
Var scale(Graph<T>& g, Var a, T s) {
    const Tensor<T>& av = g.val(a);
    Tensor<T> y(av.shape);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = av[i] * s;
    auto bw = [a, s](Graph<T>& gg, int self) {
        if (!gg.requires_grad(a)) return;
        const Tensor<T>& dy = gg.grad_buf(self);
        Tensor<T>& da = gg.grad_buf(a.id);
        for (int64_t i = 0; i < da.numel(); ++i) da[i] += s * dy[i];
    };
    return g.make(std::move(y), g.requires_grad(a), bw, "scale");
}

template <typename T>
Var mean(Graph<T>& g, Var x) {
    const int64_t n = g.val(x).numel();
    return scale(g, sum(g, x), T(1) / static_cast<T>(n));
}

template <typename T>
Var weighted_sum(Graph<T>& g, const std::vector<Var>& terms, const std::vector<T>& weights) {
    if (terms.empty() || terms.size() != weights.size())
        throw ConfigError("weighted_sum: empty terms or weight count mismatch");
    const Shape s = g.val(terms[0]).shape;
    Tensor<T> y = Tensor<T>::zeros(s);
    bool rg = false;
    for (size_t t = 0; t < terms.size(); ++t) {
        const Tensor<T>& v = g.val(terms[t]);
        if (v.shape != s) throw ShapeError("weighted_sum: shape mismatch");
        for (int64_t i = 0; i < y.numel(); ++i) y[i] += weights[t] * v[i];
        rg = rg || g.requires_grad(terms[t]);
    }
    auto bw = [terms, weights](Graph<T>& gg, int self) {
        const Tensor<T>& dy = gg.grad_buf(self);
        for (size_t t = 0; t < terms.size(); ++t) {
            if (!gg.requires_grad(terms[t])) continue;
            Tensor<T>& d = gg.grad_buf(terms[t].id);
            for (int64_t i = 0; i < d.numel(); ++i) d[i] += weights[t] * dy[i];
        }
    };
    return g.make(std::move(y), rg, bw, "weighted_sum");
}

// z = mu + exp(logvar/2) * eps, the reparameterized Gaussian sample
template <typename T>
Var gauss_sample(Graph<T>& g, Var mu, Var logvar, Tensor<T> eps) {
    const Tensor<T>& mv = g.val(mu);
    const Tensor<T>& lv = g.val(logvar);
    if (!same_shape(mv, lv) || !same_shape(mv, eps))
        throw ShapeError("gauss_sample: mu/logvar/eps shape mismatch");
    Tensor<T> z(mv.shape);
    for (int64_t i = 0; i < z.numel(); ++i)
        z[i] = mv[i] + std::exp(lv[i] / T(2)) * eps.data[static_cast<size_t>(i)];
    auto bw = [mu, logvar](Graph<T>& gg, int self) {
        const Tensor<T>& dz = gg.grad_buf(self);
        const Tensor<T>& zv = gg.val(Var{self});
        const Tensor<T>& mv2 = gg.val(mu);
        if (gg.requires_grad(mu)) {
            Tensor<T>& dm = gg.grad_buf(mu.id);
            for (int64_t i = 0; i < dm.numel(); ++i) dm[i] += dz[i];
        }
        if (gg.requires_grad(logvar)) {
            // d z / d logvar = (z - mu) / 2
            Tensor<T>& dl = gg.grad_buf(logvar.id);
            for (int64_t i = 0; i < dl.numel(); ++i) dl[i] += dz[i] * (zv[i] - mv2[i]) / T(2);
        }
    };
    return g.make(std::move(z), g.requires_grad(mu) || g.requires_grad(logvar), bw,
                  "gauss_sample");
}

}  // namespace ops

// Parameter handles for one packing (or unpacking) block.
struct PackParams {
    Var conv3d_w;  // (factor^2, k3, k3)
    Var conv3d_b;  // scalar
    Var conv_w;    // pack: (out, in*factor^2, k, k); unpack: (out*factor^2, in, k, k)
    Var conv_b;
};

// space2depth -> shared 3-d conv across the folded dim -> 2-d conv -> norm -> act
template <typename T>
Var pack_layer(Graph<T>& g, Var x, const PackParams& p, const LayerConfig& cfg) {
    Var h = ops::space2depth(g, x, cfg.pack_factor);
    h = ops::pack_conv3d(g, h, p.conv3d_w, p.conv3d_b, cfg.pack_factor);
    h = ops::conv2d(g, h, p.conv_w, p.conv_b);
    h = ops::norm_layer(g, h, cfg.norm);
    return ops::activation(g, h, cfg.activation);
}

// conv -> norm -> act -> shared 3-d conv -> depth2space (mirror of pack_layer)
template <typename T>
Var unpack_layer(Graph<T>& g, Var x, const PackParams& p, const LayerConfig& cfg) {
    Var h = ops::conv2d(g, x, p.conv_w, p.conv_b);
    h = ops::norm_layer(g, h, cfg.norm);
    h = ops::activation(g, h, cfg.activation);
    h = ops::pack_conv3d(g, h, p.conv3d_w, p.conv3d_b, cfg.pack_factor);
    return ops::depth2space(g, h, cfg.pack_factor);
}

// Eager single-call entry points: run one op on plain tensors, optionally
// returning input gradients for a caller-supplied upstream gradient.
namespace nn {

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    Graph<T> g;
    return g.val(ops::conv2d(g, g.leaf(x), g.leaf(w), g.leaf(b)));
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    Graph<T> g;
    return g.val(ops::conv_transpose2d(g, g.leaf(x), g.leaf(w), g.leaf(b)));
}

template <typename T>
Tensor<T> pack_conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int factor) {
    Graph<T> g;
    return g.val(ops::pack_conv3d(g, g.leaf(x), g.leaf(w), g.leaf(b), factor));
}

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x) {
    Graph<T> g;
    return g.val(ops::instance_norm(g, g.leaf(x)));
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x) {
    Graph<T> g;
    return g.val(ops::batch_norm(g, g.leaf(x)));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Graph<T> g;
    return g.val(ops::relu(g, g.leaf(x)));
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(kLeakySlope)) {
    Graph<T> g;
    return g.val(ops::leaky_relu(g, g.leaf(x), slope));
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
    Graph<T> g;
    return g.val(ops::tanh_act(g, g.leaf(x)));
}

template <typename T>
Tensor<T> space2depth(const Tensor<T>& x, int factor) {
    Graph<T> g;
    return g.val(ops::space2depth(g, g.leaf(x), factor));
}

template <typename T>
Tensor<T> depth2space(const Tensor<T>& x, int factor) {
    Graph<T> g;
    return g.val(ops::depth2space(g, g.leaf(x), factor));
}

}  // namespace nn
}  // namespace lb
