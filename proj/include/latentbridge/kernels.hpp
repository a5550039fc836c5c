#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "latentbridge/common.hpp"
#include "latentbridge/tensor.hpp"

// Raw compute kernels behind the graph ops. All convolutions are stride-1 with
// same-padding (downsampling happens only through space2depth). Batch items are
// independent, so batch loops may run in parallel; reductions over the batch
// always sum per-sample partials in index order, which keeps results identical
// for any worker count.

namespace lb::kernels {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

struct Conv2dDims {
    int64_t n, cin, h, w, cout, k;
    int64_t pad() const { return k / 2; }
    int64_t cik() const { return cin * k * k; }
};

// Strip height so the im2col buffer stays within ~4M scalars.
inline int64_t conv_strip_rows(const Conv2dDims& d) {
    constexpr int64_t budget = int64_t(1) << 22;
    int64_t rows = budget / (d.cik() * d.w);
    if (rows < 1) rows = 1;
    if (rows > d.h) rows = d.h;
    return rows;
}

// col(ik, p) for output rows [r0, r1); ik = (ci*k + ky)*k + kx, p = (r-r0)*w + c
template <typename T>
void im2col(const T* x, const Conv2dDims& d, int64_t r0, int64_t r1, T* col) {
    const int64_t pad = d.pad(), strip = (r1 - r0) * d.w;
    for (int64_t ci = 0; ci < d.cin; ++ci) {
        const T* xc = x + ci * d.h * d.w;
        for (int64_t ky = 0; ky < d.k; ++ky) {
            for (int64_t kx = 0; kx < d.k; ++kx) {
                T* row = col + ((ci * d.k + ky) * d.k + kx) * strip;
                for (int64_t r = r0; r < r1; ++r) {
                    int64_t sy = r + ky - pad;
                    T* dst = row + (r - r0) * d.w;
                    if (sy < 0 || sy >= d.h) {
                        std::fill(dst, dst + d.w, T(0));
                        continue;
                    }
                    const T* src = xc + sy * d.w;
                    for (int64_t c = 0; c < d.w; ++c) {
                        int64_t sx = c + kx - pad;
                        dst[c] = (sx < 0 || sx >= d.w) ? T(0) : src[sx];
                    }
                }
            }
        }
    }
}

// scatter-add of a col-layout gradient back into dx
template <typename T>
void col2im_add(const T* col, const Conv2dDims& d, int64_t r0, int64_t r1, T* dx) {
    const int64_t pad = d.pad(), strip = (r1 - r0) * d.w;
    for (int64_t ci = 0; ci < d.cin; ++ci) {
        T* xc = dx + ci * d.h * d.w;
        for (int64_t ky = 0; ky < d.k; ++ky) {
            for (int64_t kx = 0; kx < d.k; ++kx) {
                const T* row = col + ((ci * d.k + ky) * d.k + kx) * strip;
                for (int64_t r = r0; r < r1; ++r) {
                    int64_t sy = r + ky - pad;
                    if (sy < 0 || sy >= d.h) continue;
                    const T* src = row + (r - r0) * d.w;
                    T* dst = xc + sy * d.w;
                    for (int64_t c = 0; c < d.w; ++c) {
                        int64_t sx = c + kx - pad;
                        if (sx >= 0 && sx < d.w) dst[sx] += src[c];
                    }
                }
            }
        }
    }
}

// y[n] = w * col(x[n]) + b, one sample
template <typename T>
void conv2d_fwd_sample(const T* x, const T* w, const T* b, T* y, const Conv2dDims& d,
                       std::vector<T>& scratch) {
    const int64_t strip_rows = conv_strip_rows(d), cik = d.cik();
    scratch.resize(static_cast<size_t>(cik * strip_rows * d.w));
    ConstMatMap<T> wm(w, d.cout, cik, Eigen::OuterStride<>(cik));
    for (int64_t r0 = 0; r0 < d.h; r0 += strip_rows) {
        int64_t r1 = std::min(d.h, r0 + strip_rows);
        int64_t p = (r1 - r0) * d.w;
        im2col(x, d, r0, r1, scratch.data());
        ConstMatMap<T> cm(scratch.data(), cik, p, Eigen::OuterStride<>(p));
        MatMap<T> ym(y + r0 * d.w, d.cout, p, Eigen::OuterStride<>(d.h * d.w));
        ym.noalias() = wm * cm;
    }
    if (b) {
        for (int64_t co = 0; co < d.cout; ++co) {
            T* yc = y + co * d.h * d.w;
            for (int64_t i = 0; i < d.h * d.w; ++i) yc[i] += b[co];
        }
    }
}

template <typename T>
void conv2d_bwd_data_sample(const T* dy, const T* w, T* dx, const Conv2dDims& d,
                            std::vector<T>& scratch) {
    const int64_t strip_rows = conv_strip_rows(d), cik = d.cik();
    scratch.resize(static_cast<size_t>(cik * strip_rows * d.w));
    ConstMatMap<T> wm(w, d.cout, cik, Eigen::OuterStride<>(cik));
    std::fill(dx, dx + d.cin * d.h * d.w, T(0));
    for (int64_t r0 = 0; r0 < d.h; r0 += strip_rows) {
        int64_t r1 = std::min(d.h, r0 + strip_rows);
        int64_t p = (r1 - r0) * d.w;
        ConstMatMap<T> dym(dy + r0 * d.w, d.cout, p, Eigen::OuterStride<>(d.h * d.w));
        MatMap<T> cm(scratch.data(), cik, p, Eigen::OuterStride<>(p));
        cm.noalias() = wm.transpose() * dym;
        col2im_add(scratch.data(), d, r0, r1, dx);
    }
}

// accumulates dw/db for one sample (caller owns zeroing and cross-sample order)
template <typename T>
void conv2d_bwd_weights_sample(const T* x, const T* dy, T* dw, T* db, const Conv2dDims& d,
                               std::vector<T>& scratch) {
    const int64_t strip_rows = conv_strip_rows(d), cik = d.cik();
    scratch.resize(static_cast<size_t>(cik * strip_rows * d.w));
    MatMap<T> dwm(dw, d.cout, cik, Eigen::OuterStride<>(cik));
    for (int64_t r0 = 0; r0 < d.h; r0 += strip_rows) {
        int64_t r1 = std::min(d.h, r0 + strip_rows);
        int64_t p = (r1 - r0) * d.w;
        im2col(x, d, r0, r1, scratch.data());
        ConstMatMap<T> cm(scratch.data(), cik, p, Eigen::OuterStride<>(p));
        ConstMatMap<T> dym(dy + r0 * d.w, d.cout, p, Eigen::OuterStride<>(d.h * d.w));
        dwm.noalias() += dym * cm.transpose();
    }
    if (db) {
        for (int64_t co = 0; co < d.cout; ++co) {
            const T* dyc = dy + co * d.h * d.w;
            T s = 0;
            for (int64_t i = 0; i < d.h * d.w; ++i) s += dyc[i];
            db[co] += s;
        }
    }
}

// ---------------------------------------------------------------------------
// 3-D convolution over the folded pack dimension. The (N, C*r^2, H, W) input
// is viewed as (N, C, D=r^2, H, W); one shared (kd=r^2, k, k) filter plus a
// scalar bias is correlated over every (n, c) volume with same-padding in all
// three dims (even kd pads (kd-1)/2 in front, the rest behind).

struct PackConv3dDims {
    int64_t n, c, dpth, h, w, k;  // dpth = r^2 = kernel depth
    int64_t pad_front() const { return (dpth - 1) / 2; }
    int64_t pad() const { return k / 2; }
};

template <typename T>
void pack_conv3d_fwd_slice(const T* x, const T* w, T bias, T* y, const PackConv3dDims& d) {
    const int64_t pf = d.pad_front(), ps = d.pad(), hw = d.h * d.w;
    for (int64_t dz = 0; dz < d.dpth; ++dz) {
        for (int64_t iy = 0; iy < d.h; ++iy) {
            for (int64_t ix = 0; ix < d.w; ++ix) {
                T acc = bias;
                for (int64_t kd = 0; kd < d.dpth; ++kd) {
                    int64_t sz = dz + kd - pf;
                    if (sz < 0 || sz >= d.dpth) continue;
                    for (int64_t ky = 0; ky < d.k; ++ky) {
                        int64_t sy = iy + ky - ps;
                        if (sy < 0 || sy >= d.h) continue;
                        for (int64_t kx = 0; kx < d.k; ++kx) {
                            int64_t sx = ix + kx - ps;
                            if (sx < 0 || sx >= d.w) continue;
                            acc += w[(kd * d.k + ky) * d.k + kx] * x[sz * hw + sy * d.w + sx];
                        }
                    }
                }
                y[dz * hw + iy * d.w + ix] = acc;
            }
        }
    }
}

template <typename T>
void pack_conv3d_bwd_data_slice(const T* dy, const T* w, T* dx, const PackConv3dDims& d) {
    const int64_t pf = d.pad_front(), ps = d.pad(), hw = d.h * d.w;
    std::fill(dx, dx + d.dpth * hw, T(0));
    for (int64_t dz = 0; dz < d.dpth; ++dz) {
        for (int64_t iy = 0; iy < d.h; ++iy) {
            for (int64_t ix = 0; ix < d.w; ++ix) {
                T g = dy[dz * hw + iy * d.w + ix];
                for (int64_t kd = 0; kd < d.dpth; ++kd) {
                    int64_t sz = dz + kd - pf;
                    if (sz < 0 || sz >= d.dpth) continue;
                    for (int64_t ky = 0; ky < d.k; ++ky) {
                        int64_t sy = iy + ky - ps;
                        if (sy < 0 || sy >= d.h) continue;
                        for (int64_t kx = 0; kx < d.k; ++kx) {
                            int64_t sx = ix + kx - ps;
                            if (sx < 0 || sx >= d.w) continue;
                            dx[sz * hw + sy * d.w + sx] += w[(kd * d.k + ky) * d.k + kx] * g;
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void pack_conv3d_bwd_weights_slice(const T* x, const T* dy, T* dw, T* db,
                                   const PackConv3dDims& d) {
    const int64_t pf = d.pad_front(), ps = d.pad(), hw = d.h * d.w;
    for (int64_t dz = 0; dz < d.dpth; ++dz) {
        for (int64_t iy = 0; iy < d.h; ++iy) {
            for (int64_t ix = 0; ix < d.w; ++ix) {
                T g = dy[dz * hw + iy * d.w + ix];
                *db += g;
                for (int64_t kd = 0; kd < d.dpth; ++kd) {
                    int64_t sz = dz + kd - pf;
                    if (sz < 0 || sz >= d.dpth) continue;
                    for (int64_t ky = 0; ky < d.k; ++ky) {
                        int64_t sy = iy + ky - ps;
                        if (sy < 0 || sy >= d.h) continue;
                        for (int64_t kx = 0; kx < d.k; ++kx) {
                            int64_t sx = ix + kx - ps;
                            if (sx < 0 || sx >= d.w) continue;
                            dw[(kd * d.k + ky) * d.k + kx] += g * x[sz * hw + sy * d.w + sx];
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Normalization over a contiguous group of m values (one (n,c) slice for
// instance norm). Population variance, epsilon inside the square root.

template <typename T>
void norm_group_fwd(const T* x, int64_t m, T eps, T* y, T* invstd_out) {
    T mean = 0;
    for (int64_t i = 0; i < m; ++i) mean += x[i];
    mean /= static_cast<T>(m);
    T var = 0;
    for (int64_t i = 0; i < m; ++i) {
        T d = x[i] - mean;
        var += d * d;
    }
    var /= static_cast<T>(m);
    T invstd = T(1) / std::sqrt(var + eps);
    for (int64_t i = 0; i < m; ++i) y[i] = (x[i] - mean) * invstd;
    *invstd_out = invstd;
}

// dx = invstd * (dy - mean(dy) - y * mean(dy .* y))
template <typename T>
void norm_group_bwd(const T* dy, const T* y, T invstd, int64_t m, T* dx) {
    T mg = 0, mgy = 0;
    for (int64_t i = 0; i < m; ++i) {
        mg += dy[i];
        mgy += dy[i] * y[i];
    }
    mg /= static_cast<T>(m);
    mgy /= static_cast<T>(m);
    for (int64_t i = 0; i < m; ++i) dx[i] += invstd * (dy[i] - mg - y[i] * mgy);
}

// Batch-norm variants gather one channel across the batch (strided groups).
template <typename T>
void norm_channel_fwd(const T* x, int64_t n, int64_t stride, int64_t hw, T eps, T* y,
                      T* invstd_out) {
    const int64_t m = n * hw;
    T mean = 0;
    for (int64_t b = 0; b < n; ++b)
        for (int64_t i = 0; i < hw; ++i) mean += x[b * stride + i];
    mean /= static_cast<T>(m);
    T var = 0;
    for (int64_t b = 0; b < n; ++b)
        for (int64_t i = 0; i < hw; ++i) {
            T d = x[b * stride + i] - mean;
            var += d * d;
        }
    var /= static_cast<T>(m);
    T invstd = T(1) / std::sqrt(var + eps);
    for (int64_t b = 0; b < n; ++b)
        for (int64_t i = 0; i < hw; ++i) y[b * stride + i] = (x[b * stride + i] - mean) * invstd;
    *invstd_out = invstd;
}

template <typename T>
void norm_channel_bwd(const T* dy, const T* y, T invstd, int64_t n, int64_t stride, int64_t hw,
                      T* dx) {
    const int64_t m = n * hw;
    T mg = 0, mgy = 0;
    for (int64_t b = 0; b < n; ++b)
        for (int64_t i = 0; i < hw; ++i) {
            mg += dy[b * stride + i];
            mgy += dy[b * stride + i] * y[b * stride + i];
        }
    mg /= static_cast<T>(m);
    mgy /= static_cast<T>(m);
    for (int64_t b = 0; b < n; ++b)
        for (int64_t i = 0; i < hw; ++i)
            dx[b * stride + i] += invstd * (dy[b * stride + i] - mg - y[b * stride + i] * mgy);
}

// ---------------------------------------------------------------------------
// space2depth / depth2space, block-scan channel order:
// out channel = c*r^2 + dy*r + dx

template <typename T>
void space2depth_kern(const T* x, T* y, int64_t n, int64_t c, int64_t h, int64_t w, int64_t r) {
    const int64_t oh = h / r, ow = w / r;
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ci = 0; ci < c; ++ci)
            for (int64_t dy = 0; dy < r; ++dy)
                for (int64_t dx = 0; dx < r; ++dx) {
                    const T* src = x + ((b * c + ci) * h + dy) * w + dx;
                    T* dst = y + ((b * c * r * r) + ci * r * r + dy * r + dx) * oh * ow;
                    for (int64_t y0 = 0; y0 < oh; ++y0)
                        for (int64_t x0 = 0; x0 < ow; ++x0)
                            dst[y0 * ow + x0] = src[(y0 * r) * w + x0 * r];
                }
}

template <typename T>
void depth2space_kern(const T* x, T* y, int64_t n, int64_t cout, int64_t oh, int64_t ow,
                      int64_t r) {
    // x: (n, cout*r^2, oh/r... ) inverse mapping of space2depth_kern
    const int64_t ih = oh / r, iw = ow / r;
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ci = 0; ci < cout; ++ci)
            for (int64_t dy = 0; dy < r; ++dy)
                for (int64_t dx = 0; dx < r; ++dx) {
                    const T* src = x + ((b * cout * r * r) + ci * r * r + dy * r + dx) * ih * iw;
                    T* dst = y + ((b * cout + ci) * oh + dy) * ow + dx;
                    for (int64_t y0 = 0; y0 < ih; ++y0)
                        for (int64_t x0 = 0; x0 < iw; ++x0)
                            dst[(y0 * r) * ow + x0 * r] = src[y0 * iw + x0];
                }
}

}  // namespace lb::kernels
