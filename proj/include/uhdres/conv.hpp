#pragma once

#include "uhdres/ops.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace uhdres {

// Valid (no padding) 2-D convolution with groups and stride.
//   x: (N, Cin, H, W), w: (Cout, Cin/g, kh, kw), bias: (Cout) or undefined.
// Parallel loops partition disjoint output slabs, so results are bitwise
// identical for any thread count.
template <typename T>
Tensor<T> conv2d_valid(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                       int64_t stride, int64_t groups) {
    check_shape(x.rank() == 4 && w.rank() == 4, "conv2d expects NCHW input and OIHW weight");
    int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    int64_t cout = w.dim(0), cing = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    check_shape(cin % groups == 0 && cout % groups == 0, "channels must divide groups");
    check_shape(cin / groups == cing,
                "conv2d channel mismatch: input " + std::to_string(cin) + ", weight expects " +
                    std::to_string(cing * groups) + " (groups=" + std::to_string(groups) + ")");
    check_shape(h >= kh && wd >= kw, "conv2d input smaller than kernel");
    int64_t oh = (h - kh) / stride + 1;
    int64_t ow = (wd - kw) / stride + 1;
    int64_t og = cout / groups;

    Tensor<T> out = Tensor<T>::zeros({n, cout, oh, ow});
    const T* px = x.ptr();
    const T* pw = w.ptr();
    const T* pb = bias.defined() ? bias.ptr() : nullptr;
    T* po = out.ptr();

#pragma omp parallel for schedule(static) collapse(2) num_threads(thread_count())
    for (int64_t in = 0; in < n; ++in) {
        for (int64_t oc = 0; oc < cout; ++oc) {
            int64_t g = oc / og;
            T* dst = po + (in * cout + oc) * oh * ow;
            if (pb) {
                T b = pb[oc];
                for (int64_t i = 0; i < oh * ow; ++i) dst[i] = b;
            }
            for (int64_t ic = 0; ic < cing; ++ic) {
                const T* src = px + (in * cin + g * cing + ic) * h * wd;
                const T* ker = pw + ((oc * cing + ic) * kh) * kw;
                for (int64_t r = 0; r < kh; ++r) {
                    for (int64_t s = 0; s < kw; ++s) {
                        T wv = ker[r * kw + s];
                        if (wv == T(0)) continue;
                        for (int64_t i = 0; i < oh; ++i) {
                            const T* row = src + (i * stride + r) * wd + s;
                            T* orow = dst + i * ow;
                            if (stride == 1) {
                                for (int64_t j = 0; j < ow; ++j) orow[j] += wv * row[j];
                            } else {
                                for (int64_t j = 0; j < ow; ++j) orow[j] += wv * row[j * stride];
                            }
                        }
                    }
                }
            }
        }
    }
    assert_finite(out, "conv2d");

    Tape<T>* tape = Tape<T>::current();
    if (tape && (tape->tracks(x) || tape->tracks(w) || (bias.defined() && tape->tracks(bias)))) {
        TapeRef rx = tape->ref_of(x), rw = tape->ref_of(w);
        TapeRef rb = bias.defined() ? tape->ref_of(bias) : TapeRef{};
        Tensor<T> sx = x, sw = w;
        size_t nx = static_cast<size_t>(x.numel()), nw = static_cast<size_t>(w.numel());
        size_t nb = bias.defined() ? static_cast<size_t>(bias.numel()) : 0;
        tape->record("conv2d", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            const T* pgo = go->data();
            const T* pxx = sx.ptr();
            const T* pww = sw.ptr();

            auto gx = ctx.grad(rx, nx);
            if (!gx.empty()) {
                T* pgx = gx.data();
#pragma omp parallel for schedule(static) collapse(2) num_threads(thread_count())
                for (int64_t in = 0; in < n; ++in) {
                    for (int64_t icabs = 0; icabs < cin; ++icabs) {
                        int64_t g = icabs / cing;
                        int64_t ic = icabs % cing;
                        T* dst = pgx + (in * cin + icabs) * h * wd;
                        for (int64_t oc = g * og; oc < (g + 1) * og; ++oc) {
                            const T* gsrc = pgo + (in * cout + oc) * oh * ow;
                            const T* ker = pww + ((oc * cing + ic) * kh) * kw;
                            for (int64_t r = 0; r < kh; ++r)
                                for (int64_t s = 0; s < kw; ++s) {
                                    T wv = ker[r * kw + s];
                                    if (wv == T(0)) continue;
                                    for (int64_t i = 0; i < oh; ++i) {
                                        T* drow = dst + (i * stride + r) * wd + s;
                                        const T* grow = gsrc + i * ow;
                                        if (stride == 1) {
                                            for (int64_t j = 0; j < ow; ++j) drow[j] += wv * grow[j];
                                        } else {
                                            for (int64_t j = 0; j < ow; ++j)
                                                drow[j * stride] += wv * grow[j];
                                        }
                                    }
                                }
                        }
                    }
                }
            }

            auto gw = ctx.grad(rw, nw);
            if (!gw.empty()) {
                T* pgw = gw.data();
#pragma omp parallel for schedule(static) num_threads(thread_count())
                for (int64_t oc = 0; oc < cout; ++oc) {
                    int64_t g = oc / og;
                    for (int64_t in = 0; in < n; ++in) {
                        const T* gsrc = pgo + (in * cout + oc) * oh * ow;
                        for (int64_t ic = 0; ic < cing; ++ic) {
                            const T* src = pxx + (in * cin + g * cing + ic) * h * wd;
                            T* kdst = pgw + ((oc * cing + ic) * kh) * kw;
                            for (int64_t r = 0; r < kh; ++r)
                                for (int64_t s = 0; s < kw; ++s) {
                                    T acc = T(0);
                                    for (int64_t i = 0; i < oh; ++i) {
                                        const T* row = src + (i * stride + r) * wd + s;
                                        const T* grow = gsrc + i * ow;
                                        if (stride == 1) {
                                            for (int64_t j = 0; j < ow; ++j) acc += grow[j] * row[j];
                                        } else {
                                            for (int64_t j = 0; j < ow; ++j)
                                                acc += grow[j] * row[j * stride];
                                        }
                                    }
                                    kdst[r * kw + s] += acc;
                                }
                        }
                    }
                }
            }

            if (nb) {
                auto gb = ctx.grad(rb, nb);
                if (!gb.empty()) {
                    for (int64_t oc = 0; oc < cout; ++oc) {
                        T acc = T(0);
                        for (int64_t in = 0; in < n; ++in) {
                            const T* gsrc = pgo + (in * cout + oc) * oh * ow;
                            for (int64_t i = 0; i < oh * ow; ++i) acc += gsrc[i];
                        }
                        gb[static_cast<size_t>(oc)] += acc;
                    }
                }
            }
        });
    }
    return out;
}

// Convolution with symmetric same-padding per axis. Odd kernels use
// (k-1)/2 on both sides; strip kernels pad only along their long axis.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, int64_t stride,
                 PadMode pad_mode, int64_t groups) {
    int64_t kh = w.dim(2), kw = w.dim(3);
    int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    Tensor<T> xin = (ph || pw) ? pad2d(x, ph, ph, pw, pw, pad_mode) : x;
    return conv2d_valid(xin, w, bias, stride, groups);
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

// Adaptive max pooling to (ceil(h/2), ceil(w/2)); bin i covers
// [floor(i*h/oh), ceil((i+1)*h/oh)). Ties route to the lowest linear index.
template <typename T>
Tensor<T> adaptive_max_pool_half(const Tensor<T>& x) {
    check_shape(x.rank() == 4, "adaptive_max_pool_half expects NCHW input");
    int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    check_contract(h >= 2 && w >= 2, "adaptive_max_pool_half requires h,w >= 2");
    int64_t oh = (h + 1) / 2, ow = (w + 1) / 2;

    auto bin_lo = [](int64_t i, int64_t in, int64_t out) { return (i * in) / out; };
    auto bin_hi = [](int64_t i, int64_t in, int64_t out) {
        return ((i + 1) * in + out - 1) / out;
    };

    Tensor<T> out = Tensor<T>::zeros({n, c, oh, ow});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out.numel()));
    const T* px = x.ptr();
    T* po = out.ptr();
    int64_t* pa = argmax->data();
    for (int64_t p = 0; p < n * c; ++p) {
        const T* src = px + p * h * w;
        T* dst = po + p * oh * ow;
        int64_t* am = pa + p * oh * ow;
        for (int64_t i = 0; i < oh; ++i) {
            int64_t r0 = bin_lo(i, h, oh), r1 = bin_hi(i, h, oh);
            for (int64_t j = 0; j < ow; ++j) {
                int64_t c0 = bin_lo(j, w, ow), c1 = bin_hi(j, w, ow);
                T best = src[r0 * w + c0];
                int64_t bidx = r0 * w + c0;
                for (int64_t r = r0; r < r1; ++r)
                    for (int64_t s = c0; s < c1; ++s)
                        if (src[r * w + s] > best) {
                            best = src[r * w + s];
                            bidx = r * w + s;
                        }
                dst[i * ow + j] = best;
                am[i * ow + j] = p * h * w + bidx;
            }
        }
    }
    assert_finite(out, "adaptive_max_pool_half");

    if (auto* tape = Tape<T>::current(); tape && tape->tracks(x)) {
        TapeRef rx = tape->ref_of(x);
        size_t nx = static_cast<size_t>(x.numel());
        tape->record("adaptive_max_pool_half", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto gx = ctx.grad(rx, nx);
            if (gx.empty()) return;
            for (size_t i = 0; i < go->size(); ++i)
                gx[static_cast<size_t>((*argmax)[i])] += (*go)[i];
        });
    }
    return out;
}

// 3x3 stride-1 max pooling, reflect padded so the shape is preserved.
template <typename T>
Tensor<T> max_pool3x3_s1(const Tensor<T>& x) {
    check_shape(x.rank() == 4, "max_pool3x3_s1 expects NCHW input");
    Tensor<T> xp = pad2d(x, 1, 1, 1, 1, PadMode::Reflect);
    int64_t n = xp.dim(0), c = xp.dim(1), h = xp.dim(2), w = xp.dim(3);
    int64_t oh = h - 2, ow = w - 2;
    Tensor<T> out = Tensor<T>::zeros({n, c, oh, ow});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out.numel()));
    const T* px = xp.ptr();
    T* po = out.ptr();
    int64_t* pa = argmax->data();
    for (int64_t p = 0; p < n * c; ++p) {
        const T* src = px + p * h * w;
        T* dst = po + p * oh * ow;
        int64_t* am = pa + p * oh * ow;
        for (int64_t i = 0; i < oh; ++i)
            for (int64_t j = 0; j < ow; ++j) {
                T best = src[i * w + j];
                int64_t bidx = i * w + j;
                for (int64_t r = i; r < i + 3; ++r)
                    for (int64_t s = j; s < j + 3; ++s)
                        if (src[r * w + s] > best) {
                            best = src[r * w + s];
                            bidx = r * w + s;
                        }
                dst[i * ow + j] = best;
                am[i * ow + j] = p * h * w + bidx;
            }
    }
    assert_finite(out, "max_pool3x3_s1");

    if (auto* tape = Tape<T>::current(); tape && tape->tracks(xp)) {
        TapeRef rx = tape->ref_of(xp);
        size_t nx = static_cast<size_t>(xp.numel());
        tape->record("max_pool3x3_s1", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto gx = ctx.grad(rx, nx);
            if (gx.empty()) return;
            for (size_t i = 0; i < go->size(); ++i)
                gx[static_cast<size_t>((*argmax)[i])] += (*go)[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bilinear upsampling (half-pixel centers, align-corners=false)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, int64_t target_h, int64_t target_w) {
    check_shape(x.rank() == 4, "bilinear_upsample expects NCHW input");
    int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    check_contract(target_h >= h && target_w >= w, "bilinear_upsample target must be >= source");

    struct Lerp {
        int64_t lo, hi;
        T frac;
    };
    auto axis_map = [](int64_t in, int64_t out) {
        std::vector<Lerp> m(static_cast<size_t>(out));
        double scale = static_cast<double>(in) / static_cast<double>(out);
        for (int64_t i = 0; i < out; ++i) {
            double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
            if (src < 0) src = 0;
            if (src > static_cast<double>(in - 1)) src = static_cast<double>(in - 1);
            int64_t lo = static_cast<int64_t>(src);
            int64_t hi = std::min(lo + 1, in - 1);
            m[static_cast<size_t>(i)] = {lo, hi, static_cast<T>(src - static_cast<double>(lo))};
        }
        return m;
    };
    auto rmap = std::make_shared<std::vector<Lerp>>(axis_map(h, target_h));
    auto cmap = std::make_shared<std::vector<Lerp>>(axis_map(w, target_w));

    Tensor<T> out = Tensor<T>::zeros({n, c, target_h, target_w});
    const T* px = x.ptr();
    T* po = out.ptr();
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (int64_t p = 0; p < n * c; ++p) {
        const T* src = px + p * h * w;
        T* dst = po + p * target_h * target_w;
        for (int64_t i = 0; i < target_h; ++i) {
            const auto& ri = (*rmap)[static_cast<size_t>(i)];
            for (int64_t j = 0; j < target_w; ++j) {
                const auto& cj = (*cmap)[static_cast<size_t>(j)];
                T v00 = src[ri.lo * w + cj.lo], v01 = src[ri.lo * w + cj.hi];
                T v10 = src[ri.hi * w + cj.lo], v11 = src[ri.hi * w + cj.hi];
                T top = v00 + (v01 - v00) * cj.frac;
                T bot = v10 + (v11 - v10) * cj.frac;
                dst[i * target_w + j] = top + (bot - top) * ri.frac;
            }
        }
    }
    assert_finite(out, "bilinear_upsample");

    if (auto* tape = Tape<T>::current(); tape && tape->tracks(x)) {
        TapeRef rx = tape->ref_of(x);
        size_t nx = static_cast<size_t>(x.numel());
        tape->record("bilinear_upsample", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto gx = ctx.grad(rx, nx);
            if (gx.empty()) return;
            const T* pgo = go->data();
            for (int64_t p = 0; p < n * c; ++p) {
                T* gsrc = gx.data() + p * h * w;
                const T* gdst = pgo + p * target_h * target_w;
                for (int64_t i = 0; i < target_h; ++i) {
                    const auto& ri = (*rmap)[static_cast<size_t>(i)];
                    for (int64_t j = 0; j < target_w; ++j) {
                        const auto& cj = (*cmap)[static_cast<size_t>(j)];
                        T g = gdst[i * target_w + j];
                        T wr = ri.frac, wc = cj.frac;
                        gsrc[ri.lo * w + cj.lo] += g * (T(1) - wr) * (T(1) - wc);
                        gsrc[ri.lo * w + cj.hi] += g * (T(1) - wr) * wc;
                        gsrc[ri.hi * w + cj.lo] += g * wr * (T(1) - wc);
                        gsrc[ri.hi * w + cj.hi] += g * wr * wc;
                    }
                }
            }
        });
    }
    return out;
}

}  // namespace uhdres
