#pragma once

#include "uhdres/ops.hpp"

namespace uhdres {

// 2-D batch normalization over (batch, h, w) per channel.
// Train mode normalizes by the biased batch variance and updates the running
// buffers with momentum (running variance stores the unbiased estimate).
// Eval mode is a pure function of (input, buffers) and never mutates them.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, T momentum, T eps,
                     bool training) {
    check_shape(x.rank() == 4, "batch_norm expects NCHW input");
    int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    check_shape(gamma.numel() == c && beta.numel() == c, "batch_norm parameter size mismatch");
    int64_t m = n * h * w;

    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* px = x.ptr();
    const T* pg = gamma.ptr();
    const T* pb = beta.ptr();
    T* po = out.ptr();

    std::vector<T> mean(static_cast<size_t>(c)), invstd(static_cast<size_t>(c));
    if (training) {
        check_contract(m >= 2, "batch_norm train mode needs at least 2 samples per channel");
        T* rm = running_mean.ptr();
        T* rv = running_var.ptr();
        for (int64_t ch = 0; ch < c; ++ch) {
            double sum = 0.0, sq = 0.0;
            for (int64_t in = 0; in < n; ++in) {
                const T* src = px + (in * c + ch) * h * w;
                for (int64_t i = 0; i < h * w; ++i) {
                    sum += static_cast<double>(src[i]);
                    sq += static_cast<double>(src[i]) * static_cast<double>(src[i]);
                }
            }
            double mu = sum / static_cast<double>(m);
            double var = sq / static_cast<double>(m) - mu * mu;
            if (var < 0) var = 0;
            mean[static_cast<size_t>(ch)] = static_cast<T>(mu);
            invstd[static_cast<size_t>(ch)] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
            double unbiased = var * static_cast<double>(m) / static_cast<double>(m - 1);
            rm[ch] = (T(1) - momentum) * rm[ch] + momentum * static_cast<T>(mu);
            rv[ch] = (T(1) - momentum) * rv[ch] + momentum * static_cast<T>(unbiased);
        }
    } else {
        const T* rm = running_mean.ptr();
        const T* rv = running_var.ptr();
        for (int64_t ch = 0; ch < c; ++ch) {
            mean[static_cast<size_t>(ch)] = rm[ch];
            invstd[static_cast<size_t>(ch)] =
                static_cast<T>(1.0 / std::sqrt(static_cast<double>(rv[ch]) + static_cast<double>(eps)));
        }
    }

    for (int64_t in = 0; in < n; ++in)
        for (int64_t ch = 0; ch < c; ++ch) {
            const T* src = px + (in * c + ch) * h * w;
            T* dst = po + (in * c + ch) * h * w;
            T mu = mean[static_cast<size_t>(ch)], is = invstd[static_cast<size_t>(ch)];
            T g = pg[ch], b = pb[ch];
            for (int64_t i = 0; i < h * w; ++i) dst[i] = (src[i] - mu) * is * g + b;
        }
    assert_finite(out, "batch_norm");

    Tape<T>* tape = Tape<T>::current();
    if (tape && (tape->tracks(x) || tape->tracks(gamma) || tape->tracks(beta))) {
        TapeRef rx = tape->ref_of(x), rg = tape->ref_of(gamma), rb = tape->ref_of(beta);
        Tensor<T> sx = x;
        auto smean = std::make_shared<std::vector<T>>(mean);
        auto sinv = std::make_shared<std::vector<T>>(invstd);
        Tensor<T> sgamma = gamma;
        size_t nx = static_cast<size_t>(x.numel());
        tape->record("batch_norm", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto gx = ctx.grad(rx, nx);
            auto gg = ctx.grad(rg, static_cast<size_t>(c));
            auto gb2 = ctx.grad(rb, static_cast<size_t>(c));
            const T* pxx = sx.ptr();
            const T* pgo = go->data();
            const T* pgm = sgamma.ptr();
            for (int64_t ch = 0; ch < c; ++ch) {
                T mu = (*smean)[static_cast<size_t>(ch)];
                T is = (*sinv)[static_cast<size_t>(ch)];
                double sum_g = 0.0, sum_gx = 0.0;
                for (int64_t in = 0; in < n; ++in) {
                    const T* src = pxx + (in * c + ch) * h * w;
                    const T* gsrc = pgo + (in * c + ch) * h * w;
                    for (int64_t i = 0; i < h * w; ++i) {
                        double xh = static_cast<double>((src[i] - mu) * is);
                        sum_g += static_cast<double>(gsrc[i]);
                        sum_gx += static_cast<double>(gsrc[i]) * xh;
                    }
                }
                if (!gb2.empty()) gb2[static_cast<size_t>(ch)] += static_cast<T>(sum_g);
                if (!gg.empty()) gg[static_cast<size_t>(ch)] += static_cast<T>(sum_gx);
                if (gx.empty()) continue;
                T gsc = pgm[ch] * is;
                if (training) {
                    T mg = static_cast<T>(sum_g / static_cast<double>(m));
                    T mgx = static_cast<T>(sum_gx / static_cast<double>(m));
                    for (int64_t in = 0; in < n; ++in) {
                        const T* src = pxx + (in * c + ch) * h * w;
                        const T* gsrc = pgo + (in * c + ch) * h * w;
                        T* dst = gx.data() + (in * c + ch) * h * w;
                        for (int64_t i = 0; i < h * w; ++i) {
                            T xh = (src[i] - mu) * is;
                            dst[i] += gsc * (gsrc[i] - mg - xh * mgx);
                        }
                    }
                } else {
                    for (int64_t in = 0; in < n; ++in) {
                        const T* gsrc = pgo + (in * c + ch) * h * w;
                        T* dst = gx.data() + (in * c + ch) * h * w;
                        for (int64_t i = 0; i < h * w; ++i) dst[i] += gsc * gsrc[i];
                    }
                }
            }
        });
    }
    return out;
}

}  // namespace uhdres
