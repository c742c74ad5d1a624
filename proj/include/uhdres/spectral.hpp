#pragma once

#include <string>

#include "uhdres/fft.hpp"
#include "uhdres/metrics.hpp"
#include "uhdres/ops.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace uhdres {

// Half-plane Hermitian spectrum of a real NCHW tensor: two real planes of
// shape (n, c, h, w/2+1) plus the source spatial extents needed for
// inversion. Gradients flow through re/im like any other real tensors.
template <typename T>
struct ComplexSpectrum {
    Tensor<T> re;
    Tensor<T> im;
    int64_t src_h = 0;
    int64_t src_w = 0;
};

// Forward real-input FFT (unnormalized; the 1/(h*w) scaling sits on the
// inverse). The DC bin equals the sum of all pixels.
template <typename T>
ComplexSpectrum<T> fft2_real(const Tensor<T>& x) {
    check_shape(x.rank() == 4, "fft2_real expects NCHW input");
    int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    int64_t wh = static_cast<int64_t>(fftcore::half_cols(static_cast<size_t>(w)));
    ComplexSpectrum<T> out;
    out.src_h = h;
    out.src_w = w;
    out.re = Tensor<T>::zeros({n, c, h, wh});
    out.im = Tensor<T>::zeros({n, c, h, wh});

    const T* px = x.ptr();
    T* pre = out.re.ptr();
    T* pim = out.im.ptr();
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (int64_t p = 0; p < n * c; ++p) {
        std::vector<double> plane(static_cast<size_t>(h * w));
        std::vector<double> zre(static_cast<size_t>(h * wh)), zim(static_cast<size_t>(h * wh));
        const T* src = px + p * h * w;
        for (int64_t i = 0; i < h * w; ++i) plane[static_cast<size_t>(i)] = static_cast<double>(src[i]);
        fftcore::rfft2_plane(plane.data(), static_cast<size_t>(h), static_cast<size_t>(w), zre.data(),
                             zim.data());
        for (int64_t i = 0; i < h * wh; ++i) {
            pre[p * h * wh + i] = static_cast<T>(zre[static_cast<size_t>(i)]);
            pim[p * h * wh + i] = static_cast<T>(zim[static_cast<size_t>(i)]);
        }
    }
    assert_finite(out.re, "fft2_real");

    if (auto* tape = Tape<T>::current(); tape && tape->tracks(x)) {
        TapeRef rx = tape->ref_of(x);
        size_t nx = static_cast<size_t>(x.numel());
        tape->record("fft2_real", {&out.re, &out.im}, [=](BackwardCtx<T>& ctx) {
            const auto* gre = ctx.out_grad(0);
            const auto* gim = ctx.out_grad(1);
            if (!gre && !gim) return;
            auto gx = ctx.grad(rx, nx);
            if (gx.empty()) return;
            for (int64_t p = 0; p < n * c; ++p) {
                std::vector<double> gr(static_cast<size_t>(h * wh), 0.0), gi(static_cast<size_t>(h * wh), 0.0);
                for (int64_t i = 0; i < h * wh; ++i) {
                    if (gre) gr[static_cast<size_t>(i)] = static_cast<double>((*gre)[static_cast<size_t>(p * h * wh + i)]);
                    if (gim) gi[static_cast<size_t>(i)] = static_cast<double>((*gim)[static_cast<size_t>(p * h * wh + i)]);
                }
                std::vector<double> gplane(static_cast<size_t>(h * w));
                fftcore::irfft2_raw_plane(gr.data(), gi.data(), static_cast<size_t>(h),
                                          static_cast<size_t>(w), gplane.data());
                for (int64_t i = 0; i < h * w; ++i)
                    gx[static_cast<size_t>(p * h * w + i)] += static_cast<T>(gplane[static_cast<size_t>(i)]);
            }
        });
    }
    return out;
}

// Inverse transform back to the stored source extents.
template <typename T>
Tensor<T> ifft2_real(const ComplexSpectrum<T>& z) {
    const Shape& s = z.re.shape();
    check_shape(s.size() == 4 && z.im.shape() == s, "ifft2_real expects matching half-plane tensors");
    int64_t n = s[0], c = s[1], h = z.src_h, w = z.src_w;
    int64_t wh = s[3];
    check_shape(s[2] == h && wh == static_cast<int64_t>(fftcore::half_cols(static_cast<size_t>(w))),
                "spectrum extents do not match source extents");
    Tensor<T> out = Tensor<T>::zeros({n, c, h, w});
    const T* pre = z.re.ptr();
    const T* pim = z.im.ptr();
    T* px = out.ptr();
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (int64_t p = 0; p < n * c; ++p) {
        std::vector<double> zre(static_cast<size_t>(h * wh)), zim(static_cast<size_t>(h * wh));
        std::vector<double> plane(static_cast<size_t>(h * w));
        for (int64_t i = 0; i < h * wh; ++i) {
            zre[static_cast<size_t>(i)] = static_cast<double>(pre[p * h * wh + i]);
            zim[static_cast<size_t>(i)] = static_cast<double>(pim[p * h * wh + i]);
        }
        fftcore::irfft2_plane(zre.data(), zim.data(), static_cast<size_t>(h), static_cast<size_t>(w),
                              plane.data());
        for (int64_t i = 0; i < h * w; ++i) px[p * h * w + i] = static_cast<T>(plane[static_cast<size_t>(i)]);
    }
    assert_finite(out, "ifft2_real");

    Tape<T>* tape = Tape<T>::current();
    if (tape && (tape->tracks(z.re) || tape->tracks(z.im))) {
        TapeRef rre = tape->ref_of(z.re), rim = tape->ref_of(z.im);
        size_t nz = static_cast<size_t>(z.re.numel());
        tape->record("ifft2_real", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto gre = ctx.grad(rre, nz);
            auto gim = ctx.grad(rim, nz);
            double norm = 1.0 / (static_cast<double>(h) * static_cast<double>(w));
            for (int64_t p = 0; p < n * c; ++p) {
                std::vector<double> gplane(static_cast<size_t>(h * w));
                for (int64_t i = 0; i < h * w; ++i)
                    gplane[static_cast<size_t>(i)] = static_cast<double>((*go)[static_cast<size_t>(p * h * w + i)]);
                std::vector<double> fr(static_cast<size_t>(h * wh)), fi(static_cast<size_t>(h * wh));
                fftcore::rfft2_plane(gplane.data(), static_cast<size_t>(h), static_cast<size_t>(w),
                                     fr.data(), fi.data());
                for (int64_t r = 0; r < h; ++r)
                    for (int64_t v = 0; v < wh; ++v) {
                        // middle columns appear twice in the mirrored plane
                        double cv = (v == 0 || (w % 2 == 0 && v == wh - 1)) ? 1.0 : 2.0;
                        int64_t i = r * wh + v;
                        if (!gre.empty())
                            gre[static_cast<size_t>(p * h * wh + i)] +=
                                static_cast<T>(cv * norm * fr[static_cast<size_t>(i)]);
                        if (!gim.empty())
                            gim[static_cast<size_t>(p * h * wh + i)] +=
                                static_cast<T>(cv * norm * fi[static_cast<size_t>(i)]);
                    }
            }
        });
    }
    return out;
}

// A = sqrt(re^2 + im^2); the gradient is clamped to zero at exactly A == 0.
template <typename T>
Tensor<T> amplitude(const ComplexSpectrum<T>& z) {
    Tensor<T> out = Tensor<T>::zeros(z.re.shape());
    const T* pre = z.re.ptr();
    const T* pim = z.im.ptr();
    T* po = out.ptr();
    int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i)
        po[i] = static_cast<T>(std::hypot(static_cast<double>(pre[i]), static_cast<double>(pim[i])));
    assert_finite(out, "amplitude");

    Tape<T>* tape = Tape<T>::current();
    if (tape && (tape->tracks(z.re) || tape->tracks(z.im))) {
        TapeRef rre = tape->ref_of(z.re), rim = tape->ref_of(z.im);
        Tensor<T> sre = z.re, sim = z.im, sa = out;
        size_t nz = static_cast<size_t>(n);
        tape->record("amplitude", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto gre = ctx.grad(rre, nz);
            auto gim = ctx.grad(rim, nz);
            const T* pr = sre.ptr();
            const T* pi = sim.ptr();
            const T* pa = sa.ptr();
            for (size_t i = 0; i < nz; ++i) {
                T a = pa[i];
                if (a == T(0)) continue;
                T g = (*go)[i] / a;
                if (!gre.empty()) gre[i] += g * pr[i];
                if (!gim.empty()) gim[i] += g * pi[i];
            }
        });
    }
    return out;
}

// P = atan2(im, re) in (-pi, pi]; the zero bin maps to phase 0 and passes no
// gradient.
template <typename T>
Tensor<T> phase(const ComplexSpectrum<T>& z) {
    Tensor<T> out = Tensor<T>::zeros(z.re.shape());
    const T* pre = z.re.ptr();
    const T* pim = z.im.ptr();
    T* po = out.ptr();
    int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) {
        if (pre[i] == T(0) && pim[i] == T(0))
            po[i] = T(0);
        else
            po[i] = static_cast<T>(std::atan2(static_cast<double>(pim[i]), static_cast<double>(pre[i])));
    }
    assert_finite(out, "phase");

    Tape<T>* tape = Tape<T>::current();
    if (tape && (tape->tracks(z.re) || tape->tracks(z.im))) {
        TapeRef rre = tape->ref_of(z.re), rim = tape->ref_of(z.im);
        Tensor<T> sre = z.re, sim = z.im;
        size_t nz = static_cast<size_t>(n);
        tape->record("phase", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto gre = ctx.grad(rre, nz);
            auto gim = ctx.grad(rim, nz);
            const T* pr = sre.ptr();
            const T* pi = sim.ptr();
            for (size_t i = 0; i < nz; ++i) {
                T r2 = pr[i] * pr[i] + pi[i] * pi[i];
                if (r2 == T(0)) continue;
                T g = (*go)[i] / r2;
                if (!gre.empty()) gre[i] += -g * pi[i];
                if (!gim.empty()) gim[i] += g * pr[i];
            }
        });
    }
    return out;
}

// Rebuild a spectrum from amplitude and phase. Negative amplitudes are
// clamped to zero (and counted when a diagnostic sink is supplied); clamped
// bins pass no gradient.
template <typename T>
ComplexSpectrum<T> polar_reconstruct(const Tensor<T>& a, const Tensor<T>& p, int64_t src_h,
                                     int64_t src_w, int64_t* clamp_count = nullptr) {
    check_shape(a.shape() == p.shape(), "polar_reconstruct amplitude/phase shape mismatch");
    ComplexSpectrum<T> out;
    out.src_h = src_h;
    out.src_w = src_w;
    out.re = Tensor<T>::zeros(a.shape());
    out.im = Tensor<T>::zeros(a.shape());
    const T* pa = a.ptr();
    const T* pp = p.ptr();
    T* pre = out.re.ptr();
    T* pim = out.im.ptr();
    int64_t n = a.numel();
    int64_t clamps = 0;
    for (int64_t i = 0; i < n; ++i) {
        T av = pa[i];
        if (av < T(0)) {
            av = T(0);
            ++clamps;
        }
        pre[i] = av * static_cast<T>(std::cos(static_cast<double>(pp[i])));
        pim[i] = av * static_cast<T>(std::sin(static_cast<double>(pp[i])));
    }
    if (clamp_count) *clamp_count += clamps;
    assert_finite(out.re, "polar_reconstruct");

    Tape<T>* tape = Tape<T>::current();
    if (tape && (tape->tracks(a) || tape->tracks(p))) {
        TapeRef ra = tape->ref_of(a), rp = tape->ref_of(p);
        Tensor<T> sa = a, sp = p;
        size_t nz = static_cast<size_t>(n);
        tape->record("polar_reconstruct", {&out.re, &out.im}, [=](BackwardCtx<T>& ctx) {
            const auto* gre = ctx.out_grad(0);
            const auto* gim = ctx.out_grad(1);
            if (!gre && !gim) return;
            auto ga = ctx.grad(ra, nz);
            auto gp = ctx.grad(rp, nz);
            const T* pav = sa.ptr();
            const T* ppv = sp.ptr();
            for (size_t i = 0; i < nz; ++i) {
                T av = pav[i];
                T cosp = static_cast<T>(std::cos(static_cast<double>(ppv[i])));
                T sinp = static_cast<T>(std::sin(static_cast<double>(ppv[i])));
                T gr = gre ? (*gre)[i] : T(0);
                T gi = gim ? (*gim)[i] : T(0);
                if (!ga.empty() && av >= T(0)) ga[i] += gr * cosp + gi * sinp;
                if (!gp.empty()) {
                    T ac = av < T(0) ? T(0) : av;
                    gp[i] += ac * (-gr * sinp + gi * cosp);
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Amplitude/phase sensitivity experiment
// ---------------------------------------------------------------------------

enum class SpectrumComponent { Amplitude, Phase };

inline const char* component_name(SpectrumComponent c) {
    return c == SpectrumComponent::Amplitude ? "amplitude" : "phase";
}

inline double wrap_angle(double t) {
    // map to (-pi, pi]
    constexpr double pi = 3.14159265358979323846;
    t = std::fmod(t + pi, 2.0 * pi);
    if (t <= 0) t += 2.0 * pi;
    return t - pi;
}

// Perturb exactly one spectral component of an image and reconstruct.
// eps is a fraction of each component's natural scale: amplitudes are scaled
// by (1 + eps*u), phases are shifted by eps*pi*u, u ~ Uniform(-1,1) i.i.d.
// per stored bin. The half-plane layout keeps the inverse real.
template <typename T>
Tensor<T> perturb_spectrum(const Tensor<T>& img, SpectrumComponent target, double eps,
                           SeededRng& rng) {
    check_shape(img.rank() == 4, "perturb_spectrum expects NCHW input");
    check_contract(eps >= 0.0, "perturb_spectrum requires eps >= 0");
    constexpr double pi = 3.14159265358979323846;
    NoGrad<T> ng;
    ComplexSpectrum<T> z = fft2_real(img);
    T* pre = z.re.ptr();
    T* pim = z.im.ptr();
    int64_t n = z.re.numel();
    for (int64_t i = 0; i < n; ++i) {
        double re = static_cast<double>(pre[i]);
        double im = static_cast<double>(pim[i]);
        double a = std::hypot(re, im);
        double p = (re == 0.0 && im == 0.0) ? 0.0 : std::atan2(im, re);
        double u = rng.uniform(-1.0, 1.0);
        if (target == SpectrumComponent::Amplitude) {
            a *= (1.0 + eps * u);
            if (a < 0) a = 0;
        } else {
            p = wrap_angle(p + eps * pi * u);
        }
        pre[i] = static_cast<T>(a * std::cos(p));
        pim[i] = static_cast<T>(a * std::sin(p));
    }
    Tensor<T> back = ifft2_real(z);
    return clamp(back, T(0), T(1));
}

struct PerturbRow {
    std::string image;
    SpectrumComponent component;
    double eps;
    uint64_t seed;
    double psnr_db;
};

// Full sweep over images x components x eps x seeds. Rows are emitted in
// that nesting order and are deterministic given the seeds.
template <typename T>
std::vector<PerturbRow> perturbation_experiment(const std::vector<std::pair<std::string, Tensor<T>>>& images,
                                                const std::vector<double>& eps_grid,
                                                const std::vector<uint64_t>& seeds) {
    check_contract(!images.empty(), "perturbation_experiment requires at least one image");
    std::vector<PerturbRow> rows;
    for (size_t ii = 0; ii < images.size(); ++ii) {
        for (SpectrumComponent comp : {SpectrumComponent::Amplitude, SpectrumComponent::Phase}) {
            for (size_t ei = 0; ei < eps_grid.size(); ++ei) {
                for (uint64_t seed : seeds) {
                    SeededRng base(seed);
                    SeededRng rng = base.fork(
                        (static_cast<uint64_t>(ii) * 2 + (comp == SpectrumComponent::Phase ? 1 : 0)) * 1009 +
                        ei);
                    Tensor<T> noisy = perturb_spectrum(images[ii].second, comp, eps_grid[ei], rng);
                    rows.push_back({images[ii].first, comp, eps_grid[ei], seed,
                                    psnr(noisy, images[ii].second)});
                }
            }
        }
    }
    return rows;
}

}  // namespace uhdres
