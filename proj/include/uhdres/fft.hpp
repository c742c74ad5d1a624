#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace uhdres::fftcore {

// Complex FFT on split arrays, computed in double regardless of the tensor
// element type. Unnormalized in both directions; callers apply 1/(h*w) on
// the inverse. Power-of-two lengths use iterative radix-2; anything else
// goes through the Bluestein chirp-z fallback.

constexpr double kTwoPi = 6.28318530717958647692528676655900577;

inline bool is_pow2(size_t n) { return n && (n & (n - 1)) == 0; }

inline size_t next_pow2(size_t n) {
    size_t m = 1;
    while (m < n) m <<= 1;
    return m;
}

inline void fft_pow2(double* re, double* im, size_t n, bool inverse) {
    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = kTwoPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        size_t half = len >> 1;
        for (size_t i = 0; i < n; i += len) {
            for (size_t j = 0; j < half; ++j) {
                double wr = std::cos(ang * static_cast<double>(j));
                double wi = std::sin(ang * static_cast<double>(j));
                size_t a = i + j, b = i + j + half;
                double xr = re[b] * wr - im[b] * wi;
                double xi = re[b] * wi + im[b] * wr;
                re[b] = re[a] - xr;
                im[b] = im[a] - xi;
                re[a] += xr;
                im[a] += xi;
            }
        }
    }
}

// Arbitrary-length forward/inverse DFT via the chirp-z identity
//   nk = (n^2 + k^2 - (k-n)^2) / 2.
inline void fft_bluestein(double* re, double* im, size_t n, bool inverse) {
    if (inverse) {
        // IDFT(x) = conj(DFT(conj(x)))
        for (size_t i = 0; i < n; ++i) im[i] = -im[i];
        fft_bluestein(re, im, n, false);
        for (size_t i = 0; i < n; ++i) im[i] = -im[i];
        return;
    }
    size_t m = next_pow2(2 * n - 1);
    std::vector<double> wr(n), wi(n);
    for (size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the chirp angle small and exact
        uint64_t k2 = (static_cast<uint64_t>(k) * k) % (2 * n);
        double ang = -kTwoPi * 0.5 * static_cast<double>(k2) / static_cast<double>(n);
        wr[k] = std::cos(ang);
        wi[k] = std::sin(ang);
    }
    std::vector<double> ar(m, 0.0), ai(m, 0.0), br(m, 0.0), bi(m, 0.0);
    for (size_t k = 0; k < n; ++k) {
        ar[k] = re[k] * wr[k] - im[k] * wi[k];
        ai[k] = re[k] * wi[k] + im[k] * wr[k];
    }
    br[0] = wr[0];
    bi[0] = -wi[0];
    for (size_t k = 1; k < n; ++k) {
        br[k] = br[m - k] = wr[k];
        bi[k] = bi[m - k] = -wi[k];
    }
    fft_pow2(ar.data(), ai.data(), m, false);
    fft_pow2(br.data(), bi.data(), m, false);
    for (size_t k = 0; k < m; ++k) {
        double xr = ar[k] * br[k] - ai[k] * bi[k];
        double xi = ar[k] * bi[k] + ai[k] * br[k];
        ar[k] = xr;
        ai[k] = xi;
    }
    fft_pow2(ar.data(), ai.data(), m, true);
    double inv_m = 1.0 / static_cast<double>(m);
    for (size_t k = 0; k < n; ++k) {
        double cr = ar[k] * inv_m, ci = ai[k] * inv_m;
        re[k] = cr * wr[k] - ci * wi[k];
        im[k] = cr * wi[k] + ci * wr[k];
    }
}

inline void fft(double* re, double* im, size_t n, bool inverse) {
    if (n == 1) return;
    if (is_pow2(n))
        fft_pow2(re, im, n, inverse);
    else
        fft_bluestein(re, im, n, inverse);
}

// ---------------------------------------------------------------------------
// Planar 2-D transforms on one (h, w) real plane. The half-plane layout keeps
// columns v in [0, w/2] (wh = w/2 + 1).
// ---------------------------------------------------------------------------

inline size_t half_cols(size_t w) { return w / 2 + 1; }

// real (h, w) -> half-plane complex (h, wh), unnormalized forward transform.
inline void rfft2_plane(const double* x, size_t h, size_t w, double* zre, double* zim) {
    size_t wh = half_cols(w);
    std::vector<double> tre(w), tim(w);
    for (size_t r = 0; r < h; ++r) {
        for (size_t j = 0; j < w; ++j) {
            tre[j] = x[r * w + j];
            tim[j] = 0.0;
        }
        fft(tre.data(), tim.data(), w, false);
        for (size_t v = 0; v < wh; ++v) {
            zre[r * wh + v] = tre[v];
            zim[r * wh + v] = tim[v];
        }
    }
    std::vector<double> cre(h), cim(h);
    for (size_t v = 0; v < wh; ++v) {
        for (size_t r = 0; r < h; ++r) {
            cre[r] = zre[r * wh + v];
            cim[r] = zim[r * wh + v];
        }
        fft(cre.data(), cim.data(), h, false);
        for (size_t r = 0; r < h; ++r) {
            zre[r * wh + v] = cre[r];
            zim[r * wh + v] = cim[r];
        }
    }
}

// Half-plane complex (h, wh) -> real (h, w). Equivalent to mirroring the
// stored half onto the full plane, applying the complex inverse transform
// with 1/(h*w) scaling, and keeping the real part; works for half-planes
// that are not Hermitian-consistent (the imaginary residue is projected out).
inline void irfft2_plane(const double* zre, const double* zim, size_t h, size_t w, double* x) {
    size_t wh = half_cols(w);
    std::vector<double> cre(h), cim(h);
    std::vector<double> colr(h * wh), coli(h * wh);
    for (size_t v = 0; v < wh; ++v) {
        for (size_t r = 0; r < h; ++r) {
            cre[r] = zre[r * wh + v];
            cim[r] = zim[r * wh + v];
        }
        fft(cre.data(), cim.data(), h, true);
        for (size_t r = 0; r < h; ++r) {
            colr[r * wh + v] = cre[r];
            coli[r * wh + v] = cim[r];
        }
    }
    std::vector<double> tre(w), tim(w);
    double norm = 1.0 / (static_cast<double>(h) * static_cast<double>(w));
    for (size_t r = 0; r < h; ++r) {
        for (size_t v = 0; v < wh; ++v) {
            tre[v] = colr[r * wh + v];
            tim[v] = coli[r * wh + v];
        }
        for (size_t v = wh; v < w; ++v) {
            tre[v] = colr[r * wh + (w - v)];
            tim[v] = -coli[r * wh + (w - v)];
        }
        fft(tre.data(), tim.data(), w, true);
        for (size_t j = 0; j < w; ++j) x[r * w + j] = tre[j] * norm;
    }
}

// Adjoint helper for the forward transform: treats the half-plane bins as
// independent coefficients (no mirroring, no normalization) and returns
//   y[m,n] = Re( sum_{u,v in half} G[u,v] e^{+i 2 pi (u m / h + v n / w)} ).
inline void irfft2_raw_plane(const double* gre, const double* gim, size_t h, size_t w, double* y) {
    size_t wh = half_cols(w);
    std::vector<double> cre(h), cim(h);
    std::vector<double> colr(h * wh), coli(h * wh);
    for (size_t v = 0; v < wh; ++v) {
        for (size_t r = 0; r < h; ++r) {
            cre[r] = gre[r * wh + v];
            cim[r] = gim[r * wh + v];
        }
        fft(cre.data(), cim.data(), h, true);
        for (size_t r = 0; r < h; ++r) {
            colr[r * wh + v] = cre[r];
            coli[r * wh + v] = cim[r];
        }
    }
    std::vector<double> tre(w, 0.0), tim(w, 0.0);
    for (size_t r = 0; r < h; ++r) {
        for (size_t v = 0; v < wh; ++v) {
            tre[v] = colr[r * wh + v];
            tim[v] = coli[r * wh + v];
        }
        for (size_t v = wh; v < w; ++v) {
            tre[v] = 0.0;
            tim[v] = 0.0;
        }
        fft(tre.data(), tim.data(), w, true);
        for (size_t j = 0; j < w; ++j) y[r * w + j] = tre[j];
    }
}

}  // namespace uhdres::fftcore
