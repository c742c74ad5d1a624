#pragma once

// Shared helpers for unit and acceptance tests: procedural test images and
// small independent oracles.

#include <string>
#include <utility>
#include <vector>

#include "uhdres/rng.hpp"
#include "uhdres/tensor.hpp"

namespace testsupport {

using uhdres::SeededRng;
using uhdres::Shape;
using uhdres::Tensor;

// Procedural RGB scenes with strong structure (edges, shapes, gradients) so
// spectral-phase damage is visible. Values lie in [0,1].
template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> make_test_images(int count, int64_t h, int64_t w) {
    std::vector<std::pair<std::string, Tensor<T>>> images;
    for (int idx = 0; idx < count; ++idx) {
        SeededRng rng(1000 + static_cast<uint64_t>(idx));
        Tensor<T> img = Tensor<T>::zeros({1, 3, h, w});
        T* p = img.ptr();
        int64_t hw = h * w;

        // gradient background with per-channel direction
        double gx = rng.uniform(-1.0, 1.0), gy = rng.uniform(-1.0, 1.0);
        for (int64_t c = 0; c < 3; ++c) {
            double base = rng.uniform(0.25, 0.6);
            double amp = rng.uniform(0.15, 0.3);
            for (int64_t i = 0; i < h; ++i)
                for (int64_t j = 0; j < w; ++j) {
                    double t = (gx * j / static_cast<double>(w) + gy * i / static_cast<double>(h));
                    p[c * hw + i * w + j] = static_cast<T>(base + amp * t);
                }
        }
        // rectangles
        int rects = 3 + static_cast<int>(rng.below(3));
        for (int r = 0; r < rects; ++r) {
            int64_t rh = 4 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(h / 2)));
            int64_t rw = 4 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(w / 2)));
            int64_t r0 = static_cast<int64_t>(rng.below(static_cast<uint64_t>(h - rh)));
            int64_t c0 = static_cast<int64_t>(rng.below(static_cast<uint64_t>(w - rw)));
            double lv[3] = {rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
            for (int64_t c = 0; c < 3; ++c)
                for (int64_t i = r0; i < r0 + rh; ++i)
                    for (int64_t j = c0; j < c0 + rw; ++j)
                        p[c * hw + i * w + j] = static_cast<T>(lv[c]);
        }
        // a disc
        double cy = rng.uniform(0.25, 0.75) * h, cx = rng.uniform(0.25, 0.75) * w;
        double rad = rng.uniform(0.1, 0.25) * std::min(h, w);
        double dv[3] = {rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
        for (int64_t i = 0; i < h; ++i)
            for (int64_t j = 0; j < w; ++j) {
                double d = std::hypot(i - cy, j - cx);
                if (d < rad)
                    for (int64_t c = 0; c < 3; ++c) p[c * hw + i * w + j] = static_cast<T>(dv[c]);
            }
        // sinusoidal texture band
        double freq = rng.uniform(2.0, 6.0);
        int64_t band0 = static_cast<int64_t>(rng.below(static_cast<uint64_t>(h / 2)));
        int64_t band1 = band0 + h / 4;
        for (int64_t i = band0; i < band1 && i < h; ++i)
            for (int64_t j = 0; j < w; ++j) {
                double s = 0.5 + 0.45 * std::sin(6.28318530717958647 * freq * j / static_cast<double>(w));
                for (int64_t c = 0; c < 3; ++c) p[c * hw + i * w + j] = static_cast<T>(s);
            }
        // clamp into [0,1]
        for (int64_t i = 0; i < img.numel(); ++i)
            p[i] = std::min(T(1), std::max(T(0), p[i]));
        images.push_back({"scene" + std::to_string(idx), img});
    }
    return images;
}

// Naive O(n^2) full-plane 2-D DFT of one real plane (the spectral oracle).
inline void dft2_oracle(const std::vector<double>& x, int64_t h, int64_t w,
                        std::vector<double>& re, std::vector<double>& im) {
    re.assign(static_cast<size_t>(h * w), 0.0);
    im.assign(static_cast<size_t>(h * w), 0.0);
    constexpr double two_pi = 6.28318530717958647692;
    for (int64_t u = 0; u < h; ++u)
        for (int64_t v = 0; v < w; ++v) {
            double sr = 0.0, si = 0.0;
            for (int64_t m = 0; m < h; ++m)
                for (int64_t n = 0; n < w; ++n) {
                    double ang = -two_pi * (static_cast<double>(u * m) / h + static_cast<double>(v * n) / w);
                    double val = x[static_cast<size_t>(m * w + n)];
                    sr += val * std::cos(ang);
                    si += val * std::sin(ang);
                }
            re[static_cast<size_t>(u * w + v)] = sr;
            im[static_cast<size_t>(u * w + v)] = si;
        }
}

// Cyclic 2-D shift of every plane of an NCHW tensor.
template <typename T>
Tensor<T> roll2d(const Tensor<T>& x, int64_t dy, int64_t dx) {
    int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* px = x.ptr();
    T* po = out.ptr();
    for (int64_t p = 0; p < n * c; ++p)
        for (int64_t i = 0; i < h; ++i)
            for (int64_t j = 0; j < w; ++j) {
                int64_t si = ((i - dy) % h + h) % h;
                int64_t sj = ((j - dx) % w + w) % w;
                po[(p * h + i) * w + j] = px[(p * h + si) * w + sj];
            }
    return out;
}

}  // namespace testsupport
