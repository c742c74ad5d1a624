#pragma once

#include "uhdres/tensor.hpp"

namespace uhdres {

// Peak signal-to-noise ratio in dB. A zero MSE returns the documented cap of
// 100 dB (identical inputs would otherwise be unbounded).
template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& target, double peak = 1.0) {
    check_shape(pred.shape() == target.shape(), "psnr shape mismatch");
    const T* a = pred.ptr();
    const T* b = target.ptr();
    double mse = 0.0;
    int64_t n = pred.numel();
    for (int64_t i = 0; i < n; ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    if (mse == 0.0) return 100.0;
    return 10.0 * std::log10(peak * peak / mse);
}

namespace detail {

// ITU-R 601 luma from a (3, h, w) or (1, 3, h, w) tensor.
template <typename T>
std::vector<double> luma_plane(const Tensor<T>& img, int64_t& h, int64_t& w) {
    const Shape& s = img.shape();
    int64_t c;
    if (s.size() == 3) {
        c = s[0];
        h = s[1];
        w = s[2];
    } else if (s.size() == 4 && s[0] == 1) {
        c = s[1];
        h = s[2];
        w = s[3];
    } else {
        throw ShapeError("ssim expects a (3,h,w) or (1,3,h,w) image, got " + shape_str(s));
    }
    check_shape(c == 3, "ssim expects 3 channels");
    std::vector<double> y(static_cast<size_t>(h * w));
    const T* p = img.ptr();
    for (int64_t i = 0; i < h * w; ++i)
        y[static_cast<size_t>(i)] = 0.299 * static_cast<double>(p[i]) +
                                    0.587 * static_cast<double>(p[h * w + i]) +
                                    0.114 * static_cast<double>(p[2 * h * w + i]);
    return y;
}

inline std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> g(static_cast<size_t>(size));
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        double d = i - (size - 1) / 2.0;
        g[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += g[static_cast<size_t>(i)];
    }
    for (auto& v : g) v /= sum;
    return g;
}

// Separable windowed local mean over valid positions -> (h-size+1, w-size+1).
inline std::vector<double> window_mean(const std::vector<double>& x, int64_t h, int64_t w,
                                       const std::vector<double>& win) {
    int64_t k = static_cast<int64_t>(win.size());
    int64_t oh = h - k + 1, ow = w - k + 1;
    std::vector<double> rows(static_cast<size_t>(h * ow));
    for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < ow; ++j) {
            double acc = 0.0;
            for (int64_t t = 0; t < k; ++t) acc += win[static_cast<size_t>(t)] * x[static_cast<size_t>(i * w + j + t)];
            rows[static_cast<size_t>(i * ow + j)] = acc;
        }
    std::vector<double> out(static_cast<size_t>(oh * ow));
    for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
            double acc = 0.0;
            for (int64_t t = 0; t < k; ++t) acc += win[static_cast<size_t>(t)] * rows[static_cast<size_t>((i + t) * ow + j)];
            out[static_cast<size_t>(i * ow + j)] = acc;
        }
    return out;
}

}  // namespace detail

// Single-scale structural similarity on the luma channel.
// Gaussian window 11x11 sigma 1.5, K1 = 0.01, K2 = 0.03, peak 1.0; averaged
// over valid window positions (no padding).
template <typename T>
double ssim(const Tensor<T>& pred, const Tensor<T>& target) {
    check_shape(pred.shape() == target.shape(), "ssim shape mismatch");
    int64_t h = 0, w = 0;
    auto x = detail::luma_plane(pred, h, w);
    auto y = detail::luma_plane(target, h, w);
    constexpr int kWin = 11;
    check_contract(h >= kWin && w >= kWin, "ssim requires images at least 11x11");

    auto win = detail::gaussian_window(kWin, 1.5);
    std::vector<double> xx(x.size()), yy(y.size()), xy(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    auto mu1 = detail::window_mean(x, h, w, win);
    auto mu2 = detail::window_mean(y, h, w, win);
    auto sxx = detail::window_mean(xx, h, w, win);
    auto syy = detail::window_mean(yy, h, w, win);
    auto sxy = detail::window_mean(xy, h, w, win);

    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    double acc = 0.0;
    for (size_t i = 0; i < mu1.size(); ++i) {
        double m1 = mu1[i], m2 = mu2[i];
        double v1 = sxx[i] - m1 * m1;
        double v2 = syy[i] - m2 * m2;
        double cov = sxy[i] - m1 * m2;
        acc += ((2 * m1 * m2 + c1) * (2 * cov + c2)) / ((m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2));
    }
    return acc / static_cast<double>(mu1.size());
}

}  // namespace uhdres
