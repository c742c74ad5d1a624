#pragma once

#include "uhdres/spectral.hpp"

namespace uhdres {

template <typename T>
struct LossReport {
    Tensor<T> pixel;
    Tensor<T> freq;
    Tensor<T> total;
    T lambda_weight;
};

// Mean absolute difference over all elements. Mean (not sum) so the loss
// weight is resolution independent.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    check_shape(pred.shape() == target.shape(), "l1_loss shape mismatch: " + shape_str(pred.shape()) +
                                                    " vs " + shape_str(target.shape()));
    return mean_all(abs_op(sub(pred, target)));
}

// Mean absolute difference of the real and imaginary half-plane spectra
// (2 * n * c * h * (w/2+1) values in total).
template <typename T>
Tensor<T> freq_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    check_shape(pred.shape() == target.shape(), "freq_loss shape mismatch");
    auto zp = fft2_real(pred);
    auto zt = fft2_real(target);
    auto dre = mean_all(abs_op(sub(zp.re, zt.re)));
    auto dim = mean_all(abs_op(sub(zp.im, zt.im)));
    return scale(add(dre, dim), T(0.5));
}

template <typename T>
LossReport<T> total_loss(const Tensor<T>& pred, const Tensor<T>& target, T lambda_weight = T(0.1)) {
    LossReport<T> rep;
    rep.lambda_weight = lambda_weight;
    rep.pixel = l1_loss(pred, target);
    rep.freq = freq_loss(pred, target);
    rep.total = add(rep.pixel, scale(rep.freq, lambda_weight));
    return rep;
}

}  // namespace uhdres
