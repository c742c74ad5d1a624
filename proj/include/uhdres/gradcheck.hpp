#pragma once

#include <functional>

#include "uhdres/autograd.hpp"
#include "uhdres/ops.hpp"

namespace uhdres {

struct GradCheckReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    bool pass = false;
};

// Central finite-difference check of d f / d x against the recorded
// gradient. f must be scalar-valued; runs in 64-bit mode only. The relative
// error uses a unit floor: |a - n| / max(1, |a|, |n|).
inline GradCheckReport grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                                  Tensor<double> x, double eps = 1e-5, double tol = 1e-4) {
    x.set_requires_grad();
    x.zero_grad();
    {
        Recording<double> rec;
        Tensor<double> y = f(x);
        check_contract(y.numel() == 1, "grad_check requires a scalar-valued function");
        rec.backward(y);
    }
    std::vector<double> analytic = x.grad();
    x.zero_grad();

    GradCheckReport rep;
    auto eval = [&]() {
        NoGrad<double> ng;
        return f(x).item();
    };
    auto data = x.data();
    for (size_t i = 0; i < data.size(); ++i) {
        double keep = data[i];
        data[i] = keep + eps;
        double fp = eval();
        data[i] = keep - eps;
        double fm = eval();
        data[i] = keep;
        double numeric = (fp - fm) / (2.0 * eps);
        double a = analytic[i];
        double abs_err = std::abs(a - numeric);
        double rel = abs_err / std::max({1.0, std::abs(a), std::abs(numeric)});
        rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
        rep.max_rel_err = std::max(rep.max_rel_err, rel);
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

}  // namespace uhdres
