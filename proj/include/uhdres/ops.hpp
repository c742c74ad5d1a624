#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>

#include "uhdres/autograd.hpp"
#include "uhdres/tensor.hpp"

namespace uhdres {

namespace detail {

// Shapes are padded to rank 4 on the left; broadcasting is restricted to the
// patterns the network uses: equal extents, or extent 1 on one operand.
struct BcPlan {
    Shape out;
    std::array<int64_t, 4> dims{};
    std::array<int64_t, 4> sa{};
    std::array<int64_t, 4> sb{};
    bool same = false;
};

inline std::array<int64_t, 4> pad4(const Shape& s) {
    check_shape(s.size() <= 4, "broadcast ops support rank <= 4, got " + shape_str(s));
    std::array<int64_t, 4> d{1, 1, 1, 1};
    for (size_t i = 0; i < s.size(); ++i) d[4 - s.size() + i] = s[i];
    return d;
}

inline BcPlan broadcast_plan(const Shape& a, const Shape& b) {
    BcPlan p;
    p.same = (a == b);
    auto da = pad4(a), db = pad4(b);
    std::array<int64_t, 4> dout{};
    for (int i = 0; i < 4; ++i) {
        check_shape(da[i] == db[i] || da[i] == 1 || db[i] == 1,
                    "shapes not broadcast-compatible: " + shape_str(a) + " vs " + shape_str(b));
        dout[i] = std::max(da[i], db[i]);
    }
    std::array<int64_t, 4> stra{}, strb{};
    int64_t ra = 1, rb = 1;
    for (int i = 3; i >= 0; --i) {
        stra[i] = (da[i] == 1) ? 0 : ra;
        strb[i] = (db[i] == 1) ? 0 : rb;
        ra *= da[i];
        rb *= db[i];
    }
    p.dims = dout;
    p.sa = stra;
    p.sb = strb;
    size_t rank = std::max(a.size(), b.size());
    p.out.assign(dout.begin() + (4 - rank), dout.end());
    return p;
}

template <typename T, typename F>
void bc_apply(const BcPlan& p, const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out, F&& f) {
    if (p.same) {
        const T* pa = a.ptr();
        const T* pb = b.ptr();
        T* po = out.ptr();
        int64_t n = out.numel();
        for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
        return;
    }
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* po = out.ptr();
    int64_t idx = 0;
    for (int64_t i0 = 0; i0 < p.dims[0]; ++i0)
        for (int64_t i1 = 0; i1 < p.dims[1]; ++i1)
            for (int64_t i2 = 0; i2 < p.dims[2]; ++i2) {
                int64_t oa = i0 * p.sa[0] + i1 * p.sa[1] + i2 * p.sa[2];
                int64_t ob = i0 * p.sb[0] + i1 * p.sb[1] + i2 * p.sb[2];
                for (int64_t i3 = 0; i3 < p.dims[3]; ++i3)
                    po[idx++] = f(pa[oa + i3 * p.sa[3]], pb[ob + i3 * p.sb[3]]);
            }
}

// Accumulate an output-shaped gradient into an operand-shaped buffer,
// summing over broadcast dimensions. `g` may alias nothing; `dst` uses the
// operand's strides from the plan.
template <typename T, typename F>
void bc_accumulate(const BcPlan& p, const std::vector<T>& gout, std::span<T> dst,
                   const std::array<int64_t, 4>& sd, F&& f) {
    if (dst.empty()) return;
    int64_t idx = 0;
    for (int64_t i0 = 0; i0 < p.dims[0]; ++i0)
        for (int64_t i1 = 0; i1 < p.dims[1]; ++i1)
            for (int64_t i2 = 0; i2 < p.dims[2]; ++i2) {
                int64_t od = i0 * sd[0] + i1 * sd[1] + i2 * sd[2];
                for (int64_t i3 = 0; i3 < p.dims[3]; ++i3) {
                    dst[static_cast<size_t>(od + i3 * sd[3])] += f(gout[static_cast<size_t>(idx)], idx);
                    ++idx;
                }
            }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Binary elementwise ops (restricted broadcasting)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    auto plan = detail::broadcast_plan(a.shape(), b.shape());
    Tensor<T> out = Tensor<T>::zeros(plan.out);
    detail::bc_apply(plan, a, b, out, [](T x, T y) { return x + y; });
    assert_finite(out, "add");
    if (auto* tape = Tape<T>::current(); tape && (tape->tracks(a) || tape->tracks(b))) {
        TapeRef ra = tape->ref_of(a), rb = tape->ref_of(b);
        size_t na = static_cast<size_t>(a.numel()), nb = static_cast<size_t>(b.numel());
        tape->record("add", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto ga = ctx.grad(ra, na);
            auto gb = ctx.grad(rb, nb);
            if (plan.same) {
                for (size_t i = 0; i < go->size(); ++i) {
                    if (!ga.empty()) ga[i] += (*go)[i];
                    if (!gb.empty()) gb[i] += (*go)[i];
                }
            } else {
                detail::bc_accumulate(plan, *go, ga, plan.sa, [](T g, int64_t) { return g; });
                detail::bc_accumulate(plan, *go, gb, plan.sb, [](T g, int64_t) { return g; });
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    auto plan = detail::broadcast_plan(a.shape(), b.shape());
    Tensor<T> out = Tensor<T>::zeros(plan.out);
    detail::bc_apply(plan, a, b, out, [](T x, T y) { return x - y; });
    assert_finite(out, "sub");
    if (auto* tape = Tape<T>::current(); tape && (tape->tracks(a) || tape->tracks(b))) {
        TapeRef ra = tape->ref_of(a), rb = tape->ref_of(b);
        size_t na = static_cast<size_t>(a.numel()), nb = static_cast<size_t>(b.numel());
        tape->record("sub", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto ga = ctx.grad(ra, na);
            auto gb = ctx.grad(rb, nb);
            detail::bc_accumulate(plan, *go, ga, plan.sa, [](T g, int64_t) { return g; });
            detail::bc_accumulate(plan, *go, gb, plan.sb, [](T g, int64_t) { return -g; });
        });
    }
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    auto plan = detail::broadcast_plan(a.shape(), b.shape());
    Tensor<T> out = Tensor<T>::zeros(plan.out);
    detail::bc_apply(plan, a, b, out, [](T x, T y) { return x * y; });
    assert_finite(out, "mul");
    if (auto* tape = Tape<T>::current(); tape && (tape->tracks(a) || tape->tracks(b))) {
        TapeRef ra = tape->ref_of(a), rb = tape->ref_of(b);
        Tensor<T> sa = a, sb = b;  // saved activations
        size_t na = static_cast<size_t>(a.numel()), nb = static_cast<size_t>(b.numel());
        tape->record("mul", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto ga = ctx.grad(ra, na);
            auto gb = ctx.grad(rb, nb);
            if (plan.same) {
                const T* pa = sa.ptr();
                const T* pb = sb.ptr();
                for (size_t i = 0; i < go->size(); ++i) {
                    if (!ga.empty()) ga[i] += (*go)[i] * pb[i];
                    if (!gb.empty()) gb[i] += (*go)[i] * pa[i];
                }
                return;
            }
            // Recompute operand offsets per output element.
            const T* pa = sa.ptr();
            const T* pb = sb.ptr();
            int64_t idx = 0;
            for (int64_t i0 = 0; i0 < plan.dims[0]; ++i0)
                for (int64_t i1 = 0; i1 < plan.dims[1]; ++i1)
                    for (int64_t i2 = 0; i2 < plan.dims[2]; ++i2) {
                        int64_t oa = i0 * plan.sa[0] + i1 * plan.sa[1] + i2 * plan.sa[2];
                        int64_t ob = i0 * plan.sb[0] + i1 * plan.sb[1] + i2 * plan.sb[2];
                        for (int64_t i3 = 0; i3 < plan.dims[3]; ++i3) {
                            int64_t ia = oa + i3 * plan.sa[3];
                            int64_t ib = ob + i3 * plan.sb[3];
                            T g = (*go)[static_cast<size_t>(idx)];
                            if (!ga.empty()) ga[static_cast<size_t>(ia)] += g * pb[ib];
                            if (!gb.empty()) gb[static_cast<size_t>(ib)] += g * pa[ia];
                            ++idx;
                        }
                    }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Unary elementwise ops
// ---------------------------------------------------------------------------

namespace detail {

template <typename T, typename FwdF, typename BwdF>
Tensor<T> unary_op(const char* name, const Tensor<T>& x, FwdF&& fwd, BwdF&& dfdx_from_x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* px = x.ptr();
    T* po = out.ptr();
    int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
    assert_finite(out, name);
    if (auto* tape = Tape<T>::current(); tape && tape->tracks(x)) {
        TapeRef rx = tape->ref_of(x);
        Tensor<T> sx = x;
        tape->record(name, {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto gx = ctx.grad(rx, static_cast<size_t>(sx.numel()));
            if (gx.empty()) return;
            const T* p = sx.ptr();
            for (size_t i = 0; i < go->size(); ++i) gx[i] += (*go)[i] * dfdx_from_x(p[i]);
        });
    }
    return out;
}

}  // namespace detail

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
    return detail::unary_op(
        "leaky_relu", x, [slope](T v) { return v >= T(0) ? v : slope * v; },
        [slope](T v) { return v >= T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return detail::unary_op(
        "sigmoid", x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
        [](T v) {
            T s = T(1) / (T(1) + std::exp(-v));
            return s * (T(1) - s);
        });
}

// Exact (erf-based) Gaussian error linear unit.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    return detail::unary_op(
        "gelu", x,
        [](T v) {
            double d = static_cast<double>(v);
            return static_cast<T>(0.5 * d * (1.0 + std::erf(d * inv_sqrt2)));
        },
        [](T v) {
            double d = static_cast<double>(v);
            double cdf = 0.5 * (1.0 + std::erf(d * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * d * d);
            return static_cast<T>(cdf + d * pdf);
        });
}

// |x| with subgradient 0 at exact zero.
template <typename T>
Tensor<T> abs_op(const Tensor<T>& x) {
    return detail::unary_op(
        "abs", x, [](T v) { return v < T(0) ? -v : v; },
        [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
    return detail::unary_op(
        "scale", x, [s](T v) { return s * v; }, [s](T) { return s; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T s) {
    return detail::unary_op(
        "add_scalar", x, [s](T v) { return v + s; }, [](T) { return T(1); });
}

// Gradient passes where lo <= x <= hi, zero outside.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
    return detail::unary_op(
        "clamp", x, [lo, hi](T v) { return std::min(hi, std::max(lo, v)); },
        [lo, hi](T v) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape) {
    check_shape(numel_of(shape) == x.numel(),
                "reshape to " + shape_str(shape) + " does not preserve element count");
    Tensor<T> out = Tensor<T>::from_data(shape, std::vector<T>(x.data().begin(), x.data().end()));
    if (auto* tape = Tape<T>::current(); tape && tape->tracks(x)) {
        TapeRef rx = tape->ref_of(x);
        size_t n = static_cast<size_t>(x.numel());
        tape->record("reshape", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto gx = ctx.grad(rx, n);
            if (gx.empty()) return;
            for (size_t i = 0; i < n; ++i) gx[i] += (*go)[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm) {
    const Shape& s = x.shape();
    check_shape(perm.size() == s.size(), "permute rank mismatch");
    Shape out_shape(s.size());
    for (size_t i = 0; i < perm.size(); ++i) out_shape[i] = s[static_cast<size_t>(perm[i])];

    std::vector<int64_t> in_strides(s.size()), out_to_in(s.size());
    int64_t acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        in_strides[static_cast<size_t>(i)] = acc;
        acc *= s[static_cast<size_t>(i)];
    }
    for (size_t i = 0; i < perm.size(); ++i) out_to_in[i] = in_strides[static_cast<size_t>(perm[i])];

    Tensor<T> out = Tensor<T>::zeros(out_shape);
    const T* px = x.ptr();
    T* po = out.ptr();
    std::vector<int64_t> idx(s.size(), 0);
    int64_t n = x.numel();
    std::vector<int64_t> src_index(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        int64_t off = 0;
        for (size_t d = 0; d < idx.size(); ++d) off += idx[d] * out_to_in[d];
        po[i] = px[off];
        src_index[static_cast<size_t>(i)] = off;
        for (int d = static_cast<int>(idx.size()) - 1; d >= 0; --d) {
            if (++idx[static_cast<size_t>(d)] < out_shape[static_cast<size_t>(d)]) break;
            idx[static_cast<size_t>(d)] = 0;
        }
    }
    if (auto* tape = Tape<T>::current(); tape && tape->tracks(x)) {
        TapeRef rx = tape->ref_of(x);
        size_t nn = static_cast<size_t>(n);
        auto map = std::make_shared<std::vector<int64_t>>(std::move(src_index));
        tape->record("permute", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto gx = ctx.grad(rx, nn);
            if (gx.empty()) return;
            for (size_t i = 0; i < nn; ++i) gx[static_cast<size_t>((*map)[i])] += (*go)[i];
        });
    }
    return out;
}

// Concatenate along `dim`; all other extents must match.
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int dim = 1) {
    check_contract(!parts.empty(), "concat requires at least one tensor");
    const Shape& s0 = parts[0].shape();
    Shape out_shape = s0;
    int64_t total = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        check_shape(s.size() == s0.size(), "concat rank mismatch");
        for (size_t d = 0; d < s.size(); ++d)
            if (static_cast<int>(d) != dim)
                check_shape(s[d] == s0[d], "concat non-" + std::to_string(dim) + " extents must match");
        total += s[static_cast<size_t>(dim)];
    }
    out_shape[static_cast<size_t>(dim)] = total;

    int64_t outer = 1, inner = 1;
    for (int d = 0; d < dim; ++d) outer *= s0[static_cast<size_t>(d)];
    for (size_t d = static_cast<size_t>(dim) + 1; d < s0.size(); ++d) inner *= s0[d];

    Tensor<T> out = Tensor<T>::zeros(out_shape);
    T* po = out.ptr();
    int64_t out_row = total * inner;
    int64_t offset = 0;
    for (const auto& p : parts) {
        int64_t c = p.shape()[static_cast<size_t>(dim)];
        const T* pp = p.ptr();
        for (int64_t o = 0; o < outer; ++o)
            std::memcpy(po + o * out_row + offset * inner, pp + o * c * inner,
                        static_cast<size_t>(c * inner) * sizeof(T));
        offset += c;
    }

    Tape<T>* tape = Tape<T>::current();
    bool track = false;
    if (tape)
        for (const auto& p : parts) track = track || tape->tracks(p);
    if (track) {
        std::vector<TapeRef> refs;
        std::vector<int64_t> extents;
        std::vector<size_t> numels;
        for (const auto& p : parts) {
            refs.push_back(tape->ref_of(p));
            extents.push_back(p.shape()[static_cast<size_t>(dim)]);
            numels.push_back(static_cast<size_t>(p.numel()));
        }
        tape->record("concat", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            int64_t off = 0;
            for (size_t k = 0; k < refs.size(); ++k) {
                auto g = ctx.grad(refs[k], numels[k]);
                int64_t c = extents[k];
                if (!g.empty()) {
                    for (int64_t o = 0; o < outer; ++o)
                        for (int64_t i = 0; i < c * inner; ++i)
                            g[static_cast<size_t>(o * c * inner + i)] +=
                                (*go)[static_cast<size_t>(o * out_row + off * inner + i)];
                }
                off += c;
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> concat(std::initializer_list<Tensor<T>> parts, int dim = 1) {
    return concat(std::vector<Tensor<T>>(parts), dim);
}

template <typename T>
std::function<void(BackwardCtx<T>&)> detail_split_backward(TapeRef rx, size_t nx, int64_t part,
                                                           int64_t inner, int64_t outer, int64_t c,
                                                           int k) {
    return [=](BackwardCtx<T>& ctx) {
        auto gx = ctx.grad(rx, nx);
        if (gx.empty()) return;
        for (int j = 0; j < k; ++j) {
            const auto* go = ctx.out_grad(j);
            if (!go) continue;
            for (int64_t ou = 0; ou < outer; ++ou)
                for (int64_t i = 0; i < part * inner; ++i)
                    gx[static_cast<size_t>(ou * c * inner + j * part * inner + i)] +=
                        (*go)[static_cast<size_t>(ou * part * inner + i)];
        }
    };
}

// Evenly split along `dim` into k tensors.
template <typename T>
std::vector<Tensor<T>> split(const Tensor<T>& x, int k, int dim = 1) {
    const Shape& s = x.shape();
    int64_t c = s[static_cast<size_t>(dim)];
    check_shape(c % k == 0, "split_" + std::to_string(k) + " requires extent divisible by " +
                                std::to_string(k) + ", got " + std::to_string(c));
    int64_t part = c / k;
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < dim; ++d) outer *= s[static_cast<size_t>(d)];
    for (size_t d = static_cast<size_t>(dim) + 1; d < s.size(); ++d) inner *= s[d];

    Shape part_shape = s;
    part_shape[static_cast<size_t>(dim)] = part;
    std::vector<Tensor<T>> outs;
    const T* px = x.ptr();
    for (int j = 0; j < k; ++j) {
        Tensor<T> o = Tensor<T>::zeros(part_shape);
        T* po = o.ptr();
        for (int64_t ou = 0; ou < outer; ++ou)
            std::memcpy(po + ou * part * inner, px + ou * c * inner + j * part * inner,
                        static_cast<size_t>(part * inner) * sizeof(T));
        outs.push_back(std::move(o));
    }
    if (auto* tape = Tape<T>::current(); tape && tape->tracks(x)) {
        TapeRef rx = tape->ref_of(x);
        size_t nx = static_cast<size_t>(x.numel());
        switch (k) {
            case 2:
                tape->record("split", {&outs[0], &outs[1]}, detail_split_backward<T>(rx, nx, part, inner, outer, c, k));
                break;
            case 3:
                tape->record("split", {&outs[0], &outs[1], &outs[2]},
                             detail_split_backward<T>(rx, nx, part, inner, outer, c, k));
                break;
            case 4:
                tape->record("split", {&outs[0], &outs[1], &outs[2], &outs[3]},
                             detail_split_backward<T>(rx, nx, part, inner, outer, c, k));
                break;
            default:
                throw ContractError("split supports k in {2,3,4}");
        }
    }
    return outs;
}

// ---------------------------------------------------------------------------
// Reductions ("reduced extents become 1")
// ---------------------------------------------------------------------------

enum class Reduce { Sum, Mean, Max };

template <typename T>
Tensor<T> reduce(Reduce op, const Tensor<T>& x, const std::vector<int>& dims) {
    const Shape& s = x.shape();
    std::vector<bool> red(s.size(), false);
    for (int d : dims) {
        check_shape(d >= 0 && d < static_cast<int>(s.size()), "reduce dim out of range");
        red[static_cast<size_t>(d)] = true;
    }
    Shape out_shape = s;
    int64_t m = 1;
    for (size_t d = 0; d < s.size(); ++d)
        if (red[d]) {
            m *= s[d];
            out_shape[d] = 1;
        }

    std::vector<int64_t> out_strides(s.size());
    int64_t acc = 1;
    for (int d = static_cast<int>(s.size()) - 1; d >= 0; --d) {
        out_strides[static_cast<size_t>(d)] = red[static_cast<size_t>(d)] ? 0 : acc;
        acc *= out_shape[static_cast<size_t>(d)];
    }

    int64_t n = x.numel();
    int64_t out_n = numel_of(out_shape);
    Tensor<T> out;
    std::shared_ptr<std::vector<int64_t>> argmax;
    const T* px = x.ptr();

    // Map each input linear index to its output cell (serial, deterministic).
    std::vector<int64_t> idx(s.size(), 0);
    if (op == Reduce::Max) {
        out = Tensor<T>::full(out_shape, std::numeric_limits<T>::lowest());
        argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out_n), int64_t(-1));
        T* po = out.ptr();
        for (int64_t i = 0; i < n; ++i) {
            int64_t off = 0;
            for (size_t d = 0; d < idx.size(); ++d) off += idx[d] * out_strides[d];
            if (px[i] > po[off]) {  // strict: ties resolve to the lowest linear index
                po[off] = px[i];
                (*argmax)[static_cast<size_t>(off)] = i;
            }
            for (int d = static_cast<int>(idx.size()) - 1; d >= 0; --d) {
                if (++idx[static_cast<size_t>(d)] < s[static_cast<size_t>(d)]) break;
                idx[static_cast<size_t>(d)] = 0;
            }
        }
    } else {
        out = Tensor<T>::zeros(out_shape);
        T* po = out.ptr();
        for (int64_t i = 0; i < n; ++i) {
            int64_t off = 0;
            for (size_t d = 0; d < idx.size(); ++d) off += idx[d] * out_strides[d];
            po[off] += px[i];
            for (int d = static_cast<int>(idx.size()) - 1; d >= 0; --d) {
                if (++idx[static_cast<size_t>(d)] < s[static_cast<size_t>(d)]) break;
                idx[static_cast<size_t>(d)] = 0;
            }
        }
        if (op == Reduce::Mean) {
            for (int64_t i = 0; i < out_n; ++i) po[i] /= static_cast<T>(m);
        }
    }
    assert_finite(out, "reduce");

    if (auto* tape = Tape<T>::current(); tape && tape->tracks(x)) {
        TapeRef rx = tape->ref_of(x);
        size_t nx = static_cast<size_t>(n);
        Shape in_shape = s;
        auto strides = out_strides;
        T inv_m = T(1) / static_cast<T>(m);
        tape->record("reduce", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto gx = ctx.grad(rx, nx);
            if (gx.empty()) return;
            if (op == Reduce::Max) {
                for (size_t o = 0; o < argmax->size(); ++o) {
                    int64_t src = (*argmax)[o];
                    if (src >= 0) gx[static_cast<size_t>(src)] += (*go)[o];
                }
                return;
            }
            std::vector<int64_t> it(in_shape.size(), 0);
            for (size_t i = 0; i < nx; ++i) {
                int64_t off = 0;
                for (size_t d = 0; d < it.size(); ++d) off += it[d] * strides[d];
                T g = (*go)[static_cast<size_t>(off)];
                gx[i] += (op == Reduce::Mean) ? g * inv_m : g;
                for (int d = static_cast<int>(it.size()) - 1; d >= 0; --d) {
                    if (++it[static_cast<size_t>(d)] < in_shape[static_cast<size_t>(d)]) break;
                    it[static_cast<size_t>(d)] = 0;
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
    std::vector<int> dims(x.shape().size());
    for (size_t i = 0; i < dims.size(); ++i) dims[i] = static_cast<int>(i);
    return reshape(reduce(Reduce::Sum, x, dims), {1});
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
    std::vector<int> dims(x.shape().size());
    for (size_t i = 0; i < dims.size(); ++i) dims[i] = static_cast<int>(i);
    return reshape(reduce(Reduce::Mean, x, dims), {1});
}

// ---------------------------------------------------------------------------
// Spatial padding and cropping (rank-4, NCHW)
// ---------------------------------------------------------------------------

enum class PadMode { Zeros, Reflect };

// Reflection without edge repeat, valid for any pad size (period 2(n-1)).
inline int64_t reflect_fold(int64_t i, int64_t n) {
    if (n == 1) return 0;
    int64_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, int64_t top, int64_t bottom, int64_t left, int64_t right,
                PadMode mode) {
    check_shape(x.rank() == 4, "pad2d expects NCHW input");
    int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (mode == PadMode::Reflect)
        check_shape(h >= 2 || (top == 0 && bottom == 0), "reflect pad needs extent >= 2");
    int64_t oh = h + top + bottom, ow = w + left + right;
    Tensor<T> out = Tensor<T>::zeros({n, c, oh, ow});

    // Column/row source maps (or -1 for zero fill).
    std::vector<int64_t> row_src(static_cast<size_t>(oh)), col_src(static_cast<size_t>(ow));
    for (int64_t i = 0; i < oh; ++i) {
        int64_t src = i - top;
        row_src[static_cast<size_t>(i)] =
            (mode == PadMode::Reflect) ? reflect_fold(src, h) : ((src >= 0 && src < h) ? src : -1);
    }
    for (int64_t j = 0; j < ow; ++j) {
        int64_t src = j - left;
        col_src[static_cast<size_t>(j)] =
            (mode == PadMode::Reflect) ? reflect_fold(src, w) : ((src >= 0 && src < w) ? src : -1);
    }

    const T* px = x.ptr();
    T* po = out.ptr();
    for (int64_t p = 0; p < n * c; ++p) {
        const T* xin = px + p * h * w;
        T* xout = po + p * oh * ow;
        for (int64_t i = 0; i < oh; ++i) {
            int64_t ri = row_src[static_cast<size_t>(i)];
            for (int64_t j = 0; j < ow; ++j) {
                int64_t cj = col_src[static_cast<size_t>(j)];
                xout[i * ow + j] = (ri < 0 || cj < 0) ? T(0) : xin[ri * w + cj];
            }
        }
    }

    if (auto* tape = Tape<T>::current(); tape && tape->tracks(x)) {
        TapeRef rx = tape->ref_of(x);
        size_t nx = static_cast<size_t>(x.numel());
        auto rs = std::make_shared<std::vector<int64_t>>(row_src);
        auto cs = std::make_shared<std::vector<int64_t>>(col_src);
        tape->record("pad2d", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto gx = ctx.grad(rx, nx);
            if (gx.empty()) return;
            for (int64_t p = 0; p < n * c; ++p) {
                const T* gout = go->data() + p * oh * ow;
                T* gin = gx.data() + p * h * w;
                for (int64_t i = 0; i < oh; ++i) {
                    int64_t ri = (*rs)[static_cast<size_t>(i)];
                    if (ri < 0) continue;
                    for (int64_t j = 0; j < ow; ++j) {
                        int64_t cj = (*cs)[static_cast<size_t>(j)];
                        if (cj >= 0) gin[ri * w + cj] += gout[i * ow + j];
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, int64_t top, int64_t left, int64_t out_h, int64_t out_w) {
    check_shape(x.rank() == 4, "crop2d expects NCHW input");
    int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    check_shape(top >= 0 && left >= 0 && top + out_h <= h && left + out_w <= w,
                "crop window out of bounds");
    Tensor<T> out = Tensor<T>::zeros({n, c, out_h, out_w});
    const T* px = x.ptr();
    T* po = out.ptr();
    for (int64_t p = 0; p < n * c; ++p)
        for (int64_t i = 0; i < out_h; ++i)
            std::memcpy(po + (p * out_h + i) * out_w, px + (p * h + top + i) * w + left,
                        static_cast<size_t>(out_w) * sizeof(T));
    if (auto* tape = Tape<T>::current(); tape && tape->tracks(x)) {
        TapeRef rx = tape->ref_of(x);
        size_t nx = static_cast<size_t>(x.numel());
        tape->record("crop2d", {&out}, [=](BackwardCtx<T>& ctx) {
            const auto* go = ctx.out_grad();
            if (!go) return;
            auto gx = ctx.grad(rx, nx);
            if (gx.empty()) return;
            for (int64_t p = 0; p < n * c; ++p)
                for (int64_t i = 0; i < out_h; ++i)
                    for (int64_t j = 0; j < out_w; ++j)
                        gx[static_cast<size_t>((p * h + top + i) * w + left + j)] +=
                            (*go)[static_cast<size_t>((p * out_h + i) * out_w + j)];
        });
    }
    return out;
}

}  // namespace uhdres
