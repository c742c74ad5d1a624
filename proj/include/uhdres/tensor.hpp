#pragma once

#include <atomic>
#include <cmath>
#include <cstring>
#include <memory>
#include <span>
#include <vector>

#include "uhdres/common.hpp"
#include "uhdres/rng.hpp"

namespace uhdres {

// Live-tensor accounting. Every TensorImpl adds its payload on construction
// and removes it on destruction, so with natural C++ lifetimes the counter
// tracks exactly the "live from creation until last consumer" model the
// bench harness reports.
struct MemTracker {
    static std::atomic<int64_t>& current() {
        static std::atomic<int64_t> v{0};
        return v;
    }
    static std::atomic<int64_t>& peak() {
        static std::atomic<int64_t> v{0};
        return v;
    }
    static void add(int64_t bytes) {
        int64_t cur = current().fetch_add(bytes) + bytes;
        int64_t p = peak().load();
        while (cur > p && !peak().compare_exchange_weak(p, cur)) {
        }
    }
    static void sub(int64_t bytes) { current().fetch_sub(bytes); }
    static void reset_peak() { peak().store(current().load()); }
    static int64_t current_bytes() { return current().load(); }
    static int64_t peak_bytes() { return peak().load(); }
};

// Debug mode: when enabled, every forward op validates that its output is
// finite and throws ContractError otherwise.
inline bool& finite_checks() {
    static bool enabled = false;
    return enabled;
}

template <typename T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    bool requires_grad = false;
    std::shared_ptr<std::vector<T>> grad;  // leaf gradient accumulator

    // Tape linkage, valid only while `gen` matches the recording tape.
    int64_t node = -1;
    int slot = 0;
    uint64_t gen = 0;

    TensorImpl(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        MemTracker::add(static_cast<int64_t>(data.size() * sizeof(T)));
    }
    ~TensorImpl() { MemTracker::sub(static_cast<int64_t>(data.size() * sizeof(T))); }
    TensorImpl(const TensorImpl&) = delete;
    TensorImpl& operator=(const TensorImpl&) = delete;
};

template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor from_data(Shape shape, std::vector<T> data) {
        for (int64_t e : shape) check_shape(e >= 1, "tensor extents must be >= 1, got " + shape_str(shape));
        check_shape(numel_of(shape) == static_cast<int64_t>(data.size()),
                    "data size does not match shape " + shape_str(shape));
        Tensor t;
        t.impl_ = std::make_shared<TensorImpl<T>>(std::move(shape), std::move(data));
        return t;
    }

    static Tensor zeros(const Shape& shape) {
        return from_data(shape, std::vector<T>(static_cast<size_t>(numel_of(shape)), T(0)));
    }
    static Tensor ones(const Shape& shape) { return full(shape, T(1)); }
    static Tensor full(const Shape& shape, T value) {
        return from_data(shape, std::vector<T>(static_cast<size_t>(numel_of(shape)), value));
    }
    static Tensor uniform(const Shape& shape, T lo, T hi, SeededRng& rng) {
        std::vector<T> d(static_cast<size_t>(numel_of(shape)));
        for (auto& v : d) v = static_cast<T>(rng.uniform(lo, hi));
        return from_data(shape, std::move(d));
    }
    static Tensor normal(const Shape& shape, T mu, T sigma, SeededRng& rng) {
        std::vector<T> d(static_cast<size_t>(numel_of(shape)));
        for (auto& v : d) v = static_cast<T>(rng.normal(mu, sigma));
        return from_data(shape, std::move(d));
    }
    static Tensor scalar(T value) { return from_data({1}, {value}); }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }
    int64_t dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }

    std::span<T> data() { return std::span<T>(impl_->data); }
    std::span<const T> data() const { return std::span<const T>(impl_->data); }
    T* ptr() { return impl_->data.data(); }
    const T* ptr() const { return impl_->data.data(); }
    T item() const {
        check_contract(numel() == 1, "item() requires a 1-element tensor");
        return impl_->data[0];
    }

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    // Marks the tensor as a differentiation leaf and allocates its gradient
    // accumulator.
    Tensor& set_requires_grad(bool on = true) {
        impl_->requires_grad = on;
        if (on && !impl_->grad) impl_->grad = std::make_shared<std::vector<T>>(impl_->data.size(), T(0));
        return *this;
    }
    std::vector<T>& grad() {
        check_contract(impl_->grad != nullptr, "tensor has no gradient buffer");
        return *impl_->grad;
    }
    const std::vector<T>& grad() const {
        check_contract(impl_->grad != nullptr, "tensor has no gradient buffer");
        return *impl_->grad;
    }
    bool has_grad_buffer() const { return impl_ && impl_->grad != nullptr; }
    void zero_grad() {
        if (impl_ && impl_->grad) std::fill(impl_->grad->begin(), impl_->grad->end(), T(0));
    }

    Tensor clone() const {
        Tensor t = from_data(impl_->shape, impl_->data);
        return t;
    }

    std::shared_ptr<TensorImpl<T>>& impl() { return impl_; }
    const std::shared_ptr<TensorImpl<T>>& impl() const { return impl_; }

    bool same_impl(const Tensor& other) const { return impl_ == other.impl_; }

private:
    std::shared_ptr<TensorImpl<T>> impl_;
};

template <typename T>
inline void assert_finite(const Tensor<T>& t, const char* op) {
    if (!finite_checks()) return;
    for (T v : t.data()) {
        if (!std::isfinite(static_cast<double>(v)))
            throw ContractError(std::string("non-finite value produced by op '") + op + "'");
    }
}

enum class Init { Zeros, Ones, Uniform, Normal };

// create() per the tensor module contract: random inits consume the rng
// deterministically in linear element order.
template <typename T>
Tensor<T> create(const Shape& shape, Init init, SeededRng* rng = nullptr, double a = 0.0, double b = 1.0) {
    switch (init) {
        case Init::Zeros: return Tensor<T>::zeros(shape);
        case Init::Ones: return Tensor<T>::ones(shape);
        case Init::Uniform:
            check_contract(rng != nullptr, "uniform init requires an rng");
            return Tensor<T>::uniform(shape, static_cast<T>(a), static_cast<T>(b), *rng);
        case Init::Normal:
            check_contract(rng != nullptr, "normal init requires an rng");
            return Tensor<T>::normal(shape, static_cast<T>(a), static_cast<T>(b), *rng);
    }
    throw ContractError("unknown init");
}

}  // namespace uhdres
