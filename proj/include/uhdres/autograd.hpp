#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "uhdres/tensor.hpp"

namespace uhdres {

// Reference into the recording tape: (node index, output slot).
struct TapeRef {
    int64_t node = -1;
    int slot = 0;
    bool valid() const { return node >= 0; }
};

template <typename T>
class Tape;

// Handed to backward closures. Lets a node read the gradients of its own
// outputs and accumulate into the gradients of its parents.
template <typename T>
class BackwardCtx {
public:
    BackwardCtx(Tape<T>* tape, int64_t node) : tape_(tape), node_(node) {}

    // Gradient of this node's output slot; nullptr means identically zero.
    const std::vector<T>* out_grad(int slot = 0) const;

    // Gradient buffer for a parent reference. Empty span when the reference
    // is not tracked, so closures can guard with `if (!g.empty())`.
    std::span<T> grad(const TapeRef& ref, size_t numel);

private:
    Tape<T>* tape_;
    int64_t node_;
};

// Reverse-mode tape. Nodes are appended in execution order, so parents of
// node k always have index < k and a reverse sweep is a valid topological
// order. One tape is recorded per forward call and dropped after backward.
template <typename T>
class Tape {
public:
    Tape() : gen_(next_gen()) {}

    // One recording slot per thread, so eval-mode forwards can run
    // concurrently on distinct inputs while another thread records.
    static Tape*& current_slot() {
        static thread_local Tape* cur = nullptr;
        return cur;
    }
    static Tape* current() { return current_slot(); }

    bool tracks(const Tensor<T>& t) const {
        return (t.impl()->gen == gen_ && t.impl()->node >= 0) || t.requires_grad();
    }

    // Resolve an input tensor to a tape reference, promoting differentiation
    // leaves to leaf nodes on first use. A leaf used twice (shared weights)
    // maps to the same node, so gradients from all uses accumulate.
    TapeRef ref_of(const Tensor<T>& t) {
        auto& impl = *t.impl();
        if (impl.gen == gen_ && impl.node >= 0) return {impl.node, impl.slot};
        if (!impl.requires_grad) return {};
        int64_t id = static_cast<int64_t>(nodes_.size());
        nodes_.push_back(Node{"leaf", {static_cast<size_t>(t.numel())}, nullptr, impl.grad});
        impl.gen = gen_;
        impl.node = id;
        impl.slot = 0;
        return {id, 0};
    }

    // Record an op node producing `outputs`; `fn` is its backward rule.
    void record(const char* op, std::initializer_list<Tensor<T>*> outputs,
                std::function<void(BackwardCtx<T>&)> fn) {
        int64_t id = static_cast<int64_t>(nodes_.size());
        Node n;
        n.op = op;
        n.backward = std::move(fn);
        int slot = 0;
        for (Tensor<T>* out : outputs) {
            n.out_numel.push_back(static_cast<size_t>(out->numel()));
            out->impl()->gen = gen_;
            out->impl()->node = id;
            out->impl()->slot = slot++;
        }
        nodes_.push_back(std::move(n));
    }

    // Backward sweep from a scalar loss. Accumulates into the grad buffers of
    // every reachable leaf, then drops the recorded graph.
    void backward(const Tensor<T>& loss) {
        check_contract(loss.numel() == 1, "backward requires a 1-element loss tensor");
        check_contract(loss.impl()->gen == gen_ && loss.impl()->node >= 0,
                       "loss is not part of the recorded graph");
        grads_.assign(nodes_.size(), {});
        auto& seed = slot_grad(loss.impl()->node, loss.impl()->slot, 1);
        seed[0] = T(1);
        for (int64_t k = static_cast<int64_t>(nodes_.size()) - 1; k >= 0; --k) {
            Node& n = nodes_[static_cast<size_t>(k)];
            if (!has_any_grad(k)) continue;
            if (n.backward) {
                BackwardCtx<T> ctx(this, k);
                n.backward(ctx);
            } else if (n.leaf_sink) {
                auto& g = grads_[static_cast<size_t>(k)][0];
                auto& sink = *n.leaf_sink;
                for (size_t i = 0; i < sink.size(); ++i) sink[i] += g[i];
            }
        }
        reset();
    }

    void reset() {
        nodes_.clear();
        grads_.clear();
        gen_ = next_gen();
    }

    size_t size() const { return nodes_.size(); }

private:
    friend class BackwardCtx<T>;

    struct Node {
        const char* op;
        std::vector<size_t> out_numel;
        std::function<void(BackwardCtx<T>&)> backward;
        std::shared_ptr<std::vector<T>> leaf_sink;
    };

    static uint64_t next_gen() {
        static uint64_t g = 0;
        return ++g;
    }

    bool has_any_grad(int64_t k) const {
        const auto& slots = grads_[static_cast<size_t>(k)];
        for (const auto& s : slots)
            if (!s.empty()) return true;
        return false;
    }

    std::vector<T>& slot_grad(int64_t node, int slot, size_t numel) {
        auto& slots = grads_[static_cast<size_t>(node)];
        if (slots.empty()) slots.resize(nodes_[static_cast<size_t>(node)].out_numel.size());
        auto& g = slots[static_cast<size_t>(slot)];
        if (g.empty()) g.assign(numel, T(0));
        return g;
    }

    std::vector<Node> nodes_;
    std::vector<std::vector<std::vector<T>>> grads_;
    uint64_t gen_;
};

template <typename T>
const std::vector<T>* BackwardCtx<T>::out_grad(int slot) const {
    const auto& slots = tape_->grads_[static_cast<size_t>(node_)];
    if (slots.empty()) return nullptr;
    const auto& g = slots[static_cast<size_t>(slot)];
    return g.empty() ? nullptr : &g;
}

template <typename T>
std::span<T> BackwardCtx<T>::grad(const TapeRef& ref, size_t numel) {
    if (!ref.valid()) return {};
    return std::span<T>(tape_->slot_grad(ref.node, ref.slot, numel));
}

// RAII scope that makes a fresh tape the recording target.
template <typename T>
class Recording {
public:
    Recording() : prev_(Tape<T>::current_slot()) { Tape<T>::current_slot() = &tape_; }
    ~Recording() { Tape<T>::current_slot() = prev_; }
    Recording(const Recording&) = delete;
    Recording& operator=(const Recording&) = delete;

    void backward(const Tensor<T>& loss) { tape_.backward(loss); }
    Tape<T>& tape() { return tape_; }

private:
    Tape<T> tape_;
    Tape<T>* prev_;
};

// RAII scope that disables recording (eval-mode forwards).
template <typename T>
class NoGrad {
public:
    NoGrad() : prev_(Tape<T>::current_slot()) { Tape<T>::current_slot() = nullptr; }
    ~NoGrad() { Tape<T>::current_slot() = prev_; }
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;

private:
    Tape<T>* prev_;
};

}  // namespace uhdres
