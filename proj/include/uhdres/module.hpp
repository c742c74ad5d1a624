#pragma once

#include <string>
#include <unordered_map>

#include "uhdres/conv.hpp"
#include "uhdres/norm.hpp"

namespace uhdres {

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;  // requires_grad with an attached grad accumulator
    bool decay = false;
};

// Owns every learnable parameter and persistent buffer of a model, addressed
// by unique dotted path. Registration order is fixed by construction order,
// which also fixes the rng consumption order during init.
template <typename T>
class ParamStore {
public:
    Tensor<T> add_param(const std::string& name, Tensor<T> init, bool decay) {
        check_contract(index_.find(name) == index_.end(), "duplicate parameter name: " + name);
        init.set_requires_grad();
        index_[name] = params_.size();
        params_.push_back(Parameter<T>{name, init, decay});
        return init;
    }

    Tensor<T> add_buffer(const std::string& name, Tensor<T> init) {
        check_contract(buffer_index_.find(name) == buffer_index_.end(),
                       "duplicate buffer name: " + name);
        buffer_index_[name] = buffers_.size();
        buffers_.push_back({name, init});
        return init;
    }

    std::vector<Parameter<T>>& params() { return params_; }
    const std::vector<Parameter<T>>& params() const { return params_; }
    std::vector<std::pair<std::string, Tensor<T>>>& buffers() { return buffers_; }
    const std::vector<std::pair<std::string, Tensor<T>>>& buffers() const { return buffers_; }

    Parameter<T>* find(const std::string& name) {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : &params_[it->second];
    }

    int64_t count() const {
        int64_t total = 0;
        for (const auto& p : params_) total += p.value.numel();
        return total;
    }

    void zero_grads() {
        for (auto& p : params_) p.value.zero_grad();
    }

private:
    std::vector<Parameter<T>> params_;
    std::vector<std::pair<std::string, Tensor<T>>> buffers_;
    std::unordered_map<std::string, size_t> index_;
    std::unordered_map<std::string, size_t> buffer_index_;
};

// Kaiming-uniform fan-in init with the standard conv gain (negative slope
// sqrt(5)): U(-b, b), b = 1 / sqrt(fan_in). The pure-ReLU gain sqrt(6/fan)
// makes the gated products blow up at depth 14.
template <typename T>
Tensor<T> kaiming_uniform(const Shape& w_shape, int64_t fan_in, SeededRng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor<T>::uniform(w_shape, static_cast<T>(-bound), static_cast<T>(bound), rng);
}

template <typename T>
struct Conv2d {
    int64_t in_c = 0, out_c = 0, kh = 0, kw = 0;
    int64_t stride = 1, groups = 1;
    PadMode pad = PadMode::Reflect;
    Tensor<T> weight;
    Tensor<T> bias;  // undefined when disabled

    static Conv2d make(ParamStore<T>& store, const std::string& name, int64_t in_c, int64_t out_c,
                       int64_t kh, int64_t kw, SeededRng& rng, int64_t stride = 1,
                       PadMode pad = PadMode::Reflect, int64_t groups = 1, bool with_bias = true) {
        check_contract(in_c % groups == 0 && out_c % groups == 0,
                       "conv channels must be divisible by groups: " + name);
        Conv2d m;
        m.in_c = in_c;
        m.out_c = out_c;
        m.kh = kh;
        m.kw = kw;
        m.stride = stride;
        m.groups = groups;
        m.pad = pad;
        int64_t fan_in = (in_c / groups) * kh * kw;
        m.weight = store.add_param(name + ".weight",
                                   kaiming_uniform<T>({out_c, in_c / groups, kh, kw}, fan_in, rng),
                                   /*decay=*/true);
        if (with_bias)
            m.bias = store.add_param(name + ".bias", Tensor<T>::zeros({out_c}), /*decay=*/false);
        return m;
    }

    // Share an existing conv's parameters under a new instance (used by the
    // gated feed-forward branches).
    static Conv2d shared_from(const Conv2d& other) { return other; }

    Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, weight, bias, stride, pad, groups); }

    int64_t param_count() const { return weight.numel() + (bias.defined() ? bias.numel() : 0); }
};

template <typename T>
struct BatchNorm2d {
    Tensor<T> gamma, beta;
    Tensor<T> running_mean, running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);

    static BatchNorm2d make(ParamStore<T>& store, const std::string& name, int64_t channels) {
        BatchNorm2d m;
        m.gamma = store.add_param(name + ".gamma", Tensor<T>::ones({channels}), /*decay=*/false);
        m.beta = store.add_param(name + ".beta", Tensor<T>::zeros({channels}), /*decay=*/false);
        m.running_mean = store.add_buffer(name + ".running_mean", Tensor<T>::zeros({channels}));
        m.running_var = store.add_buffer(name + ".running_var", Tensor<T>::ones({channels}));
        return m;
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        return batch_norm(x, gamma, beta, running_mean, running_var, momentum, eps, training);
    }
};

// Squeeze-excitation style channel attention: per-channel gate
// s = sigmoid(fc2(act(fc1(gap(x))))) in (0, 1), broadcast over space.
template <typename T>
struct ChannelAttention {
    Conv2d<T> fc1, fc2;

    static ChannelAttention make(ParamStore<T>& store, const std::string& name, int64_t channels,
                                 int64_t reduction, SeededRng& rng) {
        check_contract(channels % reduction == 0,
                       "channel attention requires channels divisible by the reduction ratio");
        ChannelAttention m;
        m.fc1 = Conv2d<T>::make(store, name + ".fc1", channels, channels / reduction, 1, 1, rng);
        m.fc2 = Conv2d<T>::make(store, name + ".fc2", channels / reduction, channels, 1, 1, rng);
        return m;
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        auto s = reduce(Reduce::Mean, x, {2, 3});
        s = fc1.forward(s);
        s = leaky_relu(s, T(0.1));
        s = fc2.forward(s);
        s = sigmoid(s);
        return mul(x, s);
    }
};

}  // namespace uhdres
