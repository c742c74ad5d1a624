#pragma once

#include <atomic>
#include <optional>

#include "uhdres/module.hpp"
#include "uhdres/spectral.hpp"

namespace uhdres {

// Multi-scale context aggregator: pointwise expansion c -> r*c, split into
// four groups (identity + three depthwise convs with growing kernels),
// channel concat. Spatial extents are preserved.
template <typename T>
struct Msca {
    Conv2d<T> pwc;
    std::vector<Conv2d<T>> dws;

    static Msca make(ParamStore<T>& store, const std::string& name, int64_t c, int64_t expansion,
                     const std::vector<int64_t>& kernels, SeededRng& rng) {
        check_contract(c % 2 == 0, "msca requires an even channel count, got " + std::to_string(c));
        check_contract(kernels.size() == 3, "msca takes exactly three depthwise kernel sizes");
        Msca m;
        int64_t rc = expansion * c;
        check_contract(rc % 4 == 0, "msca expansion must yield a multiple of 4 channels");
        int64_t gc = rc / 4;
        m.pwc = Conv2d<T>::make(store, name + ".pwc", c, rc, 1, 1, rng);
        for (size_t i = 0; i < kernels.size(); ++i) {
            int64_t k = kernels[i];
            m.dws.push_back(Conv2d<T>::make(store, name + ".dw" + std::to_string(i), gc, gc, k, k,
                                            rng, 1, PadMode::Reflect, gc));
        }
        return m;
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        auto groups = split(pwc.forward(x), 4);
        std::vector<Tensor<T>> outs;
        outs.push_back(groups[0]);  // identity branch
        for (size_t i = 0; i < dws.size(); ++i) outs.push_back(dws[i].forward(groups[i + 1]));
        return concat(outs);
    }
};

// Spectral amplitude modulation unit. Pools to half resolution, enhances
// with a depthwise conv, modulates only the amplitude spectrum (the phase is
// an identity map), inverts, and gates the input features after bilinear
// upsampling back to the source extents.
template <typename T>
struct Samu {
    Conv2d<T> dw;
    Conv2d<T> amp_fc1, amp_fc2;
    Conv2d<T> pwc;
    std::shared_ptr<std::atomic<int64_t>> clamp_sink;

    static Samu make(ParamStore<T>& store, const std::string& name, int64_t c, SeededRng& rng,
                     const std::shared_ptr<std::atomic<int64_t>>& clamp_sink) {
        Samu m;
        m.dw = Conv2d<T>::make(store, name + ".dw", c, c, 3, 3, rng, 1, PadMode::Reflect, c);
        m.amp_fc1 = Conv2d<T>::make(store, name + ".amp_fc1", c, c, 1, 1, rng);
        m.amp_fc2 = Conv2d<T>::make(store, name + ".amp_fc2", c, c, 1, 1, rng);
        m.pwc = Conv2d<T>::make(store, name + ".pwc", c, c, 1, 1, rng);
        m.clamp_sink = clamp_sink;
        return m;
    }

    Tensor<T> forward(const Tensor<T>& x_lf) const {
        int64_t h = x_lf.dim(2), w = x_lf.dim(3);
        auto pooled = adaptive_max_pool_half(x_lf);
        auto xdw = dw.forward(pooled);
        auto z = fft2_real(xdw);
        auto a = amplitude(z);
        auto p = phase(z);  // identity-mapped
        auto a2 = amp_fc2.forward(leaky_relu(amp_fc1.forward(a), T(0.1)));
        int64_t clamps = 0;
        auto z2 = polar_reconstruct(a2, p, z.src_h, z.src_w, &clamps);
        if (clamp_sink && clamps) clamp_sink->fetch_add(clamps);
        auto back = ifft2_real(z2);
        auto att = pwc.forward(add(back, xdw));
        auto up = bilinear_upsample(att, h, w);
        return mul(up, x_lf);
    }
};

// Structural refinement unit: split halves through a pooled pointwise branch
// and a 3x3 conv branch, concat, fuse, residual.
template <typename T>
struct Sru {
    Conv2d<T> pool_pwc;
    Conv2d<T> conv;
    Conv2d<T> fuse;

    static Sru make(ParamStore<T>& store, const std::string& name, int64_t c, SeededRng& rng) {
        check_contract(c % 4 == 0, "sru requires channels divisible by 4, got " + std::to_string(c));
        Sru m;
        int64_t half = c / 2;
        m.pool_pwc = Conv2d<T>::make(store, name + ".pool_pwc", half, half, 1, 1, rng);
        m.conv = Conv2d<T>::make(store, name + ".conv", half, half, 3, 3, rng, 1, PadMode::Reflect);
        // grouped fuse keeps the block inside the parameter budget
        m.fuse = Conv2d<T>::make(store, name + ".fuse", c, c, 3, 3, rng, 1, PadMode::Reflect, 4);
        return m;
    }

    Tensor<T> forward(const Tensor<T>& x_hf) const {
        auto halves = split(x_hf, 2);
        auto b1 = pool_pwc.forward(max_pool3x3_s1(halves[0]));
        auto b2 = gelu(conv.forward(halves[1]));
        return add(fuse.forward(concat({b1, b2})), x_hf);
    }
};

// Decoupled spectral modulation block: low/high frequency branches extracted
// by pointwise convs, modulated by SAMU / SRU, fused and gated by channel
// attention. Contracts the aggregator's expanded channels back to c.
template <typename T>
struct Dsmb {
    Conv2d<T> lf_pwc, hf_pwc;
    std::optional<Samu<T>> samu;
    std::optional<Sru<T>> sru;
    Conv2d<T> fuse_pwc;
    Conv2d<T> proj;
    Conv2d<T> dw;
    ChannelAttention<T> cam;

    static Dsmb make(ParamStore<T>& store, const std::string& name, int64_t in_c, int64_t c,
                     int64_t cam_reduction, bool use_samu, bool use_sru, SeededRng& rng,
                     const std::shared_ptr<std::atomic<int64_t>>& clamp_sink) {
        Dsmb m;
        m.lf_pwc = Conv2d<T>::make(store, name + ".lf_pwc", in_c, c, 1, 1, rng);
        m.hf_pwc = Conv2d<T>::make(store, name + ".hf_pwc", in_c, c, 1, 1, rng);
        if (use_samu) m.samu = Samu<T>::make(store, name + ".samu", c, rng, clamp_sink);
        if (use_sru) m.sru = Sru<T>::make(store, name + ".sru", c, rng);
        m.fuse_pwc = Conv2d<T>::make(store, name + ".fuse_pwc", c, c, 1, 1, rng);
        m.proj = Conv2d<T>::make(store, name + ".proj", c, c, 1, 1, rng);
        m.dw = Conv2d<T>::make(store, name + ".dw", c, c, 3, 3, rng, 1, PadMode::Reflect, c);
        m.cam = ChannelAttention<T>::make(store, name + ".cam", c, cam_reduction, rng);
        return m;
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        auto x_lf = lf_pwc.forward(x);
        auto x_hf = hf_pwc.forward(x);
        auto low = samu ? samu->forward(x_lf) : x_lf;
        auto high = sru ? sru->forward(x_hf) : x_hf;
        auto fre = fuse_pwc.forward(add(low, high));
        return cam.forward(dw.forward(proj.forward(fre)));
    }
};

// Spatio-spectral fusion module: aggregator followed by the spectral block.
template <typename T>
struct Ssfm {
    std::optional<Msca<T>> msca;
    Dsmb<T> dsmb;

    static Ssfm make(ParamStore<T>& store, const std::string& name, int64_t c, int64_t expansion,
                     const std::vector<int64_t>& msca_kernels, int64_t cam_reduction, bool use_msca,
                     bool use_samu, bool use_sru, SeededRng& rng, const std::shared_ptr<std::atomic<int64_t>>& clamp_sink) {
        Ssfm m;
        int64_t dsmb_in = c;
        if (use_msca) {
            m.msca = Msca<T>::make(store, name + ".msca", c, expansion, msca_kernels, rng);
            dsmb_in = expansion * c;
        }
        m.dsmb = Dsmb<T>::make(store, name + ".dsmb", dsmb_in, c, cam_reduction, use_samu, use_sru,
                               rng, clamp_sink);
        return m;
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        return dsmb.forward(msca ? msca->forward(x) : x);
    }
};

// Shared gated feed-forward network. The two gate branches run through ONE
// set of weights (expansion, strip convs, projection), so each SGFN owns
// exactly one 1x11 and one 11x1 depthwise weight tensor.
template <typename T>
struct Sgfn {
    Conv2d<T> expand;
    Conv2d<T> branch_expand;
    Conv2d<T> strip_h;  // 1 x k
    Conv2d<T> strip_v;  // k x 1
    Conv2d<T> branch_proj;
    Conv2d<T> proj;

    static Sgfn make(ParamStore<T>& store, const std::string& name, int64_t c, int64_t strip_kernel,
                     SeededRng& rng) {
        check_contract(c % 2 == 0, "sgfn requires an even channel count");
        Sgfn m;
        m.expand = Conv2d<T>::make(store, name + ".expand", c, 2 * c, 1, 1, rng);
        m.branch_expand = Conv2d<T>::make(store, name + ".branch_expand", c, 2 * c, 1, 1, rng);
        m.strip_h = Conv2d<T>::make(store, name + ".strip_h", c, c, 1, strip_kernel, rng, 1,
                                    PadMode::Reflect, c);
        m.strip_v = Conv2d<T>::make(store, name + ".strip_v", c, c, strip_kernel, 1, rng, 1,
                                    PadMode::Reflect, c);
        m.branch_proj = Conv2d<T>::make(store, name + ".branch_proj", c, c, 1, 1, rng);
        m.proj = Conv2d<T>::make(store, name + ".proj", 2 * c, c, 1, 1, rng);
        return m;
    }

    Tensor<T> branch(const Tensor<T>& z) const {
        auto qv = split(branch_expand.forward(z), 2);
        auto gate = strip_v.forward(strip_h.forward(qv[0]));
        return branch_proj.forward(mul(qv[1], gate));
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        auto z = split(expand.forward(x), 2);
        return proj.forward(concat({branch(z[0]), branch(z[1])}));
    }
};

// Dual-domain adaptive enhancement block:
//   x1 = x  + SSFM(BN(x))
//   y  = x1 + SGFN(BN(x1))
// With SGFN ablated the second transform is a literal identity map.
template <typename T>
struct Daeb {
    BatchNorm2d<T> bn1;
    Ssfm<T> ssfm;
    BatchNorm2d<T> bn2;
    std::optional<Sgfn<T>> sgfn;

    struct Options {
        int64_t expansion = 2;
        std::vector<int64_t> msca_kernels = {5, 9, 13};
        int64_t strip_kernel = 11;
        int64_t cam_reduction = 4;
        bool use_msca = true;
        bool use_samu = true;
        bool use_sru = true;
        bool use_sgfn = true;
    };

    static Daeb make(ParamStore<T>& store, const std::string& name, int64_t c, const Options& opt,
                     SeededRng& rng, const std::shared_ptr<std::atomic<int64_t>>& clamp_sink) {
        Daeb m;
        m.bn1 = BatchNorm2d<T>::make(store, name + ".bn1", c);
        m.ssfm = Ssfm<T>::make(store, name + ".ssfm", c, opt.expansion, opt.msca_kernels,
                               opt.cam_reduction, opt.use_msca, opt.use_samu, opt.use_sru, rng,
                               clamp_sink);
        m.bn2 = BatchNorm2d<T>::make(store, name + ".bn2", c);
        if (opt.use_sgfn) m.sgfn = Sgfn<T>::make(store, name + ".sgfn", c, opt.strip_kernel, rng);
        return m;
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        auto x1 = add(x, ssfm.forward(bn1.forward(x, training)));
        auto inner = bn2.forward(x1, training);
        return add(x1, sgfn ? sgfn->forward(inner) : inner);
    }
};

}  // namespace uhdres
