#pragma once

#include <map>

#include "uhdres/blocks.hpp"

namespace uhdres {

struct UHDResConfig {
    int64_t initial_channels = 12;
    std::vector<int64_t> level_depths = {2, 3, 4};
    int64_t expansion = 2;
    std::vector<int64_t> msca_kernels = {5, 9, 13};
    int64_t strip_kernel = 11;
    int64_t cam_reduction = 4;
    bool use_msca = true;
    bool use_samu = true;
    bool use_sru = true;
    bool use_sgfn = true;

    std::vector<int64_t> level_channels() const {
        return {initial_channels, 2 * initial_channels, 4 * initial_channels};
    }

    void validate() const {
        if (initial_channels < 4 || initial_channels % 4 != 0)
            throw ConfigError("initial_channels must be a positive multiple of 4, got " +
                              std::to_string(initial_channels));
        if (level_depths.size() != 3) throw ConfigError("level_depths must list exactly 3 levels");
        for (int64_t d : level_depths)
            if (d < 1) throw ConfigError("level depths must be >= 1");
        if (msca_kernels.size() != 3) throw ConfigError("msca_kernels must list exactly 3 sizes");
        for (int64_t k : msca_kernels)
            if (k < 1 || k % 2 == 0) throw ConfigError("msca kernels must be odd and positive");
        if (strip_kernel < 1 || strip_kernel % 2 == 0)
            throw ConfigError("strip_kernel must be odd and positive");
        if (cam_reduction < 1 || initial_channels % cam_reduction != 0)
            throw ConfigError("cam_reduction must divide the channel counts");
        if (expansion < 1 || (expansion * initial_channels) % 4 != 0)
            throw ConfigError("expansion * channels must be a multiple of 4");
    }
};

// The assembled network: 3x3 stem, three encoder-decoder levels of DAEBs
// (depths N0/N1/N2 with the decoder mirroring N1/N0), stride-2 conv
// downsampling, bilinear + 1x1 conv upsampling with additive skips, and a
// 3x3 head predicting the residual R with I_HQ = I_LQ + R.
template <typename T>
class UHDResModel {
public:
    UHDResModel(const UHDResConfig& cfg, uint64_t seed) : cfg_(cfg) {
        cfg.validate();
        SeededRng rng(seed);
        auto ch = cfg.level_channels();
        typename Daeb<T>::Options opt;
        opt.expansion = cfg.expansion;
        opt.msca_kernels = cfg.msca_kernels;
        opt.strip_kernel = cfg.strip_kernel;
        opt.cam_reduction = cfg.cam_reduction;
        opt.use_msca = cfg.use_msca;
        opt.use_samu = cfg.use_samu;
        opt.use_sru = cfg.use_sru;
        opt.use_sgfn = cfg.use_sgfn;

        stem_ = Conv2d<T>::make(store_, "stem", 3, ch[0], 3, 3, rng, 1, PadMode::Zeros);
        for (int64_t i = 0; i < cfg.level_depths[0]; ++i)
            enc1_.push_back(Daeb<T>::make(store_, "enc1.daeb" + std::to_string(i), ch[0], opt, rng,
                                          polar_clamps_));
        down1_ = Conv2d<T>::make(store_, "down1", ch[0], ch[1], 3, 3, rng, 2, PadMode::Zeros);
        for (int64_t i = 0; i < cfg.level_depths[1]; ++i)
            enc2_.push_back(Daeb<T>::make(store_, "enc2.daeb" + std::to_string(i), ch[1], opt, rng,
                                          polar_clamps_));
        down2_ = Conv2d<T>::make(store_, "down2", ch[1], ch[2], 3, 3, rng, 2, PadMode::Zeros);
        for (int64_t i = 0; i < cfg.level_depths[2]; ++i)
            bottleneck_.push_back(Daeb<T>::make(store_, "bottleneck.daeb" + std::to_string(i), ch[2],
                                                opt, rng, polar_clamps_));
        up2_ = Conv2d<T>::make(store_, "up2.conv", ch[2], ch[1], 1, 1, rng);
        for (int64_t i = 0; i < cfg.level_depths[1]; ++i)
            dec2_.push_back(Daeb<T>::make(store_, "dec2.daeb" + std::to_string(i), ch[1], opt, rng,
                                          polar_clamps_));
        up1_ = Conv2d<T>::make(store_, "up1.conv", ch[1], ch[0], 1, 1, rng);
        for (int64_t i = 0; i < cfg.level_depths[0]; ++i)
            dec1_.push_back(Daeb<T>::make(store_, "dec1.daeb" + std::to_string(i), ch[0], opt, rng,
                                          polar_clamps_));
        head_ = Conv2d<T>::make(store_, "head", ch[0], 3, 3, 3, rng, 1, PadMode::Zeros);
    }

    UHDResModel(const UHDResModel&) = delete;
    UHDResModel& operator=(const UHDResModel&) = delete;
    UHDResModel(UHDResModel&&) = default;

    // Residual prediction. Reflect-pads to the next multiple of 8, runs the
    // network, crops, and returns I_LQ + R without any clamping (the loss is
    // computed pre-clamp; clamping happens only when writing images).
    Tensor<T> forward(const Tensor<T>& ilq, bool training = false) {
        check_shape(ilq.rank() == 4 && ilq.dim(1) == 3,
                    "forward expects a (n,3,h,w) input, got " + shape_str(ilq.shape()));
        int64_t h = ilq.dim(2), w = ilq.dim(3);
        check_contract(h >= 8 && w >= 8, "forward requires spatial extents >= 8");
        int64_t ph = (8 - h % 8) % 8, pw = (8 - w % 8) % 8;
        Tensor<T> x = (ph || pw) ? pad2d(ilq, 0, ph, 0, pw, PadMode::Reflect) : ilq;

        auto f = stem_.forward(x);
        for (auto& b : enc1_) f = b.forward(f, training);
        Tensor<T> skip1 = f;
        f = down1_.forward(f);
        for (auto& b : enc2_) f = b.forward(f, training);
        Tensor<T> skip2 = f;
        f = down2_.forward(f);
        for (auto& b : bottleneck_) f = b.forward(f, training);
        f = add(up2_.forward(bilinear_upsample(f, skip2.dim(2), skip2.dim(3))), skip2);
        for (auto& b : dec2_) f = b.forward(f, training);
        f = add(up1_.forward(bilinear_upsample(f, skip1.dim(2), skip1.dim(3))), skip1);
        for (auto& b : dec1_) f = b.forward(f, training);
        auto r = head_.forward(f);
        if (ph || pw) r = crop2d(r, 0, 0, h, w);
        return add(ilq, r);
    }

    int64_t count_params() const { return store_.count(); }

    // Per-block parameter counts keyed by the leading name segment; sums to
    // the total exactly.
    std::vector<std::pair<std::string, int64_t>> param_breakdown() const {
        std::vector<std::pair<std::string, int64_t>> rows;
        std::map<std::string, size_t> pos;
        for (const auto& p : store_.params()) {
            std::string key = p.name.substr(0, p.name.find('.'));
            auto it = pos.find(key);
            if (it == pos.end()) {
                pos[key] = rows.size();
                rows.push_back({key, p.value.numel()});
            } else {
                rows[it->second].second += p.value.numel();
            }
        }
        return rows;
    }

    ParamStore<T>& store() { return store_; }
    const ParamStore<T>& store() const { return store_; }
    const UHDResConfig& config() const { return cfg_; }
    int64_t polar_clamp_count() const { return *polar_clamps_; }

    // Structural handles used by tests.
    std::vector<Daeb<T>>& enc1() { return enc1_; }
    std::vector<Daeb<T>>& dec1() { return dec1_; }
    std::vector<Daeb<T>>& bottleneck() { return bottleneck_; }
    Conv2d<T>& head() { return head_; }
    Conv2d<T>& stem() { return stem_; }

private:
    UHDResConfig cfg_;
    ParamStore<T> store_;
    std::shared_ptr<std::atomic<int64_t>> polar_clamps_ = std::make_shared<std::atomic<int64_t>>(0);

    Conv2d<T> stem_;
    std::vector<Daeb<T>> enc1_;
    Conv2d<T> down1_;
    std::vector<Daeb<T>> enc2_;
    Conv2d<T> down2_;
    std::vector<Daeb<T>> bottleneck_;
    Conv2d<T> up2_;
    std::vector<Daeb<T>> dec2_;
    Conv2d<T> up1_;
    std::vector<Daeb<T>> dec1_;
    Conv2d<T> head_;
};

template <typename T>
UHDResModel<T> build(const UHDResConfig& cfg, uint64_t seed) {
    return UHDResModel<T>(cfg, seed);
}

}  // namespace uhdres
