#pragma once

#include <filesystem>

#include "uhdres/conv.hpp"
#include "uhdres/image.hpp"

namespace uhdres {

// A degraded/clean training pair in normalized channel-first layout.
template <typename T>
struct PairedSample {
    Tensor<T> lq;
    Tensor<T> gt;
    std::string id;
};

// Loads `<root>/lq/<id>.ppm` paired with `<root>/gt/<id>.ppm` by identical
// stem, sorted by id for a stable order.
template <typename T>
std::vector<PairedSample<T>> load_paired_dataset(const std::string& root) {
    namespace fs = std::filesystem;
    fs::path lq_dir = fs::path(root) / "lq";
    fs::path gt_dir = fs::path(root) / "gt";
    if (!fs::is_directory(lq_dir) || !fs::is_directory(gt_dir))
        throw IoError("dataset root must contain lq/ and gt/ directories: " + root);
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(lq_dir))
        if (entry.path().extension() == ".ppm") ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
    std::vector<PairedSample<T>> out;
    for (const auto& id : ids) {
        fs::path gt_path = gt_dir / (id + ".ppm");
        if (!fs::exists(gt_path)) throw IoError("missing gt pair for id '" + id + "'");
        PairedSample<T> s;
        s.lq = image_to_tensor<T>(read_ppm((lq_dir / (id + ".ppm")).string()));
        s.gt = image_to_tensor<T>(read_ppm(gt_path.string()));
        check_shape(s.lq.shape() == s.gt.shape(), "lq/gt extents differ for id '" + id + "'");
        s.id = id;
        out.push_back(std::move(s));
    }
    return out;
}

// Samples aligned square crops, uniform over valid offsets.
template <typename T>
struct PatchSampler {
    int64_t patch;
    SeededRng rng;

    PatchSampler(int64_t patch_size, uint64_t seed) : patch(patch_size), rng(seed) {}
    PatchSampler(int64_t patch_size, const SeededRng& state) : patch(patch_size), rng(state) {}

    std::pair<Tensor<T>, Tensor<T>> sample(const PairedSample<T>& s) {
        int64_t h = s.lq.dim(2), w = s.lq.dim(3);
        check_contract(patch <= h && patch <= w,
                       "patch size " + std::to_string(patch) + " exceeds image extents");
        int64_t oy = (h == patch) ? 0 : static_cast<int64_t>(rng.below(static_cast<uint64_t>(h - patch + 1)));
        int64_t ox = (w == patch) ? 0 : static_cast<int64_t>(rng.below(static_cast<uint64_t>(w - patch + 1)));
        return {crop2d(s.lq, oy, ox, patch, patch), crop2d(s.gt, oy, ox, patch, patch)};
    }
};

enum class DegradeKind { Lowlight, Blur, GaussianNoise };

// Synthetic degradations so training demos need no external datasets.
//   lowlight(gamma, read_noise): lq = clamp(gt^gamma + noise)
//   blur(sigma):                 Gaussian kernel, reflect padding
//   gaussian_noise(sigma):       additive clipped noise
template <typename T>
Tensor<T> synth_degrade(const Tensor<T>& gt, DegradeKind kind, double p1, double p2,
                        SeededRng& rng) {
    NoGrad<T> ng;
    switch (kind) {
        case DegradeKind::Lowlight: {
            check_contract(p1 > 0, "lowlight gamma must be positive");
            check_contract(p2 >= 0, "read noise must be non-negative");
            Tensor<T> out = Tensor<T>::zeros(gt.shape());
            const T* src = gt.ptr();
            T* dst = out.ptr();
            for (int64_t i = 0; i < gt.numel(); ++i) {
                double v = std::pow(static_cast<double>(src[i]), p1);
                if (p2 > 0) v += rng.normal(0.0, p2);
                dst[i] = static_cast<T>(std::min(1.0, std::max(0.0, v)));
            }
            return out;
        }
        case DegradeKind::Blur: {
            check_contract(p1 > 0, "blur sigma must be positive");
            int64_t radius = static_cast<int64_t>(std::ceil(3.0 * p1));
            int64_t k = 2 * radius + 1;
            Tensor<T> kernel = Tensor<T>::zeros({gt.dim(1), 1, k, k});
            double sum = 0.0;
            std::vector<double> g(static_cast<size_t>(k * k));
            for (int64_t r = 0; r < k; ++r)
                for (int64_t s = 0; s < k; ++s) {
                    double dy = static_cast<double>(r - radius), dx = static_cast<double>(s - radius);
                    g[static_cast<size_t>(r * k + s)] = std::exp(-(dy * dy + dx * dx) / (2 * p1 * p1));
                    sum += g[static_cast<size_t>(r * k + s)];
                }
            for (int64_t c = 0; c < gt.dim(1); ++c)
                for (int64_t i = 0; i < k * k; ++i)
                    kernel.data()[c * k * k + i] = static_cast<T>(g[static_cast<size_t>(i)] / sum);
            auto blurred = conv2d(gt, kernel, Tensor<T>(), 1, PadMode::Reflect, gt.dim(1));
            return clamp(blurred, T(0), T(1));
        }
        case DegradeKind::GaussianNoise: {
            check_contract(p1 > 0, "noise sigma must be positive");
            Tensor<T> out = Tensor<T>::zeros(gt.shape());
            const T* src = gt.ptr();
            T* dst = out.ptr();
            for (int64_t i = 0; i < gt.numel(); ++i) {
                double v = static_cast<double>(src[i]) + rng.normal(0.0, p1);
                dst[i] = static_cast<T>(std::min(1.0, std::max(0.0, v)));
            }
            return out;
        }
    }
    throw ContractError("unknown degradation kind");
}

}  // namespace uhdres
