#pragma once

#include <algorithm>
#include <chrono>

#include "uhdres/model.hpp"

namespace uhdres {

struct BenchRecord {
    int64_t height = 0;
    int64_t width = 0;
    double scale = 1.0;  // linear scale factor relative to the first entry
    double latency_s = 0.0;
    int64_t peak_mem_bytes = 0;
    int64_t params = 0;
};

// Eval-mode forward timing: `warmup` runs discarded, median of `repeats`
// reported. Peak memory is the live-tensor high-water mark during one
// forward (parameters included, so the estimate is always >= parameter
// bytes); it is an analytic count of tensor payloads, not allocator traffic,
// so it is identical across platforms and runs.
template <typename T>
std::vector<BenchRecord> bench_forward(UHDResModel<T>& model,
                                       const std::vector<std::pair<int64_t, int64_t>>& resolutions,
                                       int warmup = 3, int repeats = 7) {
    check_contract(!resolutions.empty(), "bench_forward requires at least one resolution");
    for (auto [h, w] : resolutions)
        check_contract(h >= 8 && w >= 8, "bench resolutions must be >= 8, got " +
                                             std::to_string(h) + "x" + std::to_string(w));
    check_contract(repeats >= 1, "bench repeats must be >= 1");

    std::vector<BenchRecord> records;
    double base_pixels = 0.0;
    for (auto [h, w] : resolutions) {
        SeededRng rng(0);
        Tensor<T> input;
        {
            NoGrad<T> ng;
            input = Tensor<T>::uniform({1, 3, h, w}, T(0), T(1), rng);
        }

        NoGrad<T> ng;
        for (int i = 0; i < warmup; ++i) model.forward(input);

        MemTracker::reset_peak();
        std::vector<double> times;
        for (int i = 0; i < repeats; ++i) {
            auto t0 = std::chrono::steady_clock::now();
            auto out = model.forward(input);
            auto t1 = std::chrono::steady_clock::now();
            times.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        std::sort(times.begin(), times.end());
        double median = times[times.size() / 2];
        if (times.size() % 2 == 0) median = 0.5 * (median + times[times.size() / 2 - 1]);

        BenchRecord rec;
        rec.height = h;
        rec.width = w;
        double pixels = static_cast<double>(h) * static_cast<double>(w);
        if (records.empty()) base_pixels = pixels;
        rec.scale = std::sqrt(pixels / base_pixels);
        rec.latency_s = median;
        rec.peak_mem_bytes = MemTracker::peak_bytes();
        rec.params = model.count_params();
        records.push_back(rec);
    }
    return records;
}

}  // namespace uhdres
