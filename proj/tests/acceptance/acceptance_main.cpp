// Acceptance suite: one criterion per function, one PASS/FAIL line each.
// Exit code 0 iff every criterion passes.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "../support.hpp"
#include "uhdres/bench.hpp"
#include "uhdres/checkpoint.hpp"
#include "uhdres/gradcheck.hpp"
#include "uhdres/trainer.hpp"

using namespace uhdres;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// --- A1: parameter budget and kernel-variant ordering -----------------------

Outcome a1_parameter_budget() {
    UHDResModel<float> def{UHDResConfig{}, 0};
    int64_t total = def.count_params();
    constexpr int64_t kReference = 401220;
    bool in_band = total >= kReference * 85 / 100 && total <= kReference * 115 / 100;

    UHDResConfig small_cfg;
    small_cfg.msca_kernels = {3, 7, 11};
    UHDResConfig big_cfg;
    big_cfg.msca_kernels = {7, 13, 19};
    int64_t small = UHDResModel<float>(small_cfg, 0).count_params();
    int64_t big = UHDResModel<float>(big_cfg, 0).count_params();
    bool ordered = small < total && total < big;

    int64_t breakdown_sum = 0;
    for (const auto& [name, cnt] : def.param_breakdown()) breakdown_sum += cnt;

    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "total=%lld (band %lld..%lld), variants %lld < %lld < %lld, breakdown sum %s",
                  (long long)total, (long long)(kReference * 85 / 100),
                  (long long)(kReference * 115 / 100), (long long)small, (long long)total,
                  (long long)big, breakdown_sum == total ? "exact" : "MISMATCH");
    return {in_band && ordered && breakdown_sum == total, buf};
}

// --- A2: finite-difference gradient checks ----------------------------------

Outcome a2_gradient_correctness() {
    double worst_block = 0.0, worst_model = 0.0;
    bool ok = true;
    for (uint64_t seed : {1u, 2u, 3u}) {
        SeededRng xr(seed * 977);
        auto x4 = Tensor<double>::uniform({1, 4, 8, 8}, -1.0, 1.0, xr);
        auto x8 = Tensor<double>::uniform({1, 8, 8, 8}, -1.0, 1.0, xr);
        auto clamps = std::make_shared<std::atomic<int64_t>>(0);

        auto check = [&](const std::function<Tensor<double>(const Tensor<double>&)>& f,
                         const Tensor<double>& x, double tol) {
            auto rep = grad_check(f, x.clone(), 1e-5, tol);
            worst_block = std::max(worst_block, rep.max_rel_err);
            ok = ok && rep.pass;
        };

        {
            SeededRng rng(seed);
            ParamStore<double> store;
            auto m = Msca<double>::make(store, "m", 4, 2, {3, 5, 7}, rng);
            check([&](const Tensor<double>& t) { return sum_all(m.forward(t)); }, x4, 1e-4);
        }
        {
            SeededRng rng(seed + 10);
            ParamStore<double> store;
            auto m = Samu<double>::make(store, "m", 4, rng, clamps);
            check([&](const Tensor<double>& t) { return sum_all(m.forward(t)); }, x4, 1e-4);
        }
        {
            SeededRng rng(seed + 20);
            ParamStore<double> store;
            auto m = Sru<double>::make(store, "m", 4, rng);
            check([&](const Tensor<double>& t) { return sum_all(m.forward(t)); }, x4, 1e-4);
        }
        {
            SeededRng rng(seed + 30);
            ParamStore<double> store;
            auto m = Dsmb<double>::make(store, "m", 8, 4, 4, true, true, rng, clamps);
            check([&](const Tensor<double>& t) { return sum_all(m.forward(t)); }, x8, 1e-4);
        }
        {
            SeededRng rng(seed + 40);
            ParamStore<double> store;
            auto m = Ssfm<double>::make(store, "m", 4, 2, {3, 5, 7}, 4, true, true, true, rng, clamps);
            check([&](const Tensor<double>& t) { return sum_all(m.forward(t)); }, x4, 1e-4);
        }
        {
            SeededRng rng(seed + 50);
            ParamStore<double> store;
            auto m = Sgfn<double>::make(store, "m", 4, 11, rng);
            check([&](const Tensor<double>& t) { return sum_all(m.forward(t)); }, x4, 1e-4);
        }
        {
            SeededRng rng(seed + 60);
            ParamStore<double> store;
            typename Daeb<double>::Options opt;
            auto m = Daeb<double>::make(store, "m", 4, opt, rng, clamps);
            check([&](const Tensor<double>& t) { return sum_all(m.forward(t, true)); }, x4, 1e-4);
        }
        {
            UHDResModel<double> model{UHDResConfig{}, seed};
            SeededRng rng(seed * 31);
            auto x = Tensor<double>::uniform({1, 3, 16, 16}, 0.0, 1.0, rng);
            auto rep = grad_check(
                [&](const Tensor<double>& t) { return mean_all(model.forward(t)); }, x, 1e-5, 1e-3);
            worst_model = std::max(worst_model, rep.max_rel_err);
            ok = ok && rep.pass;
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "worst block rel err %.2e (tol 1e-4), full model %.2e (tol 1e-3)",
                  worst_block, worst_model);
    return {ok, buf};
}

// --- A3: single-pair trainability --------------------------------------------

Outcome a3_trainability() {
    auto scenes = testsupport::make_test_images<float>(1, 64, 64);
    PairedSample<float> pair;
    pair.gt = scenes[0].second;
    SeededRng degrade_rng(0);
    pair.lq = synth_degrade(pair.gt, DegradeKind::Lowlight, 2.5, 0.01, degrade_rng);
    pair.id = "synthetic";
    double start_psnr = psnr(pair.lq, pair.gt);

    UHDResModel<float> model{UHDResConfig{}, 0};
    TrainConfig cfg;
    cfg.patch_size = 64;
    cfg.batch_size = 1;
    cfg.total_steps = 2000;
    cfg.seed = 0;
    cfg.eval_every = 25;
    cfg.checkpoint_every = 100000;  // no checkpoints needed here
    Trainer<float> trainer(model, cfg);

    double best_psnr = 0.0, best_l1 = 1.0;
    auto result = trainer.run({pair}, "", [&](const EvalPoint& ev) {
        best_psnr = std::max(best_psnr, ev.psnr_db);
        best_l1 = std::min(best_l1, ev.l1);
        return ev.l1 < 0.02 && ev.psnr_db >= 30.0;
    });
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "after %lld steps: l1=%.4f (<0.02), psnr=%.2f dB (>=30; lq was %.2f dB)",
                  (long long)result.steps_run, best_l1, best_psnr, start_psnr);
    return {best_l1 < 0.02 && best_psnr >= 30.0, buf};
}

// --- A4: amplitude/phase sensitivity ordering --------------------------------

Outcome a4_perturbation_ordering() {
    auto images = testsupport::make_test_images<double>(5, 64, 64);
    std::vector<double> eps_grid = {0.1, 0.2, 0.3};
    auto rows = perturbation_experiment(images, eps_grid, {1, 2, 3});

    auto mean_of = [&](SpectrumComponent comp, double eps) {
        double sum = 0;
        int n = 0;
        for (const auto& r : rows)
            if (r.component == comp && r.eps == eps) {
                sum += r.psnr_db;
                ++n;
            }
        return sum / n;
    };

    bool ordered = true, monotone = true;
    std::string detail;
    double prev_amp = 1e9, prev_ph = 1e9;
    for (double eps : eps_grid) {
        double am = mean_of(SpectrumComponent::Amplitude, eps);
        double pm = mean_of(SpectrumComponent::Phase, eps);
        ordered = ordered && pm < am;
        monotone = monotone && am <= prev_amp + 1e-9 && pm <= prev_ph + 1e-9;
        prev_amp = am;
        prev_ph = pm;
        char buf[80];
        std::snprintf(buf, sizeof(buf), "eps %.1f: amp %.2f / phase %.2f dB; ", eps, am, pm);
        detail += buf;
    }
    return {ordered && monotone, detail};
}

// --- A5: spectral identities --------------------------------------------------

Outcome a5_spectral_identities() {
    SeededRng rng(5);
    double worst64 = 0, worst32 = 0, worst_polar = 0, worst_parseval = 0;
    std::vector<std::pair<int64_t, int64_t>> sizes = {{8, 8},   {16, 16}, {31, 17}, {64, 64},
                                                      {63, 61}, {40, 24}, {9, 64}};
    for (auto [h, w] : sizes) {
        auto x = Tensor<double>::uniform({1, 2, h, w}, 0.0, 1.0, rng);
        auto z = fft2_real(x);
        auto back = ifft2_real(z);
        for (int64_t i = 0; i < x.numel(); ++i)
            worst64 = std::max(worst64, std::abs(back.data()[i] - x.data()[i]));

        SeededRng rng32(static_cast<uint64_t>(h * w));
        auto xf = Tensor<float>::uniform({1, 2, h, w}, 0.0f, 1.0f, rng32);
        auto backf = ifft2_real(fft2_real(xf));
        for (int64_t i = 0; i < xf.numel(); ++i)
            worst32 = std::max(worst32, static_cast<double>(std::abs(backf.data()[i] - xf.data()[i])));

        auto z2 = polar_reconstruct(amplitude(z), phase(z), z.src_h, z.src_w);
        for (int64_t i = 0; i < z.re.numel(); ++i) {
            worst_polar = std::max(worst_polar, std::abs(z.re.data()[i] - z2.re.data()[i]));
            worst_polar = std::max(worst_polar, std::abs(z.im.data()[i] - z2.im.data()[i]));
        }

        int64_t wh = w / 2 + 1;
        double spatial = 0, spectral = 0;
        for (double v : x.data()) spatial += v * v;
        for (int64_t c = 0; c < 2; ++c)
            for (int64_t u = 0; u < h; ++u)
                for (int64_t v = 0; v < wh; ++v) {
                    double cv = (v == 0 || (w % 2 == 0 && v == wh - 1)) ? 1.0 : 2.0;
                    double re = z.re.data()[(c * h + u) * wh + v];
                    double im = z.im.data()[(c * h + u) * wh + v];
                    spectral += cv * (re * re + im * im);
                }
        spectral /= static_cast<double>(h * w);
        worst_parseval = std::max(worst_parseval, std::abs(spectral - spatial) / spatial);
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "roundtrip f64 %.1e (<1e-10), f32 %.1e (<1e-5), polar %.1e (<1e-5), parseval %.1e (<1e-4)",
                  worst64, worst32, worst_polar, worst_parseval);
    return {worst64 < 1e-10 && worst32 < 1e-5 && worst_polar < 1e-5 && worst_parseval < 1e-4, buf};
}

// --- A6: efficiency scaling ---------------------------------------------------

Outcome a6_efficiency_scaling() {
    UHDResModel<float> model{UHDResConfig{}, 0};
    auto records = bench_forward(model, {{128, 128}, {256, 256}, {512, 512}});
    bool monotone = records[0].latency_s < records[1].latency_s &&
                    records[1].latency_s < records[2].latency_s;
    double ratio = records[2].latency_s / records[1].latency_s;

    int64_t param_bytes = model.count_params() * static_cast<int64_t>(sizeof(float));
    double act1 = static_cast<double>(records[1].peak_mem_bytes - param_bytes);
    double act0 = static_cast<double>(records[0].peak_mem_bytes - param_bytes);
    double act2 = static_cast<double>(records[2].peak_mem_bytes - param_bytes);
    double mem_ratio_a = act1 / act0;
    double mem_ratio_b = act2 / act1;
    bool mem_ok = mem_ratio_a > 3.5 && mem_ratio_a < 4.5 && mem_ratio_b > 3.5 && mem_ratio_b < 4.5;

    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "latency %.2f/%.2f/%.2f s, t(512)/t(256)=%.2f (<=5), activation x%.2f and x%.2f per doubling",
                  records[0].latency_s, records[1].latency_s, records[2].latency_s, ratio,
                  mem_ratio_a, mem_ratio_b);
    return {monotone && ratio <= 5.0 && mem_ok, buf};
}

// --- A7: ablation plumbing ----------------------------------------------------

Outcome a7_ablation_plumbing() {
    UHDResModel<float> full{UHDResConfig{}, 0};
    SeededRng rng(7);
    auto x = Tensor<float>::uniform({1, 3, 24, 24}, 0.0f, 1.0f, rng);
    bool ok = true;
    std::string detail;
    const char* names[4] = {"msca", "samu", "sru", "sgfn"};
    for (int knock = 0; knock < 4; ++knock) {
        UHDResConfig cfg;
        cfg.use_msca = knock != 0;
        cfg.use_samu = knock != 1;
        cfg.use_sru = knock != 2;
        cfg.use_sgfn = knock != 3;
        UHDResModel<float> m{cfg, 0};
        bool shape_ok = m.forward(x).shape() == x.shape();
        bool smaller = m.count_params() < full.count_params();
        ok = ok && shape_ok && smaller;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "-%s: %lld params; ", names[knock],
                      (long long)m.count_params());
        detail += buf;
    }
    detail += "full: " + std::to_string(full.count_params());
    return {ok, detail};
}

// --- A8: determinism and persistence -----------------------------------------

Outcome a8_determinism_persistence() {
    auto scenes = testsupport::make_test_images<float>(1, 32, 32);
    PairedSample<float> pair;
    pair.gt = scenes[0].second;
    SeededRng rng(0);
    pair.lq = synth_degrade(pair.gt, DegradeKind::Lowlight, 2.5, 0.01, rng);
    pair.id = "synthetic";

    TrainConfig cfg;
    cfg.patch_size = 32;
    cfg.batch_size = 1;
    cfg.total_steps = 50;
    cfg.seed = 0;
    cfg.eval_every = 50;
    cfg.checkpoint_every = 25;

    fs::path dir1 = fs::temp_directory_path() / "uhdres_accept_a";
    fs::path dir2 = fs::temp_directory_path() / "uhdres_accept_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    UHDResModel<float> m1{UHDResConfig{}, 0};
    Trainer<float> t1(m1, cfg);
    auto r1 = t1.run({pair}, dir1.string());
    UHDResModel<float> m2{UHDResConfig{}, 0};
    Trainer<float> t2(m2, cfg);
    auto r2 = t2.run({pair}, dir2.string());

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    bool logs_identical = slurp(dir1 / "log.csv") == slurp(dir2 / "log.csv") && !r1.rows.empty();

    // checkpoint round trip: bitwise-identical forward outputs
    SeededRng xr(1);
    auto probe = Tensor<float>::uniform({1, 3, 32, 32}, 0.0f, 1.0f, xr);
    auto before = m1.forward(probe);
    auto loaded = load_checkpoint<float>((dir1 / "model_latest.ckpt").string());
    auto after = loaded.forward(probe);
    bool ckpt_bitwise = true;
    for (int64_t i = 0; i < before.numel(); ++i)
        ckpt_bitwise = ckpt_bitwise && (before.data()[i] == after.data()[i]);

    // resume at step 25 reproduces steps 25..49 bitwise
    auto resumed_model = load_checkpoint<float>((dir1 / "model_step25.ckpt").string());
    Trainer<float> t3(resumed_model, cfg);
    t3.restore_state((dir1 / "trainstate_step25.ckpt").string());
    auto r3 = t3.run({pair});
    bool resume_bitwise = r3.rows.size() == 25;
    for (size_t i = 0; resume_bitwise && i < r3.rows.size(); ++i) {
        resume_bitwise = r3.rows[i].step == r1.rows[25 + i].step &&
                         r3.rows[i].l_total == r1.rows[25 + i].l_total &&
                         r3.rows[i].l_pixel == r1.rows[25 + i].l_pixel &&
                         r3.rows[i].l_freq == r1.rows[25 + i].l_freq;
    }

    fs::remove_all(dir1);
    fs::remove_all(dir2);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "logs %s, checkpoint %s, resume %s",
                  logs_identical ? "bitwise" : "DIFFER", ckpt_bitwise ? "bitwise" : "DIFFER",
                  resume_bitwise ? "bitwise" : "DIFFER");
    return {logs_identical && ckpt_bitwise && resume_bitwise, buf};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    std::vector<Criterion> criteria = {
        {"A1 parameter budget", a1_parameter_budget},
        {"A2 gradient correctness", a2_gradient_correctness},
        {"A3 trainability", a3_trainability},
        {"A4 perturbation ordering", a4_perturbation_ordering},
        {"A5 spectral identities", a5_spectral_identities},
        {"A6 efficiency scaling", a6_efficiency_scaling},
        {"A7 ablation plumbing", a7_ablation_plumbing},
        {"A8 determinism and persistence", a8_determinism_persistence},
    };

    int failures = 0;
    for (auto& c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%-32s %s  [%.1fs]  %s\n", c.name, out.pass ? "PASS" : "FAIL", secs,
                    out.detail.c_str());
        std::fflush(stdout);
        if (!out.pass) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
