// Command-line front end: train / infer / perturb / bench / params / selftest.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "uhdres/bench.hpp"
#include "uhdres/checkpoint.hpp"
#include "uhdres/config_file.hpp"
#include "uhdres/gradcheck.hpp"
#include "uhdres/trainer.hpp"

namespace fs = std::filesystem;
using namespace uhdres;

namespace {

std::vector<double> parse_double_list(const std::string& flag, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("flag '" + flag + "': cannot parse '" + item + "' as a number");
        }
    }
    if (out.empty()) throw ConfigError("flag '" + flag + "': expected a comma-separated list");
    return out;
}

std::vector<int64_t> parse_int_list(const std::string& flag, const std::string& text) {
    std::vector<int64_t> out;
    for (double v : parse_double_list(flag, text)) out.push_back(static_cast<int64_t>(v));
    return out;
}

int cmd_train(const std::string& data_dir, const std::string& out_dir, const std::string& config) {
    FileConfig cfg;
    if (!config.empty()) cfg = parse_config_file(config);
    auto dataset = load_paired_dataset<real_t>(data_dir);
    std::printf("loaded %zu training pairs from %s\n", dataset.size(), data_dir.c_str());

    UHDResModel<real_t> model{cfg.model, cfg.train.seed};
    std::printf("model parameters: %" PRId64 "\n", model.count_params());
    Trainer<real_t> trainer(model, cfg.train);
    auto result = trainer.run(dataset, out_dir, [&](const EvalPoint& ev) {
        std::printf("step %" PRId64 "/%" PRId64 "  l1=%.5f  psnr=%.2f dB\n", ev.step,
                    cfg.train.total_steps, ev.l1, ev.psnr_db);
        std::fflush(stdout);
        return false;
    });
    std::printf("finished after %" PRId64 " steps; log and checkpoints in %s\n", result.steps_run,
                out_dir.c_str());
    return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& in_path, const std::string& out_path) {
    auto model = load_checkpoint<real_t>(ckpt);
    auto img = image_to_tensor<real_t>(read_ppm(in_path));
    NoGrad<real_t> ng;
    auto restored = clamp(model.forward(img), real_t(0), real_t(1));
    write_ppm(tensor_to_image(restored), out_path);
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
}

int cmd_perturb(const std::string& images_dir, const std::string& eps_text,
                const std::string& seeds_text, const std::string& out_csv) {
    auto eps_grid = parse_double_list("--eps", eps_text);
    auto seed_list = parse_int_list("--seeds", seeds_text);
    std::vector<uint64_t> seeds(seed_list.begin(), seed_list.end());

    std::vector<std::pair<std::string, Tensor<double>>> images;
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(images_dir))
        if (entry.path().extension() == ".ppm") paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths)
        images.push_back({fs::path(p).stem().string(), image_to_tensor<double>(read_ppm(p))});
    if (images.empty()) throw ContractError("no .ppm images found in '" + images_dir + "'");

    auto rows = perturbation_experiment(images, eps_grid, seeds);
    std::ofstream out(out_csv);
    if (!out) throw IoError("cannot open output csv: " + out_csv);
    out << "image,component,eps,seed,psnr_db\n";
    for (const auto& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%s,%g,%" PRIu64 ",%.6f\n", r.image.c_str(),
                      component_name(r.component), r.eps, r.seed, r.psnr_db);
        out << buf;
    }
    std::printf("wrote %zu rows to %s\n", rows.size(), out_csv.c_str());
    return 0;
}

int cmd_bench(const std::string& ckpt, bool random_init, const std::string& sizes_text,
              const std::string& out_csv) {
    if (ckpt.empty() && !random_init)
        throw ConfigError("bench requires either --ckpt or --random-init");
    auto sizes = parse_int_list("--sizes", sizes_text);
    std::vector<std::pair<int64_t, int64_t>> resolutions;
    for (int64_t s : sizes) resolutions.push_back({s, s});

    std::vector<BenchRecord> records;
    if (!ckpt.empty()) {
        auto model = load_checkpoint<real_t>(ckpt);
        records = bench_forward(model, resolutions);
    } else {
        UHDResModel<real_t> model{UHDResConfig{}, 0};
        records = bench_forward(model, resolutions);
    }

    std::ofstream out(out_csv);
    if (!out) throw IoError("cannot open output csv: " + out_csv);
    out << "h,w,scale,latency_s,peak_mem_bytes,params\n";
    for (const auto& r : records) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%" PRId64 ",%" PRId64 ",%g,%.6f,%" PRId64 ",%" PRId64 "\n",
                      r.height, r.width, r.scale, r.latency_s, r.peak_mem_bytes, r.params);
        out << buf;
        std::printf("%s", buf);
    }
    std::printf("wrote %s (threads=%d)\n", out_csv.c_str(), thread_count());
    return 0;
}

int cmd_params(const std::string& config) {
    UHDResConfig cfg;
    if (!config.empty()) cfg = parse_config_file(config).model;
    UHDResModel<real_t> model{cfg, 0};
    for (const auto& [name, count] : model.param_breakdown())
        std::printf("%-12s %10" PRId64 "\n", name.c_str(), count);
    std::printf("%-12s %10" PRId64 "\n", "total", model.count_params());
    return 0;
}

// Invariant suites runnable from the shell; exits non-zero on any failure.
int cmd_selftest() {
    int passed = 0, failed = 0;
    auto report = [&](const char* name, bool ok, const std::string& detail = "") {
        std::printf("%-42s %s%s%s\n", name, ok ? "PASS" : "FAIL", detail.empty() ? "" : "  ",
                    detail.c_str());
        (ok ? passed : failed)++;
    };
    char detail[128];

    {
        SeededRng rng(1);
        double worst64 = 0, worst32 = 0;
        for (auto [h, w] : std::vector<std::pair<int64_t, int64_t>>{{16, 16}, {12, 20}, {17, 31}}) {
            auto x = Tensor<double>::uniform({1, 2, h, w}, 0.0, 1.0, rng);
            auto back = ifft2_real(fft2_real(x));
            for (int64_t i = 0; i < x.numel(); ++i)
                worst64 = std::max(worst64, std::abs(back.data()[i] - x.data()[i]));
            SeededRng rng32(2);
            auto xf = Tensor<float>::uniform({1, 2, h, w}, 0.0f, 1.0f, rng32);
            auto backf = ifft2_real(fft2_real(xf));
            for (int64_t i = 0; i < xf.numel(); ++i)
                worst32 = std::max(worst32, static_cast<double>(std::abs(backf.data()[i] - xf.data()[i])));
        }
        std::snprintf(detail, sizeof(detail), "max err f64=%.2e f32=%.2e", worst64, worst32);
        report("fft round trip", worst64 < 1e-10 && worst32 < 1e-5, detail);
    }
    {
        SeededRng rng(3);
        auto x = Tensor<double>::uniform({1, 1, 24, 18}, 0.0, 1.0, rng);
        auto z = fft2_real(x);
        int64_t wh = 18 / 2 + 1;
        double spatial = 0, spectral = 0;
        for (double v : x.data()) spatial += v * v;
        for (int64_t u = 0; u < 24; ++u)
            for (int64_t v = 0; v < wh; ++v) {
                double cv = (v == 0 || v == wh - 1) ? 1.0 : 2.0;
                double re = z.re.data()[u * wh + v], im = z.im.data()[u * wh + v];
                spectral += cv * (re * re + im * im);
            }
        spectral /= 24.0 * 18.0;
        double rel = std::abs(spectral - spatial) / spatial;
        std::snprintf(detail, sizeof(detail), "relative err %.2e", rel);
        report("Parseval identity", rel < 1e-4, detail);
    }
    {
        SeededRng rng(4);
        auto x = Tensor<double>::uniform({1, 2, 12, 12}, 0.0, 1.0, rng);
        auto z = fft2_real(x);
        auto z2 = polar_reconstruct(amplitude(z), phase(z), z.src_h, z.src_w);
        double worst = 0;
        for (int64_t i = 0; i < z.re.numel(); ++i) {
            worst = std::max(worst, std::abs(z.re.data()[i] - z2.re.data()[i]));
            worst = std::max(worst, std::abs(z.im.data()[i] - z2.im.data()[i]));
        }
        std::snprintf(detail, sizeof(detail), "max err %.2e", worst);
        report("polar reconstruction", worst < 1e-5, detail);
    }
    {
        struct BlockCheck {
            const char* name;
            std::function<GradCheckReport()> run;
        };
        SeededRng xr(5);
        auto x4 = Tensor<double>::uniform({1, 4, 8, 8}, -1.0, 1.0, xr);
        auto x8 = Tensor<double>::uniform({1, 8, 8, 8}, -1.0, 1.0, xr);
        auto clamps = std::make_shared<std::atomic<int64_t>>(0);
        std::vector<BlockCheck> checks;
        checks.push_back({"grad check: msca", [&] {
                              SeededRng rng(6);
                              ParamStore<double> store;
                              auto m = Msca<double>::make(store, "m", 4, 2, {3, 5, 7}, rng);
                              return grad_check(
                                  [&](const Tensor<double>& t) { return sum_all(m.forward(t)); }, x4);
                          }});
        checks.push_back({"grad check: samu", [&] {
                              SeededRng rng(7);
                              ParamStore<double> store;
                              auto m = Samu<double>::make(store, "m", 4, rng, clamps);
                              return grad_check(
                                  [&](const Tensor<double>& t) { return sum_all(m.forward(t)); }, x4);
                          }});
        checks.push_back({"grad check: sru", [&] {
                              SeededRng rng(8);
                              ParamStore<double> store;
                              auto m = Sru<double>::make(store, "m", 4, rng);
                              return grad_check(
                                  [&](const Tensor<double>& t) { return sum_all(m.forward(t)); }, x4);
                          }});
        checks.push_back({"grad check: dsmb", [&] {
                              SeededRng rng(9);
                              ParamStore<double> store;
                              auto m = Dsmb<double>::make(store, "m", 8, 4, 4, true, true, rng, clamps);
                              return grad_check(
                                  [&](const Tensor<double>& t) { return sum_all(m.forward(t)); }, x8);
                          }});
        checks.push_back({"grad check: sgfn", [&] {
                              SeededRng rng(10);
                              ParamStore<double> store;
                              auto m = Sgfn<double>::make(store, "m", 4, 11, rng);
                              return grad_check(
                                  [&](const Tensor<double>& t) { return sum_all(m.forward(t)); }, x4);
                          }});
        checks.push_back({"grad check: daeb", [&] {
                              SeededRng rng(11);
                              ParamStore<double> store;
                              typename Daeb<double>::Options opt;
                              auto m = Daeb<double>::make(store, "m", 4, opt, rng, clamps);
                              return grad_check(
                                  [&](const Tensor<double>& t) { return sum_all(m.forward(t, true)); },
                                  x4);
                          }});
        for (auto& c : checks) {
            auto rep = c.run();
            std::snprintf(detail, sizeof(detail), "max rel err %.2e", rep.max_rel_err);
            report(c.name, rep.pass, detail);
        }
    }
    {
        UHDResModel<real_t> model{UHDResConfig{}, 0};
        int strip_h = 0, sgfn_count = 0;
        for (const auto& p : model.store().params()) {
            if (p.name.find("sgfn.strip_h.weight") != std::string::npos) ++strip_h;
            if (p.name.find("sgfn.expand.weight") != std::string::npos) ++sgfn_count;
        }
        std::snprintf(detail, sizeof(detail), "%d strip pairs for %d sgfn blocks", strip_h, sgfn_count);
        report("sgfn weight sharing", strip_h == sgfn_count && strip_h > 0, detail);
    }
    {
        UHDResModel<real_t> model{UHDResConfig{}, 1};
        auto wh = model.head().weight;
        auto bh = model.head().bias;
        std::fill(wh.data().begin(), wh.data().end(), real_t(0));
        std::fill(bh.data().begin(), bh.data().end(), real_t(0));
        SeededRng rng(12);
        auto x = Tensor<real_t>::uniform({1, 3, 24, 24}, real_t(0), real_t(1), rng);
        NoGrad<real_t> ng;
        auto y = model.forward(x);
        bool same = true;
        for (int64_t i = 0; i < x.numel(); ++i) same = same && (y.data()[i] == x.data()[i]);
        report("residual identity at zero head", same);
    }
    {
        UHDResModel<real_t> model{UHDResConfig{}, 2};
        SeededRng rng(13);
        auto x = Tensor<real_t>::uniform({1, 3, 16, 16}, real_t(0), real_t(1), rng);
        NoGrad<real_t> ng;
        auto before = model.forward(x);
        std::string path = (fs::temp_directory_path() / "uhdres_selftest.ckpt").string();
        save_checkpoint(model, path);
        auto loaded = load_checkpoint<real_t>(path);
        auto after = loaded.forward(x);
        bool same = true;
        for (int64_t i = 0; i < before.numel(); ++i) same = same && (before.data()[i] == after.data()[i]);
        fs::remove(path);
        report("checkpoint round trip", same);
    }

    std::printf("selftest: %d/%d passed\n", passed, passed + failed);
    return failed == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uhdres: dual-domain spectral-modulation image restoration"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "train on a paired lq/gt dataset");
    std::string train_data, train_out, train_config;
    train->add_option("--data", train_data, "dataset root containing lq/ and gt/")->required();
    train->add_option("--out", train_out, "output directory for logs and checkpoints")->required();
    train->add_option("--config", train_config, "key=value config file");

    auto* infer = app.add_subcommand("infer", "restore a single image");
    std::string infer_ckpt, infer_in, infer_out;
    infer->add_option("--ckpt", infer_ckpt, "model checkpoint")->required();
    infer->add_option("--in", infer_in, "input .ppm image")->required();
    infer->add_option("--out", infer_out, "output .ppm image")->required();

    auto* perturb = app.add_subcommand("perturb", "amplitude/phase sensitivity experiment");
    std::string pert_images, pert_eps = "0.1,0.2,0.3", pert_seeds = "1,2,3", pert_out;
    perturb->add_option("--images", pert_images, "directory of .ppm images")->required();
    perturb->add_option("--eps", pert_eps, "comma-separated perturbation levels");
    perturb->add_option("--seeds", pert_seeds, "comma-separated seeds");
    perturb->add_option("--out", pert_out, "output csv path")->required();

    auto* bench = app.add_subcommand("bench", "latency / peak-memory sweep");
    std::string bench_ckpt, bench_sizes = "128,256,512", bench_out;
    bool bench_random = false;
    bench->add_option("--ckpt", bench_ckpt, "model checkpoint");
    bench->add_flag("--random-init", bench_random, "bench a freshly initialized default model");
    bench->add_option("--sizes", bench_sizes, "comma-separated square resolutions");
    bench->add_option("--out", bench_out, "output csv path")->required();

    auto* params = app.add_subcommand("params", "print parameter counts");
    std::string params_config;
    params->add_option("--config", params_config, "key=value config file");

    app.add_subcommand("selftest", "run gradient and spectral invariant suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (app.got_subcommand("train")) return cmd_train(train_data, train_out, train_config);
        if (app.got_subcommand("infer")) return cmd_infer(infer_ckpt, infer_in, infer_out);
        if (app.got_subcommand("perturb"))
            return cmd_perturb(pert_images, pert_eps, pert_seeds, pert_out);
        if (app.got_subcommand("bench"))
            return cmd_bench(bench_ckpt, bench_random, bench_sizes, bench_out);
        if (app.got_subcommand("params")) return cmd_params(params_config);
        if (app.got_subcommand("selftest")) return cmd_selftest();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
