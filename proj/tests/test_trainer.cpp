#include <doctest.h>

#include <filesystem>

#include "support.hpp"
#include "uhdres/trainer.hpp"

using namespace uhdres;
namespace fs = std::filesystem;

namespace {

// A tiny overfit dataset: one structured 32x32 pair with a lowlight lq.
std::vector<PairedSample<float>> tiny_dataset() {
    auto scenes = testsupport::make_test_images<float>(1, 32, 32);
    PairedSample<float> s;
    s.gt = scenes[0].second;
    SeededRng rng(42);
    s.lq = synth_degrade(s.gt, DegradeKind::Lowlight, 2.5, 0.01, rng);
    s.id = scenes[0].first;
    return {s};
}

TrainConfig tiny_config(int64_t steps) {
    TrainConfig cfg;
    cfg.patch_size = 32;
    cfg.batch_size = 1;
    cfg.total_steps = steps;
    cfg.seed = 0;
    cfg.eval_every = 10;
    cfg.checkpoint_every = 5;
    return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("cosine schedule hits both endpoints exactly") {
    CosineSchedule s{5e-4, 1e-7, 1000};
    CHECK(s.lr_at(0) == 5e-4);
    CHECK(s.lr_at(1000) == 1e-7);
    CHECK(s.lr_at(500) == doctest::Approx((5e-4 + 1e-7) / 2).epsilon(1e-12));
    double prev = 1e9;
    for (int64_t k = 0; k <= 1000; k += 50) {
        double lr = s.lr_at(k);
        CHECK(lr <= prev + 1e-18);
        prev = lr;
    }
    CHECK_THROWS_AS(s.lr_at(-1), ContractError);
    CHECK_THROWS_AS(s.lr_at(1001), ContractError);
}

TEST_CASE("adamw update rules") {
    SeededRng rng(1);
    ParamStore<float> store;
    auto w = store.add_param("w", Tensor<float>::full({1}, 2.0f), /*decay=*/false);
    auto& params = store.params();

    SUBCASE("zero gradient, zero decay leaves parameters unchanged") {
        AdamW<float> opt(AdamWOptions{0.9, 0.999, 1e-8, 0.0, 0.0});
        opt.step(params, 0.1);
        CHECK(w.data()[0] == 2.0f);
    }

    SUBCASE("first step with unit gradient moves by about lr") {
        AdamW<float> opt(AdamWOptions{0.9, 0.999, 1e-8, 0.0, 0.0});
        w.grad()[0] = 1.0f;
        opt.step(params, 0.01);
        CHECK(w.data()[0] == doctest::Approx(2.0 - 0.01).epsilon(1e-4));
        // gradients are zeroed afterwards
        CHECK(w.grad()[0] == 0.0f);
    }

    SUBCASE("pure decoupled decay") {
        params[0].decay = true;
        AdamW<float> opt(AdamWOptions{0.9, 0.999, 1e-8, 0.5, 0.0});
        opt.step(params, 0.1);
        CHECK(w.data()[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 0.5)).epsilon(1e-6));
    }

    SUBCASE("non-finite gradients abort the step with a named diagnostic") {
        AdamW<float> opt;
        w.grad()[0] = std::numeric_limits<float>::quiet_NaN();
        try {
            opt.step(params, 0.1);
            FAIL("expected ContractError");
        } catch (const ContractError& e) {
            CHECK(std::string(e.what()).find("'w'") != std::string::npos);
        }
    }
}

TEST_CASE("adamw is bitwise deterministic") {
    auto run = [&]() {
        SeededRng rng(2);
        ParamStore<float> store;
        auto w = store.add_param("w", Tensor<float>::uniform({16}, -1.0f, 1.0f, rng), true);
        AdamW<float> opt;
        for (int k = 0; k < 5; ++k) {
            for (size_t i = 0; i < 16; ++i)
                w.grad()[i] = static_cast<float>(0.1 * (static_cast<double>(i) - 8.0 + k));
            opt.step(store.params(), 1e-3);
        }
        return std::vector<float>(w.data().begin(), w.data().end());
    };
    CHECK(run() == run());
}

TEST_CASE("training loop is deterministic and logs the documented schema") {
    auto ds = tiny_dataset();
    auto run = [&](const std::string& dir) {
        UHDResModel<float> model{UHDResConfig{}, 0};
        Trainer<float> trainer(model, tiny_config(12));
        return trainer.run(ds, dir);
    };
    fs::path dir1 = "/tmp/uhdres_train_a", dir2 = "/tmp/uhdres_train_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    auto r1 = run(dir1.string());
    auto r2 = run(dir2.string());
    REQUIRE(r1.rows.size() == 12);
    for (size_t i = 0; i < r1.rows.size(); ++i) {
        CHECK(r1.rows[i].l_total == r2.rows[i].l_total);
        CHECK(r1.rows[i].l_pixel == r2.rows[i].l_pixel);
        CHECK(r1.rows[i].lr == r2.rows[i].lr);
    }

    // log files are byte-identical and carry the documented header
    std::ifstream f1(dir1 / "log.csv"), f2(dir2 / "log.csv");
    std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(c1 == c2);
    CHECK(c1.rfind("step,lr,l_pixel,l_freq,l_total\n", 0) == 0);

    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("the first log row equals the loss of the initial model") {
    auto ds = tiny_dataset();
    UHDResModel<float> model{UHDResConfig{}, 0};
    // reproduce the loss the trainer should see at step 0 (same rng path)
    double expected;
    {
        UHDResModel<float> probe{UHDResConfig{}, 0};
        Recording<float> rec;
        auto pred = probe.forward(ds[0].lq, true);
        expected = static_cast<double>(total_loss(pred, ds[0].gt, 0.1f).total.item());
    }
    Trainer<float> trainer(model, tiny_config(1));
    auto res = trainer.run(ds);
    REQUIRE(res.rows.size() == 1);
    CHECK(res.rows[0].l_total == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("empty datasets are rejected") {
    UHDResModel<float> model{UHDResConfig{}, 0};
    Trainer<float> trainer(model, tiny_config(2));
    std::vector<PairedSample<float>> empty;
    CHECK_THROWS_AS(trainer.run(empty), ContractError);
}

TEST_CASE("resuming from a checkpoint replays the uninterrupted run bitwise") {
    auto ds = tiny_dataset();
    fs::path dir = "/tmp/uhdres_train_resume";
    fs::remove_all(dir);

    // uninterrupted run of 10 steps, checkpoint every 5
    UHDResModel<float> model{UHDResConfig{}, 0};
    Trainer<float> trainer(model, tiny_config(10));
    auto full = trainer.run(ds, dir.string());
    REQUIRE(full.rows.size() == 10);

    // resume from step 5
    auto resumed_model = load_checkpoint<float>((dir / "model_step5.ckpt").string());
    Trainer<float> resumed(resumed_model, tiny_config(10));
    resumed.restore_state((dir / "trainstate_step5.ckpt").string());
    CHECK(resumed.step() == 5);
    auto rest = resumed.run(ds);
    REQUIRE(rest.rows.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(rest.rows[i].step == full.rows[5 + i].step);
        CHECK(rest.rows[i].l_total == full.rows[5 + i].l_total);
        CHECK(rest.rows[i].l_pixel == full.rows[5 + i].l_pixel);
        CHECK(rest.rows[i].l_freq == full.rows[5 + i].l_freq);
    }
    fs::remove_all(dir);
}

TEST_CASE("short training reduces the loss on a tiny pair") {
    auto ds = tiny_dataset();
    UHDResModel<float> model{UHDResConfig{}, 0};
    TrainConfig cfg = tiny_config(60);
    cfg.lr_max = 1e-3;
    Trainer<float> trainer(model, cfg);
    auto res = trainer.run(ds);
    double head = 0, tail = 0;
    for (int i = 0; i < 5; ++i) {
        head += res.rows[static_cast<size_t>(i)].l_total;
        tail += res.rows[res.rows.size() - 1 - static_cast<size_t>(i)].l_total;
    }
    CHECK(tail < head);
}

TEST_SUITE_END();
