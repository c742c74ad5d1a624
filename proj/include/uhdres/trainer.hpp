#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "uhdres/checkpoint.hpp"
#include "uhdres/data.hpp"
#include "uhdres/losses.hpp"
#include "uhdres/metrics.hpp"
#include "uhdres/optim.hpp"

namespace uhdres {

struct TrainConfig {
    int64_t patch_size = 64;
    int64_t batch_size = 2;
    int64_t total_steps = 2000;
    uint64_t seed = 0;
    double lambda_weight = 0.1;
    int64_t checkpoint_every = 500;
    int64_t eval_every = 100;
    double lr_max = 5e-4;
    double lr_min = 1e-7;
    double weight_decay = 1e-4;
    double clip_norm = 1.0;

    void validate() const {
        if (patch_size < 8) throw ConfigError("patch_size must be >= 8");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
        if (lambda_weight < 0) throw ConfigError("lambda must be >= 0");
        if (checkpoint_every < 1 || eval_every < 1)
            throw ConfigError("cadence values must be >= 1");
        if (lr_max <= 0 || lr_min <= 0 || lr_min > lr_max)
            throw ConfigError("learning-rate range is invalid");
    }
};

struct LogRow {
    int64_t step;
    double lr;
    double l_pixel;
    double l_freq;
    double l_total;
};

struct EvalPoint {
    int64_t step;
    double l1;
    double psnr_db;
};

struct TrainResult {
    std::vector<LogRow> rows;
    std::vector<EvalPoint> evals;
    int64_t steps_run = 0;
    bool stopped_early = false;
};

// Deterministic training loop. One data rng drives sample selection and
// patch offsets; its (seed, counter) state is persisted so a resumed run
// replays the exact remaining stream.
template <typename T>
class Trainer {
public:
    Trainer(UHDResModel<T>& model, const TrainConfig& cfg)
        : model_(model),
          cfg_(cfg),
          opt_(AdamWOptions{0.9, 0.999, 1e-8, cfg.weight_decay, cfg.clip_norm}),
          sched_{cfg.lr_max, cfg.lr_min, cfg.total_steps},
          data_rng_(cfg.seed) {
        cfg.validate();
    }

    int64_t step() const { return step_; }

    // Runs until total_steps (or until stop() returns true at an eval
    // point). Writes `log.csv` and cadenced checkpoints when out_dir is
    // non-empty.
    TrainResult run(const std::vector<PairedSample<T>>& dataset, const std::string& out_dir = "",
                    const std::function<bool(const EvalPoint&)>& stop = nullptr) {
        check_contract(!dataset.empty(), "train_loop requires a non-empty dataset");
        namespace fs = std::filesystem;
        std::ofstream log;
        if (!out_dir.empty()) {
            fs::create_directories(out_dir);
            bool fresh = step_ == 0;
            log.open(fs::path(out_dir) / "log.csv", fresh ? std::ios::trunc : std::ios::app);
            if (fresh) log << "step,lr,l_pixel,l_freq,l_total\n";
        }

        TrainResult result;
        for (; step_ < cfg_.total_steps; ++step_) {
            double lr = sched_.lr_at(step_);
            auto [lq, gt] = next_batch(dataset);

            LogRow row{step_, lr, 0, 0, 0};
            {
                Recording<T> rec;
                auto pred = model_.forward(lq, /*training=*/true);
                auto losses = total_loss(pred, gt, static_cast<T>(cfg_.lambda_weight));
                row.l_pixel = static_cast<double>(losses.pixel.item());
                row.l_freq = static_cast<double>(losses.freq.item());
                row.l_total = static_cast<double>(losses.total.item());
                rec.backward(losses.total);
            }
            opt_.step(model_.store().params(), lr);

            result.rows.push_back(row);
            if (log.is_open()) {
                char buf[160];
                std::snprintf(buf, sizeof(buf), "%lld,%.9e,%.9e,%.9e,%.9e\n",
                              static_cast<long long>(row.step), row.lr, row.l_pixel, row.l_freq,
                              row.l_total);
                log << buf;
            }

            int64_t done = step_ + 1;
            if (done % cfg_.eval_every == 0 || done == cfg_.total_steps) {
                EvalPoint ev = evaluate(dataset.front(), done);
                result.evals.push_back(ev);
                if (stop && stop(ev)) {
                    result.stopped_early = true;
                    ++step_;
                    break;
                }
            }
            if (!out_dir.empty() && (done % cfg_.checkpoint_every == 0 || done == cfg_.total_steps)) {
                save_state(out_dir, done);
            }
        }
        if (!out_dir.empty()) save_state(out_dir, -1);  // latest
        result.steps_run = step_;
        return result;
    }

    // Eval-mode restoration quality on one pair (clamped output).
    EvalPoint evaluate(const PairedSample<T>& sample, int64_t at_step) {
        NoGrad<T> ng;
        auto pred = clamp(model_.forward(sample.lq, /*training=*/false), T(0), T(1));
        EvalPoint ev;
        ev.step = at_step;
        ev.l1 = static_cast<double>(l1_loss(pred, sample.gt).item());
        ev.psnr_db = psnr(pred, sample.gt);
        return ev;
    }

    void save_state(const std::string& out_dir, int64_t at_step) {
        namespace fs = std::filesystem;
        std::string tag = at_step < 0 ? "latest" : "step" + std::to_string(at_step);
        int64_t completed = at_step < 0 ? step_ : at_step;
        save_checkpoint(model_, (fs::path(out_dir) / ("model_" + tag + ".ckpt")).string());

        CkptFile state;
        state.elem_tag = 1;  // trainer state is always stored in f64
        for (auto& [name, data] : opt_.state_entries(model_.store().params()))
            state.entries.push_back({name, {static_cast<int64_t>(data.size())}, data});
        state.entries.push_back({"trainer.step", {1}, {static_cast<double>(completed)}});
        state.entries.push_back(
            {"rng.data.seed", {1}, {static_cast<double>(data_rng_.seed())}});
        state.entries.push_back(
            {"rng.data.counter", {1}, {static_cast<double>(data_rng_.counter())}});
        write_ckpt_file((fs::path(out_dir) / ("trainstate_" + tag + ".ckpt")).string(), state);
    }

    // Restores optimizer moments, step index and the data-rng position. The
    // model itself is restored separately via load_checkpoint.
    void restore_state(const std::string& state_path) {
        CkptFile state = read_ckpt_file(state_path);
        auto lookup = [&](const std::string& name) -> const std::vector<double>* {
            for (const auto& e : state.entries)
                if (e.name == name) return &e.data;
            return nullptr;
        };
        opt_.restore_state(model_.store().params(), lookup);
        const std::vector<double>* st = lookup("trainer.step");
        check_contract(st && st->size() == 1, "trainer state missing 'trainer.step'");
        step_ = static_cast<int64_t>((*st)[0]);
        const std::vector<double>* rs = lookup("rng.data.seed");
        const std::vector<double>* rc = lookup("rng.data.counter");
        check_contract(rs && rc, "trainer state missing rng position");
        data_rng_ = SeededRng(static_cast<uint64_t>((*rs)[0]), static_cast<uint64_t>((*rc)[0]));
    }

private:
    std::pair<Tensor<T>, Tensor<T>> next_batch(const std::vector<PairedSample<T>>& dataset) {
        NoGrad<T> ng;
        std::vector<Tensor<T>> lqs, gts;
        for (int64_t b = 0; b < cfg_.batch_size; ++b) {
            size_t idx = dataset.size() == 1
                             ? 0
                             : static_cast<size_t>(data_rng_.below(dataset.size()));
            const auto& s = dataset[idx];
            int64_t patch = std::min({cfg_.patch_size, s.lq.dim(2), s.lq.dim(3)});
            PatchSampler<T> sampler(patch, data_rng_);
            auto [lq, gt] = sampler.sample(s);
            data_rng_ = sampler.rng;  // keep consuming one stream
            lqs.push_back(lq);
            gts.push_back(gt);
        }
        if (cfg_.batch_size == 1) return {lqs[0], gts[0]};
        return {concat(lqs, 0), concat(gts, 0)};
    }

    UHDResModel<T>& model_;
    TrainConfig cfg_;
    AdamW<T> opt_;
    CosineSchedule sched_;
    SeededRng data_rng_;
    int64_t step_ = 0;
};

}  // namespace uhdres
