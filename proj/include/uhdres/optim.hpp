#pragma once

#include "uhdres/module.hpp"

namespace uhdres {

// Cosine-annealed learning rate; hits both endpoints exactly.
struct CosineSchedule {
    double lr_max = 5e-4;
    double lr_min = 1e-7;
    int64_t total_steps = 0;

    double lr_at(int64_t step) const {
        check_contract(step >= 0 && step <= total_steps,
                       "lr_at step out of range: " + std::to_string(step));
        if (step == 0) return lr_max;
        if (step == total_steps) return lr_min;
        double t = static_cast<double>(step) / static_cast<double>(total_steps);
        return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(3.14159265358979323846 * t));
    }
};

struct AdamWOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;  // applied to decay-flagged parameters only
    double clip_norm = 1.0;      // global-norm gradient clip; <= 0 disables
};

// Adam with decoupled weight decay:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2  (bias corrected)
//   theta <- theta - lr * ( m^ / (sqrt(v^) + eps) + wd * theta )
// Gradients are zeroed after the update.
template <typename T>
class AdamW {
public:
    explicit AdamW(const AdamWOptions& opt = {}) : opt_(opt) {}

    const AdamWOptions& options() const { return opt_; }
    int64_t step_count() const { return step_; }

    void step(std::vector<Parameter<T>>& params, double lr) {
        ensure_state(params);

        // global gradient norm (serial, fixed order, deterministic)
        double sq = 0.0;
        for (const auto& p : params) {
            for (T g : p.value.grad()) {
                double gd = static_cast<double>(g);
                if (!std::isfinite(gd))
                    throw ContractError("adamw_step: non-finite gradient in parameter '" + p.name +
                                        "'; step aborted");
                sq += gd * gd;
            }
        }
        double scale = 1.0;
        if (opt_.clip_norm > 0) {
            double norm = std::sqrt(sq);
            if (norm > opt_.clip_norm) scale = opt_.clip_norm / norm;
        }

        ++step_;
        double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
        double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
        for (size_t pi = 0; pi < params.size(); ++pi) {
            auto& p = params[pi];
            auto theta = p.value.data();
            auto& g = p.value.grad();
            auto& m = m_[pi];
            auto& v = v_[pi];
            double wd = p.decay ? opt_.weight_decay : 0.0;
            for (size_t i = 0; i < theta.size(); ++i) {
                double gd = static_cast<double>(g[i]) * scale;
                m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * gd;
                v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * gd * gd;
                double mhat = m[i] / bc1;
                double vhat = v[i] / bc2;
                double upd = mhat / (std::sqrt(vhat) + opt_.eps) + wd * static_cast<double>(theta[i]);
                theta[i] = static_cast<T>(static_cast<double>(theta[i]) - lr * upd);
            }
            std::fill(g.begin(), g.end(), T(0));
        }
    }

    // Moment buffers and step counter as named tensors for persistence.
    std::vector<std::pair<std::string, std::vector<double>>> state_entries(
        const std::vector<Parameter<T>>& params) const {
        std::vector<std::pair<std::string, std::vector<double>>> out;
        out.push_back({"opt.step", {static_cast<double>(step_)}});
        for (size_t pi = 0; pi < params.size(); ++pi) {
            if (pi < m_.size()) {
                out.push_back({"opt." + params[pi].name + ".m", m_[pi]});
                out.push_back({"opt." + params[pi].name + ".v", v_[pi]});
            }
        }
        return out;
    }

    void restore_state(const std::vector<Parameter<T>>& params,
                       const std::function<const std::vector<double>*(const std::string&)>& lookup) {
        const std::vector<double>* st = lookup("opt.step");
        check_contract(st && st->size() == 1, "optimizer state missing 'opt.step'");
        step_ = static_cast<int64_t>((*st)[0]);
        m_.clear();
        v_.clear();
        for (const auto& p : params) {
            const std::vector<double>* m = lookup("opt." + p.name + ".m");
            const std::vector<double>* v = lookup("opt." + p.name + ".v");
            check_contract(m && v && m->size() == p.value.data().size() && v->size() == m->size(),
                           "optimizer state missing moments for '" + p.name + "'");
            m_.push_back(*m);
            v_.push_back(*v);
        }
    }

private:
    void ensure_state(const std::vector<Parameter<T>>& params) {
        if (!m_.empty()) return;
        for (const auto& p : params) {
            m_.emplace_back(p.value.data().size(), 0.0);
            v_.emplace_back(p.value.data().size(), 0.0);
        }
    }

    AdamWOptions opt_;
    std::vector<std::vector<double>> m_, v_;
    int64_t step_ = 0;
};

}  // namespace uhdres
