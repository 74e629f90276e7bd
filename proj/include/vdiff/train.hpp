#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "autograd.hpp"
#include "dataset.hpp"
#include "diffusion.hpp"
#include "unet.hpp"

namespace vdiff {

// Standard Adam with bias correction.  Slots are keyed by parameter name so
// the optimizer survives checkpoint round trips of the parameter store.
template <class T>
class Adam {
  public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore<T>& store) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, double(t_));
        const double bc2 = 1.0 - std::pow(beta2_, double(t_));
        for (auto& [name, var] : store.all()) {
            Tensor<T>& value = var.node()->value;
            const Tensor<T>& grad = var.node()->grad;
            check_runtime(grad.size() == value.size(), "Adam: missing gradient for " + name);
            auto& m = slot(m_, name, value.shape());
            auto& v = slot(v_, name, value.shape());
            for (i64 i = 0; i < value.size(); ++i) {
                const double g = double(grad[i]);
                m[i] = T(beta1_ * double(m[i]) + (1.0 - beta1_) * g);
                v[i] = T(beta2_ * double(v[i]) + (1.0 - beta2_) * g * g);
                const double mhat = double(m[i]) / bc1;
                const double vhat = double(v[i]) / bc2;
                value[i] -= T(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    i64 steps_taken() const { return t_; }

  private:
    Tensor<T>& slot(std::map<std::string, Tensor<T>>& slots, const std::string& name,
                    const Shape& shape) {
        auto it = slots.find(name);
        if (it == slots.end()) it = slots.emplace(name, Tensor<T>(shape)).first;
        return it->second;
    }

    double lr_, beta1_, beta2_, eps_;
    i64 t_ = 0;
    std::map<std::string, Tensor<T>> m_, v_;
};

// Exponential moving average with alpha = 2/(window+1), seeded at x[0].
template <class T>
std::vector<T> ema_smooth(const std::vector<T>& xs, i64 window) {
    check_arg(window >= 1, "ema_smooth: window must be >= 1");
    std::vector<T> out;
    out.reserve(xs.size());
    const double alpha = 2.0 / (double(window) + 1.0);
    double s = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        s = i == 0 ? double(xs[i]) : alpha * double(xs[i]) + (1.0 - alpha) * s;
        out.push_back(T(s));
    }
    return out;
}

template <class T>
struct TrainResult {
    std::vector<T> loss_trace;  // raw per-step batch loss
};

// Per-step hooks: on_step(step, loss) after the optimizer update, and
// save_checkpoint(step) at the configured cadence plus once at the end.
template <class T>
TrainResult<T> train(VideoUNet<T>& net, ParamStore<T>& store, const Corpus& corpus,
                     const TrainConfig& cfg, const NoiseSchedule<T>& sched,
                     std::function<void(i64, T)> on_step = {},
                     std::function<void(i64)> save_checkpoint = {}) {
    check_arg(cfg.steps >= 1, "train: steps must be >= 1");
    Adam<T> opt(cfg.learning_rate);
    std::vector<bool> frame_mask(size_t(cfg.frames_per_clip), true);
    frame_mask[0] = false;  // frame 1 is conditioning, excluded from the loss

    std::ofstream trace;
    if (!cfg.trace_path.empty()) {
        trace.open(cfg.trace_path);
        check_runtime(trace.good(), "train: cannot open trace file " + cfg.trace_path);
        trace << "step,loss\n";
    }

    TrainResult<T> result;
    Rng step_rng(cfg.seed);
    for (i64 step = 0; step < cfg.steps; ++step) {
        const u64 batch_seed = step_rng.split(u64(step)).next_u64();
        TrainBatch<T> batch = sample_batch(corpus, cfg, sched, batch_seed);

        store.zero_grad();
        double total = 0;
        const double inv_b = 1.0 / double(cfg.batch_size);
        for (i64 b = 0; b < cfg.batch_size; ++b) {
            Var<T> pred = net.forward(batch.noisy_latents[size_t(b)], batch.conditions[size_t(b)]);
            Var<T> loss = ag::masked_mse(pred, batch.targets[size_t(b)], frame_mask);
            total += double(loss.value()[0]);
            ag::backward(ag::mul_const(loss, T(inv_b)));
        }
        const T mean_loss = T(total * inv_b);
        if (!std::isfinite(double(mean_loss)))
            fail_runtime("train: non-finite loss at step " + std::to_string(step));

        opt.step(store);
        result.loss_trace.push_back(mean_loss);
        if (trace.is_open()) {
            trace << step << "," << double(mean_loss) << "\n";
            trace.flush();
        }
        if (on_step) on_step(step, mean_loss);
        if (save_checkpoint && cfg.checkpoint_every > 0 &&
            ((step + 1) % cfg.checkpoint_every == 0 || step + 1 == cfg.steps))
            save_checkpoint(step + 1);
    }
    return result;
}

}  // namespace vdiff
