#pragma once

// Epsilon-prediction loss, classifier-free guidance, and the deterministic
// DDIM sampler with first-frame pinning: the first frame of the model input
// is overwritten with the clean conditioning latent before every model call
// and never receives an update, so the output's first frame equals the
// conditioning frame bit for bit.

#include <functional>
#include <vector>

#include "condition.hpp"
#include "schedule.hpp"
#include "tensor.hpp"

namespace vdiff {

template <class T>
using DenoiseFn = std::function<Tensor<T>(const Tensor<T>&, const ConditionSignal<T>&)>;

struct GuidanceConfig {
    double scale_w = 7.5;
    i64 num_steps = 50;
    double eta = 0.0;  // only the deterministic sampler is implemented
};

enum class FirstFrameMode {
    kClean,    // hold frame 1 at the clean conditioning latent (default)
    kRenoise,  // re-noise the conditioning latent to the current step's level
};

// Mean squared error over the frames selected by frame_mask.
template <class T>
T epsilon_loss(const Tensor<T>& pred, const Tensor<T>& target,
               const std::vector<bool>& frame_mask) {
    check_arg(pred.rank() == 4, "epsilon_loss: rank-4 tensors required");
    check_arg(pred.same_shape(target), "epsilon_loss: shape mismatch");
    check_arg(i64(frame_mask.size()) == pred.dim(0), "epsilon_loss: mask length mismatch");
    i64 frames_on = 0;
    for (bool b : frame_mask) frames_on += b ? 1 : 0;
    check_arg(frames_on > 0, "epsilon_loss: mask selects no frames");
    const i64 per_frame = pred.size() / pred.dim(0);
    T loss = 0;
    for (i64 n = 0; n < pred.dim(0); ++n) {
        if (!frame_mask[size_t(n)]) continue;
        const T* p = pred.data() + n * per_frame;
        const T* q = target.data() + n * per_frame;
        for (i64 i = 0; i < per_frame; ++i) {
            const T d = p[i] - q[i];
            loss += d * d;
        }
    }
    return loss / T(frames_on * per_frame);
}

// eps_hat = eps_null + w (eps_cond - eps_null); w==1 and w==0 collapse to a
// single model call so they match the unguided predictions exactly.
template <class T>
Tensor<T> cfg_predict(const DenoiseFn<T>& model, const Tensor<T>& z_t, i64 t,
                      const ConditionSignal<T>& cond, const GuidanceConfig& cfg) {
    const ConditionSignal<T> cond_t = cond.with_timestep(t);
    if (cfg.scale_w == 1.0) return model(z_t, cond_t);
    const ConditionSignal<T> null_t = cond_t.without_label();
    if (cfg.scale_w == 0.0) return model(z_t, null_t);
    Tensor<T> e_null = model(z_t, null_t);
    Tensor<T> e_cond = model(z_t, cond_t);
    const T w = T(cfg.scale_w);
    Tensor<T> out = Tensor<T>::zeros_like(e_null);
    for (i64 i = 0; i < out.size(); ++i) out[i] = e_null[i] + w * (e_cond[i] - e_null[i]);
    return out;
}

// Uniformly spaced descending timesteps: k-th step denoises at
// t_k = (num_steps - k) * T / num_steps, ending just above zero.
inline std::vector<i64> ddim_timesteps(i64 total_timesteps, i64 num_steps) {
    check_arg(num_steps >= 1, "ddim: at least one step required");
    check_arg(num_steps <= total_timesteps, "ddim: step count exceeds schedule length");
    std::vector<i64> ts(static_cast<size_t>(num_steps));
    for (i64 k = 0; k < num_steps; ++k)
        ts[size_t(k)] = (num_steps - k) * total_timesteps / num_steps;
    return ts;
}

namespace detail {

template <class T>
void set_frame(Tensor<T>& video, i64 frame, const Tensor<T>& value) {
    const i64 per = video.size() / video.dim(0);
    check_arg(value.size() == per, "set_frame: slice size mismatch");
    std::copy(value.data(), value.data() + per, video.data() + frame * per);
}

template <class T>
Tensor<T> get_frame(const Tensor<T>& video, i64 frame) {
    const i64 per = video.size() / video.dim(0);
    Tensor<T> out({video.dim(1), video.dim(2), video.dim(3)});
    std::copy(video.data() + frame * per, video.data() + (frame + 1) * per, out.data());
    return out;
}

}  // namespace detail

// init_noise [N,C,H,W]; z1 [C,H,W] clean first-frame latent.
template <class T>
Tensor<T> ddim_sample(const DenoiseFn<T>& model, const Tensor<T>& init_noise,
                      const Tensor<T>& z1, const ConditionSignal<T>& cond,
                      const GuidanceConfig& gcfg, const NoiseSchedule<T>& sched,
                      FirstFrameMode mode = FirstFrameMode::kClean) {
    check_arg(init_noise.rank() == 4, "ddim_sample: [N,C,H,W] noise required");
    check_arg(z1.rank() == 3 && z1.size() * init_noise.dim(0) == init_noise.size(),
              "ddim_sample: first-frame latent does not match noise shape");
    check_arg(gcfg.eta == 0.0, "ddim_sample: only the deterministic eta=0 sampler exists");

    const auto ts = ddim_timesteps(sched.timesteps, gcfg.num_steps);
    Tensor<T> x = init_noise;
    const Tensor<T> pin_noise = detail::get_frame(init_noise, 0);

    for (size_t k = 0; k < ts.size(); ++k) {
        const i64 t = ts[k];
        const i64 t_prev = k + 1 < ts.size() ? ts[k + 1] : 0;
        if (mode == FirstFrameMode::kClean)
            detail::set_frame(x, 0, z1);
        else
            detail::set_frame(x, 0, add_noise(z1, pin_noise, t, sched));

        const Tensor<T> eps = cfg_predict(model, x, t, cond, gcfg);
        const T ab_t = sched.alpha_bar(t);
        const T ab_p = t_prev > 0 ? sched.alpha_bar(t_prev) : T(1);
        const T inv_sqrt_ab = T(1) / std::sqrt(ab_t);
        const T sq_om = std::sqrt(T(1) - ab_t);
        const T sq_abp = std::sqrt(ab_p);
        const T sq_omp = std::sqrt(T(1) - ab_p);
        for (i64 i = 0; i < x.size(); ++i) {
            const T x0 = (x[i] - sq_om * eps[i]) * inv_sqrt_ab;
            x[i] = sq_abp * x0 + sq_omp * eps[i];
        }
    }
    detail::set_frame(x, 0, z1);
    return x;
}

}  // namespace vdiff
