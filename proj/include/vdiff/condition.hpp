#pragma once

#include <optional>

#include "tensor.hpp"

namespace vdiff {

// Everything the denoiser is conditioned on besides the noisy latents.
template <class T>
struct ConditionSignal {
    Tensor<T> first_frame_latent;   // [C', H', W']
    std::optional<i64> label_id;    // nullopt selects the null row
    i64 frame_interval = 1;         // frame sampling stride v
    i64 timestep = 1;               // diffusion step t, 1-based

    ConditionSignal with_timestep(i64 t) const {
        ConditionSignal c = *this;
        c.timestep = t;
        return c;
    }

    ConditionSignal without_label() const {
        ConditionSignal c = *this;
        c.label_id.reset();
        return c;
    }
};

}  // namespace vdiff
