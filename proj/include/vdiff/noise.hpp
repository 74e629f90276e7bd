#pragma once

// Mixed noise prior: every frame's noise is the sum of one component shared
// across the whole clip and one drawn independently per frame,
//
//   eps_shared ~ N(0, alpha^2/(1+alpha^2) I)      (one draw per clip)
//   eps_ind^i  ~ N(0, 1/(1+alpha^2) I)            (one draw per frame)
//   eps^i      = eps_shared + eps_ind^i
//
// so each frame is marginally unit-variance while consecutive frames share
// alpha^2/(1+alpha^2) of their variance.  alpha = 0 degenerates to i.i.d.
// noise.

#include <cmath>

#include "rng.hpp"
#include "tensor.hpp"

namespace vdiff {

struct MixedNoiseSpec {
    double alpha = 1.5;
    u64 seed = 0;
};

// shape must be [N, C, H, W]
template <class T>
Tensor<T> sample_mixed_noise(const Shape& shape, const MixedNoiseSpec& spec) {
    check_arg(shape.size() == 4, "sample_mixed_noise: [N,C,H,W] shape required");
    check_arg(spec.alpha >= 0, "sample_mixed_noise: alpha must be non-negative");
    const i64 N = shape[0];
    const i64 per_frame = shape[1] * shape[2] * shape[3];

    const double a2 = spec.alpha * spec.alpha;
    const T shared_std = T(std::sqrt(a2 / (1.0 + a2)));
    const T ind_std = T(std::sqrt(1.0 / (1.0 + a2)));

    Rng root(spec.seed);
    Rng shared_rng = root.split(0);
    Rng ind_rng = root.split(1);

    std::vector<T> shared(static_cast<size_t>(per_frame));
    for (T& x : shared) x = shared_std * T(shared_rng.normal());

    Tensor<T> out(shape);
    for (i64 n = 0; n < N; ++n) {
        T* frame = out.data() + n * per_frame;
        for (i64 i = 0; i < per_frame; ++i)
            frame[i] = shared[size_t(i)] + ind_std * T(ind_rng.normal());
    }
    return out;
}

}  // namespace vdiff
