#pragma once

// Linear-beta diffusion schedule and the forward noising process.

#include <cmath>
#include <vector>

#include "tensor.hpp"

namespace vdiff {

template <class T>
struct NoiseSchedule {
    i64 timesteps = 0;
    std::vector<T> betas;       // beta_t, index t-1
    std::vector<T> alphas;      // 1 - beta_t
    std::vector<T> alpha_bars;  // prod_{s<=t} alpha_s

    T alpha_bar(i64 t) const {
        check_arg(t >= 1 && t <= timesteps, "alpha_bar: t out of range");
        return alpha_bars[size_t(t - 1)];
    }
};

constexpr i64 kDefaultTimesteps = 1000;
constexpr double kDefaultBetaStart = 0.00085;
constexpr double kDefaultBetaEnd = 0.012;

template <class T>
NoiseSchedule<T> make_schedule(i64 timesteps = kDefaultTimesteps,
                               double beta_start = kDefaultBetaStart,
                               double beta_end = kDefaultBetaEnd) {
    check_arg(timesteps >= 1, "make_schedule: timesteps must be >= 1");
    check_arg(beta_start > 0 && beta_end < 1, "make_schedule: betas must lie in (0,1)");
    check_arg(beta_start <= beta_end, "make_schedule: beta_start must be <= beta_end");

    NoiseSchedule<T> s;
    s.timesteps = timesteps;
    s.betas.resize(size_t(timesteps));
    s.alphas.resize(size_t(timesteps));
    s.alpha_bars.resize(size_t(timesteps));
    double bar = 1.0;  // accumulate in double regardless of T
    for (i64 i = 0; i < timesteps; ++i) {
        const double frac = timesteps == 1 ? 0.0 : double(i) / double(timesteps - 1);
        const double beta = beta_start + (beta_end - beta_start) * frac;
        bar *= 1.0 - beta;
        s.betas[size_t(i)] = T(beta);
        s.alphas[size_t(i)] = T(1.0 - beta);
        s.alpha_bars[size_t(i)] = T(bar);
    }
    return s;
}

// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps,  1 <= t <= T
template <class T>
Tensor<T> add_noise(const Tensor<T>& z0, const Tensor<T>& eps, i64 t,
                    const NoiseSchedule<T>& sched) {
    check_arg(z0.same_shape(eps), "add_noise: z0/eps shape mismatch");
    const T ab = sched.alpha_bar(t);
    const T a = std::sqrt(ab);
    const T b = std::sqrt(T(1) - ab);
    Tensor<T> out = Tensor<T>::zeros_like(z0);
    for (i64 i = 0; i < out.size(); ++i) out[i] = a * z0[i] + b * eps[i];
    return out;
}

}  // namespace vdiff
