#pragma once

// Frequency-guided noise initialization.  Sampling does not have to start
// from white noise: noising a static "layout" video (the conditioning frame
// repeated) to step tau and keeping only its low spatio-temporal frequencies,
// while taking the high band from the fresh noise, yields an initial latent
// whose coarse layout is already coherent across frames,
//
//     eps' = IFFT3( FFT3(z_tau) . G  +  FFT3(eps) . (1 - G) )
//
// with a Gaussian low-pass G(u) = exp(-u^2 / (2 D0^2)) over normalized
// frequency radius u.  The two masks sum to one everywhere, so mixing a
// signal with itself returns it unchanged.

#include <cmath>
#include <complex>

#include "fft.hpp"
#include "schedule.hpp"
#include "tensor.hpp"

namespace vdiff {

struct FrameInitParams {
    i64 tau = 850;     // noising level of the layout video
    double d0 = 0.25;  // normalized stop frequency of the Gaussian low-pass
};

template <class T>
struct FrequencyMask {
    Tensor<T> values;  // [N, H, W]
    double d0 = 0.0;
};

// Frequencies along each axis are centered (DC at index 0 maps to offset 0,
// index k to k or k-size for the negative half) and normalized to [-1, 1].
template <class T>
FrequencyMask<T> gaussian_low_pass(i64 n, i64 h, i64 w, double d0) {
    check_arg(n > 0 && h > 0 && w > 0, "gaussian_low_pass: empty grid");
    check_arg(d0 > 0, "gaussian_low_pass: d0 must be positive");
    FrequencyMask<T> mask;
    mask.d0 = d0;
    mask.values = Tensor<T>({n, h, w});
    auto norm_freq = [](i64 idx, i64 size) {
        if (size == 1) return 0.0;
        const i64 centered = idx <= size / 2 ? idx : idx - size;
        return 2.0 * double(centered) / double(size);
    };
    for (i64 a = 0; a < n; ++a)
        for (i64 b = 0; b < h; ++b)
            for (i64 c = 0; c < w; ++c) {
                const double fa = norm_freq(a, n);
                const double fb = norm_freq(b, h);
                const double fc = norm_freq(c, w);
                const double u2 = fa * fa + fb * fb + fc * fc;
                mask.values.at3(a, b, c) = T(std::exp(-u2 / (2.0 * d0 * d0)));
            }
    return mask;
}

// Blends the low band of `layout` with the high band of `noise`, per channel.
// max_imag_out, when provided, receives the largest imaginary residue seen
// before it is discarded (a conjugate-symmetry health check).
template <class T>
Tensor<T> frequency_mix(const Tensor<T>& layout, const Tensor<T>& noise,
                        const FrequencyMask<T>& mask, double* max_imag_out = nullptr) {
    check_arg(layout.rank() == 4, "frequency_mix: [N,C,H,W] tensors required");
    check_arg(layout.same_shape(noise), "frequency_mix: layout/noise shape mismatch");
    const i64 N = layout.dim(0), C = layout.dim(1), H = layout.dim(2), W = layout.dim(3);
    check_arg(mask.values.rank() == 3 && mask.values.dim(0) == N && mask.values.dim(1) == H &&
                  mask.values.dim(2) == W,
              "frequency_mix: mask grid mismatch");

    Tensor<T> out = Tensor<T>::zeros_like(layout);
    double max_imag = 0.0;
    ComplexGrid<T> ga(N, H, W), gb(N, H, W);
    for (i64 c = 0; c < C; ++c) {
        for (i64 n = 0; n < N; ++n)
            for (i64 y = 0; y < H; ++y)
                for (i64 x = 0; x < W; ++x) {
                    ga.at(n, y, x) = std::complex<T>(layout.at4(n, c, y, x), 0);
                    gb.at(n, y, x) = std::complex<T>(noise.at4(n, c, y, x), 0);
                }
        fft3_forward(ga);
        fft3_forward(gb);
        for (i64 i = 0; i < ga.size(); ++i) {
            const T m = mask.values[i];
            ga.v[size_t(i)] = ga.v[size_t(i)] * m + gb.v[size_t(i)] * (T(1) - m);
        }
        fft3_inverse(ga);
        for (i64 n = 0; n < N; ++n)
            for (i64 y = 0; y < H; ++y)
                for (i64 x = 0; x < W; ++x) {
                    const auto z = ga.at(n, y, x);
                    max_imag = std::max(max_imag, double(std::abs(z.imag())));
                    out.at4(n, c, y, x) = z.real();
                }
    }
    check_runtime(max_imag < 1e-3, "frequency_mix: non-real inverse transform");
    if (max_imag_out) *max_imag_out = max_imag;
    return out;
}

// z0_static: clean layout video [N,C,H,W] (conditioning frame repeated, or a
// coarse motion layout).  eps: the fresh sampling noise.  The layout video is
// noised to step tau first so the mixed tensor stays distributed like a
// valid diffusion state at the start of sampling.
template <class T>
Tensor<T> frame_init_mix(const Tensor<T>& z0_static, const Tensor<T>& eps,
                         const FrameInitParams& params, const NoiseSchedule<T>& sched,
                         double* max_imag_out = nullptr) {
    check_arg(z0_static.rank() == 4, "frame_init_mix: [N,C,H,W] tensors required");
    check_arg(z0_static.same_shape(eps), "frame_init_mix: shape mismatch");
    check_arg(params.tau >= 1 && params.tau <= sched.timesteps,
              "frame_init_mix: tau outside schedule");
    const Tensor<T> z_tau = add_noise(z0_static, eps, params.tau, sched);
    const auto mask =
        gaussian_low_pass<T>(z0_static.dim(0), z0_static.dim(2), z0_static.dim(3), params.d0);
    return frequency_mix(z_tau, eps, mask, max_imag_out);
}

// Conditioning frame repeated N times.
template <class T>
Tensor<T> make_static_video(const Tensor<T>& frame, i64 n_frames) {
    check_arg(frame.rank() == 3, "make_static_video: [C,H,W] frame required");
    check_arg(n_frames >= 1, "make_static_video: empty video");
    Tensor<T> out({n_frames, frame.dim(0), frame.dim(1), frame.dim(2)});
    for (i64 n = 0; n < n_frames; ++n)
        std::copy(frame.data(), frame.data() + frame.size(), out.data() + n * frame.size());
    return out;
}

// Splits a video into its low/high bands (used by the decompose tool).
template <class T>
std::pair<Tensor<T>, Tensor<T>> frequency_split(const Tensor<T>& video, double d0) {
    check_arg(video.rank() == 4, "frequency_split: [N,C,H,W] input required");
    const auto mask = gaussian_low_pass<T>(video.dim(0), video.dim(2), video.dim(3), d0);
    Tensor<T> zero = Tensor<T>::zeros_like(video);
    // low band: keep video's low frequencies, zero high; high band: complement
    Tensor<T> low = frequency_mix(video, zero, mask);
    Tensor<T> high = frequency_mix(zero, video, mask);
    return {std::move(low), std::move(high)};
}

}  // namespace vdiff
