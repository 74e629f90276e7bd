#pragma once

// Applications built on the sampler: autoregressive long-video generation
// with single-frame overlap, and camera motion control via frame-init layout
// videos synthesized from crops of the conditioning frame.

#include <string>
#include <utility>
#include <vector>

#include "diffusion.hpp"
#include "frame_init.hpp"
#include "noise.hpp"
#include "patchify.hpp"
#include "tensor.hpp"

namespace vdiff {

struct LongVideoConfig {
    i64 chunks = 2;
    bool use_frame_init = true;
    FrameInitParams frame_init{};  // tau=850, d0=0.25
    double noise_alpha = 1.5;
    u64 seed = 0;
};

// Each chunk is conditioned on the previous chunk's final frame, which is
// also its own first frame; that shared frame is emitted only once, so the
// result has N + (chunks-1)*(N-1) frames.
template <class T>
Tensor<T> generate_long_video(const DenoiseFn<T>& model, const Tensor<T>& first_frame_latent,
                              const ConditionSignal<T>& base_cond, const GuidanceConfig& gcfg,
                              const NoiseSchedule<T>& sched, i64 num_frames,
                              const LongVideoConfig& lv) {
    check_arg(lv.chunks >= 1, "generate_long_video: chunks must be >= 1");
    check_arg(num_frames >= 2, "generate_long_video: need at least 2 frames per chunk");
    check_arg(first_frame_latent.rank() == 3, "generate_long_video: conditioning frame rank");

    const i64 c = first_frame_latent.dim(0);
    const i64 h = first_frame_latent.dim(1);
    const i64 w = first_frame_latent.dim(2);
    const i64 per_frame = c * h * w;
    const i64 total = num_frames + (lv.chunks - 1) * (num_frames - 1);

    Tensor<T> out({total, c, h, w});
    Tensor<T> cond_frame = first_frame_latent;
    Rng seed_rng(lv.seed);
    i64 cursor = 0;
    for (i64 chunk = 0; chunk < lv.chunks; ++chunk) {
        Tensor<T> eps = sample_mixed_noise<T>({num_frames, c, h, w},
                                              {lv.noise_alpha, seed_rng.split(u64(chunk)).next_u64()});
        if (lv.use_frame_init)
            eps = frame_init_mix(make_static_video(cond_frame, num_frames), eps, lv.frame_init,
                                 sched);

        ConditionSignal<T> cond = base_cond;
        cond.first_frame_latent = cond_frame;
        Tensor<T> video({0});
        try {
            video = ddim_sample(model, eps, cond_frame, cond, gcfg, sched);
        } catch (const std::exception& e) {
            fail_runtime("generate_long_video: chunk " + std::to_string(chunk) + ": " + e.what());
        }

        const i64 skip = chunk == 0 ? 0 : 1;  // overlap frame already emitted
        std::copy(video.data() + skip * per_frame, video.data() + num_frames * per_frame,
                  out.data() + cursor * per_frame);
        cursor += num_frames - skip;
        cond_frame = Tensor<T>({c, h, w});
        std::copy(video.data() + (num_frames - 1) * per_frame, video.data() + num_frames * per_frame,
                  cond_frame.data());
    }
    check_runtime(cursor == total, "generate_long_video: frame accounting mismatch");
    return out;
}

enum class CameraKind { kPan, kZoom };

struct CameraMotionSpec {
    CameraKind kind = CameraKind::kPan;
    double pan_dx = 0.0;  // source pixels per frame
    double pan_dy = 0.0;
    double zoom_start = 0.75;  // crop size as a fraction of the source
    double zoom_end = 0.75;
};

struct CropRect {
    double x = 0, y = 0, w = 0, h = 0;  // continuous source coordinates
};

// Pure crop geometry, one rect per frame.  Pan keeps the crop size fixed at
// zoom_start and slides the top-left corner by (pan_dx, pan_dy) per frame,
// clamped inside the source.  Zoom keeps the crop centered and interpolates
// its size linearly from zoom_start to zoom_end.
inline std::vector<CropRect> camera_crop_rects(const CameraMotionSpec& spec, i64 src_h, i64 src_w,
                                               i64 n_frames) {
    check_arg(n_frames >= 1, "camera_crop_rects: empty video");
    check_arg(spec.zoom_start > 0 && spec.zoom_start <= 1.0 && spec.zoom_end > 0 &&
                  spec.zoom_end <= 1.0,
              "camera_crop_rects: zoom fractions must be in (0, 1]");
    std::vector<CropRect> rects;
    rects.reserve(size_t(n_frames));
    for (i64 i = 0; i < n_frames; ++i) {
        CropRect r;
        if (spec.kind == CameraKind::kPan) {
            r.w = spec.zoom_start * double(src_w);
            r.h = spec.zoom_start * double(src_h);
            r.x = std::min(double(src_w) - r.w, std::max(0.0, double(i) * spec.pan_dx));
            r.y = std::min(double(src_h) - r.h, std::max(0.0, double(i) * spec.pan_dy));
        } else {
            const double u = n_frames == 1 ? 0.0 : double(i) / double(n_frames - 1);
            const double scale = spec.zoom_start + u * (spec.zoom_end - spec.zoom_start);
            r.w = scale * double(src_w);
            r.h = scale * double(src_h);
            r.x = (double(src_w) - r.w) / 2.0;
            r.y = (double(src_h) - r.h) / 2.0;
        }
        rects.push_back(r);
    }
    return rects;
}

// Bilinear resample of a continuous crop rect back to the full source size.
template <class T>
Tensor<T> resample_crop(const Tensor<T>& frame, const CropRect& rect, i64 out_h, i64 out_w) {
    check_arg(frame.rank() == 3, "resample_crop: frame must be [C,H,W]");
    const i64 c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
    Tensor<T> out({c, out_h, out_w});
    for (i64 oy = 0; oy < out_h; ++oy)
        for (i64 ox = 0; ox < out_w; ++ox) {
            // map output pixel centers into the crop, then into the source
            const double sx = rect.x + (double(ox) + 0.5) * rect.w / double(out_w) - 0.5;
            const double sy = rect.y + (double(oy) + 0.5) * rect.h / double(out_h) - 0.5;
            const double fx = std::floor(sx), fy = std::floor(sy);
            const double ax = sx - fx, ay = sy - fy;
            const auto cl = [](i64 v, i64 n) { return std::min(n - 1, std::max(i64(0), v)); };
            const i64 x0 = cl(i64(fx), w), x1 = cl(i64(fx) + 1, w);
            const i64 y0 = cl(i64(fy), h), y1 = cl(i64(fy) + 1, h);
            for (i64 ch = 0; ch < c; ++ch) {
                const double top = (1.0 - ax) * double(frame.at3(ch, y0, x0)) +
                                   ax * double(frame.at3(ch, y0, x1));
                const double bot = (1.0 - ax) * double(frame.at3(ch, y1, x0)) +
                                   ax * double(frame.at3(ch, y1, x1));
                out.at3(ch, oy, ox) = T((1.0 - ay) * top + ay * bot);
            }
        }
    return out;
}

// Layout video for camera control: per-frame crops of the conditioning
// frame, resampled back to the source resolution.  [N, C, H, W]
template <class T>
Tensor<T> camera_layout_video(const Tensor<T>& frame, const CameraMotionSpec& spec,
                              i64 n_frames) {
    check_arg(frame.rank() == 3, "camera_layout_video: frame must be [C,H,W]");
    const i64 c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
    const auto rects = camera_crop_rects(spec, h, w, n_frames);
    Tensor<T> video({n_frames, c, h, w});
    for (i64 i = 0; i < n_frames; ++i) {
        Tensor<T> f = resample_crop(frame, rects[size_t(i)], h, w);
        std::copy(f.data(), f.data() + f.size(), video.data() + i * c * h * w);
    }
    return video;
}

struct CameraAppConfig {
    CameraMotionSpec motion{};
    FrameInitParams frame_init{750, 0.5};  // stronger layout carry-over
    double noise_alpha = 1.5;
    u64 seed = 0;
};

// first_frame_pixel is the [3, H, W] source image in [0, 1].  The layout
// video's own first frame (the frame-0 crop) becomes the conditioning frame.
template <class T>
Tensor<T> generate_camera_video(const DenoiseFn<T>& model, const Tensor<T>& first_frame_pixel,
                                const ConditionSignal<T>& base_cond, const GuidanceConfig& gcfg,
                                const NoiseSchedule<T>& sched, i64 num_frames,
                                const CameraAppConfig& app) {
    Tensor<T> layout_pixel = camera_layout_video(first_frame_pixel, app.motion, num_frames);
    Tensor<T> layout_latent = encode_video(layout_pixel);
    const i64 c = layout_latent.dim(1), h = layout_latent.dim(2), w = layout_latent.dim(3);
    Tensor<T> z1({c, h, w});
    std::copy(layout_latent.data(), layout_latent.data() + c * h * w, z1.data());

    Tensor<T> eps = sample_mixed_noise<T>(layout_latent.shape(),
                                          {app.noise_alpha, Rng(app.seed).next_u64()});
    eps = frame_init_mix(layout_latent, eps, app.frame_init, sched);

    ConditionSignal<T> cond = base_cond;
    cond.first_frame_latent = z1;
    return ddim_sample(model, eps, z1, cond, gcfg, sched);
}

}  // namespace vdiff
