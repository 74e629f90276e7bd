#pragma once

// Synthetic moving-shapes corpus: a single colored square or circle drifting
// across a fixed 16x16 canvas.  Clips are rendered on demand from a spec plus
// a seed (which fixes the shape's size and start position), so the corpus
// itself is just a list of specs.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "condition.hpp"
#include "noise.hpp"
#include "patchify.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "tensor.hpp"

namespace vdiff {

constexpr i64 kCanvas = 16;
constexpr i64 kShapeMinSize = 4;
constexpr i64 kShapeMaxSize = 6;

enum class ShapeKind : i64 { kSquare = 0, kCircle = 1 };
enum class MoveDirection : i64 { kLeft = 0, kRight = 1, kUp = 2, kDown = 3, kDiagonal = 4 };

struct ClipSpec {
    ShapeKind shape_kind = ShapeKind::kSquare;
    std::array<double, 3> color = {1.0, 1.0, 1.0};
    MoveDirection direction = MoveDirection::kRight;
    double speed = 1.0;  // pixels per frame
    std::array<double, 3> background = {0.0, 0.0, 0.0};
};

constexpr i64 kNumShapeKinds = 2;
constexpr i64 kNumDirections = 5;
constexpr i64 kLabelVocab = kNumShapeKinds * kNumDirections;

// Injective (shape, direction) -> [0, 10) encoding; color/speed do not enter.
inline i64 label_id(const ClipSpec& spec) {
    return i64(spec.shape_kind) * kNumDirections + i64(spec.direction);
}

inline std::pair<double, double> direction_vector(MoveDirection d) {
    switch (d) {
        case MoveDirection::kLeft: return {-1.0, 0.0};
        case MoveDirection::kRight: return {1.0, 0.0};
        case MoveDirection::kUp: return {0.0, -1.0};
        case MoveDirection::kDown: return {0.0, 1.0};
        case MoveDirection::kDiagonal: return {1.0, 1.0};
    }
    fail_arg("direction_vector: unknown direction");
}

template <class T>
struct Clip {
    Tensor<T> video;  // [length, 3, 16, 16]
    i64 label = 0;
};

// Renders `length` frames.  The seed draws the shape size in [4,6] and a
// uniform start position; position(i) = clamp(start + i*speed*dir) per axis,
// rounded to the pixel grid at rasterization time.
template <class T>
Clip<T> gen_clip(const ClipSpec& spec, i64 length, u64 seed) {
    check_arg(length >= 1, "gen_clip: empty clip");
    check_arg(spec.speed >= 0, "gen_clip: negative speed");

    Rng rng(seed);
    const i64 size = kShapeMinSize + rng.uniform_int(kShapeMaxSize - kShapeMinSize + 1);
    check_arg(size <= kCanvas, "gen_clip: shape larger than canvas");
    const double max_pos = double(kCanvas - size);
    const double start_x = rng.uniform() * max_pos;
    const double start_y = rng.uniform() * max_pos;
    const auto [dx, dy] = direction_vector(spec.direction);

    Clip<T> clip;
    clip.label = label_id(spec);
    clip.video = Tensor<T>({length, 3, kCanvas, kCanvas});
    for (i64 f = 0; f < length; ++f) {
        const double px =
            std::min(max_pos, std::max(0.0, start_x + double(f) * spec.speed * dx));
        const double py =
            std::min(max_pos, std::max(0.0, start_y + double(f) * spec.speed * dy));
        const i64 x0 = i64(std::llround(px));
        const i64 y0 = i64(std::llround(py));
        const double cx = double(x0) + double(size) / 2.0;
        const double cy = double(y0) + double(size) / 2.0;
        const double r2 = (double(size) / 2.0) * (double(size) / 2.0);
        for (i64 y = 0; y < kCanvas; ++y)
            for (i64 x = 0; x < kCanvas; ++x) {
                bool inside;
                if (spec.shape_kind == ShapeKind::kSquare) {
                    inside = x >= x0 && x < x0 + size && y >= y0 && y < y0 + size;
                } else {
                    const double ddx = double(x) + 0.5 - cx;
                    const double ddy = double(y) + 0.5 - cy;
                    inside = ddx * ddx + ddy * ddy <= r2;
                }
                for (i64 c = 0; c < 3; ++c)
                    clip.video.at4(f, c, y, x) =
                        T(inside ? spec.color[size_t(c)] : spec.background[size_t(c)]);
            }
    }
    return clip;
}

struct CorpusEntry {
    ClipSpec spec;
    u64 seed = 0;
};
using Corpus = std::vector<CorpusEntry>;

// 2 kinds x 5 directions x 4 colors = 40 clips with cycling speeds.
inline Corpus default_corpus() {
    static const std::array<std::array<double, 3>, 4> palette = {{
        {1.0, 0.25, 0.2},
        {0.2, 1.0, 0.3},
        {0.3, 0.5, 1.0},
        {1.0, 0.9, 0.2},
    }};
    static const std::array<double, 4> speeds = {0.5, 1.0, 1.5, 2.0};
    Corpus corpus;
    u64 i = 0;
    for (i64 kind = 0; kind < kNumShapeKinds; ++kind)
        for (i64 dir = 0; dir < kNumDirections; ++dir)
            for (i64 c = 0; c < 4; ++c) {
                ClipSpec s;
                s.shape_kind = ShapeKind(kind);
                s.direction = MoveDirection(dir);
                s.color = palette[size_t(c)];
                s.background = {0.05, 0.05, 0.08};
                s.speed = speeds[size_t((i64(i) + c) % 4)];
                corpus.push_back({s, i});
                ++i;
            }
    return corpus;
}

struct TrainConfig {
    i64 batch_size = 8;
    double learning_rate = 1e-4;
    i64 steps = 2000;
    double label_drop_prob = 0.1;
    i64 frames_per_clip = 16;
    i64 interval_min = 1;
    i64 interval_max = 5;
    double noise_alpha = 1.5;
    i64 clip_length = 80;  // rendered frames per corpus clip
    u64 seed = 0;
    std::string trace_path;      // per-step loss CSV; empty disables
    std::string checkpoint_dir;  // empty disables cadence checkpoints
    i64 checkpoint_every = 500;
};

template <class T>
struct TrainBatch {
    std::vector<Tensor<T>> noisy_latents;        // [N, C', H', W'] each
    std::vector<Tensor<T>> targets;              // the eps that was added
    std::vector<ConditionSignal<T>> conditions;  // timestep filled in
};

// Deterministic in (corpus, cfg, seed).  Per element, the derived stream
// draws in order: clip index, interval v, timestep t, noise seed, label drop.
template <class T>
TrainBatch<T> sample_batch(const Corpus& corpus, const TrainConfig& cfg,
                           const NoiseSchedule<T>& sched, u64 seed) {
    check_arg(!corpus.empty(), "sample_batch: empty corpus");
    check_arg(cfg.batch_size >= 1, "sample_batch: empty batch");
    check_arg(cfg.interval_min >= 1 && cfg.interval_min <= cfg.interval_max,
              "sample_batch: bad interval range");

    TrainBatch<T> batch;
    Rng root(seed);
    for (i64 b = 0; b < cfg.batch_size; ++b) {
        Rng r = root.split(u64(b));
        const i64 idx = r.uniform_int(i64(corpus.size()));
        const i64 v = cfg.interval_min + r.uniform_int(cfg.interval_max - cfg.interval_min + 1);
        const i64 needed = (cfg.frames_per_clip - 1) * v + 1;
        check_arg(needed <= cfg.clip_length, "sample_batch: clip too short for requested stride");
        const i64 t = 1 + r.uniform_int(sched.timesteps);
        const u64 noise_seed = r.next_u64();
        const bool drop_label = r.uniform() < cfg.label_drop_prob;

        const Clip<T> clip = gen_clip<T>(corpus[size_t(idx)].spec, cfg.clip_length,
                                         corpus[size_t(idx)].seed);
        Tensor<T> frames({cfg.frames_per_clip, 3, kCanvas, kCanvas});
        const i64 per = 3 * kCanvas * kCanvas;
        for (i64 f = 0; f < cfg.frames_per_clip; ++f)
            std::copy(clip.video.data() + (f * v) * per, clip.video.data() + (f * v + 1) * per,
                      frames.data() + f * per);
        Tensor<T> z0 = encode_video(frames);

        Tensor<T> eps = sample_mixed_noise<T>(z0.shape(), {cfg.noise_alpha, noise_seed});
        Tensor<T> z_t = add_noise(z0, eps, t, sched);

        // frame 1 enters clean; it is conditioning, not a denoising target
        const i64 per_lat = z0.size() / z0.dim(0);
        std::copy(z0.data(), z0.data() + per_lat, z_t.data());

        ConditionSignal<T> cond;
        cond.first_frame_latent = Tensor<T>({z0.dim(1), z0.dim(2), z0.dim(3)});
        std::copy(z0.data(), z0.data() + per_lat, cond.first_frame_latent.data());
        cond.label_id = drop_label ? std::nullopt : std::optional<i64>(clip.label);
        cond.frame_interval = v;
        cond.timestep = t;

        batch.noisy_latents.push_back(std::move(z_t));
        batch.targets.push_back(std::move(eps));
        batch.conditions.push_back(std::move(cond));
    }
    return batch;
}

}  // namespace vdiff
