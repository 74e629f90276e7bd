// Command-line front end: train, sample, long-video, camera, decompose,
// metrics.  Every subcommand prints its effective configuration as sorted
// `key = value` lines before doing any work.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <vdiff/vdiff.hpp>

namespace {

using vdiff::i64;
using vdiff::u64;
using Tensorf = vdiff::Tensor<float>;

std::string join_ints(const std::vector<i64>& xs) {
    std::ostringstream out;
    for (size_t i = 0; i < xs.size(); ++i) out << (i ? "," : "") << xs[i];
    return out.str();
}

std::vector<i64> split_ints(const std::string& s) {
    std::vector<i64> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(std::stoll(vdiff::trim(tok)));
    return out;
}

std::string fmt_double(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

u64 resolve_seed(const CLI::Option* opt, u64 flag_value) {
    if (opt->count() > 0) return flag_value;
    if (const char* env = std::getenv("VDIFF_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

vdiff::Config unet_config_to_kv(const vdiff::UNetConfig& u) {
    vdiff::Config c;
    c.set("base_channels", std::to_string(u.base_channels));
    c.set("channel_multipliers", join_ints(u.channel_multipliers));
    c.set("attention_resolutions", join_ints(u.attention_resolutions));
    c.set("input_resolution", std::to_string(u.input_resolution));
    c.set("num_frames", std::to_string(u.num_frames));
    c.set("latent_channels", std::to_string(u.latent_channels));
    c.set("label_vocab", std::to_string(u.label_vocab));
    c.set("embed_dim", std::to_string(u.embed_dim));
    c.set("head_count", std::to_string(u.head_count));
    c.set("window_size", std::to_string(u.window_size));
    c.set("rope_base", fmt_double(u.rope_base));
    c.set("norm_groups", std::to_string(u.norm_groups));
    c.set("temporal_enabled", u.temporal_enabled ? "true" : "false");
    return c;
}

vdiff::UNetConfig kv_to_unet_config(const vdiff::Config& c) {
    vdiff::UNetConfig u;
    u.base_channels = c.get_int("base_channels", u.base_channels);
    if (c.has("channel_multipliers")) u.channel_multipliers = split_ints(c.get_str("channel_multipliers"));
    if (c.has("attention_resolutions")) u.attention_resolutions = split_ints(c.get_str("attention_resolutions"));
    u.input_resolution = c.get_int("input_resolution", u.input_resolution);
    u.num_frames = c.get_int("num_frames", u.num_frames);
    u.latent_channels = c.get_int("latent_channels", u.latent_channels);
    u.label_vocab = c.get_int("label_vocab", u.label_vocab);
    u.embed_dim = c.get_int("embed_dim", u.embed_dim);
    u.head_count = c.get_int("head_count", u.head_count);
    u.window_size = c.get_int("window_size", u.window_size);
    u.rope_base = c.get_double("rope_base", u.rope_base);
    u.norm_groups = c.get_int("norm_groups", u.norm_groups);
    u.temporal_enabled = c.get_bool("temporal_enabled", u.temporal_enabled);
    return u;
}

// Corpus files list one clip per `clipN.*` key group; see docs/formats.md.
vdiff::Corpus parse_corpus(const vdiff::Config& c) {
    auto parse_triple = [](const std::string& s) {
        std::array<double, 3> v{};
        std::istringstream in(s);
        std::string tok;
        for (int i = 0; i < 3; ++i) {
            vdiff::check_arg(bool(std::getline(in, tok, ',')), "corpus: color needs 3 components");
            v[size_t(i)] = std::stod(vdiff::trim(tok));
        }
        return v;
    };
    vdiff::Corpus corpus;
    for (i64 i = 0;; ++i) {
        const std::string p = "clip" + std::to_string(i) + ".";
        if (!c.has(p + "shape")) break;
        vdiff::CorpusEntry entry;
        const std::string shape = c.get_str(p + "shape");
        if (shape == "square") entry.spec.shape_kind = vdiff::ShapeKind::kSquare;
        else if (shape == "circle") entry.spec.shape_kind = vdiff::ShapeKind::kCircle;
        else vdiff::fail_arg("corpus: unknown shape " + shape);
        const std::string dir = c.get_str(p + "direction");
        if (dir == "left") entry.spec.direction = vdiff::MoveDirection::kLeft;
        else if (dir == "right") entry.spec.direction = vdiff::MoveDirection::kRight;
        else if (dir == "up") entry.spec.direction = vdiff::MoveDirection::kUp;
        else if (dir == "down") entry.spec.direction = vdiff::MoveDirection::kDown;
        else if (dir == "diag") entry.spec.direction = vdiff::MoveDirection::kDiagonal;
        else vdiff::fail_arg("corpus: unknown direction " + dir);
        if (c.has(p + "color")) entry.spec.color = parse_triple(c.get_str(p + "color"));
        if (c.has(p + "background")) entry.spec.background = parse_triple(c.get_str(p + "background"));
        entry.spec.speed = c.get_double(p + "speed", 1.0);
        entry.seed = u64(c.get_int(p + "seed", i));
        corpus.push_back(entry);
    }
    vdiff::check_arg(!corpus.empty(), "corpus: no clip0.* entries found");
    return corpus;
}

struct LoadedModel {
    vdiff::UNetConfig config;
    vdiff::ParamStore<float> store;
    std::unique_ptr<vdiff::VideoUNet<float>> net;
};

LoadedModel load_model(const std::string& path) {
    auto data = vdiff::load_checkpoint<float>(path);
    LoadedModel m;
    m.config = kv_to_unet_config(vdiff::Config::from_string(data.config_text));
    m.net = std::make_unique<vdiff::VideoUNet<float>>(m.config, m.store, 0);
    m.store.load_state_dict(data.tensors);
    return m;
}

void print_effective(const vdiff::Config& c) { std::cout << c.serialize() << std::flush; }

Tensorf load_conditioning_latent(const std::string& image_path, const vdiff::UNetConfig& cfg) {
    Tensorf pixel = vdiff::read_ppm<float>(image_path);
    const i64 expect = cfg.input_resolution * 2;
    vdiff::check_arg(pixel.dim(1) == expect && pixel.dim(2) == expect,
                     "conditioning image must be " + std::to_string(expect) + "x" +
                         std::to_string(expect) + " for this checkpoint");
    return vdiff::encode_frame(pixel);
}

int cmd_train(const std::string& corpus_path, i64 steps, i64 batch_size, double lr, i64 frames,
              double label_drop, i64 interval_max, double noise_alpha, u64 seed,
              const std::string& out, const std::string& trace, i64 checkpoint_every,
              i64 base_channels, i64 embed_dim, i64 window_size) {
    vdiff::UNetConfig ucfg;
    ucfg.num_frames = frames;
    ucfg.base_channels = base_channels;
    ucfg.embed_dim = embed_dim;
    ucfg.window_size = window_size;

    vdiff::TrainConfig tcfg;
    tcfg.steps = steps;
    tcfg.batch_size = batch_size;
    tcfg.learning_rate = lr;
    tcfg.frames_per_clip = frames;
    tcfg.label_drop_prob = label_drop;
    tcfg.interval_max = interval_max;
    tcfg.noise_alpha = noise_alpha;
    tcfg.seed = seed;
    tcfg.trace_path = trace;
    tcfg.checkpoint_every = checkpoint_every;

    vdiff::Config eff = unet_config_to_kv(ucfg);
    eff.set("command", "train");
    eff.set("steps", std::to_string(steps));
    eff.set("batch_size", std::to_string(batch_size));
    eff.set("learning_rate", fmt_double(lr));
    eff.set("label_drop_prob", fmt_double(label_drop));
    eff.set("interval_max", std::to_string(interval_max));
    eff.set("noise_alpha", fmt_double(noise_alpha));
    eff.set("seed", std::to_string(seed));
    eff.set("corpus", corpus_path.empty() ? "<built-in>" : corpus_path);
    eff.set("out", out);
    print_effective(eff);

    const vdiff::Corpus corpus =
        corpus_path.empty() ? vdiff::default_corpus() : parse_corpus(vdiff::Config::from_file(corpus_path));
    const auto sched = vdiff::make_schedule<float>();
    vdiff::ParamStore<float> store;
    vdiff::VideoUNet<float> net(ucfg, store, seed);
    std::cout << "parameters = " << store.total_parameters() << "\n";

    const std::string ckpt_config = unet_config_to_kv(ucfg).serialize();
    auto save = [&](i64 step) {
        vdiff::save_checkpoint(out, store.state_dict(), ckpt_config);
        std::cout << "checkpoint = " << out << " (step " << step << ")\n";
    };
    vdiff::train<float>(net, store, corpus, tcfg, sched,
                        [&](i64 step, float loss) {
                            if (step % 25 == 0 || step + 1 == steps)
                                std::cout << "step " << step << " loss " << loss << std::endl;
                        },
                        save);
    return 0;
}

int cmd_sample(const std::string& checkpoint, const std::string& image, const std::string& out,
               i64 label, i64 interval, i64 steps, double guidance, u64 seed, bool frame_init,
               double tau, double d0, double noise_alpha, const std::string& first_frame_mode,
               i64 fps) {
    vdiff::Config eff;
    eff.set("command", "sample");
    eff.set("checkpoint", checkpoint);
    eff.set("image", image);
    eff.set("out", out);
    eff.set("label", std::to_string(label));
    eff.set("interval", std::to_string(interval));
    eff.set("steps", std::to_string(steps));
    eff.set("guidance_scale", fmt_double(guidance));
    eff.set("seed", std::to_string(seed));
    eff.set("frame_init", frame_init ? "true" : "false");
    eff.set("tau", fmt_double(tau));
    eff.set("d0", fmt_double(d0));
    eff.set("noise_alpha", fmt_double(noise_alpha));
    eff.set("first_frame_mode", first_frame_mode);
    print_effective(eff);

    LoadedModel m = load_model(checkpoint);
    const auto sched = vdiff::make_schedule<float>();
    Tensorf z1 = load_conditioning_latent(image, m.config);

    const vdiff::Shape noise_shape = {m.config.num_frames, z1.dim(0), z1.dim(1), z1.dim(2)};
    Tensorf eps = vdiff::sample_mixed_noise<float>(noise_shape, {noise_alpha, seed});
    if (frame_init) {
        vdiff::FrameInitParams fi{i64(tau), d0};
        eps = vdiff::frame_init_mix(vdiff::make_static_video(z1, m.config.num_frames), eps, fi, sched);
    }

    vdiff::ConditionSignal<float> cond;
    cond.first_frame_latent = z1;
    if (label >= 0) cond.label_id = label;
    cond.frame_interval = interval;

    vdiff::GuidanceConfig gcfg;
    gcfg.num_steps = steps;
    gcfg.scale_w = guidance;
    const auto mode = first_frame_mode == "renoise" ? vdiff::FirstFrameMode::kRenoise
                                                    : vdiff::FirstFrameMode::kClean;
    vdiff::check_arg(first_frame_mode == "clean" || first_frame_mode == "renoise",
                     "first_frame_mode must be clean or renoise");

    auto model = [&](const Tensorf& z, const vdiff::ConditionSignal<float>& c) {
        return m.net->predict(z, c);
    };
    Tensorf latents = vdiff::ddim_sample<float>(model, eps, z1, cond, gcfg, sched, mode);
    Tensorf pixels = vdiff::decode_video(latents);
    vdiff::write_video(out, pixels, fps);
    std::cout << "frames_written = " << pixels.dim(0) << "\n";
    return 0;
}

int cmd_long_video(const std::string& checkpoint, const std::string& image, const std::string& out,
                   i64 chunks, i64 label, i64 interval, i64 steps, double guidance, u64 seed,
                   bool frame_init, double tau, double d0, double noise_alpha, i64 fps) {
    vdiff::Config eff;
    eff.set("command", "long-video");
    eff.set("checkpoint", checkpoint);
    eff.set("image", image);
    eff.set("out", out);
    eff.set("chunks", std::to_string(chunks));
    eff.set("label", std::to_string(label));
    eff.set("interval", std::to_string(interval));
    eff.set("steps", std::to_string(steps));
    eff.set("guidance_scale", fmt_double(guidance));
    eff.set("seed", std::to_string(seed));
    eff.set("frame_init", frame_init ? "true" : "false");
    eff.set("tau", fmt_double(tau));
    eff.set("d0", fmt_double(d0));
    eff.set("noise_alpha", fmt_double(noise_alpha));
    print_effective(eff);

    LoadedModel m = load_model(checkpoint);
    const auto sched = vdiff::make_schedule<float>();
    Tensorf z1 = load_conditioning_latent(image, m.config);

    vdiff::ConditionSignal<float> cond;
    cond.first_frame_latent = z1;
    if (label >= 0) cond.label_id = label;
    cond.frame_interval = interval;

    vdiff::GuidanceConfig gcfg;
    gcfg.num_steps = steps;
    gcfg.scale_w = guidance;

    vdiff::LongVideoConfig lv;
    lv.chunks = chunks;
    lv.use_frame_init = frame_init;
    lv.frame_init = {i64(tau), d0};
    lv.noise_alpha = noise_alpha;
    lv.seed = seed;

    auto model = [&](const Tensorf& z, const vdiff::ConditionSignal<float>& c) {
        return m.net->predict(z, c);
    };
    Tensorf latents = vdiff::generate_long_video<float>(model, z1, cond, gcfg, sched,
                                                        m.config.num_frames, lv);
    Tensorf pixels = vdiff::decode_video(latents);
    vdiff::write_video(out, pixels, fps);
    std::cout << "frames_written = " << pixels.dim(0) << "\n";
    return 0;
}

int cmd_camera(const std::string& checkpoint, const std::string& image, const std::string& out,
               const std::string& motion, double pan_dx, double pan_dy, double zoom_start,
               double zoom_end, i64 label, i64 interval, i64 steps, double guidance, u64 seed,
               double tau, double d0, double noise_alpha, i64 fps) {
    vdiff::Config eff;
    eff.set("command", "camera");
    eff.set("checkpoint", checkpoint);
    eff.set("image", image);
    eff.set("out", out);
    eff.set("motion", motion);
    eff.set("pan_dx", fmt_double(pan_dx));
    eff.set("pan_dy", fmt_double(pan_dy));
    eff.set("zoom_start", fmt_double(zoom_start));
    eff.set("zoom_end", fmt_double(zoom_end));
    eff.set("label", std::to_string(label));
    eff.set("interval", std::to_string(interval));
    eff.set("steps", std::to_string(steps));
    eff.set("guidance_scale", fmt_double(guidance));
    eff.set("seed", std::to_string(seed));
    eff.set("tau", fmt_double(tau));
    eff.set("d0", fmt_double(d0));
    eff.set("noise_alpha", fmt_double(noise_alpha));
    print_effective(eff);

    LoadedModel m = load_model(checkpoint);
    const auto sched = vdiff::make_schedule<float>();
    Tensorf pixel = vdiff::read_ppm<float>(image);

    vdiff::CameraAppConfig app;
    if (motion == "pan") app.motion.kind = vdiff::CameraKind::kPan;
    else if (motion == "zoom") app.motion.kind = vdiff::CameraKind::kZoom;
    else vdiff::fail_arg("motion must be pan or zoom");
    app.motion.pan_dx = pan_dx;
    app.motion.pan_dy = pan_dy;
    app.motion.zoom_start = zoom_start;
    app.motion.zoom_end = zoom_end;
    app.frame_init = {i64(tau), d0};
    app.noise_alpha = noise_alpha;
    app.seed = seed;

    vdiff::ConditionSignal<float> cond;
    if (label >= 0) cond.label_id = label;
    cond.frame_interval = interval;

    vdiff::GuidanceConfig gcfg;
    gcfg.num_steps = steps;
    gcfg.scale_w = guidance;

    auto model = [&](const Tensorf& z, const vdiff::ConditionSignal<float>& c) {
        return m.net->predict(z, c);
    };
    Tensorf latents = vdiff::generate_camera_video<float>(model, pixel, cond, gcfg, sched,
                                                          m.config.num_frames, app);
    Tensorf pixels = vdiff::decode_video(latents);
    vdiff::write_video(out, pixels, fps);
    std::cout << "frames_written = " << pixels.dim(0) << "\n";
    return 0;
}

int cmd_decompose(const std::string& input, const std::string& out, double d0) {
    vdiff::Config eff;
    eff.set("command", "decompose");
    eff.set("input", input);
    eff.set("out", out);
    eff.set("d0", fmt_double(d0));
    print_effective(eff);

    auto [video, manifest] = vdiff::read_video<float>(input);
    auto [low, high] = vdiff::frequency_split(video, d0);
    // the high band is roughly zero-mean; recenter at 0.5 for viewing
    Tensorf high_vis = high;
    for (i64 i = 0; i < high_vis.size(); ++i) high_vis[i] += 0.5f;
    vdiff::write_video(out + "/low", low, manifest.fps);
    vdiff::write_video(out + "/high", high_vis, manifest.fps);
    std::cout << "frames_written = " << video.dim(0) << "\n";
    return 0;
}

int cmd_metrics(const std::string& input, const std::string& reference) {
    vdiff::Config eff;
    eff.set("command", "metrics");
    eff.set("input", input);
    eff.set("reference", reference.empty() ? "<frame 0>" : reference);
    print_effective(eff);

    auto [video, manifest] = vdiff::read_video<float>(input);
    (void)manifest;
    Tensorf ref;
    if (reference.empty()) {
        ref = Tensorf({video.dim(1), video.dim(2), video.dim(3)});
        std::copy(video.data(), video.data() + ref.size(), ref.data());
    } else {
        ref = vdiff::read_ppm<float>(reference);
    }
    const auto report = vdiff::compute_metrics(video, ref);
    if (report.temporal_flicker)
        std::cout << "temporal_flicker = " << *report.temporal_flicker << "\n";
    else
        std::cout << "temporal_flicker = undefined\n";
    std::cout << "first_frame_fidelity = " << report.first_frame_fidelity << "\n";
    for (size_t i = 0; i < report.flicker_series.size(); ++i)
        std::cout << "flicker_" << i << " = " << report.flicker_series[i] << "\n";
    for (size_t i = 0; i < report.fidelity_series.size(); ++i)
        std::cout << "fidelity_" << i << " = " << report.fidelity_series[i] << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"image-to-video diffusion toolkit"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "train a model on the moving-shapes corpus");
    std::string t_corpus, t_out = "model.ckpt", t_trace;
    i64 t_steps = 2000, t_batch = 8, t_frames = 16, t_every = 500, t_interval_max = 5;
    i64 t_base = 32, t_embed = 128, t_window = 3;
    double t_lr = 1e-4, t_drop = 0.1, t_alpha = 1.5;
    u64 t_seed = 0;
    train->add_option("--corpus", t_corpus, "corpus spec file (default: built-in 40 clips)");
    train->add_option("--steps", t_steps, "optimizer steps");
    train->add_option("--batch-size", t_batch, "clips per step");
    train->add_option("--lr", t_lr, "Adam learning rate");
    train->add_option("--frames", t_frames, "frames per training clip");
    train->add_option("--label-drop", t_drop, "probability of dropping the label");
    train->add_option("--interval-max", t_interval_max, "maximum frame stride");
    train->add_option("--noise-alpha", t_alpha, "mixed noise prior strength");
    auto* t_seed_opt = train->add_option("--seed", t_seed, "run seed");
    train->add_option("--out", t_out, "checkpoint output path");
    train->add_option("--trace", t_trace, "per-step loss CSV path");
    train->add_option("--checkpoint-every", t_every, "checkpoint cadence in steps");
    train->add_option("--base-channels", t_base, "first-level channel count");
    train->add_option("--embed-dim", t_embed, "timestep embedding width");
    train->add_option("--window-size", t_window, "temporal attention window size");

    // shared sampling options
    struct SampleOpts {
        std::string checkpoint, image, out = "out";
        i64 label = -1, interval = 1, steps = 50, fps = 8;
        double guidance = 7.5, tau = 850, d0 = 0.25, alpha = 1.5;
        u64 seed = 0;
        bool no_frame_init = false;
    };
    auto add_sample_opts = [](CLI::App* cmd, SampleOpts& o, double tau_default, double d0_default)
        -> CLI::Option* {
        o.tau = tau_default;
        o.d0 = d0_default;
        cmd->add_option("--checkpoint", o.checkpoint, "trained model checkpoint")->required();
        cmd->add_option("--image", o.image, "conditioning frame (PPM)")->required();
        cmd->add_option("--out", o.out, "output frame directory");
        cmd->add_option("--label", o.label, "class label, -1 for unconditional");
        cmd->add_option("--interval", o.interval, "frame stride conditioning value");
        cmd->add_option("--steps", o.steps, "sampling steps");
        cmd->add_option("--guidance-scale", o.guidance, "classifier-free guidance weight");
        cmd->add_option("--tau", o.tau, "noise-mixing timestep");
        cmd->add_option("--d0", o.d0, "low-pass cutoff (normalized)");
        cmd->add_option("--noise-alpha", o.alpha, "mixed noise prior strength");
        cmd->add_option("--fps", o.fps, "manifest fps");
        cmd->add_flag("--no-frame-init", o.no_frame_init, "disable frequency-domain init");
        return cmd->add_option("--seed", o.seed, "sampling seed");
    };

    auto* sample = app.add_subcommand("sample", "generate a video from one image");
    SampleOpts s;
    std::string s_mode = "clean";
    auto* s_seed_opt = add_sample_opts(sample, s, 850, 0.25);
    sample->add_option("--first-frame-mode", s_mode, "clean|renoise");

    auto* longv = app.add_subcommand("long-video", "autoregressive multi-chunk generation");
    SampleOpts l;
    i64 l_chunks = 3;
    auto* l_seed_opt = add_sample_opts(longv, l, 850, 0.25);
    longv->add_option("--chunks", l_chunks, "number of chained chunks");

    auto* camera = app.add_subcommand("camera", "camera motion control");
    SampleOpts c;
    std::string c_motion = "pan";
    double c_pan_dx = 2.0, c_pan_dy = 0.0, c_zoom_start = 0.75, c_zoom_end = 0.75;
    auto* c_seed_opt = add_sample_opts(camera, c, 750, 0.5);
    camera->add_option("--motion", c_motion, "pan|zoom");
    camera->add_option("--pan-dx", c_pan_dx, "horizontal pan speed (source px/frame)");
    camera->add_option("--pan-dy", c_pan_dy, "vertical pan speed (source px/frame)");
    camera->add_option("--zoom-start", c_zoom_start, "initial crop fraction");
    camera->add_option("--zoom-end", c_zoom_end, "final crop fraction");

    auto* decompose = app.add_subcommand("decompose", "split a video into frequency bands");
    std::string d_input, d_out = "bands";
    double d_d0 = 0.25;
    decompose->add_option("--input", d_input, "input frame directory")->required();
    decompose->add_option("--out", d_out, "output directory (low/, high/)");
    decompose->add_option("--d0", d_d0, "low-pass cutoff (normalized)");

    auto* metrics = app.add_subcommand("metrics", "flicker and first-frame fidelity");
    std::string m_input, m_reference;
    metrics->add_option("--input", m_input, "input frame directory")->required();
    metrics->add_option("--reference", m_reference, "reference frame (default: frame 0)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed())
            return cmd_train(t_corpus, t_steps, t_batch, t_lr, t_frames, t_drop, t_interval_max,
                             t_alpha, resolve_seed(t_seed_opt, t_seed), t_out, t_trace, t_every,
                             t_base, t_embed, t_window);
        if (sample->parsed())
            return cmd_sample(s.checkpoint, s.image, s.out, s.label, s.interval, s.steps,
                              s.guidance, resolve_seed(s_seed_opt, s.seed), !s.no_frame_init,
                              s.tau, s.d0, s.alpha, s_mode, s.fps);
        if (longv->parsed())
            return cmd_long_video(l.checkpoint, l.image, l.out, l_chunks, l.label, l.interval,
                                  l.steps, l.guidance, resolve_seed(l_seed_opt, l.seed),
                                  !l.no_frame_init, l.tau, l.d0, l.alpha, l.fps);
        if (camera->parsed())
            return cmd_camera(c.checkpoint, c.image, c.out, c_motion, c_pan_dx, c_pan_dy,
                              c_zoom_start, c_zoom_end, c.label, c.interval, c.steps, c.guidance,
                              resolve_seed(c_seed_opt, c.seed), c.tau, c.d0, c.alpha, c.fps);
        if (decompose->parsed()) return cmd_decompose(d_input, d_out, d_d0);
        if (metrics->parsed()) return cmd_metrics(m_input, m_reference);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
