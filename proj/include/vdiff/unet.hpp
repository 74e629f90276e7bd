#pragma once

// Video denoising U-Net.
//
// A standard image U-Net (ResBlocks, downsample/upsample, attention at the
// configured spatial resolutions) inflated along the frame axis: every
// ResBlock is followed by a temporal convolution block (extent (3,1,1), zero
// padded in time) and every spatial attention block is paired with a windowed
// temporal attention block.  Each temporal block mixes its output with its
// input through a learned scalar gate,
//
//     out = gamma * spatial + (1 - gamma) * temporal,   gamma in [0, 1]
//
// initialized to gamma = 1 so a freshly built model reduces exactly to its
// per-frame spatial backbone.
//
// Conditioning: timestep and frame-interval sinusoidal embeddings pass
// through small MLPs (the interval MLP's second layer is zero-initialized so
// interval conditioning is inert at init) and are added into every ResBlock;
// a class label selects 4 learned key/value tokens for cross-attention, with
// a dedicated trained null row for label-free (guidance) evaluation.

#include <map>
#include <string>
#include <vector>

#include "attention.hpp"
#include "autograd.hpp"
#include "condition.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace vdiff {

// ----- parameter store -----

template <class T>
class ParamStore {
  public:
    // Returns the existing parameter or creates it from init.  Shapes of
    // rebound parameters must match.
    template <class InitFn>
    Var<T> param(const std::string& name, const Shape& shape, InitFn&& init) {
        auto it = params_.find(name);
        if (it != params_.end()) {
            check_arg(it->second.value().shape() == shape,
                      ("param '" + name + "': shape mismatch on rebind").c_str());
            return it->second;
        }
        Var<T> v(init(), true);
        check_arg(v.value().shape() == shape, "param: init shape mismatch");
        params_.emplace(name, v);
        return v;
    }

    bool has(const std::string& name) const { return params_.count(name) > 0; }

    Var<T> get(const std::string& name) const {
        auto it = params_.find(name);
        check_arg(it != params_.end(), ("unknown parameter: " + name).c_str());
        return it->second;
    }

    const std::map<std::string, Var<T>>& all() const { return params_; }

    void zero_grad() {
        for (auto& [name, v] : params_) v.zero_grad();
    }

    i64 total_parameters() const {
        i64 n = 0;
        for (const auto& [name, v] : params_) n += v.value().size();
        return n;
    }

    i64 parameters_matching(const std::string& needle) const {
        i64 n = 0;
        for (const auto& [name, v] : params_)
            if (name.find(needle) != std::string::npos) n += v.value().size();
        return n;
    }

    std::map<std::string, Tensor<T>> state_dict() const {
        std::map<std::string, Tensor<T>> out;
        for (const auto& [name, v] : params_) out.emplace(name, v.value());
        return out;
    }

    // Strict load: every parameter must be present with a matching shape.
    void load_state_dict(const std::map<std::string, Tensor<T>>& dict) {
        for (auto& [name, v] : params_) {
            auto it = dict.find(name);
            check_runtime(it != dict.end(), "load_state_dict: missing tensor '" + name + "'");
            check_runtime(it->second.shape() == v.value().shape(),
                          "load_state_dict: shape mismatch for '" + name + "'");
            auto node = v.node();
            node->value = it->second;
        }
        for (const auto& [name, t] : dict)
            check_runtime(params_.count(name) > 0,
                          "load_state_dict: unexpected tensor '" + name + "'");
    }

  private:
    std::map<std::string, Var<T>> params_;
};

// ----- configuration -----

struct UNetConfig {
    i64 base_channels = 32;
    std::vector<i64> channel_multipliers = {1, 2};
    std::vector<i64> attention_resolutions = {4};  // spatial sizes that get attention
    i64 input_resolution = 8;                      // latent side length the taps refer to
    i64 num_frames = 16;
    i64 latent_channels = 12;
    i64 label_vocab = 10;
    i64 embed_dim = 128;
    i64 head_count = 4;
    i64 window_size = 3;
    double rope_base = 10000.0;
    i64 norm_groups = 8;
    bool temporal_enabled = true;

    i64 levels() const { return i64(channel_multipliers.size()); }
    bool attention_at(i64 resolution) const {
        for (i64 r : attention_resolutions)
            if (r == resolution) return true;
        return false;
    }
};

inline constexpr i64 kLabelTokens = 4;

// Standard sin/cos positional embedding, dim must be even.
template <class T>
Tensor<T> sinusoidal_embedding(double pos, i64 dim) {
    check_arg(dim > 0 && dim % 2 == 0, "sinusoidal_embedding: even dim required");
    const i64 half = dim / 2;
    Tensor<T> out({1, dim});
    for (i64 i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -double(i) / double(half));
        out[i] = T(std::sin(pos * freq));
        out[half + i] = T(std::cos(pos * freq));
    }
    return out;
}

// ----- the network -----

template <class T>
class VideoUNet {
  public:
    VideoUNet(const UNetConfig& cfg, ParamStore<T>& store, u64 init_seed = 0)
        : cfg_(cfg), store_(&store), rng_(Rng(init_seed)) {
        check_arg(cfg.levels() >= 1, "unet: at least one level required");
        check_arg(cfg.embed_dim % 2 == 0, "unet: even embed_dim required");
        check_arg(cfg.norm_groups >= 1, "unet: positive norm group count required");
        build();
    }

    const UNetConfig& config() const { return cfg_; }

    // z_t: [N, C', H', W'].  Builds an autograd graph when parameters require
    // gradients and no NoGradGuard is active.
    Var<T> forward(const Tensor<T>& z_t, const ConditionSignal<T>& cond) const {
        const auto& cfg = cfg_;
        check_arg(z_t.rank() == 4, "unet_forward: [N,C,H,W] input required");
        check_arg(z_t.dim(1) == cfg.latent_channels, "unet_forward: channel count mismatch");
        check_arg(z_t.dim(0) >= 1, "unet_forward: empty clip");
        check_arg(cond.timestep >= 0, "unet_forward: negative timestep");
        if (cond.label_id)
            check_arg(*cond.label_id >= 0 && *cond.label_id < cfg.label_vocab,
                      "unet_forward: label id out of vocabulary");
        const i64 down_factor = i64(1) << (cfg.levels() - 1);
        check_arg(z_t.dim(2) % down_factor == 0 && z_t.dim(3) % down_factor == 0,
                  "unet_forward: spatial dims must be divisible by 2^(levels-1)");

        // conditioning embeddings
        Var<T> zin(z_t, false);
        Var<T> t_emb = mlp(sinusoidal_embedding<T>(double(cond.timestep), cfg.embed_dim),
                           t_l1w_, t_l1b_, t_l2w_, t_l2b_);
        Var<T> v_emb = mlp(sinusoidal_embedding<T>(double(cond.frame_interval), cfg.embed_dim),
                           v_l1w_, v_l1b_, v_l2w_, v_l2b_);
        Var<T> emb = ag::add(t_emb, v_emb);  // [1, embed_dim]

        const i64 label_row = cond.label_id ? *cond.label_id : cfg.label_vocab;
        Var<T> label_tokens =
            ag::reshape(ag::embed_row(label_table_, label_row), {kLabelTokens, cfg.embed_dim});

        // down path
        Var<T> h = ag::conv2d(zin, conv_in_w_, conv_in_b_, 1, 1);
        std::vector<Var<T>> skips;
        for (i64 i = 0; i < cfg.levels(); ++i) {
            h = apply_level(down_[size_t(i)], h, emb, label_tokens);
            skips.push_back(h);
            if (i + 1 < cfg.levels())
                h = ag::conv2d(h, down_w_[size_t(i)], down_b_[size_t(i)], 2, 1);
        }

        // bottleneck
        h = apply_level(mid_, h, emb, label_tokens);

        // up path
        for (i64 i = cfg.levels() - 1; i >= 0; --i) {
            h = ag::concat_channels(h, skips[size_t(i)]);
            h = apply_level(up_[size_t(i)], h, emb, label_tokens);
            if (i > 0) h = ag::nearest_upsample2(h);
        }

        // output head
        h = ag::group_norm(h, out_gn_g_, out_gn_b_, cfg.norm_groups);
        h = ag::silu(h);
        h = ag::conv2d(h, out_w_, out_b_, 1, 1);
        return h;
    }

    Tensor<T> predict(const Tensor<T>& z_t, const ConditionSignal<T>& cond) const {
        NoGradGuard ng;
        return forward(z_t, cond).value();
    }

  private:
    struct ResBlock {
        Var<T> gn1_g, gn1_b, w1, b1;
        Var<T> ew, eb;
        Var<T> gn2_g, gn2_b, w2, b2;
        Var<T> skip_w, skip_b;
        bool has_skip = false;
        i64 cin = 0, cout = 0;
    };
    struct TConvBlock {
        Var<T> gn1_g, gn1_b, w1, b1;
        Var<T> gn2_g, gn2_b, w2, b2;
        Var<T> gamma;
    };
    struct SAttnBlock {
        Var<T> ln1_g, ln1_b, ln2_g, ln2_b;
        AttentionVars<T> self_w, cross_w;
    };
    struct TAttnBlock {
        Var<T> ln_g, ln_b;
        AttentionVars<T> self_w;
        Var<T> gamma;
    };
    struct Level {
        ResBlock res;
        TConvBlock tconv;
        bool has_attn = false;
        SAttnBlock sattn;
        TAttnBlock tattn;
    };

    // --- parameter construction ---

    Tensor<T> normal_init(const Shape& shape, double std) {
        Rng r = rng_.split(init_counter_++);
        Tensor<T> t(shape);
        for (i64 i = 0; i < t.size(); ++i) t[i] = T(r.normal() * std);
        return t;
    }

    Var<T> conv_param(const std::string& name, i64 co, i64 ci, i64 kh, i64 kw) {
        const double std = 1.0 / std::sqrt(double(ci * kh * kw));
        return store_->param(name, {co, ci, kh, kw},
                             [&] { return normal_init({co, ci, kh, kw}, std); });
    }

    Var<T> matrix_param(const std::string& name, i64 rows, i64 cols) {
        const double std = 1.0 / std::sqrt(double(rows));
        return store_->param(name, {rows, cols}, [&] { return normal_init({rows, cols}, std); });
    }

    Var<T> zeros_param(const std::string& name, const Shape& shape) {
        return store_->param(name, shape, [&] { return Tensor<T>(shape); });
    }

    Var<T> const_param(const std::string& name, const Shape& shape, T value) {
        return store_->param(name, shape, [&] { return Tensor<T>::full(shape, value); });
    }

    ResBlock make_res(const std::string& p, i64 cin, i64 cout) {
        ResBlock r;
        r.cin = cin;
        r.cout = cout;
        r.gn1_g = const_param(p + ".gn1.gamma", {cin}, T(1));
        r.gn1_b = zeros_param(p + ".gn1.beta", {cin});
        r.w1 = conv_param(p + ".conv1.weight", cout, cin, 3, 3);
        r.b1 = zeros_param(p + ".conv1.bias", {cout});
        r.ew = matrix_param(p + ".emb.weight", cfg_.embed_dim, cout);
        r.eb = zeros_param(p + ".emb.bias", {cout});
        r.gn2_g = const_param(p + ".gn2.gamma", {cout}, T(1));
        r.gn2_b = zeros_param(p + ".gn2.beta", {cout});
        r.w2 = conv_param(p + ".conv2.weight", cout, cout, 3, 3);
        r.b2 = zeros_param(p + ".conv2.bias", {cout});
        if (cin != cout) {
            r.has_skip = true;
            r.skip_w = conv_param(p + ".skip.weight", cout, cin, 1, 1);
            r.skip_b = zeros_param(p + ".skip.bias", {cout});
        }
        return r;
    }

    TConvBlock make_tconv(const std::string& p, i64 c) {
        TConvBlock b;
        b.gn1_g = const_param(p + ".gn1.gamma", {c}, T(1));
        b.gn1_b = zeros_param(p + ".gn1.beta", {c});
        b.w1 = store_->param(p + ".conv1.weight", {c, c, 3}, [&] {
            return normal_init({c, c, 3}, 1.0 / std::sqrt(double(c * 3)));
        });
        b.b1 = zeros_param(p + ".conv1.bias", {c});
        b.gn2_g = const_param(p + ".gn2.gamma", {c}, T(1));
        b.gn2_b = zeros_param(p + ".gn2.beta", {c});
        b.w2 = store_->param(p + ".conv2.weight", {c, c, 3}, [&] {
            return normal_init({c, c, 3}, 1.0 / std::sqrt(double(c * 3)));
        });
        b.b2 = zeros_param(p + ".conv2.bias", {c});
        b.gamma = const_param(p + ".gamma", {1}, T(1));
        return b;
    }

    AttentionVars<T> make_attn_w(const std::string& p, i64 cq, i64 ckv, i64 d) {
        AttentionVars<T> w;
        w.w_q = matrix_param(p + ".wq", cq, d);
        w.w_k = matrix_param(p + ".wk", ckv, d);
        w.w_v = matrix_param(p + ".wv", ckv, d);
        w.w_out = matrix_param(p + ".wout", d, cq);
        w.head_count = cfg_.head_count;
        return w;
    }

    SAttnBlock make_sattn(const std::string& p, i64 c) {
        check_arg(c % cfg_.head_count == 0, "unet: attention width not divisible by heads");
        SAttnBlock b;
        b.ln1_g = const_param(p + ".ln1.gamma", {c}, T(1));
        b.ln1_b = zeros_param(p + ".ln1.beta", {c});
        b.self_w = make_attn_w(p + ".cross_frame", c, c, c);
        b.ln2_g = const_param(p + ".ln2.gamma", {c}, T(1));
        b.ln2_b = zeros_param(p + ".ln2.beta", {c});
        b.cross_w = make_attn_w(p + ".label_cross", c, cfg_.embed_dim, c);
        return b;
    }

    TAttnBlock make_tattn(const std::string& p, i64 c) {
        check_arg((c / cfg_.head_count) % 2 == 0,
                  "unet: temporal attention head dim must be even for rotary embeddings");
        TAttnBlock b;
        b.ln_g = const_param(p + ".ln.gamma", {c}, T(1));
        b.ln_b = zeros_param(p + ".ln.beta", {c});
        b.self_w = make_attn_w(p + ".window", c, c, c);
        b.gamma = const_param(p + ".gamma", {1}, T(1));
        return b;
    }

    Level make_level(const std::string& p, i64 cin, i64 cout, bool attn) {
        Level l;
        l.res = make_res(p + ".res", cin, cout);
        l.tconv = make_tconv(p + ".tconv", cout);
        l.has_attn = attn;
        if (attn) {
            l.sattn = make_sattn(p + ".sattn", cout);
            l.tattn = make_tattn(p + ".tattn", cout);
        }
        return l;
    }

    void build() {
        const auto& cfg = cfg_;
        std::vector<i64> ch(static_cast<size_t>(cfg.levels()));
        for (i64 i = 0; i < cfg.levels(); ++i)
            ch[size_t(i)] = cfg.base_channels * cfg.channel_multipliers[size_t(i)];

        conv_in_w_ = conv_param("conv_in.weight", ch[0], cfg.latent_channels, 3, 3);
        conv_in_b_ = zeros_param("conv_in.bias", {ch[0]});

        t_l1w_ = matrix_param("time_embed.l1.weight", cfg.embed_dim, cfg.embed_dim);
        t_l1b_ = zeros_param("time_embed.l1.bias", {cfg.embed_dim});
        t_l2w_ = matrix_param("time_embed.l2.weight", cfg.embed_dim, cfg.embed_dim);
        t_l2b_ = zeros_param("time_embed.l2.bias", {cfg.embed_dim});

        v_l1w_ = matrix_param("interval_embed.l1.weight", cfg.embed_dim, cfg.embed_dim);
        v_l1b_ = zeros_param("interval_embed.l1.bias", {cfg.embed_dim});
        // zero second layer: interval conditioning starts inert
        v_l2w_ = zeros_param("interval_embed.l2.weight", {cfg.embed_dim, cfg.embed_dim});
        v_l2b_ = zeros_param("interval_embed.l2.bias", {cfg.embed_dim});

        label_table_ = store_->param(
            "label_embed.table", {cfg.label_vocab + 1, kLabelTokens * cfg.embed_dim}, [&] {
                return normal_init({cfg.label_vocab + 1, kLabelTokens * cfg.embed_dim}, 0.5);
            });

        down_.clear();
        up_.clear();
        down_w_.clear();
        down_b_.clear();
        i64 prev = ch[0];
        for (i64 i = 0; i < cfg.levels(); ++i) {
            const i64 res = nominal_resolution(i);
            down_.push_back(make_level("down" + std::to_string(i), prev, ch[size_t(i)],
                                       cfg.attention_at(res)));
            prev = ch[size_t(i)];
            if (i + 1 < cfg.levels()) {
                down_w_.push_back(conv_param("downsample" + std::to_string(i) + ".weight", prev,
                                             prev, 3, 3));
                down_b_.push_back(zeros_param("downsample" + std::to_string(i) + ".bias", {prev}));
            }
        }
        const i64 cbot = ch.back();
        mid_ = make_level("mid", cbot, cbot, cfg.attention_at(nominal_resolution(cfg.levels() - 1)));
        up_.resize(size_t(cfg.levels()));
        for (i64 i = cfg.levels() - 1; i >= 0; --i) {
            const i64 cskip = ch[size_t(i)];
            const i64 cin = (i == cfg.levels() - 1 ? cbot : ch[size_t(i + 1)]) + cskip;
            up_[size_t(i)] = make_level("up" + std::to_string(i), cin, ch[size_t(i)],
                                        cfg.attention_at(nominal_resolution(i)));
        }

        out_gn_g_ = const_param("out.norm.gamma", {ch[0]}, T(1));
        out_gn_b_ = zeros_param("out.norm.beta", {ch[0]});
        out_w_ = zeros_param("out.conv.weight", {cfg.latent_channels, ch[0], 3, 3});
        out_b_ = zeros_param("out.conv.bias", {cfg.latent_channels});
    }

    // Attention placement is decided at build time, before any input is seen,
    // so taps are keyed on the configured nominal input resolution.
    i64 nominal_resolution(i64 level) const { return cfg_.input_resolution >> level; }

    // --- forward helpers ---

    static Var<T> mlp(Tensor<T> x, const Var<T>& w1, const Var<T>& b1, const Var<T>& w2,
                      const Var<T>& b2) {
        Var<T> h(std::move(x), false);
        return ag::linear(ag::silu(ag::linear(h, w1, b1)), w2, b2);
    }

    Var<T> apply_res(const ResBlock& r, const Var<T>& x, const Var<T>& emb) const {
        Var<T> a = ag::conv2d(ag::silu(ag::group_norm(x, r.gn1_g, r.gn1_b, cfg_.norm_groups)),
                              r.w1, r.b1, 1, 1);
        Var<T> bias = ag::linear(ag::silu(emb), r.ew, r.eb);  // [1, cout]
        a = ag::add_channel_bias(a, bias);
        Var<T> b = ag::conv2d(ag::silu(ag::group_norm(a, r.gn2_g, r.gn2_b, cfg_.norm_groups)),
                              r.w2, r.b2, 1, 1);
        Var<T> skip = r.has_skip ? ag::conv2d(x, r.skip_w, r.skip_b, 1, 0) : x;
        return ag::add(b, skip);
    }

    Var<T> apply_tconv(const TConvBlock& b, const Var<T>& x) const {
        Var<T> h = ag::temporal_conv(
            ag::silu(ag::group_norm(x, b.gn1_g, b.gn1_b, cfg_.norm_groups)), b.w1, b.b1);
        h = ag::temporal_conv(ag::silu(ag::group_norm(h, b.gn2_g, b.gn2_b, cfg_.norm_groups)),
                              b.w2, b.b2);
        Var<T> z_temporal = ag::add(x, h);
        return ag::lerp_gate(x, z_temporal, ag::clamp_unit_st(b.gamma));
    }

    Var<T> apply_sattn(const SAttnBlock& b, const Var<T>& x, const Var<T>& label_tokens,
                       i64 H, i64 W) const {
        const i64 N = x.value().dim(0), C = x.value().dim(1);
        Var<T> tokens = ag::to_tokens(x);  // [N, HW, C]
        Var<T> normed = ag::layer_norm(tokens, b.ln1_g, b.ln1_b);
        Var<T> z1 = ag::slice_frame(normed, 0);
        std::vector<Var<T>> outs;
        outs.reserve(size_t(N));
        for (i64 i = 0; i < N; ++i) {
            Var<T> zi = ag::slice_frame(normed, i);
            outs.push_back(attention_var(zi, ag::concat_rows(zi, z1), b.self_w));
        }
        Var<T> h = ag::add(tokens, ag::stack_frames(outs));
        Var<T> normed2 = ag::layer_norm(h, b.ln2_g, b.ln2_b);
        Var<T> flat = ag::reshape(normed2, {N * H * W, C});
        Var<T> cross = attention_var(flat, label_tokens, b.cross_w);
        h = ag::add(h, ag::reshape(cross, {N, H * W, C}));
        return ag::from_tokens(h, H, W);
    }

    Var<T> apply_tattn(const TAttnBlock& b, const Var<T>& x, i64 H, i64 W) const {
        RopeConfig rope;
        rope.base_frequency = cfg_.rope_base;
        Var<T> rows = ag::to_temporal_rows(x);  // [HW, N, C]
        Var<T> normed = ag::layer_norm(rows, b.ln_g, b.ln_b);
        Var<T> win = first_frame_window_var(normed, H, W, cfg_.window_size);
        Var<T> att = temporal_window_attention_var(normed, win, b.self_w, rope);
        Var<T> z_temporal = ag::from_temporal_rows(ag::add(rows, att), H, W);
        return ag::lerp_gate(x, z_temporal, ag::clamp_unit_st(b.gamma));
    }

    Var<T> apply_level(const Level& l, const Var<T>& x, const Var<T>& emb,
                       const Var<T>& label_tokens) const {
        Var<T> h = apply_res(l.res, x, emb);
        if (cfg_.temporal_enabled) h = apply_tconv(l.tconv, h);
        if (l.has_attn) {
            const i64 H = h.value().dim(2), W = h.value().dim(3);
            h = apply_sattn(l.sattn, h, label_tokens, H, W);
            if (cfg_.temporal_enabled) h = apply_tattn(l.tattn, h, H, W);
        }
        return h;
    }

    UNetConfig cfg_;
    ParamStore<T>* store_;
    Rng rng_;
    u64 init_counter_ = 0;

    Var<T> conv_in_w_, conv_in_b_;
    Var<T> t_l1w_, t_l1b_, t_l2w_, t_l2b_;
    Var<T> v_l1w_, v_l1b_, v_l2w_, v_l2b_;
    Var<T> label_table_;
    std::vector<Level> down_;
    std::vector<Var<T>> down_w_, down_b_;
    Level mid_;
    std::vector<Level> up_;
    Var<T> out_gn_g_, out_gn_b_, out_w_, out_b_;
};

// Functional entry point; binds (or initializes) parameters in the store.
template <class T>
Tensor<T> unet_forward(const Tensor<T>& z_t, const ConditionSignal<T>& cond,
                       ParamStore<T>& params, const UNetConfig& config, u64 init_seed = 0) {
    VideoUNet<T> net(config, params, init_seed);
    return net.predict(z_t, cond);
}

}  // namespace vdiff
