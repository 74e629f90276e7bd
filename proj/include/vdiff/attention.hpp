#pragma once

// First-frame-conditioned attention operators.
//
//   spatial_cross_frame_attention: queries come from frame i's tokens, keys
//   and values from [z_i ; z_1], doubling the key/value length so every frame
//   can read the first frame directly.
//
//   temporal_window_attention: one attention problem per spatial position.
//   The token row holds that position's feature across all N frames; keys and
//   values are augmented with the first frame's KxK spatial neighborhood of
//   the position (center excluded, boundaries replicate-padded).  Frame
//   tokens carry rotary embeddings at their frame index; the window tokens
//   share the first frame's position (0).
//
// Softmax rows and per-head dot products are deliberately plain sequential
// loops: the K=1 window reduction is contracted to be bit-identical to a
// vanilla temporal attention, so accumulation order is part of the interface.

#include <cmath>
#include <vector>

#include "autograd.hpp"
#include "tensor.hpp"

namespace vdiff {

// ----- rotary embeddings -----

struct RopeConfig {
    double base_frequency = 10000.0;
    i64 rotated_dim = 0;  // 0 -> rotate the full width
};

namespace detail {

// Rotates consecutive pairs within columns [col0, col0+width) of mat [L, D].
// Pair j uses angle position * base^(-2j/width); invert flips the sign.
template <class T>
void rope_apply(Tensor<T>& mat, i64 col0, i64 width, const i64* positions, double base,
                bool invert) {
    check_arg(width % 2 == 0, "rope: rotated width must be even");
    const i64 L = mat.dim(0), D = mat.dim(1);
    check_arg(col0 >= 0 && col0 + width <= D, "rope: column window out of range");
    for (i64 i = 0; i < L; ++i) {
        T* row = mat.data() + i * D + col0;
        const double p = double(positions[i]) * (invert ? -1.0 : 1.0);
        for (i64 j = 0; j < width / 2; ++j) {
            const double theta = std::pow(base, -2.0 * double(j) / double(width));
            const double ang = p * theta;
            const T c = T(std::cos(ang));
            const T s = T(std::sin(ang));
            const T x0 = row[2 * j], x1 = row[2 * j + 1];
            row[2 * j] = x0 * c - x1 * s;
            row[2 * j + 1] = x0 * s + x1 * c;
        }
    }
}

}  // namespace detail

// tokens [L, d]; rotates the leading rotated_dim (default: all) columns.
template <class T>
Tensor<T> rope_rotate(const Tensor<T>& tokens, const std::vector<i64>& positions,
                      const RopeConfig& rope) {
    check_arg(tokens.rank() == 2, "rope_rotate: rank-2 tokens required");
    check_arg(i64(positions.size()) == tokens.dim(0), "rope_rotate: position count mismatch");
    const i64 width = rope.rotated_dim > 0 ? rope.rotated_dim : tokens.dim(1);
    Tensor<T> out = tokens;
    detail::rope_apply(out, 0, width, positions.data(), rope.base_frequency, false);
    return out;
}

// ----- weights -----

template <class T>
struct AttentionWeights {
    Tensor<T> w_q;    // [Cq, d]
    Tensor<T> w_k;    // [Ckv, d]
    Tensor<T> w_v;    // [Ckv, d]
    Tensor<T> w_out;  // [d, Cout]
    i64 head_count = 1;

    void validate() const {
        check_arg(w_q.rank() == 2 && w_k.rank() == 2 && w_v.rank() == 2 && w_out.rank() == 2,
                  "attention weights: rank-2 matrices required");
        const i64 d = w_q.dim(1);
        check_arg(w_k.dim(1) == d && w_v.dim(1) == d, "attention weights: projection dim mismatch");
        check_arg(w_k.dim(0) == w_v.dim(0), "attention weights: key/value input dim mismatch");
        check_arg(w_out.dim(0) == d, "attention weights: output projection dim mismatch");
        check_arg(head_count > 0 && d % head_count == 0,
                  "attention weights: head_count must divide projection dim");
    }
};

// ----- first-frame window -----

template <class T>
struct FirstFrameWindow {
    Tensor<T> tokens;     // [HW, K*K-1, C]
    i64 window_size = 1;  // K
    i64 height = 0, width = 0;
};

// (dy, dx) offsets of a KxK neighborhood in raster order, center removed.
inline std::vector<std::pair<i64, i64>> window_offsets(i64 K) {
    check_arg(K >= 1 && K % 2 == 1, "window: K must be odd and positive");
    std::vector<std::pair<i64, i64>> off;
    const i64 r = K / 2;
    for (i64 dy = -r; dy <= r; ++dy)
        for (i64 dx = -r; dx <= r; ++dx)
            if (!(dy == 0 && dx == 0)) off.push_back({dy, dx});
    return off;
}

inline i64 clamp_index(i64 v, i64 lo, i64 hi) { return v < lo ? lo : (v > hi ? hi : v); }

// z1 [C,H,W] -> per-position neighborhood tokens
template <class T>
FirstFrameWindow<T> build_first_frame_window(const Tensor<T>& z1, i64 K) {
    check_arg(z1.rank() == 3, "build_first_frame_window: [C,H,W] input required");
    const i64 C = z1.dim(0), H = z1.dim(1), W = z1.dim(2);
    const auto off = window_offsets(K);
    FirstFrameWindow<T> win;
    win.window_size = K;
    win.height = H;
    win.width = W;
    win.tokens = Tensor<T>({H * W, i64(off.size()), C});
    for (i64 h = 0; h < H; ++h)
        for (i64 w = 0; w < W; ++w)
            for (size_t k = 0; k < off.size(); ++k) {
                const i64 sy = clamp_index(h + off[k].first, 0, H - 1);
                const i64 sx = clamp_index(w + off[k].second, 0, W - 1);
                for (i64 c = 0; c < C; ++c)
                    win.tokens.at3(h * W + w, i64(k), c) = z1.at3(c, sy, sx);
            }
    return win;
}

// ----- attention core (shared by value and autograd paths) -----

namespace detail {

template <class T>
struct AttnSaved {
    Tensor<T> q, k, v;  // post-rope projections
    Tensor<T> probs;    // [heads * Lq, Lk]
    Tensor<T> ctx;      // [Lq, d]
};

template <class T>
Tensor<T> attn_forward(const Tensor<T>& zq, const Tensor<T>& zkv, const Tensor<T>& wq,
                       const Tensor<T>& wk, const Tensor<T>& wv, const Tensor<T>& wout,
                       i64 heads, const i64* pos_q, const i64* pos_k, const RopeConfig& rope,
                       AttnSaved<T>* saved, Tensor<T>* probs_out = nullptr) {
    const i64 Lq = zq.dim(0), Lk = zkv.dim(0);
    const i64 d = wq.dim(1), dh = d / heads;
    const T scale = T(1.0 / std::sqrt(double(dh)));

    Tensor<T> q = matmul(zq, wq);
    Tensor<T> k = matmul(zkv, wk);
    Tensor<T> v = matmul(zkv, wv);
    if (pos_q)
        for (i64 h = 0; h < heads; ++h)
            rope_apply(q, h * dh, dh, pos_q, rope.base_frequency, false);
    if (pos_k)
        for (i64 h = 0; h < heads; ++h)
            rope_apply(k, h * dh, dh, pos_k, rope.base_frequency, false);

    Tensor<T> probs({heads * Lq, Lk});
    Tensor<T> ctx({Lq, d});
    std::vector<T> logits(static_cast<size_t>(Lk));
    for (i64 h = 0; h < heads; ++h) {
        const i64 c0 = h * dh;
        for (i64 i = 0; i < Lq; ++i) {
            const T* qi = q.data() + i * d + c0;
            for (i64 j = 0; j < Lk; ++j) {
                const T* kj = k.data() + j * d + c0;
                T acc = 0;
                for (i64 x = 0; x < dh; ++x) acc += qi[x] * kj[x];
                logits[size_t(j)] = acc * scale;
            }
            T m = logits[0];
            for (i64 j = 1; j < Lk; ++j) m = std::max(m, logits[size_t(j)]);
            T sum = 0;
            T* prow = probs.data() + (h * Lq + i) * Lk;
            for (i64 j = 0; j < Lk; ++j) {
                prow[j] = std::exp(logits[size_t(j)] - m);
                sum += prow[j];
            }
            for (i64 j = 0; j < Lk; ++j) prow[j] /= sum;
            T* crow = ctx.data() + i * d + c0;
            for (i64 x = 0; x < dh; ++x) {
                T acc = 0;
                for (i64 j = 0; j < Lk; ++j) acc += prow[j] * v[j * d + c0 + x];
                crow[x] = acc;
            }
        }
    }

    Tensor<T> out = matmul(ctx, wout);
    if (probs_out) *probs_out = probs;
    if (saved) {
        saved->q = std::move(q);
        saved->k = std::move(k);
        saved->v = std::move(v);
        saved->probs = std::move(probs);
        saved->ctx = std::move(ctx);
    }
    return out;
}

// Accumulates input/weight gradients; null destinations are skipped.
template <class T>
void attn_backward(const Tensor<T>& dout, const Tensor<T>& zq, const Tensor<T>& zkv,
                   const Tensor<T>& wq, const Tensor<T>& wk, const Tensor<T>& wv,
                   const Tensor<T>& wout, i64 heads, const i64* pos_q, const i64* pos_k,
                   const RopeConfig& rope, const AttnSaved<T>& saved, Tensor<T>* dzq,
                   Tensor<T>* dzkv, Tensor<T>* dwq, Tensor<T>* dwk, Tensor<T>* dwv,
                   Tensor<T>* dwout) {
    const i64 Lq = zq.dim(0), Lk = zkv.dim(0);
    const i64 d = wq.dim(1), dh = d / heads;
    const T scale = T(1.0 / std::sqrt(double(dh)));

    Tensor<T> dctx({Lq, d});
    gemm_nt(dout.data(), Lq, wout.dim(1), wout.data(), d, dctx.data());
    if (dwout) gemm_tn(saved.ctx.data(), Lq, d, dout.data(), wout.dim(1), dwout->data(), true);

    Tensor<T> dq({Lq, d}), dk({Lk, d}), dv({Lk, d});
    std::vector<T> dp(static_cast<size_t>(Lk)), ds(static_cast<size_t>(Lk));
    for (i64 h = 0; h < heads; ++h) {
        const i64 c0 = h * dh;
        for (i64 i = 0; i < Lq; ++i) {
            const T* prow = saved.probs.data() + (h * Lq + i) * Lk;
            const T* dcrow = dctx.data() + i * d + c0;
            for (i64 j = 0; j < Lk; ++j) {
                const T* vj = saved.v.data() + j * d + c0;
                T acc = 0;
                for (i64 x = 0; x < dh; ++x) acc += dcrow[x] * vj[x];
                dp[size_t(j)] = acc;
                T* dvj = dv.data() + j * d + c0;
                for (i64 x = 0; x < dh; ++x) dvj[x] += prow[j] * dcrow[x];
            }
            T pd = 0;
            for (i64 j = 0; j < Lk; ++j) pd += dp[size_t(j)] * prow[j];
            for (i64 j = 0; j < Lk; ++j) ds[size_t(j)] = prow[j] * (dp[size_t(j)] - pd) * scale;
            T* dqi = dq.data() + i * d + c0;
            const T* qi = saved.q.data() + i * d + c0;
            for (i64 j = 0; j < Lk; ++j) {
                const T* kj = saved.k.data() + j * d + c0;
                T* dkj = dk.data() + j * d + c0;
                const T dsj = ds[size_t(j)];
                for (i64 x = 0; x < dh; ++x) {
                    dqi[x] += dsj * kj[x];
                    dkj[x] += dsj * qi[x];
                }
            }
        }
    }

    // undo the rotations so the gradients refer to the pre-rope projections
    if (pos_q)
        for (i64 h = 0; h < heads; ++h)
            rope_apply(dq, h * dh, dh, pos_q, rope.base_frequency, true);
    if (pos_k)
        for (i64 h = 0; h < heads; ++h)
            rope_apply(dk, h * dh, dh, pos_k, rope.base_frequency, true);

    if (dzq) gemm_nt(dq.data(), Lq, d, wq.data(), zq.dim(1), dzq->data(), true);
    if (dwq) gemm_tn(zq.data(), Lq, zq.dim(1), dq.data(), d, dwq->data(), true);
    if (dzkv) {
        gemm_nt(dk.data(), Lk, d, wk.data(), zkv.dim(1), dzkv->data(), true);
        gemm_nt(dv.data(), Lk, d, wv.data(), zkv.dim(1), dzkv->data(), true);
    }
    if (dwk) gemm_tn(zkv.data(), Lk, zkv.dim(1), dk.data(), d, dwk->data(), true);
    if (dwv) gemm_tn(zkv.data(), Lk, zkv.dim(1), dv.data(), d, dwv->data(), true);
}

template <class T>
Tensor<T> vcat(const Tensor<T>& a, const Tensor<T>& b) {
    check_arg(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1), "vcat: shape mismatch");
    Tensor<T> out({a.dim(0) + b.dim(0), a.dim(1)});
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

}  // namespace detail

// Optional capture of softmax rows for diagnostics/tests.
template <class T>
struct AttentionTrace {
    std::vector<Tensor<T>> probs;  // one [heads*Lq, Lk] matrix per attention group
};

// ----- value-level operators -----

// z_i, z_1: [L, C] token matrices of frame i and frame 1.
template <class T>
Tensor<T> spatial_cross_frame_attention(const Tensor<T>& z_i, const Tensor<T>& z_1,
                                        const AttentionWeights<T>& w,
                                        AttentionTrace<T>* trace = nullptr) {
    w.validate();
    check_arg(z_i.rank() == 2 && z_1.rank() == 2, "spatial attention: rank-2 tokens required");
    check_arg(z_i.same_shape(z_1), "spatial attention: frame/first-frame shape mismatch");
    check_arg(z_i.dim(1) == w.w_q.dim(0), "spatial attention: token width mismatch");
    check_arg(w.w_k.dim(0) == z_i.dim(1), "spatial attention: kv width mismatch");
    Tensor<T> kv = detail::vcat(z_i, z_1);
    Tensor<T> probs;
    Tensor<T> out = detail::attn_forward(z_i, kv, w.w_q, w.w_k, w.w_v, w.w_out, w.head_count,
                                         nullptr, nullptr, RopeConfig{}, (detail::AttnSaved<T>*)nullptr,
                                         trace ? &probs : nullptr);
    if (trace) trace->probs.push_back(std::move(probs));
    return out;
}

// z_bar [HW, N, C]; window tokens from build_first_frame_window.
template <class T>
Tensor<T> temporal_window_attention(const Tensor<T>& z_bar, const FirstFrameWindow<T>& win,
                                    const AttentionWeights<T>& w, const RopeConfig& rope,
                                    AttentionTrace<T>* trace = nullptr) {
    w.validate();
    check_arg(z_bar.rank() == 3, "temporal attention: [HW,N,C] input required");
    check_arg(win.tokens.rank() == 3 && win.tokens.dim(0) == z_bar.dim(0),
              "temporal attention: window rows do not match input rows");
    check_arg(win.tokens.dim(2) == z_bar.dim(2), "temporal attention: window width mismatch");
    const i64 HW = z_bar.dim(0), N = z_bar.dim(1), C = z_bar.dim(2);
    const i64 Kw = win.tokens.dim(1);

    std::vector<i64> pos_q(static_cast<size_t>(N));
    std::vector<i64> pos_k(static_cast<size_t>(N + Kw), 0);
    for (i64 n = 0; n < N; ++n) {
        pos_q[size_t(n)] = n;
        pos_k[size_t(n)] = n;
    }

    Tensor<T> out({HW, N, C});
    for (i64 r = 0; r < HW; ++r) {
        Tensor<T> frames({N, C});
        std::copy(z_bar.data() + r * N * C, z_bar.data() + (r + 1) * N * C, frames.data());
        Tensor<T> wtok({Kw, C});
        std::copy(win.tokens.data() + r * Kw * C, win.tokens.data() + (r + 1) * Kw * C,
                  wtok.data());
        Tensor<T> kv = detail::vcat(frames, wtok);
        Tensor<T> probs;
        Tensor<T> o = detail::attn_forward(frames, kv, w.w_q, w.w_k, w.w_v, w.w_out,
                                           w.head_count, pos_q.data(), pos_k.data(), rope,
                                           (detail::AttnSaved<T>*)nullptr,
                                           trace ? &probs : nullptr);
        std::copy(o.data(), o.data() + o.size(), out.data() + r * N * C);
        if (trace) trace->probs.push_back(std::move(probs));
    }
    return out;
}

// ----- autograd operators -----

template <class T>
struct AttentionVars {
    Var<T> w_q, w_k, w_v, w_out;
    i64 head_count = 1;
};

// Generic single-group attention: queries from zq [Lq,Cq], keys/values from
// zkv [Lk,Ckv].  Optional rope positions apply per head.
template <class T>
Var<T> attention_var(const Var<T>& zq, const Var<T>& zkv, const AttentionVars<T>& w,
                     std::vector<i64> pos_q = {}, std::vector<i64> pos_k = {},
                     RopeConfig rope = {}) {
    check_arg(pos_q.empty() == pos_k.empty(), "attention_var: rope positions must come in pairs");
    const bool use_rope = !pos_q.empty();
    auto saved = std::make_shared<detail::AttnSaved<T>>();
    Tensor<T> out = detail::attn_forward(
        zq.value(), zkv.value(), w.w_q.value(), w.w_k.value(), w.w_v.value(), w.w_out.value(),
        w.head_count, use_rope ? pos_q.data() : nullptr, use_rope ? pos_k.data() : nullptr,
        rope, saved.get());

    auto zqn = zq.node(), zkn = zkv.node();
    auto wqn = w.w_q.node(), wkn = w.w_k.node(), wvn = w.w_v.node(), won = w.w_out.node();
    const i64 heads = w.head_count;
    return ag::make_op<T>(std::move(out), {zq, zkv, w.w_q, w.w_k, w.w_v, w.w_out},
                          [zqn, zkn, wqn, wkn, wvn, won, heads, saved,
                           pos_q = std::move(pos_q), pos_k = std::move(pos_k),
                           rope, use_rope](const Tensor<T>& g) {
        detail::attn_backward(
            g, zqn->value, zkn->value, wqn->value, wkn->value, wvn->value, won->value, heads,
            use_rope ? pos_q.data() : nullptr, use_rope ? pos_k.data() : nullptr, rope, *saved,
            zqn->requires_grad ? &zqn->ensure_grad() : nullptr,
            zkn->requires_grad ? &zkn->ensure_grad() : nullptr,
            wqn->requires_grad ? &wqn->ensure_grad() : nullptr,
            wkn->requires_grad ? &wkn->ensure_grad() : nullptr,
            wvn->requires_grad ? &wvn->ensure_grad() : nullptr,
            won->requires_grad ? &won->ensure_grad() : nullptr);
    });
}

template <class T>
Var<T> spatial_cross_frame_attention_var(const Var<T>& z_i, const Var<T>& z_1,
                                         const AttentionVars<T>& w) {
    return attention_var(z_i, ag::concat_rows(z_i, z_1), w);
}

// rows [HW,N,C], window [HW,Kw,C] -> [HW,N,C]; one fused node over all rows.
template <class T>
Var<T> temporal_window_attention_var(const Var<T>& rows, const Var<T>& window,
                                     const AttentionVars<T>& w, RopeConfig rope = {}) {
    const auto& rv = rows.value();
    const auto& wv = window.value();
    check_arg(rv.rank() == 3 && wv.rank() == 3, "temporal attention: rank-3 inputs required");
    check_arg(rv.dim(0) == wv.dim(0) && rv.dim(2) == wv.dim(2),
              "temporal attention: rows/window mismatch");
    const i64 HW = rv.dim(0), N = rv.dim(1), C = rv.dim(2), Kw = wv.dim(1);

    auto pos_q = std::make_shared<std::vector<i64>>(size_t(N));
    auto pos_k = std::make_shared<std::vector<i64>>(size_t(N + Kw), 0);
    for (i64 n = 0; n < N; ++n) {
        (*pos_q)[size_t(n)] = n;
        (*pos_k)[size_t(n)] = n;
    }

    auto saved = std::make_shared<std::vector<detail::AttnSaved<T>>>(size_t(HW));
    auto kvs = std::make_shared<std::vector<Tensor<T>>>(size_t(HW));
    Tensor<T> out({HW, N, C});
    for (i64 r = 0; r < HW; ++r) {
        Tensor<T> frames({N, C});
        std::copy(rv.data() + r * N * C, rv.data() + (r + 1) * N * C, frames.data());
        Tensor<T> wtok({Kw, C});
        std::copy(wv.data() + r * Kw * C, wv.data() + (r + 1) * Kw * C, wtok.data());
        (*kvs)[size_t(r)] = detail::vcat(frames, wtok);
        Tensor<T> o = detail::attn_forward(frames, (*kvs)[size_t(r)], w.w_q.value(),
                                           w.w_k.value(), w.w_v.value(), w.w_out.value(),
                                           w.head_count, pos_q->data(), pos_k->data(), rope,
                                           &(*saved)[size_t(r)]);
        std::copy(o.data(), o.data() + o.size(), out.data() + r * N * C);
    }

    auto rn = rows.node(), wn = window.node();
    auto wqn = w.w_q.node(), wkn = w.w_k.node(), wvn = w.w_v.node(), won = w.w_out.node();
    const i64 heads = w.head_count;
    return ag::make_op<T>(std::move(out), {rows, window, w.w_q, w.w_k, w.w_v, w.w_out},
                          [rn, wn, wqn, wkn, wvn, won, heads, saved, kvs, pos_q, pos_k, rope,
                           HW, N, C, Kw](const Tensor<T>& g) {
        Tensor<T> dg({N, C});
        for (i64 r = 0; r < HW; ++r) {
            std::copy(g.data() + r * N * C, g.data() + (r + 1) * N * C, dg.data());
            Tensor<T> frames({N, C});
            std::copy(rn->value.data() + r * N * C, rn->value.data() + (r + 1) * N * C,
                      frames.data());
            Tensor<T> dzq({N, C}), dzkv({N + Kw, C});
            detail::attn_backward(dg, frames, (*kvs)[size_t(r)], wqn->value, wkn->value,
                                  wvn->value, won->value, heads, pos_q->data(), pos_k->data(),
                                  rope, (*saved)[size_t(r)],
                                  rn->requires_grad ? &dzq : nullptr,
                                  (rn->requires_grad || wn->requires_grad) ? &dzkv : nullptr,
                                  wqn->requires_grad ? &wqn->ensure_grad() : nullptr,
                                  wkn->requires_grad ? &wkn->ensure_grad() : nullptr,
                                  wvn->requires_grad ? &wvn->ensure_grad() : nullptr,
                                  won->requires_grad ? &won->ensure_grad() : nullptr);
            if (rn->requires_grad) {
                auto& acc = rn->ensure_grad();
                for (i64 i = 0; i < N * C; ++i)
                    acc[r * N * C + i] += dzq[i] + dzkv[i];  // query path + kv frame rows
            }
            if (wn->requires_grad) {
                auto& acc = wn->ensure_grad();
                for (i64 i = 0; i < Kw * C; ++i) acc[r * Kw * C + i] += dzkv[N * C + i];
            }
        }
    });
}

// Gathers the first frame's KxK neighborhoods from temporal rows
// [HW, N, C] (frame 0 slice), producing window tokens [HW, K*K-1, C].
template <class T>
Var<T> first_frame_window_var(const Var<T>& rows, i64 H, i64 W, i64 K) {
    const auto& rv = rows.value();
    check_arg(rv.rank() == 3 && rv.dim(0) == H * W, "first_frame_window: shape mismatch");
    const i64 N = rv.dim(1), C = rv.dim(2);
    const auto off = window_offsets(K);
    const i64 Kw = i64(off.size());
    Tensor<T> out({H * W, Kw, C});
    for (i64 h = 0; h < H; ++h)
        for (i64 w = 0; w < W; ++w)
            for (i64 k = 0; k < Kw; ++k) {
                const i64 sy = clamp_index(h + off[size_t(k)].first, 0, H - 1);
                const i64 sx = clamp_index(w + off[size_t(k)].second, 0, W - 1);
                const T* src = rv.data() + ((sy * W + sx) * N + 0) * C;
                T* dst = out.data() + ((h * W + w) * Kw + k) * C;
                std::copy(src, src + C, dst);
            }
    auto rn = rows.node();
    return ag::make_op<T>(std::move(out), {rows}, [rn, off, H, W, N, C, Kw](const Tensor<T>& g) {
        if (!rn->requires_grad) return;
        auto& acc = rn->ensure_grad();
        for (i64 h = 0; h < H; ++h)
            for (i64 w = 0; w < W; ++w)
                for (i64 k = 0; k < Kw; ++k) {
                    const i64 sy = clamp_index(h + off[size_t(k)].first, 0, H - 1);
                    const i64 sx = clamp_index(w + off[size_t(k)].second, 0, W - 1);
                    T* dst = acc.data() + ((sy * W + sx) * N + 0) * C;
                    const T* src = g.data() + ((h * W + w) * Kw + k) * C;
                    for (i64 c = 0; c < C; ++c) dst[c] += src[c];
                }
    });
}

}  // namespace vdiff
