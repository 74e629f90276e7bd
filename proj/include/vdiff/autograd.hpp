#pragma once

// Small reverse-mode autodiff tape over Tensor<T>.  Nodes own their value and
// (lazily allocated) gradient; each op installs a closure that scatters the
// upstream gradient into its parents.  Graph construction is skipped entirely
// when no input requires gradients or when a NoGradGuard is active, so the
// same forward code serves both training and sampling.

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace vdiff {

inline bool& no_grad_flag() {
    thread_local bool flag = false;
    return flag;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(no_grad_flag()) { no_grad_flag() = true; }
    ~NoGradGuard() { no_grad_flag() = prev; }
};

template <class T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const Tensor<T>&)> backward_fn;

    Tensor<T>& ensure_grad() {
        if (grad.size() != value.size()) grad = Tensor<T>::zeros_like(value);
        return grad;
    }
};

template <class T>
class Var {
  public:
    Var() = default;
    explicit Var(Tensor<T> value, bool requires_grad = false)
        : node_(std::make_shared<Node<T>>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad && !no_grad_flag();
    }

    bool defined() const { return node_ != nullptr; }
    const Tensor<T>& value() const { return node_->value; }
    Tensor<T>& grad() { return node_->ensure_grad(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    std::shared_ptr<Node<T>> node() const { return node_; }

    const Shape& shape() const { return node_->value.shape(); }

    void zero_grad() {
        if (!node_) return;
        auto& g = node_->ensure_grad();
        for (i64 i = 0; i < g.size(); ++i) g[i] = T(0);
    }

  private:
    std::shared_ptr<Node<T>> node_;
};

namespace ag {

// Creates the output node; gradients flow only if some parent requires them.
template <class T>
Var<T> make_op(Tensor<T> value, const std::vector<Var<T>>& parents,
               std::function<void(const Tensor<T>&)> backward_fn) {
    bool needs = false;
    if (!no_grad_flag())
        for (const auto& p : parents)
            if (p.requires_grad()) needs = true;
    Var<T> out(std::move(value), needs);
    if (needs) {
        for (const auto& p : parents) out.node()->parents.push_back(p.node());
        out.node()->backward_fn = std::move(backward_fn);
    }
    return out;
}

template <class T>
void accumulate(const std::shared_ptr<Node<T>>& n, const Tensor<T>& g) {
    if (!n->requires_grad) return;
    auto& acc = n->ensure_grad();
    for (i64 i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

// ----- backward pass -----

template <class T>
void backward(const Var<T>& root) {
    check_arg(root.defined() && root.value().size() == 1,
              "backward: root must be a defined scalar");
    if (!root.requires_grad()) return;

    // Topological order by iterative DFS.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.push_back({root.node().get(), 0});
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node<T>* parent = node->parents[idx++].get();
            if (parent->requires_grad && !seen.count(parent)) {
                seen.insert(parent);
                stack.push_back({parent, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    auto& g0 = root.node()->ensure_grad();
    g0[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_fn) n->backward_fn(n->grad);
    }
}

// ----- elementwise ops -----

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    check_arg(a.value().same_shape(b.value()), "add: shape mismatch");
    Tensor<T> out = a.value() + b.value();
    auto an = a.node(), bn = b.node();
    return make_op<T>(std::move(out), {a, b}, [an, bn](const Tensor<T>& g) {
        accumulate(an, g);
        accumulate(bn, g);
    });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    check_arg(a.value().same_shape(b.value()), "sub: shape mismatch");
    Tensor<T> out = a.value() - b.value();
    auto an = a.node(), bn = b.node();
    return make_op<T>(std::move(out), {a, b}, [an, bn](const Tensor<T>& g) {
        accumulate(an, g);
        if (bn->requires_grad) {
            auto& acc = bn->ensure_grad();
            for (i64 i = 0; i < acc.size(); ++i) acc[i] -= g[i];
        }
    });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    check_arg(a.value().same_shape(b.value()), "mul: shape mismatch");
    Tensor<T> out = a.value();
    for (i64 i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    auto an = a.node(), bn = b.node();
    return make_op<T>(std::move(out), {a, b}, [an, bn](const Tensor<T>& g) {
        if (an->requires_grad) {
            auto& acc = an->ensure_grad();
            for (i64 i = 0; i < acc.size(); ++i) acc[i] += g[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            auto& acc = bn->ensure_grad();
            for (i64 i = 0; i < acc.size(); ++i) acc[i] += g[i] * an->value[i];
        }
    });
}

template <class T>
Var<T> mul_const(const Var<T>& a, T c) {
    Tensor<T> out = a.value() * c;
    auto an = a.node();
    return make_op<T>(std::move(out), {a}, [an, c](const Tensor<T>& g) {
        if (!an->requires_grad) return;
        auto& acc = an->ensure_grad();
        for (i64 i = 0; i < acc.size(); ++i) acc[i] += c * g[i];
    });
}

template <class T>
Var<T> silu(const Var<T>& x) {
    Tensor<T> sig = Tensor<T>::zeros_like(x.value());
    Tensor<T> out = Tensor<T>::zeros_like(x.value());
    for (i64 i = 0; i < out.size(); ++i) {
        const T s = T(1) / (T(1) + std::exp(-x.value()[i]));
        sig[i] = s;
        out[i] = x.value()[i] * s;
    }
    auto xn = x.node();
    return make_op<T>(std::move(out), {x},
                      [xn, sig = std::move(sig)](const Tensor<T>& g) {
        if (!xn->requires_grad) return;
        auto& acc = xn->ensure_grad();
        for (i64 i = 0; i < acc.size(); ++i) {
            const T s = sig[i];
            acc[i] += g[i] * s * (T(1) + xn->value[i] * (T(1) - s));
        }
    });
}

template <class T>
Var<T> reshape(const Var<T>& x, Shape shape) {
    Tensor<T> out = x.value().reshaped(std::move(shape));
    auto xn = x.node();
    return make_op<T>(std::move(out), {x}, [xn](const Tensor<T>& g) {
        if (!xn->requires_grad) return;
        auto& acc = xn->ensure_grad();
        for (i64 i = 0; i < acc.size(); ++i) acc[i] += g[i];
    });
}

// ----- reductions -----

template <class T>
Var<T> sum_all(const Var<T>& x) {
    Tensor<T> out = Tensor<T>::full({1}, x.value().sum());
    auto xn = x.node();
    return make_op<T>(std::move(out), {x}, [xn](const Tensor<T>& g) {
        if (!xn->requires_grad) return;
        auto& acc = xn->ensure_grad();
        for (i64 i = 0; i < acc.size(); ++i) acc[i] += g[0];
    });
}

// <x, r> with a constant weighting tensor (used by gradient checks).
template <class T>
Var<T> dot_const(const Var<T>& x, Tensor<T> r) {
    check_arg(x.value().same_shape(r), "dot_const: shape mismatch");
    T s = 0;
    for (i64 i = 0; i < r.size(); ++i) s += x.value()[i] * r[i];
    auto xn = x.node();
    return make_op<T>(Tensor<T>::full({1}, s), {x},
                      [xn, r = std::move(r)](const Tensor<T>& g) {
        if (!xn->requires_grad) return;
        auto& acc = xn->ensure_grad();
        for (i64 i = 0; i < acc.size(); ++i) acc[i] += g[0] * r[i];
    });
}

// Mean squared error over the frames selected by frame_mask (video rank-4).
template <class T>
Var<T> masked_mse(const Var<T>& pred, Tensor<T> target, std::vector<bool> frame_mask) {
    const auto& p = pred.value();
    check_arg(p.rank() == 4, "masked_mse: rank-4 prediction required");
    check_arg(p.same_shape(target), "masked_mse: prediction/target shape mismatch");
    check_arg(i64(frame_mask.size()) == p.dim(0), "masked_mse: mask length != frame count");
    i64 frames_on = 0;
    for (bool b : frame_mask) frames_on += b ? 1 : 0;
    check_arg(frames_on > 0, "masked_mse: mask selects no frames");

    const i64 per_frame = p.size() / p.dim(0);
    const i64 count = frames_on * per_frame;
    T loss = 0;
    for (i64 n = 0; n < p.dim(0); ++n) {
        if (!frame_mask[size_t(n)]) continue;
        const T* pp = p.data() + n * per_frame;
        const T* tt = target.data() + n * per_frame;
        for (i64 i = 0; i < per_frame; ++i) {
            const T d = pp[i] - tt[i];
            loss += d * d;
        }
    }
    loss /= T(count);

    auto pn = pred.node();
    return make_op<T>(Tensor<T>::full({1}, loss), {pred},
                      [pn, target = std::move(target), frame_mask = std::move(frame_mask),
                       per_frame, count](const Tensor<T>& g) {
        if (!pn->requires_grad) return;
        auto& acc = pn->ensure_grad();
        const T scale = T(2) * g[0] / T(count);
        for (i64 n = 0; n < pn->value.dim(0); ++n) {
            if (!frame_mask[size_t(n)]) continue;
            const T* pp = pn->value.data() + n * per_frame;
            const T* tt = target.data() + n * per_frame;
            T* gg = acc.data() + n * per_frame;
            for (i64 i = 0; i < per_frame; ++i) gg[i] += scale * (pp[i] - tt[i]);
        }
    });
}

// ----- linear algebra -----

// y[M,N] = x[M,K] * w[K,N] (+ b[N] broadcast over rows when defined)
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b = Var<T>()) {
    const auto& xv = x.value();
    const auto& wv = w.value();
    check_arg(xv.rank() == 2 && wv.rank() == 2, "linear: rank-2 operands required");
    check_arg(xv.dim(1) == wv.dim(0), "linear: inner dimension mismatch");
    const i64 M = xv.dim(0), K = xv.dim(1), N = wv.dim(1);
    Tensor<T> out({M, N});
    gemm(xv.data(), M, K, wv.data(), N, out.data());
    std::vector<Var<T>> parents = {x, w};
    if (b.defined()) {
        check_arg(b.value().rank() == 1 && b.value().dim(0) == N, "linear: bad bias shape");
        for (i64 m = 0; m < M; ++m)
            for (i64 n = 0; n < N; ++n) out.at2(m, n) += b.value()[n];
        parents.push_back(b);
    }
    auto xn = x.node(), wn = w.node();
    auto bn = b.defined() ? b.node() : nullptr;
    return make_op<T>(std::move(out), parents, [xn, wn, bn, M, K, N](const Tensor<T>& g) {
        if (xn->requires_grad)
            gemm_nt(g.data(), M, N, wn->value.data(), K, xn->ensure_grad().data(), true);
        if (wn->requires_grad)
            gemm_tn(xn->value.data(), M, K, g.data(), N, wn->ensure_grad().data(), true);
        if (bn && bn->requires_grad) {
            auto& acc = bn->ensure_grad();
            for (i64 m = 0; m < M; ++m)
                for (i64 n = 0; n < N; ++n) acc[n] += g.at2(m, n);
        }
    });
}

// ----- structure ops -----

// [La,C] ++ [Lb,C] -> [La+Lb,C]
template <class T>
Var<T> concat_rows(const Var<T>& a, const Var<T>& b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    check_arg(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(1),
              "concat_rows: incompatible shapes");
    Tensor<T> out({av.dim(0) + bv.dim(0), av.dim(1)});
    std::copy(av.data(), av.data() + av.size(), out.data());
    std::copy(bv.data(), bv.data() + bv.size(), out.data() + av.size());
    auto an = a.node(), bn = b.node();
    const i64 na = av.size();
    return make_op<T>(std::move(out), {a, b}, [an, bn, na](const Tensor<T>& g) {
        if (an->requires_grad) {
            auto& acc = an->ensure_grad();
            for (i64 i = 0; i < na; ++i) acc[i] += g[i];
        }
        if (bn->requires_grad) {
            auto& acc = bn->ensure_grad();
            for (i64 i = 0; i < acc.size(); ++i) acc[i] += g[na + i];
        }
    });
}

// [N,Ca,H,W] ++ [N,Cb,H,W] -> [N,Ca+Cb,H,W]
template <class T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    check_arg(av.rank() == 4 && bv.rank() == 4 && av.dim(0) == bv.dim(0) &&
                  av.dim(2) == bv.dim(2) && av.dim(3) == bv.dim(3),
              "concat_channels: incompatible shapes");
    const i64 N = av.dim(0), Ca = av.dim(1), Cb = bv.dim(1);
    const i64 hw = av.dim(2) * av.dim(3);
    Tensor<T> out({N, Ca + Cb, av.dim(2), av.dim(3)});
    for (i64 n = 0; n < N; ++n) {
        std::copy(av.data() + n * Ca * hw, av.data() + (n + 1) * Ca * hw,
                  out.data() + n * (Ca + Cb) * hw);
        std::copy(bv.data() + n * Cb * hw, bv.data() + (n + 1) * Cb * hw,
                  out.data() + n * (Ca + Cb) * hw + Ca * hw);
    }
    auto an = a.node(), bn = b.node();
    return make_op<T>(std::move(out), {a, b}, [an, bn, N, Ca, Cb, hw](const Tensor<T>& g) {
        const i64 Cs = Ca + Cb;
        if (an->requires_grad) {
            auto& acc = an->ensure_grad();
            for (i64 n = 0; n < N; ++n)
                for (i64 i = 0; i < Ca * hw; ++i) acc[n * Ca * hw + i] += g[n * Cs * hw + i];
        }
        if (bn->requires_grad) {
            auto& acc = bn->ensure_grad();
            for (i64 n = 0; n < N; ++n)
                for (i64 i = 0; i < Cb * hw; ++i)
                    acc[n * Cb * hw + i] += g[n * Cs * hw + Ca * hw + i];
        }
    });
}

// [N,L,C], frame -> [L,C]
template <class T>
Var<T> slice_frame(const Var<T>& x, i64 frame) {
    const auto& xv = x.value();
    check_arg(xv.rank() == 3, "slice_frame: rank-3 input required");
    check_arg(frame >= 0 && frame < xv.dim(0), "slice_frame: frame out of range");
    const i64 per = xv.dim(1) * xv.dim(2);
    Tensor<T> out({xv.dim(1), xv.dim(2)});
    std::copy(xv.data() + frame * per, xv.data() + (frame + 1) * per, out.data());
    auto xn = x.node();
    return make_op<T>(std::move(out), {x}, [xn, frame, per](const Tensor<T>& g) {
        if (!xn->requires_grad) return;
        auto& acc = xn->ensure_grad();
        for (i64 i = 0; i < per; ++i) acc[frame * per + i] += g[i];
    });
}

// inverse of slice_frame over a full set of frames
template <class T>
Var<T> stack_frames(const std::vector<Var<T>>& frames) {
    check_arg(!frames.empty(), "stack_frames: empty input");
    const auto& f0 = frames[0].value();
    check_arg(f0.rank() == 2, "stack_frames: rank-2 slices required");
    const i64 per = f0.size();
    Tensor<T> out({i64(frames.size()), f0.dim(0), f0.dim(1)});
    for (size_t n = 0; n < frames.size(); ++n) {
        check_arg(frames[n].value().same_shape(f0), "stack_frames: inconsistent slice shapes");
        std::copy(frames[n].value().data(), frames[n].value().data() + per,
                  out.data() + i64(n) * per);
    }
    std::vector<std::shared_ptr<Node<T>>> nodes;
    for (const auto& f : frames) nodes.push_back(f.node());
    return make_op<T>(std::move(out), frames, [nodes, per](const Tensor<T>& g) {
        for (size_t n = 0; n < nodes.size(); ++n) {
            if (!nodes[n]->requires_grad) continue;
            auto& acc = nodes[n]->ensure_grad();
            for (i64 i = 0; i < per; ++i) acc[i] += g[i64(n) * per + i];
        }
    });
}

// [N,C,H,W] -> [N,HW,C]
template <class T>
Var<T> to_tokens(const Var<T>& x) {
    const auto& xv = x.value();
    check_arg(xv.rank() == 4, "to_tokens: rank-4 input required");
    const i64 N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
    Tensor<T> out({N, HW, C});
    for (i64 n = 0; n < N; ++n)
        for (i64 c = 0; c < C; ++c)
            for (i64 p = 0; p < HW; ++p) out.at3(n, p, c) = xv[(n * C + c) * HW + p];
    auto xn = x.node();
    return make_op<T>(std::move(out), {x}, [xn, N, C, HW](const Tensor<T>& g) {
        if (!xn->requires_grad) return;
        auto& acc = xn->ensure_grad();
        for (i64 n = 0; n < N; ++n)
            for (i64 c = 0; c < C; ++c)
                for (i64 p = 0; p < HW; ++p) acc[(n * C + c) * HW + p] += g.at3(n, p, c);
    });
}

// [N,HW,C] -> [N,C,H,W]
template <class T>
Var<T> from_tokens(const Var<T>& t, i64 H, i64 W) {
    const auto& tv = t.value();
    check_arg(tv.rank() == 3 && tv.dim(1) == H * W, "from_tokens: shape mismatch");
    const i64 N = tv.dim(0), C = tv.dim(2), HW = H * W;
    Tensor<T> out({N, C, H, W});
    for (i64 n = 0; n < N; ++n)
        for (i64 c = 0; c < C; ++c)
            for (i64 p = 0; p < HW; ++p) out[(n * C + c) * HW + p] = tv.at3(n, p, c);
    auto tn = t.node();
    return make_op<T>(std::move(out), {t}, [tn, N, C, HW](const Tensor<T>& g) {
        if (!tn->requires_grad) return;
        auto& acc = tn->ensure_grad();
        for (i64 n = 0; n < N; ++n)
            for (i64 c = 0; c < C; ++c)
                for (i64 p = 0; p < HW; ++p) acc.data()[(n * HW + p) * C + c] += g[(n * C + c) * HW + p];
    });
}

// [N,C,H,W] -> [HW,N,C]  (one temporal token row per spatial position)
template <class T>
Var<T> to_temporal_rows(const Var<T>& x) {
    const auto& xv = x.value();
    check_arg(xv.rank() == 4, "to_temporal_rows: rank-4 input required");
    const i64 N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
    Tensor<T> out({HW, N, C});
    for (i64 n = 0; n < N; ++n)
        for (i64 c = 0; c < C; ++c)
            for (i64 p = 0; p < HW; ++p) out.at3(p, n, c) = xv[(n * C + c) * HW + p];
    auto xn = x.node();
    return make_op<T>(std::move(out), {x}, [xn, N, C, HW](const Tensor<T>& g) {
        if (!xn->requires_grad) return;
        auto& acc = xn->ensure_grad();
        for (i64 n = 0; n < N; ++n)
            for (i64 c = 0; c < C; ++c)
                for (i64 p = 0; p < HW; ++p) acc[(n * C + c) * HW + p] += g.at3(p, n, c);
    });
}

// [HW,N,C] -> [N,C,H,W]
template <class T>
Var<T> from_temporal_rows(const Var<T>& r, i64 H, i64 W) {
    const auto& rv = r.value();
    check_arg(rv.rank() == 3 && rv.dim(0) == H * W, "from_temporal_rows: shape mismatch");
    const i64 HW = H * W, N = rv.dim(1), C = rv.dim(2);
    Tensor<T> out({N, C, H, W});
    for (i64 p = 0; p < HW; ++p)
        for (i64 n = 0; n < N; ++n)
            for (i64 c = 0; c < C; ++c) out[(n * C + c) * HW + p] = rv.at3(p, n, c);
    auto rn = r.node();
    return make_op<T>(std::move(out), {r}, [rn, HW, N, C](const Tensor<T>& g) {
        if (!rn->requires_grad) return;
        auto& acc = rn->ensure_grad();
        for (i64 p = 0; p < HW; ++p)
            for (i64 n = 0; n < N; ++n)
                for (i64 c = 0; c < C; ++c) acc.data()[(p * N + n) * C + c] += g[(n * C + c) * HW + p];
    });
}

// table[V,D], row -> [D]
template <class T>
Var<T> embed_row(const Var<T>& table, i64 row) {
    const auto& tv = table.value();
    check_arg(tv.rank() == 2, "embed_row: rank-2 table required");
    check_arg(row >= 0 && row < tv.dim(0), "embed_row: row out of range");
    const i64 D = tv.dim(1);
    Tensor<T> out({D});
    std::copy(tv.data() + row * D, tv.data() + (row + 1) * D, out.data());
    auto tn = table.node();
    return make_op<T>(std::move(out), {table}, [tn, row, D](const Tensor<T>& g) {
        if (!tn->requires_grad) return;
        auto& acc = tn->ensure_grad();
        for (i64 i = 0; i < D; ++i) acc[row * D + i] += g[i];
    });
}

// x[N,C,H,W] + e[1,C] broadcast over frames and positions
template <class T>
Var<T> add_channel_bias(const Var<T>& x, const Var<T>& e) {
    const auto& xv = x.value();
    const auto& ev = e.value();
    check_arg(xv.rank() == 4, "add_channel_bias: rank-4 input required");
    check_arg(ev.size() == xv.dim(1), "add_channel_bias: channel count mismatch");
    const i64 N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
    Tensor<T> out = xv;
    for (i64 n = 0; n < N; ++n)
        for (i64 c = 0; c < C; ++c) {
            T* row = out.data() + (n * C + c) * HW;
            const T b = ev[c];
            for (i64 p = 0; p < HW; ++p) row[p] += b;
        }
    auto xn = x.node(), en = e.node();
    return make_op<T>(std::move(out), {x, e}, [xn, en, N, C, HW](const Tensor<T>& g) {
        accumulate(xn, g);
        if (en->requires_grad) {
            auto& acc = en->ensure_grad();
            for (i64 n = 0; n < N; ++n)
                for (i64 c = 0; c < C; ++c) {
                    const T* row = g.data() + (n * C + c) * HW;
                    T s = 0;
                    for (i64 p = 0; p < HW; ++p) s += row[p];
                    acc[c] += s;
                }
        }
    });
}

// ----- gating -----

// clamp to [0,1] with a straight-through gradient so a gate initialized on the
// boundary can still learn to move off it.
template <class T>
Var<T> clamp_unit_st(const Var<T>& g) {
    check_arg(g.value().size() == 1, "clamp_unit_st: scalar gate required");
    T v = g.value()[0];
    v = std::min(T(1), std::max(T(0), v));
    auto gn = g.node();
    return make_op<T>(Tensor<T>::full({1}, v), {g}, [gn](const Tensor<T>& up) {
        if (!gn->requires_grad) return;
        gn->ensure_grad()[0] += up[0];
    });
}

// gate*a + (1-gate)*b with a scalar gate
template <class T>
Var<T> lerp_gate(const Var<T>& a, const Var<T>& b, const Var<T>& gate) {
    check_arg(a.value().same_shape(b.value()), "lerp_gate: shape mismatch");
    check_arg(gate.value().size() == 1, "lerp_gate: scalar gate required");
    const T gv = gate.value()[0];
    Tensor<T> out = Tensor<T>::zeros_like(a.value());
    for (i64 i = 0; i < out.size(); ++i)
        out[i] = gv * a.value()[i] + (T(1) - gv) * b.value()[i];
    auto an = a.node(), bn = b.node(), gn = gate.node();
    return make_op<T>(std::move(out), {a, b, gate}, [an, bn, gn, gv](const Tensor<T>& g) {
        if (an->requires_grad) {
            auto& acc = an->ensure_grad();
            for (i64 i = 0; i < acc.size(); ++i) acc[i] += gv * g[i];
        }
        if (bn->requires_grad) {
            auto& acc = bn->ensure_grad();
            for (i64 i = 0; i < acc.size(); ++i) acc[i] += (T(1) - gv) * g[i];
        }
        if (gn->requires_grad) {
            T s = 0;
            for (i64 i = 0; i < g.size(); ++i) s += (an->value[i] - bn->value[i]) * g[i];
            gn->ensure_grad()[0] += s;
        }
    });
}

// ----- normalization -----

template <class T>
Var<T> group_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, i64 groups,
                  T eps = T(1e-5)) {
    const auto& xv = x.value();
    check_arg(xv.rank() == 4, "group_norm: rank-4 input required");
    const i64 N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
    check_arg(groups > 0 && C % groups == 0, "group_norm: channels not divisible by groups");
    check_arg(gamma.value().size() == C && beta.value().size() == C,
              "group_norm: affine parameter size mismatch");
    const i64 cg = C / groups;
    const i64 per_group = cg * HW;

    Tensor<T> xhat = Tensor<T>::zeros_like(xv);
    Tensor<T> inv_std({N * groups});
    Tensor<T> out = Tensor<T>::zeros_like(xv);
    for (i64 n = 0; n < N; ++n)
        for (i64 g = 0; g < groups; ++g) {
            const T* base = xv.data() + (n * C + g * cg) * HW;
            T mean = 0;
            for (i64 i = 0; i < per_group; ++i) mean += base[i];
            mean /= T(per_group);
            T var = 0;
            for (i64 i = 0; i < per_group; ++i) {
                const T d = base[i] - mean;
                var += d * d;
            }
            var /= T(per_group);
            const T is = T(1) / std::sqrt(var + eps);
            inv_std[n * groups + g] = is;
            T* xh = xhat.data() + (n * C + g * cg) * HW;
            T* o = out.data() + (n * C + g * cg) * HW;
            for (i64 c = 0; c < cg; ++c) {
                const T ga = gamma.value()[g * cg + c];
                const T be = beta.value()[g * cg + c];
                for (i64 p = 0; p < HW; ++p) {
                    const T v = (base[c * HW + p] - mean) * is;
                    xh[c * HW + p] = v;
                    o[c * HW + p] = ga * v + be;
                }
            }
        }

    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    return make_op<T>(std::move(out), {x, gamma, beta},
                      [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), N, C,
                       HW, groups, cg, per_group](const Tensor<T>& g) {
        if (gn->requires_grad || bn->requires_grad) {
            auto& dg = gn->ensure_grad();
            auto& db = bn->ensure_grad();
            for (i64 n = 0; n < N; ++n)
                for (i64 c = 0; c < C; ++c) {
                    const T* gg = g.data() + (n * C + c) * HW;
                    const T* xh = xhat.data() + (n * C + c) * HW;
                    T sg = 0, sb = 0;
                    for (i64 p = 0; p < HW; ++p) {
                        sg += gg[p] * xh[p];
                        sb += gg[p];
                    }
                    if (gn->requires_grad) dg[c] += sg;
                    if (bn->requires_grad) db[c] += sb;
                }
        }
        if (!xn->requires_grad) return;
        auto& dx = xn->ensure_grad();
        for (i64 n = 0; n < N; ++n)
            for (i64 grp = 0; grp < groups; ++grp) {
                const i64 off = (n * C + grp * cg) * HW;
                const T is = inv_std[n * groups + grp];
                T mean_dxh = 0, mean_dxh_xh = 0;
                for (i64 c = 0; c < cg; ++c) {
                    const T ga = gn->value[grp * cg + c];
                    const T* gg = g.data() + off + c * HW;
                    const T* xh = xhat.data() + off + c * HW;
                    for (i64 p = 0; p < HW; ++p) {
                        const T dxh = gg[p] * ga;
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xh[p];
                    }
                }
                mean_dxh /= T(per_group);
                mean_dxh_xh /= T(per_group);
                for (i64 c = 0; c < cg; ++c) {
                    const T ga = gn->value[grp * cg + c];
                    const T* gg = g.data() + off + c * HW;
                    const T* xh = xhat.data() + off + c * HW;
                    T* o = dx.data() + off + c * HW;
                    for (i64 p = 0; p < HW; ++p)
                        o[p] += is * (gg[p] * ga - mean_dxh - xh[p] * mean_dxh_xh);
                }
            }
    });
}

// LayerNorm over the trailing dimension of any-rank input.
template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
    const auto& xv = x.value();
    check_arg(xv.rank() >= 1, "layer_norm: input rank must be >= 1");
    const i64 C = xv.dim(xv.rank() - 1);
    check_arg(gamma.value().size() == C && beta.value().size() == C,
              "layer_norm: affine parameter size mismatch");
    const i64 R = xv.size() / C;

    Tensor<T> xhat = Tensor<T>::zeros_like(xv);
    Tensor<T> inv_std({R});
    Tensor<T> out = Tensor<T>::zeros_like(xv);
    for (i64 r = 0; r < R; ++r) {
        const T* base = xv.data() + r * C;
        T mean = 0;
        for (i64 c = 0; c < C; ++c) mean += base[c];
        mean /= T(C);
        T var = 0;
        for (i64 c = 0; c < C; ++c) {
            const T d = base[c] - mean;
            var += d * d;
        }
        var /= T(C);
        const T is = T(1) / std::sqrt(var + eps);
        inv_std[r] = is;
        for (i64 c = 0; c < C; ++c) {
            const T v = (base[c] - mean) * is;
            xhat[r * C + c] = v;
            out[r * C + c] = gamma.value()[c] * v + beta.value()[c];
        }
    }

    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    return make_op<T>(std::move(out), {x, gamma, beta},
                      [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), R,
                       C](const Tensor<T>& g) {
        if (gn->requires_grad || bn->requires_grad) {
            auto& dg = gn->ensure_grad();
            auto& db = bn->ensure_grad();
            for (i64 r = 0; r < R; ++r)
                for (i64 c = 0; c < C; ++c) {
                    if (gn->requires_grad) dg[c] += g[r * C + c] * xhat[r * C + c];
                    if (bn->requires_grad) db[c] += g[r * C + c];
                }
        }
        if (!xn->requires_grad) return;
        auto& dx = xn->ensure_grad();
        for (i64 r = 0; r < R; ++r) {
            const T is = inv_std[r];
            T mean_dxh = 0, mean_dxh_xh = 0;
            for (i64 c = 0; c < C; ++c) {
                const T dxh = g[r * C + c] * gn->value[c];
                mean_dxh += dxh;
                mean_dxh_xh += dxh * xhat[r * C + c];
            }
            mean_dxh /= T(C);
            mean_dxh_xh /= T(C);
            for (i64 c = 0; c < C; ++c) {
                const T dxh = g[r * C + c] * gn->value[c];
                dx[r * C + c] += is * (dxh - mean_dxh - xhat[r * C + c] * mean_dxh_xh);
            }
        }
    });
}

// ----- convolutions -----

namespace detail {

// im2col for spatial conv: rows indexed by (n, oy, ox), cols by (ci, ky, kx)
template <class T>
Tensor<T> im2col(const Tensor<T>& x, i64 kh, i64 kw, i64 stride, i64 pad, i64 oh, i64 ow) {
    const i64 N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor<T> col({N * oh * ow, C * kh * kw});
    for (i64 n = 0; n < N; ++n)
        for (i64 oy = 0; oy < oh; ++oy)
            for (i64 ox = 0; ox < ow; ++ox) {
                T* row = col.data() + ((n * oh + oy) * ow + ox) * C * kh * kw;
                for (i64 c = 0; c < C; ++c)
                    for (i64 ky = 0; ky < kh; ++ky) {
                        const i64 iy = oy * stride + ky - pad;
                        for (i64 kx = 0; kx < kw; ++kx) {
                            const i64 ix = ox * stride + kx - pad;
                            row[(c * kh + ky) * kw + kx] =
                                (iy >= 0 && iy < H && ix >= 0 && ix < W) ? x.at4(n, c, iy, ix)
                                                                         : T(0);
                        }
                    }
            }
    return col;
}

template <class T>
void col2im_acc(const Tensor<T>& dcol, Tensor<T>& dx, i64 kh, i64 kw, i64 stride, i64 pad,
                i64 oh, i64 ow) {
    const i64 N = dx.dim(0), C = dx.dim(1), H = dx.dim(2), W = dx.dim(3);
    for (i64 n = 0; n < N; ++n)
        for (i64 oy = 0; oy < oh; ++oy)
            for (i64 ox = 0; ox < ow; ++ox) {
                const T* row = dcol.data() + ((n * oh + oy) * ow + ox) * C * kh * kw;
                for (i64 c = 0; c < C; ++c)
                    for (i64 ky = 0; ky < kh; ++ky) {
                        const i64 iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= H) continue;
                        for (i64 kx = 0; kx < kw; ++kx) {
                            const i64 ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= W) continue;
                            dx.at4(n, c, iy, ix) += row[(c * kh + ky) * kw + kx];
                        }
                    }
            }
}

}  // namespace detail

// x[N,Ci,H,W] * w[Co,Ci,kh,kw] + b[Co], zero padding
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, i64 stride = 1, i64 pad = 1) {
    const auto& xv = x.value();
    const auto& wv = w.value();
    check_arg(xv.rank() == 4 && wv.rank() == 4, "conv2d: rank-4 input and weight required");
    check_arg(xv.dim(1) == wv.dim(1), "conv2d: channel mismatch");
    const i64 N = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    const i64 Co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    const i64 oh = (H + 2 * pad - kh) / stride + 1;
    const i64 ow = (W + 2 * pad - kw) / stride + 1;
    check_arg(oh > 0 && ow > 0, "conv2d: output would be empty");
    check_arg(!b.defined() || b.value().size() == Co, "conv2d: bad bias size");

    Tensor<T> col = detail::im2col(xv, kh, kw, stride, pad, oh, ow);
    const i64 M = N * oh * ow, Kc = Ci * kh * kw;
    Tensor<T> y2({M, Co});
    gemm_nt(col.data(), M, Kc, wv.data(), Co, y2.data());

    Tensor<T> out({N, Co, oh, ow});
    for (i64 n = 0; n < N; ++n)
        for (i64 p = 0; p < oh * ow; ++p) {
            const T* row = y2.data() + (n * oh * ow + p) * Co;
            for (i64 co = 0; co < Co; ++co)
                out[(n * Co + co) * oh * ow + p] = row[co] + (b.defined() ? b.value()[co] : T(0));
        }

    std::vector<Var<T>> parents = {x, w};
    if (b.defined()) parents.push_back(b);
    auto xn = x.node(), wn = w.node();
    auto bn = b.defined() ? b.node() : nullptr;
    return make_op<T>(std::move(out), parents,
                      [xn, wn, bn, col = std::move(col), N, Ci, Co, kh, kw, stride, pad, oh, ow,
                       M, Kc](const Tensor<T>& g) {
        Tensor<T> dY({M, Co});
        for (i64 n = 0; n < N; ++n)
            for (i64 p = 0; p < oh * ow; ++p)
                for (i64 co = 0; co < Co; ++co)
                    dY[(n * oh * ow + p) * Co + co] = g[(n * Co + co) * oh * ow + p];
        if (bn && bn->requires_grad) {
            auto& db = bn->ensure_grad();
            for (i64 m = 0; m < M; ++m)
                for (i64 co = 0; co < Co; ++co) db[co] += dY[m * Co + co];
        }
        if (wn->requires_grad)
            gemm_tn(dY.data(), M, Co, col.data(), Kc, wn->ensure_grad().data(), true);
        if (xn->requires_grad) {
            Tensor<T> dcol({M, Kc});
            gemm(dY.data(), M, Co, wn->value.data(), Kc, dcol.data());
            detail::col2im_acc(dcol, xn->ensure_grad(), kh, kw, stride, pad, oh, ow);
        }
    });
}

// Temporal convolution along the frame axis: x[N,Ci,H,W] * w[Co,Ci,kt], zero
// padded in time, spatial extent 1.
template <class T>
Var<T> temporal_conv(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const auto& xv = x.value();
    const auto& wv = w.value();
    check_arg(xv.rank() == 4 && wv.rank() == 3, "temporal_conv: bad ranks");
    check_arg(xv.dim(1) == wv.dim(1), "temporal_conv: channel mismatch");
    const i64 N = xv.dim(0), Ci = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
    const i64 Co = wv.dim(0), kt = wv.dim(2);
    check_arg(kt % 2 == 1, "temporal_conv: odd temporal extent required");
    check_arg(!b.defined() || b.value().size() == Co, "temporal_conv: bad bias size");
    const i64 pad = kt / 2;

    const i64 M = N * HW, Kc = Ci * kt;
    Tensor<T> col({M, Kc});
    for (i64 n = 0; n < N; ++n)
        for (i64 dt = 0; dt < kt; ++dt) {
            const i64 src = n + dt - pad;
            if (src < 0 || src >= N) continue;
            for (i64 ci = 0; ci < Ci; ++ci) {
                const T* srow = xv.data() + (src * Ci + ci) * HW;
                for (i64 p = 0; p < HW; ++p) col[(n * HW + p) * Kc + ci * kt + dt] = srow[p];
            }
        }
    Tensor<T> y2({M, Co});
    gemm_nt(col.data(), M, Kc, wv.data(), Co, y2.data());

    Tensor<T> out({N, Co, xv.dim(2), xv.dim(3)});
    for (i64 n = 0; n < N; ++n)
        for (i64 p = 0; p < HW; ++p) {
            const T* row = y2.data() + (n * HW + p) * Co;
            for (i64 co = 0; co < Co; ++co)
                out[(n * Co + co) * HW + p] = row[co] + (b.defined() ? b.value()[co] : T(0));
        }

    std::vector<Var<T>> parents = {x, w};
    if (b.defined()) parents.push_back(b);
    auto xn = x.node(), wn = w.node();
    auto bn = b.defined() ? b.node() : nullptr;
    return make_op<T>(std::move(out), parents,
                      [xn, wn, bn, col = std::move(col), N, Ci, Co, kt, pad, HW, M,
                       Kc](const Tensor<T>& g) {
        Tensor<T> dY({M, Co});
        for (i64 n = 0; n < N; ++n)
            for (i64 p = 0; p < HW; ++p)
                for (i64 co = 0; co < Co; ++co)
                    dY[(n * HW + p) * Co + co] = g[(n * Co + co) * HW + p];
        if (bn && bn->requires_grad) {
            auto& db = bn->ensure_grad();
            for (i64 m = 0; m < M; ++m)
                for (i64 co = 0; co < Co; ++co) db[co] += dY[m * Co + co];
        }
        if (wn->requires_grad)
            gemm_tn(dY.data(), M, Co, col.data(), Kc, wn->ensure_grad().data(), true);
        if (xn->requires_grad) {
            Tensor<T> dcol({M, Kc});
            gemm(dY.data(), M, Co, wn->value.data(), Kc, dcol.data());
            auto& dx = xn->ensure_grad();
            for (i64 n = 0; n < N; ++n)
                for (i64 dt = 0; dt < kt; ++dt) {
                    const i64 src = n + dt - pad;
                    if (src < 0 || src >= N) continue;
                    for (i64 ci = 0; ci < Ci; ++ci) {
                        T* drow = dx.data() + (src * Ci + ci) * HW;
                        for (i64 p = 0; p < HW; ++p)
                            drow[p] += dcol[(n * HW + p) * Kc + ci * kt + dt];
                    }
                }
        }
    });
}

// 2x nearest-neighbor upsampling
template <class T>
Var<T> nearest_upsample2(const Var<T>& x) {
    const auto& xv = x.value();
    check_arg(xv.rank() == 4, "nearest_upsample2: rank-4 input required");
    const i64 N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    Tensor<T> out({N, C, 2 * H, 2 * W});
    for (i64 n = 0; n < N; ++n)
        for (i64 c = 0; c < C; ++c)
            for (i64 h = 0; h < H; ++h)
                for (i64 w = 0; w < W; ++w) {
                    const T v = xv.at4(n, c, h, w);
                    out.at4(n, c, 2 * h, 2 * w) = v;
                    out.at4(n, c, 2 * h, 2 * w + 1) = v;
                    out.at4(n, c, 2 * h + 1, 2 * w) = v;
                    out.at4(n, c, 2 * h + 1, 2 * w + 1) = v;
                }
    auto xn = x.node();
    return make_op<T>(std::move(out), {x}, [xn, N, C, H, W](const Tensor<T>& g) {
        if (!xn->requires_grad) return;
        auto& dx = xn->ensure_grad();
        for (i64 n = 0; n < N; ++n)
            for (i64 c = 0; c < C; ++c)
                for (i64 h = 0; h < H; ++h)
                    for (i64 w = 0; w < W; ++w)
                        dx.at4(n, c, h, w) += g.at4(n, c, 2 * h, 2 * w) +
                                              g.at4(n, c, 2 * h, 2 * w + 1) +
                                              g.at4(n, c, 2 * h + 1, 2 * w) +
                                              g.at4(n, c, 2 * h + 1, 2 * w + 1);
    });
}

}  // namespace ag
}  // namespace vdiff
