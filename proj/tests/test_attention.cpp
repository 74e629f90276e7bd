// Attention oracles: naive reimplementations of the gather, of vanilla
// attention, and of the rotary rotation, compared against the library ops.

#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include <vdiff/attention.hpp>
#include <vdiff/rng.hpp>

using namespace vdiff;

namespace {

template <class T>
AttentionWeights<T> random_weights(i64 cq, i64 ckv, i64 d, i64 cout, i64 heads, Rng& rng) {
    AttentionWeights<T> w;
    w.w_q = Tensor<T>::randn({cq, d}, rng);
    w.w_k = Tensor<T>::randn({ckv, d}, rng);
    w.w_v = Tensor<T>::randn({ckv, d}, rng);
    w.w_out = Tensor<T>::randn({d, cout}, rng);
    w.head_count = heads;
    return w;
}

// Rotary rotation straight from the definition: pair j of a width-w block
// rotates by angle position * base^(-2j/w).
template <class T>
void naive_rope(Tensor<T>& mat, i64 col0, i64 width, const std::vector<i64>& pos, double base) {
    for (i64 i = 0; i < mat.dim(0); ++i)
        for (i64 j = 0; j < width / 2; ++j) {
            const double ang =
                double(pos[size_t(i)]) * std::pow(base, -2.0 * double(j) / double(width));
            const T c = T(std::cos(ang)), s = T(std::sin(ang));
            T& x0 = mat.data()[i * mat.dim(1) + col0 + 2 * j];
            T& x1 = mat.data()[i * mat.dim(1) + col0 + 2 * j + 1];
            const T a = x0, b = x1;
            x0 = a * c - b * s;
            x1 = a * s + b * c;
        }
}

// Multi-head softmax attention from the definition, sequential loops.
// Optional rope positions rotate Q and K per head.
template <class T>
Tensor<T> naive_attention(const Tensor<T>& zq, const Tensor<T>& zkv,
                          const AttentionWeights<T>& w, const std::vector<i64>& pos_q = {},
                          const std::vector<i64>& pos_k = {}, double base = 10000.0) {
    const i64 lq = zq.dim(0), lk = zkv.dim(0);
    const i64 d = w.w_q.dim(1), heads = w.head_count, dh = d / heads;
    const T scale = T(1.0 / std::sqrt(double(dh)));
    Tensor<T> q = matmul(zq, w.w_q);
    Tensor<T> k = matmul(zkv, w.w_k);
    Tensor<T> v = matmul(zkv, w.w_v);
    for (i64 h = 0; h < heads; ++h) {
        if (!pos_q.empty()) naive_rope(q, h * dh, dh, pos_q, base);
        if (!pos_k.empty()) naive_rope(k, h * dh, dh, pos_k, base);
    }
    Tensor<T> ctx({lq, d});
    for (i64 h = 0; h < heads; ++h)
        for (i64 i = 0; i < lq; ++i) {
            std::vector<T> logits(static_cast<size_t>(lk));
            for (i64 j = 0; j < lk; ++j) {
                T acc = 0;
                for (i64 x = 0; x < dh; ++x)
                    acc += q.at2(i, h * dh + x) * k.at2(j, h * dh + x);
                logits[size_t(j)] = acc * scale;
            }
            T m = logits[0];
            for (i64 j = 1; j < lk; ++j) m = std::max(m, logits[size_t(j)]);
            std::vector<T> p(static_cast<size_t>(lk));
            T sum = 0;
            for (i64 j = 0; j < lk; ++j) {
                p[size_t(j)] = std::exp(logits[size_t(j)] - m);
                sum += p[size_t(j)];
            }
            for (i64 j = 0; j < lk; ++j) p[size_t(j)] /= sum;
            for (i64 x = 0; x < dh; ++x) {
                T acc = 0;
                for (i64 j = 0; j < lk; ++j) acc += p[size_t(j)] * v.at2(j, h * dh + x);
                ctx.at2(i, h * dh + x) = acc;
            }
        }
    return matmul(ctx, w.w_out);
}

}  // namespace

TEST_CASE("window offsets enumerate the neighborhood in raster order") {
    const auto off1 = window_offsets(1);
    REQUIRE(off1.empty());
    const auto off3 = window_offsets(3);
    const std::vector<std::pair<i64, i64>> expect = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                                     {0, 1},   {1, -1}, {1, 0},  {1, 1}};
    REQUIRE(off3 == expect);
    REQUIRE(window_offsets(5).size() == 24);
    REQUIRE_THROWS_AS(window_offsets(2), std::invalid_argument);
    REQUIRE_THROWS_AS(window_offsets(-1), std::invalid_argument);
}

TEST_CASE("window gather equals the naive clamped gather for all small sizes") {
    Rng rng(31);
    for (i64 h = 1; h <= 8; ++h)
        for (i64 w = 1; w <= 8; ++w)
            for (i64 k : {1, 3, 5}) {
                Tensor<float> z1 = Tensor<float>::randn({3, h, w}, rng);
                const auto win = build_first_frame_window(z1, k);
                const auto off = window_offsets(k);
                REQUIRE(win.tokens.dim(0) == h * w);
                REQUIRE(win.tokens.dim(1) == k * k - 1);
                REQUIRE(win.tokens.dim(2) == 3);
                for (i64 y = 0; y < h; ++y)
                    for (i64 x = 0; x < w; ++x)
                        for (size_t o = 0; o < off.size(); ++o) {
                            i64 sy = y + off[o].first;
                            i64 sx = x + off[o].second;
                            sy = sy < 0 ? 0 : (sy >= h ? h - 1 : sy);
                            sx = sx < 0 ? 0 : (sx >= w ? w - 1 : sx);
                            for (i64 c = 0; c < 3; ++c)
                                REQUIRE(win.tokens.at3(y * w + x, i64(o), c) ==
                                        z1.at3(c, sy, sx));
                        }
            }
}

TEST_CASE("window size 1 reduces to vanilla temporal attention bitwise") {
    Rng rng(32);
    for (int inst = 0; inst < 100; ++inst) {
        const i64 hw = 1 + rng.uniform_int(4);
        const i64 n = 2 + rng.uniform_int(4);
        const i64 c = 4;
        const i64 heads = (inst % 2) ? 2 : 1;
        Tensor<float> rows = Tensor<float>::randn({hw, n, c}, rng);
        Tensor<float> z1 = Tensor<float>::randn({c, 1, hw}, rng);
        auto w = random_weights<float>(c, c, 4, c, heads, rng);
        const auto win = build_first_frame_window(z1, 1);
        RopeConfig rope;
        Tensor<float> got = temporal_window_attention(rows, win, w, rope);

        std::vector<i64> pos(static_cast<size_t>(n));
        for (i64 i = 0; i < n; ++i) pos[size_t(i)] = i;
        for (i64 r = 0; r < hw; ++r) {
            Tensor<float> frames({n, c});
            std::copy(rows.data() + r * n * c, rows.data() + (r + 1) * n * c, frames.data());
            Tensor<float> expect = naive_attention(frames, frames, w, pos, pos);
            for (i64 i = 0; i < n * c; ++i) {
                const float a = got[r * n * c + i];
                const float b = expect[i];
                REQUIRE(std::memcmp(&a, &b, sizeof(float)) == 0);
            }
        }
    }
}

TEST_CASE("cross-frame attention with z1 == zi matches single-frame self-attention") {
    // K/V are [z_i, z_1]; a duplicated token set leaves softmax context
    // unchanged, so this must agree with plain self-attention on z_i.
    Rng rng(33);
    float worst = 0;
    for (int inst = 0; inst < 100; ++inst) {
        const i64 l = 1 + rng.uniform_int(16);
        const i64 c = 2 + rng.uniform_int(7);
        Tensor<float> z = Tensor<float>::randn({l, c}, rng);
        auto w = random_weights<float>(c, c, 8, c, 2, rng);
        Tensor<float> got = spatial_cross_frame_attention(z, z, w);
        Tensor<float> expect = naive_attention(z, z, w);
        worst = std::max(worst, max_abs_diff(got, expect));
    }
    REQUIRE(worst < 1e-5f);
}

TEST_CASE("cross-frame attention attends to the conditioning frame") {
    Rng rng(34);
    Tensor<float> z = Tensor<float>::randn({6, 4}, rng);
    Tensor<float> z1a = Tensor<float>::randn({6, 4}, rng);
    Tensor<float> z1b = Tensor<float>::randn({6, 4}, rng);
    auto w = random_weights<float>(4, 4, 8, 4, 2, rng);
    Tensor<float> outa = spatial_cross_frame_attention(z, z1a, w);
    Tensor<float> outb = spatial_cross_frame_attention(z, z1b, w);
    REQUIRE(max_abs_diff(outa, outb) > 1e-4f);  // conditioning frame participates

    AttentionTrace<float> trace;
    spatial_cross_frame_attention(z, z1a, w, &trace);
    REQUIRE(trace.probs.size() == 1);
    const Tensor<float>& probs = trace.probs[0];
    REQUIRE(probs.dim(0) == 2 * 6);  // heads * queries
    REQUIRE(probs.dim(1) == 12);     // current + conditioning tokens
    for (i64 i = 0; i < probs.dim(0); ++i) {
        float sum = 0, cond_mass = 0;
        for (i64 j = 0; j < probs.dim(1); ++j) {
            sum += probs.at2(i, j);
            if (j >= 6) cond_mass += probs.at2(i, j);
        }
        REQUIRE(sum == Catch::Approx(1.0f).margin(1e-5));
        REQUIRE(cond_mass > 0.0f);
    }
}

TEST_CASE("permuting query tokens permutes outputs") {
    Rng rng(35);
    Tensor<double> z = Tensor<double>::randn({5, 4}, rng);
    Tensor<double> z1 = Tensor<double>::randn({5, 4}, rng);
    auto w = random_weights<double>(4, 4, 8, 4, 2, rng);
    Tensor<double> base = spatial_cross_frame_attention(z, z1, w);

    const std::vector<i64> perm = {3, 0, 4, 1, 2};
    Tensor<double> zp({5, 4});
    for (i64 i = 0; i < 5; ++i)
        for (i64 j = 0; j < 4; ++j) zp.at2(i, j) = z.at2(perm[size_t(i)], j);
    Tensor<double> outp = spatial_cross_frame_attention(zp, z1, w);
    for (i64 i = 0; i < 5; ++i)
        for (i64 j = 0; j < 4; ++j)
            REQUIRE(outp.at2(i, j) == Catch::Approx(base.at2(perm[size_t(i)], j)).margin(1e-10));
}

TEST_CASE("rope at position zero is the identity") {
    Rng rng(36);
    Tensor<float> tokens = Tensor<float>::randn({4, 8}, rng);
    Tensor<float> out = rope_rotate(tokens, {0, 0, 0, 0}, RopeConfig{});
    REQUIRE(max_abs_diff(out, tokens) == 0.0f);
}

TEST_CASE("rope preserves pair norms") {
    Rng rng(37);
    Tensor<double> tokens = Tensor<double>::randn({3, 8}, rng);
    Tensor<double> out = rope_rotate(tokens, {5, 17, 123}, RopeConfig{});
    for (i64 i = 0; i < 3; ++i)
        for (i64 j = 0; j < 4; ++j) {
            const double n0 = tokens.at2(i, 2 * j) * tokens.at2(i, 2 * j) +
                              tokens.at2(i, 2 * j + 1) * tokens.at2(i, 2 * j + 1);
            const double n1 = out.at2(i, 2 * j) * out.at2(i, 2 * j) +
                              out.at2(i, 2 * j + 1) * out.at2(i, 2 * j + 1);
            REQUIRE(n1 == Catch::Approx(n0).margin(1e-12));
        }
}

TEST_CASE("rope dot products depend only on relative position") {
    Rng rng(38);
    Tensor<double> q = Tensor<double>::randn({1, 8}, rng);
    Tensor<double> k = Tensor<double>::randn({1, 8}, rng);
    auto dot_at = [&](i64 pq, i64 pk) {
        Tensor<double> qr = rope_rotate(q, {pq}, RopeConfig{});
        Tensor<double> kr = rope_rotate(k, {pk}, RopeConfig{});
        double acc = 0;
        for (i64 j = 0; j < 8; ++j) acc += qr[j] * kr[j];
        return acc;
    };
    const double base = dot_at(2, 7);
    for (i64 shift : {1, 5, 40, 1000}) REQUIRE(dot_at(2 + shift, 7 + shift) == Catch::Approx(base).margin(1e-9));
    REQUIRE(std::abs(dot_at(2, 8) - base) > 1e-6);  // different offset, different logit
}

TEST_CASE("rope matches the naive rotation and honors rotated_dim") {
    Rng rng(39);
    Tensor<double> tokens = Tensor<double>::randn({5, 8}, rng);
    const std::vector<i64> pos = {0, 1, 2, 3, 9};
    Tensor<double> got = rope_rotate(tokens, pos, RopeConfig{10000.0, 4});
    Tensor<double> expect = tokens;
    naive_rope(expect, 0, 4, pos, 10000.0);
    REQUIRE(max_abs_diff(got, expect) == 0.0);
    // columns beyond rotated_dim untouched
    for (i64 i = 0; i < 5; ++i)
        for (i64 j = 4; j < 8; ++j) REQUIRE(got.at2(i, j) == tokens.at2(i, j));
}

TEST_CASE("temporal attention consults the first-frame window") {
    Rng rng(40);
    const i64 h = 2, w = 2, n = 3, c = 4;
    Tensor<float> rows = Tensor<float>::randn({h * w, n, c}, rng);
    Tensor<float> z1a = Tensor<float>::randn({c, h, w}, rng);
    Tensor<float> z1b = Tensor<float>::randn({c, h, w}, rng);
    auto weights = random_weights<float>(c, c, 8, c, 2, rng);
    RopeConfig rope;
    Tensor<float> outa =
        temporal_window_attention(rows, build_first_frame_window(z1a, 3), weights, rope);
    Tensor<float> outb =
        temporal_window_attention(rows, build_first_frame_window(z1b, 3), weights, rope);
    REQUIRE(max_abs_diff(outa, outb) > 1e-4f);

    // trace shows the widened key set: N + K*K-1 columns per row
    AttentionTrace<float> trace;
    temporal_window_attention(rows, build_first_frame_window(z1a, 3), weights, rope, &trace);
    REQUIRE(trace.probs.size() == size_t(h * w));
    REQUIRE(trace.probs[0].dim(1) == n + 8);
}

TEST_CASE("mismatched window rows are rejected") {
    Tensor<float> rows({4, 2, 3});
    Tensor<float> z1({3, 3, 3});  // 9 positions != 4 rows
    AttentionWeights<float> w;
    w.w_q = Tensor<float>({3, 4});
    w.w_k = Tensor<float>({3, 4});
    w.w_v = Tensor<float>({3, 4});
    w.w_out = Tensor<float>({4, 3});
    w.head_count = 2;
    REQUIRE_THROWS_AS(
        temporal_window_attention(rows, build_first_frame_window(z1, 3), w, RopeConfig{}),
        std::invalid_argument);
}
