#pragma once

// Minimal FFT for the frequency-domain noise utilities.  Power-of-two lengths
// take the iterative radix-2 path; anything else falls back to a direct DFT
// (grid sides here are tiny, so the fallback is acceptable).
//
// Convention: forward transform is unnormalized, inverse divides by the total
// element count (applied once, in fft3_inverse).

#include <complex>
#include <vector>

#include "common.hpp"

namespace vdiff {

namespace detail {

constexpr double kPi = 3.14159265358979323846;

template <class T>
void dft_direct(std::complex<T>* x, i64 n, bool inverse) {
    std::vector<std::complex<T>> out(static_cast<size_t>(n));
    const double sign = inverse ? 2.0 : -2.0;
    for (i64 k = 0; k < n; ++k) {
        std::complex<T> acc(0, 0);
        for (i64 j = 0; j < n; ++j) {
            const double ang = sign * kPi * double(j * k % n) / double(n);
            acc += x[j] * std::complex<T>(T(std::cos(ang)), T(std::sin(ang)));
        }
        out[size_t(k)] = acc;
    }
    for (i64 k = 0; k < n; ++k) x[k] = out[size_t(k)];
}

template <class T>
void fft_radix2(std::complex<T>* x, i64 n, bool inverse) {
    for (i64 i = 1, j = 0; i < n; ++i) {
        i64 bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j |= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (i64 len = 2; len <= n; len <<= 1) {
        const i64 half = len / 2;
        std::vector<std::complex<T>> tw(static_cast<size_t>(half));
        const double ang0 = (inverse ? 2.0 : -2.0) * kPi / double(len);
        for (i64 j = 0; j < half; ++j)
            tw[size_t(j)] = std::complex<T>(T(std::cos(ang0 * double(j))),
                                            T(std::sin(ang0 * double(j))));
        for (i64 i = 0; i < n; i += len) {
            for (i64 j = 0; j < half; ++j) {
                const std::complex<T> u = x[i + j];
                const std::complex<T> v = x[i + j + half] * tw[size_t(j)];
                x[i + j] = u + v;
                x[i + j + half] = u - v;
            }
        }
    }
}

}  // namespace detail

// Unnormalized 1D transform, either direction.
template <class T>
void fft_1d(std::complex<T>* x, i64 n, bool inverse) {
    check_arg(n > 0, "fft_1d: empty length");
    if ((n & (n - 1)) == 0)
        detail::fft_radix2(x, n, inverse);
    else
        detail::dft_direct(x, n, inverse);
}

// Complex scalar field on an [N, H, W] grid.
template <class T>
struct ComplexGrid {
    i64 n = 0, h = 0, w = 0;
    std::vector<std::complex<T>> v;

    ComplexGrid() = default;
    ComplexGrid(i64 n_, i64 h_, i64 w_) : n(n_), h(h_), w(w_), v(size_t(n_ * h_ * w_)) {}

    std::complex<T>& at(i64 a, i64 b, i64 c) { return v[size_t((a * h + b) * w + c)]; }
    const std::complex<T>& at(i64 a, i64 b, i64 c) const {
        return v[size_t((a * h + b) * w + c)];
    }
    i64 size() const { return n * h * w; }
};

namespace detail {

template <class T>
void fft3_axis(ComplexGrid<T>& g, int axis, bool inverse) {
    const i64 dims[3] = {g.n, g.h, g.w};
    const i64 len = dims[axis];
    std::vector<std::complex<T>> line(static_cast<size_t>(len));
    if (axis == 2) {
        for (i64 a = 0; a < g.n; ++a)
            for (i64 b = 0; b < g.h; ++b)
                fft_1d(&g.at(a, b, 0), len, inverse);
        return;
    }
    if (axis == 1) {
        for (i64 a = 0; a < g.n; ++a)
            for (i64 c = 0; c < g.w; ++c) {
                for (i64 b = 0; b < len; ++b) line[size_t(b)] = g.at(a, b, c);
                fft_1d(line.data(), len, inverse);
                for (i64 b = 0; b < len; ++b) g.at(a, b, c) = line[size_t(b)];
            }
        return;
    }
    for (i64 b = 0; b < g.h; ++b)
        for (i64 c = 0; c < g.w; ++c) {
            for (i64 a = 0; a < len; ++a) line[size_t(a)] = g.at(a, b, c);
            fft_1d(line.data(), len, inverse);
            for (i64 a = 0; a < len; ++a) g.at(a, b, c) = line[size_t(a)];
        }
}

}  // namespace detail

template <class T>
void fft3_forward(ComplexGrid<T>& g) {
    detail::fft3_axis(g, 2, false);
    detail::fft3_axis(g, 1, false);
    detail::fft3_axis(g, 0, false);
}

template <class T>
void fft3_inverse(ComplexGrid<T>& g) {
    detail::fft3_axis(g, 2, true);
    detail::fft3_axis(g, 1, true);
    detail::fft3_axis(g, 0, true);
    const T scale = T(1) / T(g.size());
    for (auto& z : g.v) z *= scale;
}

}  // namespace vdiff
