#pragma once

// Dense row-major tensor with a small fixed vocabulary of shapes used across
// the library: video tensors are [N, C, H, W], token matrices [L, C], token
// stacks [R, L, C].  Heavy lifting (GEMM) is delegated to Eigen.

#include <Eigen/Core>

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "rng.hpp"

namespace vdiff {

using Shape = std::vector<i64>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

template <class T>
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        i64 n = 1;
        for (i64 d : shape_) {
            check_arg(d >= 0, "Tensor: negative dimension");
            n *= d;
        }
        data_.assign(size_t(n), T(0));
    }

    Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
        i64 n = 1;
        for (i64 d : shape_) n *= d;
        check_arg(i64(data_.size()) == n, "Tensor: value count does not match shape");
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    static Tensor full(Shape shape, T value) {
        Tensor t(std::move(shape));
        for (T& x : t.data_) x = value;
        return t;
    }

    static Tensor scalar(T value) { return Tensor({}, {value}); }

    static Tensor randn(Shape shape, Rng& rng) {
        Tensor t(std::move(shape));
        for (T& x : t.data_) x = T(rng.normal());
        return t;
    }

    const Shape& shape() const { return shape_; }
    i64 rank() const { return i64(shape_.size()); }
    i64 dim(i64 i) const { return shape_[size_t(i)]; }
    i64 size() const { return i64(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](i64 i) { return data_[size_t(i)]; }
    const T& operator[](i64 i) const { return data_[size_t(i)]; }

    // Rank-specific accessors; bounds are the caller's responsibility.
    T& at2(i64 i, i64 j) { return data_[size_t(i * shape_[1] + j)]; }
    const T& at2(i64 i, i64 j) const { return data_[size_t(i * shape_[1] + j)]; }

    T& at3(i64 i, i64 j, i64 k) {
        return data_[size_t((i * shape_[1] + j) * shape_[2] + k)];
    }
    const T& at3(i64 i, i64 j, i64 k) const {
        return data_[size_t((i * shape_[1] + j) * shape_[2] + k)];
    }

    T& at4(i64 n, i64 c, i64 h, i64 w) {
        return data_[size_t(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    const T& at4(i64 n, i64 c, i64 h, i64 w) const {
        return data_[size_t(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }

    Tensor reshaped(Shape shape) const {
        i64 n = 1;
        for (i64 d : shape) n *= d;
        check_arg(n == size(), "reshaped: element count mismatch");
        Tensor out = *this;
        out.shape_ = std::move(shape);
        return out;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    T sum() const {
        T s = 0;
        for (const T& x : data_) s += x;
        return s;
    }

    T mean() const {
        check_arg(!data_.empty(), "mean of empty tensor");
        return sum() / T(size());
    }

    T abs_max() const {
        T m = 0;
        for (const T& x : data_) m = std::max(m, std::abs(x));
        return m;
    }

  private:
    Shape shape_;
    std::vector<T> data_;
};

// ----- elementwise helpers -----

template <class T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
    check_arg(a.same_shape(b), "tensor add: shape mismatch");
    Tensor<T> out = a;
    for (i64 i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

template <class T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
    check_arg(a.same_shape(b), "tensor sub: shape mismatch");
    Tensor<T> out = a;
    for (i64 i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

template <class T>
Tensor<T> operator*(const Tensor<T>& a, T s) {
    Tensor<T> out = a;
    for (i64 i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

template <class T>
Tensor<T> operator*(T s, const Tensor<T>& a) {
    return a * s;
}

template <class T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    check_arg(a.same_shape(b), "max_abs_diff: shape mismatch");
    T m = 0;
    for (i64 i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

template <class T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) return false;
    for (i64 i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

// ----- GEMM (row-major), Eigen-backed -----

namespace detail {

template <class T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapM = Eigen::Map<EMat<T>>;
template <class T>
using CMapM = Eigen::Map<const EMat<T>>;

}  // namespace detail

// c[m,n] = a[m,k] * b[k,n]   (accumulates when acc)
template <class T>
void gemm(const T* a, i64 m, i64 k, const T* b, i64 n, T* c, bool acc = false) {
    detail::CMapM<T> A(a, m, k), B(b, k, n);
    detail::MapM<T> C(c, m, n);
    if (acc)
        C.noalias() += A * B;
    else
        C.noalias() = A * B;
}

// c[m,n] = a[k,m]^T * b[k,n]
template <class T>
void gemm_tn(const T* a, i64 k, i64 m, const T* b, i64 n, T* c, bool acc = false) {
    detail::CMapM<T> A(a, k, m), B(b, k, n);
    detail::MapM<T> C(c, m, n);
    if (acc)
        C.noalias() += A.transpose() * B;
    else
        C.noalias() = A.transpose() * B;
}

// c[m,n] = a[m,k] * b[n,k]^T
template <class T>
void gemm_nt(const T* a, i64 m, i64 k, const T* b, i64 n, T* c, bool acc = false) {
    detail::CMapM<T> A(a, m, k), B(b, n, k);
    detail::MapM<T> C(c, m, n);
    if (acc)
        C.noalias() += A * B.transpose();
    else
        C.noalias() = A * B.transpose();
}

// out[m,n] = a[m,k] * b[k,n] as Tensors
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    check_arg(a.rank() == 2 && b.rank() == 2, "matmul: rank-2 operands required");
    check_arg(a.dim(1) == b.dim(0), "matmul: inner dimension mismatch");
    Tensor<T> out({a.dim(0), b.dim(1)});
    gemm(a.data(), a.dim(0), a.dim(1), b.data(), b.dim(1), out.data());
    return out;
}

}  // namespace vdiff
