#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "advpose/error.hpp"

namespace advpose {

// Small fixed-size dense linear algebra. Dimensions here are tiny (3 for
// geometry, 6 for the search space), so everything is stack-allocated and
// loop-based; no external matrix library is pulled in.

template <std::size_t N>
using VecN = std::array<double, N>;

using Vec3 = VecN<3>;
using Vec6 = VecN<6>;

template <std::size_t N>
struct MatN {
    std::array<std::array<double, N>, N> m{};

    static MatN identity() {
        MatN r;
        for (std::size_t i = 0; i < N; ++i) r.m[i][i] = 1.0;
        return r;
    }

    std::array<double, N>& operator[](std::size_t i) { return m[i]; }
    const std::array<double, N>& operator[](std::size_t i) const { return m[i]; }
};

using Mat3 = MatN<3>;
using Mat6 = MatN<6>;

template <std::size_t N>
inline VecN<N> operator+(const VecN<N>& a, const VecN<N>& b) {
    VecN<N> r;
    for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + b[i];
    return r;
}

template <std::size_t N>
inline VecN<N> operator-(const VecN<N>& a, const VecN<N>& b) {
    VecN<N> r;
    for (std::size_t i = 0; i < N; ++i) r[i] = a[i] - b[i];
    return r;
}

template <std::size_t N>
inline VecN<N> operator*(double s, const VecN<N>& a) {
    VecN<N> r;
    for (std::size_t i = 0; i < N; ++i) r[i] = s * a[i];
    return r;
}

template <std::size_t N>
inline double dot(const VecN<N>& a, const VecN<N>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
    return s;
}

template <std::size_t N>
inline double norm(const VecN<N>& a) {
    return std::sqrt(dot(a, a));
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

template <std::size_t N>
inline VecN<N> normalized(const VecN<N>& a) {
    double n = norm(a);
    if (n == 0.0) throw InvalidInput("cannot normalize a zero vector");
    return (1.0 / n) * a;
}

template <std::size_t N>
inline VecN<N> matvec(const MatN<N>& A, const VecN<N>& x) {
    VecN<N> r{};
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) r[i] += A[i][j] * x[j];
    return r;
}

template <std::size_t N>
inline MatN<N> matmul(const MatN<N>& A, const MatN<N>& B) {
    MatN<N> r;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t k = 0; k < N; ++k) {
            double a = A[i][k];
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < N; ++j) r[i][j] += a * B[k][j];
        }
    return r;
}

template <std::size_t N>
inline MatN<N> transpose(const MatN<N>& A) {
    MatN<N> r;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) r[i][j] = A[j][i];
    return r;
}

// Outer product x yᵀ.
template <std::size_t N>
inline MatN<N> outer(const VecN<N>& x, const VecN<N>& y) {
    MatN<N> r;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) r[i][j] = x[i] * y[j];
    return r;
}

template <std::size_t N>
inline MatN<N> symmetrized(const MatN<N>& A) {
    MatN<N> r;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) r[i][j] = 0.5 * (A[i][j] + A[j][i]);
    return r;
}

template <std::size_t N>
inline double max_abs_asymmetry(const MatN<N>& A) {
    double worst = 0.0;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) worst = std::max(worst, std::abs(A[i][j] - A[j][i]));
    return worst;
}

template <std::size_t N>
struct EigenDecomposition {
    MatN<N> vectors;     // columns are eigenvectors
    VecN<N> values;      // ascending
};

// Cyclic Jacobi eigendecomposition for symmetric matrices. Deterministic
// sweep order, converges quadratically; at N ≤ 6 this outperforms setting
// up a general-purpose solver and keeps the header self-contained.
template <std::size_t N>
inline EigenDecomposition<N> eigen_symmetric(const MatN<N>& input) {
    MatN<N> a = symmetrized(input);
    MatN<N> v = MatN<N>::identity();

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < N; ++p)
            for (std::size_t q = p + 1; q < N; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-300) break;

        for (std::size_t p = 0; p < N; ++p) {
            for (std::size_t q = p + 1; q < N; ++q) {
                double apq = a[p][q];
                if (std::abs(apq) < 1e-300) continue;
                double app = a[p][p];
                double aqq = a[q][q];
                double tau = (aqq - app) / (2.0 * apq);
                double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = t * c;

                for (std::size_t k = 0; k < N; ++k) {
                    double akp = a[k][p];
                    double akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < N; ++k) {
                    double apk = a[p][k];
                    double aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < N; ++k) {
                    double vkp = v[k][p];
                    double vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    EigenDecomposition<N> out;
    for (std::size_t i = 0; i < N; ++i) out.values[i] = a[i][i];

    // Sort ascending, carrying eigenvector columns along.
    std::array<std::size_t, N> order{};
    for (std::size_t i = 0; i < N; ++i) order[i] = i;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j)
            if (out.values[order[j]] < out.values[order[i]]) std::swap(order[i], order[j]);

    EigenDecomposition<N> sorted;
    for (std::size_t i = 0; i < N; ++i) {
        sorted.values[i] = out.values[order[i]];
        for (std::size_t k = 0; k < N; ++k) sorted.vectors[k][i] = v[k][order[i]];
    }
    return sorted;
}

template <std::size_t N>
inline double min_eigenvalue(const MatN<N>& a) {
    return eigen_symmetric(a).values[0];
}

}  // namespace advpose
