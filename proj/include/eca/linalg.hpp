#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eca/errors.hpp"

namespace eca {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles; rows are data points.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * cols, cols};
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void check_same_dim(std::span<const double> a, std::span<const double> b,
                           const char* what) {
    if (a.size() != b.size())
        throw DimensionError(std::string(what) + ": dims " + std::to_string(a.size()) +
                             " vs " + std::to_string(b.size()));
}

// Four independent accumulators, combined in a fixed order: deterministic,
// and wide enough for the compiler to keep vector units busy on long rows.
inline double dot(std::span<const double> a, std::span<const double> b) {
    check_same_dim(a, b, "dot");
    const std::size_t n = a.size();
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((s0 + s1) + (s2 + s3)) + tail;
}

inline double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

/// y += c * x
inline void axpy(double c, std::span<const double> x, std::span<double> y) {
    check_same_dim(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

inline void normalize_inplace(std::span<double> v) {
    const double n = norm(v);
    if (n == 0.0 || !std::isfinite(n))
        throw DegenerateVectorError("normalize: zero or non-finite norm");
    for (double& x : v) x /= n;
}

inline Vector normalized(std::span<const double> v) {
    Vector out(v.begin(), v.end());
    normalize_inplace(out);
    return out;
}

/// Removes from g its components along an orthonormal basis, in place:
/// g <- g - sum_j (v_j . g) v_j
inline void complement_project_inplace(std::span<double> g,
                                       const std::vector<Vector>& basis) {
    for (const Vector& v : basis) {
        check_same_dim(g, v, "complement_project");
        axpy(-dot(v, g), v, g);
    }
}

inline Vector complement_project(std::span<const double> g,
                                 const std::vector<Vector>& basis) {
    Vector out(g.begin(), g.end());
    complement_project_inplace(out, basis);
    return out;
}

/// y = A x
inline void matvec(const Matrix& a, std::span<const double> x, std::span<double> y) {
    if (a.cols != x.size() || a.rows != y.size())
        throw DimensionError("matvec: shape mismatch");
    for (std::size_t i = 0; i < a.rows; ++i) y[i] = dot(a.row(i), x);
}

/// y = A^T x
inline void matvec_transposed(const Matrix& a, std::span<const double> x,
                              std::span<double> y) {
    if (a.rows != x.size() || a.cols != y.size())
        throw DimensionError("matvec_transposed: shape mismatch");
    for (double& v : y) v = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) axpy(x[i], a.row(i), y);
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw DimensionError("matmul: inner dims differ");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        auto ci = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) axpy(a(i, k), b.row(k), ci);
    }
    return c;
}

}  // namespace eca
