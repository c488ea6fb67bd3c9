#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

#include "sim/rng.hpp"

namespace sim {

using Vec = std::vector<double>;

// Dense row-major matrix. Small enough here (d=4..8 projections, MLP layers)
// that hand-rolled loops beat pulling in a BLAS.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
    const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
    double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }

    void fill(double v) { a.assign(a.size(), v); }

    static Mat xavier(int r, int c, Rng& rng) {
        Mat m(r, c);
        const double scale = std::sqrt(6.0 / (r + c));
        for (auto& x : m.a) x = (rng.uniform() * 2.0 - 1.0) * scale;
        return m;
    }
};

inline double dot(const double* x, const double* y, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

inline double dot(const Vec& x, const Vec& y) {
    assert(x.size() == y.size());
    return dot(x.data(), y.data(), static_cast<int>(x.size()));
}

// y = M x
inline Vec matvec(const Mat& m, const Vec& x) {
    assert(static_cast<int>(x.size()) == m.cols);
    Vec y(m.rows, 0.0);
    for (int r = 0; r < m.rows; ++r) y[r] = dot(m.row(r), x.data(), m.cols);
    return y;
}

// y = M^T x
inline Vec matvec_t(const Mat& m, const Vec& x) {
    assert(static_cast<int>(x.size()) == m.rows);
    Vec y(m.cols, 0.0);
    for (int r = 0; r < m.rows; ++r) {
        const double xr = x[r];
        const double* row = m.row(r);
        for (int c = 0; c < m.cols; ++c) y[c] += xr * row[c];
    }
    return y;
}

// M += s * u v^T
inline void add_outer(Mat& m, const Vec& u, const Vec& v, double s = 1.0) {
    assert(static_cast<int>(u.size()) == m.rows && static_cast<int>(v.size()) == m.cols);
    for (int r = 0; r < m.rows; ++r) {
        double* row = m.row(r);
        const double ur = s * u[r];
        for (int c = 0; c < m.cols; ++c) row[c] += ur * v[c];
    }
}

// y += s * x
inline void axpy(Vec& y, const Vec& x, double s = 1.0) {
    assert(y.size() == x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * x[i];
}

inline double l2_norm(const Vec& x) { return std::sqrt(dot(x, x)); }

}  // namespace sim
