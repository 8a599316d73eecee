#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace sesar {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. No views, no expression templates:
// every kernel in this project is a plain loop so that serial and OpenMP
// paths run the identical FP operation order per output element.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    double* row_ptr(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row_ptr(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

    Vec row(int r) const {
        return Vec(row_ptr(r), row_ptr(r) + cols);
    }
    void set_row(int r, const Vec& v) {
        assert(static_cast<int>(v.size()) == cols);
        for (int c = 0; c < cols; ++c) (*this)(r, c) = v[c];
    }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_distance(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double squared_norm(const Vec& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

inline bool all_finite(const std::vector<double>& a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace sesar
