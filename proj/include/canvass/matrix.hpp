#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <vector>

namespace canvass {

/// Dense row-major matrix of doubles. Sized for the small dense blocks this
/// project needs (weights, hidden activations, logits); adjacency stays
/// sparse elsewhere.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, 0.0) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return a_.empty(); }

    double& at(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    double at(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

    double* row(int i) { return a_.data() + static_cast<size_t>(i) * cols_; }
    const double* row(int i) const { return a_.data() + static_cast<size_t>(i) * cols_; }

    double* data() { return a_.data(); }
    const double* data() const { return a_.data(); }

    void fill(double v) { std::fill(a_.begin(), a_.end(), v); }

    /// Reuse storage when the shape matches, otherwise reallocate. Contents
    /// are zeroed either way.
    void reset(int rows, int cols) {
        if (rows == rows_ && cols == cols_) {
            fill(0.0);
        } else {
            rows_ = rows;
            cols_ = cols;
            a_.assign(static_cast<size_t>(rows) * cols, 0.0);
        }
    }

    /// this (r x k) times other (k x c) -> (r x c)
    Matrix matmul(const Matrix& other) const {
        assert(cols_ == other.rows_);
        Matrix out(rows_, other.cols_);
        for (int i = 0; i < rows_; ++i) {
            const double* lhs = row(i);
            double* dst = out.row(i);
            for (int k = 0; k < cols_; ++k) {
                const double v = lhs[k];
                if (v == 0.0) continue;
                const double* rhs = other.row(k);
                for (int j = 0; j < other.cols_; ++j) dst[j] += v * rhs[j];
            }
        }
        return out;
    }

    bool operator==(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_ && a_ == o.a_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> a_;
};

inline double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace canvass
