#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace krplev {

// Dense row-major matrix of doubles. All library routines treat entries as
// finite; validation happens at module boundaries.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Matrix ones(std::size_t r, std::size_t c) { return Matrix(r, c, 1.0); }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    bool empty() const { return rows == 0 || cols == 0; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data) m = std::max(m, std::abs(v));
        return m;
    }
};

// Sparse matrix as a coordinate list, entries sorted row-major.
struct SparseMatrixCoo {
    struct Entry {
        std::uint32_t row;
        std::uint32_t col;
        double value;
    };

    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Entry> entries;

    std::size_t nnz() const { return entries.size(); }

    bool sorted_row_major() const {
        for (std::size_t k = 1; k < entries.size(); ++k) {
            const Entry& a = entries[k - 1];
            const Entry& b = entries[k];
            if (a.row > b.row || (a.row == b.row && a.col >= b.col)) return false;
        }
        return true;
    }

    Matrix densify() const {
        Matrix m(rows, cols);
        for (const Entry& e : entries) m(e.row, e.col) = e.value;
        return m;
    }
};

// Result of a symmetric PSD eigendecomposition G = V diag(values) V^T.
// Eigenvalues are nonnegative (tiny negatives clamped) and sorted descending;
// vectors holds the eigenvectors as columns.
struct EigenPair {
    Matrix vectors;
    std::vector<double> values;
};

}  // namespace krplev
