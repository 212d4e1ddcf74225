#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace plmbo {

/// Dense row-major matrix. Plain loops throughout; sizes here are desk scale.
struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // row-major, rows*cols entries

    DenseMatrix() = default;
    DenseMatrix(int r, int c) : rows(r), cols(c), data(check_shape(r, c), 0.0) {}

    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

    double* row_ptr(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
    const double* row_ptr(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }

    static DenseMatrix identity(int n) {
        DenseMatrix m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }

private:
    static std::size_t check_shape(int r, int c) {
        if (r < 0 || c < 0) throw std::invalid_argument("DenseMatrix: negative dimension");
        return static_cast<std::size_t>(r) * static_cast<std::size_t>(c);
    }
};

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions differ");
    DenseMatrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* ai = a.row_ptr(i);
        double* ci = c.row_ptr(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.row_ptr(k);
            for (int j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

/// aᵀ · b without forming the transpose.
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: row counts differ");
    DenseMatrix c(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const double* ak = a.row_ptr(k);
        const double* bk = b.row_ptr(k);
        for (int i = 0; i < a.cols; ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            double* ci = c.row_ptr(i);
            for (int j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

inline double frobenius_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

/// Sparse symmetric matrix stored as upper-triangle coordinate triplets
/// (row <= col, each off-diagonal entry standing for both (i,j) and (j,i)).
/// Entries are sorted by (row, col), unique, and never explicitly zero.
struct SparseSymMatrix {
    struct Entry {
        int row;
        int col;
        double value;
    };

    int n = 0;
    std::vector<Entry> entries;

    SparseSymMatrix() = default;
    explicit SparseSymMatrix(int dim) : n(dim) {
        if (dim < 0) throw std::invalid_argument("SparseSymMatrix: negative dimension");
    }

    /// Build from triplets in any order; (i,j) and (j,i) are normalized to
    /// row <= col. Duplicate coordinates are rejected, exact zeros dropped.
    static SparseSymMatrix from_triplets(int dim, std::vector<Entry> trip) {
        SparseSymMatrix m(dim);
        for (auto& e : trip) {
            if (e.row < 0 || e.row >= dim || e.col < 0 || e.col >= dim)
                throw std::invalid_argument("SparseSymMatrix: index out of range");
            if (e.row > e.col) std::swap(e.row, e.col);
        }
        std::sort(trip.begin(), trip.end(), [](const Entry& a, const Entry& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        for (std::size_t i = 1; i < trip.size(); ++i) {
            if (trip[i].row == trip[i - 1].row && trip[i].col == trip[i - 1].col)
                throw std::invalid_argument("SparseSymMatrix: duplicate entry at (" +
                                            std::to_string(trip[i].row) + "," +
                                            std::to_string(trip[i].col) + ")");
        }
        m.entries.reserve(trip.size());
        for (const auto& e : trip)
            if (e.value != 0.0) m.entries.push_back(e);
        return m;
    }

    static SparseSymMatrix identity(int dim) {
        SparseSymMatrix m(dim);
        m.entries.reserve(dim);
        for (int i = 0; i < dim; ++i) m.entries.push_back({i, i, 1.0});
        return m;
    }

    std::size_t nnz() const { return entries.size(); }

    /// y = M x with a fixed accumulation order (entry order, upper then
    /// mirrored lower within each entry).
    void matvec(const std::vector<double>& x, std::vector<double>& y) const {
        if (static_cast<int>(x.size()) != n)
            throw std::invalid_argument("matvec: vector length " + std::to_string(x.size()) +
                                        " != dimension " + std::to_string(n));
        y.assign(n, 0.0);
        for (const auto& e : entries) {
            y[e.row] += e.value * x[e.col];
            if (e.row != e.col) y[e.col] += e.value * x[e.row];
        }
    }

    std::vector<double> matvec(const std::vector<double>& x) const {
        std::vector<double> y;
        matvec(x, y);
        return y;
    }

    DenseMatrix to_dense() const {
        DenseMatrix d(n, n);
        for (const auto& e : entries) {
            d.at(e.row, e.col) = e.value;
            d.at(e.col, e.row) = e.value;
        }
        return d;
    }

    double frob_norm() const {
        double s = 0.0;
        for (const auto& e : entries) {
            s += e.value * e.value;
            if (e.row != e.col) s += e.value * e.value;
        }
        return std::sqrt(s);
    }
};

}  // namespace plmbo
