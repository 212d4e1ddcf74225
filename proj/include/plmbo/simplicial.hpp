#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "plmbo/eigensolver.hpp"
#include "plmbo/matrix.hpp"

namespace plmbo {

/// Simplex of dimension 0..2: `dim + 1` leading entries of `v` are the
/// vertex ids in ascending order; unused slots hold -1.
struct Simplex {
    std::array<int, 3> v{-1, -1, -1};
    int dim = 0;
    double birth = 0.0;
};

/// Vietoris-Rips complex truncated at dimension 2, with one birth radius per
/// simplex. Simplices are sorted by (birth, dimension, vertex tuple), so any
/// radius prefix of the list is a valid subcomplex.
struct Filtration {
    DenseMatrix points;  // M x dim coordinates
    std::vector<Simplex> simplices;

    /// All q-simplices born at or before `radius`, in filtration order.
    std::vector<Simplex> complex_at(int q, double radius) const {
        std::vector<Simplex> out;
        for (const Simplex& s : simplices)
            if (s.dim == q && s.birth <= radius) out.push_back(s);
        return out;
    }
};

namespace detail {

inline double point_dist(const DenseMatrix& pts, int a, int b) {
    double s = 0.0;
    for (int c = 0; c < pts.cols; ++c) {
        const double d = pts.at(a, c) - pts.at(b, c);
        s += d * d;
    }
    return std::sqrt(s);
}

inline bool simplex_order(const Simplex& a, const Simplex& b) {
    if (a.birth != b.birth) return a.birth < b.birth;
    if (a.dim != b.dim) return a.dim < b.dim;
    return a.v < b.v;
}

}  // namespace detail

/// Rips rule with closed inclusion: vertices are born at 0, an edge at its
/// endpoint distance, a triangle when its last edge appears (max of the
/// three edge births); anything born after max_radius is omitted.
inline Filtration rips_filtration(const DenseMatrix& points, double max_radius) {
    if (points.rows < 1) throw std::invalid_argument("rips_filtration: need at least 1 point");
    if (max_radius < 0.0) throw std::invalid_argument("rips_filtration: max_radius must be >= 0");
    const int m = points.rows;
    Filtration f;
    f.points = points;

    for (int i = 0; i < m; ++i) {
        Simplex s;
        s.v = {i, -1, -1};
        s.dim = 0;
        s.birth = 0.0;
        f.simplices.push_back(s);
    }

    // Edge births, kept in a lookup for the triangle pass.
    std::map<std::pair<int, int>, double> edge_birth;
    std::vector<std::vector<int>> adjacency(m);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) {
            const double d = detail::point_dist(points, i, j);
            if (d > max_radius) continue;
            edge_birth[{i, j}] = d;
            adjacency[i].push_back(j);
            Simplex s;
            s.v = {i, j, -1};
            s.dim = 1;
            s.birth = d;
            f.simplices.push_back(s);
        }

    for (int i = 0; i < m; ++i)
        for (std::size_t a = 0; a < adjacency[i].size(); ++a)
            for (std::size_t b = a + 1; b < adjacency[i].size(); ++b) {
                const int j = adjacency[i][a], k = adjacency[i][b];
                const auto jk = edge_birth.find({j, k});
                if (jk == edge_birth.end()) continue;
                const double birth = std::max({edge_birth[{i, j}], edge_birth[{i, k}], jk->second});
                if (birth > max_radius) continue;
                Simplex s;
                s.v = {i, j, k};
                s.dim = 2;
                s.birth = birth;
                f.simplices.push_back(s);
            }

    std::sort(f.simplices.begin(), f.simplices.end(), detail::simplex_order);
    return f;
}

/// Oriented boundary map from q-simplices to (q-1)-simplices, both restricted
/// to births <= radius. Column for (v_0 < ... < v_q) holds (-1)^i at the face
/// omitting v_i. Entries are exact small integers stored as doubles.
struct BoundaryMatrix {
    std::vector<Simplex> rows;  // (q-1)-simplices
    std::vector<Simplex> cols;  // q-simplices
    DenseMatrix entries;
};

inline BoundaryMatrix boundary_matrix(const Filtration& f, int q, double radius) {
    if (q != 1 && q != 2)
        throw std::invalid_argument("boundary_matrix: q must be 1 or 2 (got " + std::to_string(q) +
                                    ")");
    BoundaryMatrix b;
    b.rows = f.complex_at(q - 1, radius);
    b.cols = f.complex_at(q, radius);
    std::map<std::array<int, 3>, int> row_index;
    for (int r = 0; r < static_cast<int>(b.rows.size()); ++r) row_index[b.rows[r].v] = r;

    b.entries = DenseMatrix(static_cast<int>(b.rows.size()), static_cast<int>(b.cols.size()));
    for (int c = 0; c < static_cast<int>(b.cols.size()); ++c) {
        const Simplex& s = b.cols[c];
        double sign = 1.0;
        for (int omit = 0; omit <= s.dim; ++omit) {
            std::array<int, 3> face{-1, -1, -1};
            int t = 0;
            for (int idx = 0; idx <= s.dim; ++idx)
                if (idx != omit) face[t++] = s.v[idx];
            const auto it = row_index.find(face);
            if (it == row_index.end())
                throw std::logic_error("boundary_matrix: face missing from complex (closure violated)");
            b.entries.at(it->second, c) = sign;
            sign = -sign;
        }
    }
    return b;
}

/// L_q at radius pair (r_t, r_tp >= r_t): the up-term uses only those
/// (q+1)-chains of the later complex whose boundary stays inside the earlier
/// one, realized by an orthonormal kernel basis of the boundary rows indexed
/// by q-simplices born after r_t; the down-term is the ordinary one of the
/// earlier complex. Size = number of q-simplices at r_t. With r_t == r_tp
/// this is the ordinary q-combinatorial Laplacian.
inline DenseMatrix persistent_laplacian_q(const Filtration& f, int q, double r_t, double r_tp) {
    if (q != 0 && q != 1)
        throw std::invalid_argument("persistent_laplacian_q: q must be 0 or 1 (got " +
                                    std::to_string(q) + ")");
    if (r_t > r_tp)
        throw std::invalid_argument("persistent_laplacian_q: requires r_t <= r_tp");

    const std::vector<Simplex> old_q = f.complex_at(q, r_t);
    const int n_old = static_cast<int>(old_q.size());
    DenseMatrix lap(n_old, n_old);
    if (n_old == 0) return lap;

    // Up-term from the later complex's (q+1)-boundary.
    const BoundaryMatrix up = boundary_matrix(f, q + 1, r_tp);
    const int m = static_cast<int>(up.cols.size());
    if (m > 0) {
        // Split boundary rows into those of the earlier complex and the rest.
        std::map<std::array<int, 3>, int> old_index;
        for (int r = 0; r < n_old; ++r) old_index[old_q[r].v] = r;
        std::vector<int> new_rows;
        DenseMatrix r_old(n_old, m);
        for (int r = 0; r < static_cast<int>(up.rows.size()); ++r) {
            const auto it = old_index.find(up.rows[r].v);
            if (it == old_index.end()) {
                new_rows.push_back(r);
            } else {
                for (int c = 0; c < m; ++c) r_old.at(it->second, c) = up.entries.at(r, c);
            }
        }

        DenseMatrix b_pers;  // n_old x (kernel dimension)
        if (new_rows.empty()) {
            b_pers = r_old;
        } else {
            // Kernel of the new-row block via the eigenvectors of its Gram
            // matrix; the orthonormal basis keeps the spectrum independent of
            // the basis choice.
            DenseMatrix r_new(static_cast<int>(new_rows.size()), m);
            for (int t = 0; t < static_cast<int>(new_rows.size()); ++t)
                for (int c = 0; c < m; ++c) r_new.at(t, c) = up.entries.at(new_rows[t], c);
            const DenseMatrix gram = matmul_tn(r_new, r_new);
            const EigenBasis eig = dense_eig(gram);
            const double lmax = eig.values.empty() ? 0.0 : eig.values.back();
            const double tol = 1e-10 * std::max(1.0, lmax);
            int kernel_dim = 0;
            while (kernel_dim < m && eig.values[kernel_dim] < tol) ++kernel_dim;
            DenseMatrix z(m, kernel_dim);
            for (int c = 0; c < kernel_dim; ++c)
                for (int r = 0; r < m; ++r) z.at(r, c) = eig.vectors.at(r, c);
            b_pers = matmul(r_old, z);
        }
        if (b_pers.cols > 0) {
            const DenseMatrix up_term = matmul(b_pers, transpose(b_pers));
            for (int i = 0; i < n_old; ++i)
                for (int j = 0; j < n_old; ++j) lap.at(i, j) += up_term.at(i, j);
        }
    }

    // Down-term of the earlier complex; empty for q = 0 (vertices have no
    // boundary).
    if (q >= 1) {
        const BoundaryMatrix down = boundary_matrix(f, q, r_t);
        if (down.entries.rows > 0 && down.entries.cols > 0) {
            const DenseMatrix down_term = matmul_tn(down.entries, down.entries);
            for (int i = 0; i < n_old; ++i)
                for (int j = 0; j < n_old; ++j) lap.at(i, j) += down_term.at(i, j);
        }
    }
    return lap;
}

/// Eigen-summary of one persistent Laplacian: harmonic count (zero
/// eigenvalues at relative tolerance) and the first non-harmonic eigenvalue
/// when one exists.
struct PersistentSpectrum {
    int q = 0;
    double r_t = 0.0, r_tp = 0.0;
    std::vector<double> eigenvalues;  // ascending
    int betti = 0;
    std::optional<double> lambda_min_nonzero;
};

inline PersistentSpectrum persistent_spectrum(const Filtration& f, int q, double r_t, double r_tp) {
    PersistentSpectrum out;
    out.q = q;
    out.r_t = r_t;
    out.r_tp = r_tp;
    const DenseMatrix lap = persistent_laplacian_q(f, q, r_t, r_tp);
    if (lap.rows == 0) return out;
    const EigenBasis eig = dense_eig(lap);
    out.eigenvalues = eig.values;
    const double lmax = eig.values.back();
    const double tol = 1e-8 * std::max(1.0, lmax);
    for (double v : out.eigenvalues) {
        if (v < tol) {
            ++out.betti;
        } else if (!out.lambda_min_nonzero) {
            out.lambda_min_nonzero = v;
        }
    }
    return out;
}

/// Per-radius spectra along the filtration (p = 0 throughout): for each grid
/// radius and each q up to q_max, the Betti number and the first nonzero
/// eigenvalue. One filtration is built at the final radius and shared.
inline std::vector<std::vector<PersistentSpectrum>> spectra_curves(const DenseMatrix& points,
                                                                   const std::vector<double>& radius_grid,
                                                                   int q_max = 1) {
    if (radius_grid.empty()) throw std::invalid_argument("spectra_curves: empty radius grid");
    if (!std::is_sorted(radius_grid.begin(), radius_grid.end()))
        throw std::invalid_argument("spectra_curves: radius grid must be ascending");
    if (q_max < 0 || q_max > 1)
        throw std::invalid_argument("spectra_curves: q_max must be 0 or 1");
    const Filtration f = rips_filtration(points, radius_grid.back());
    std::vector<std::vector<PersistentSpectrum>> out(q_max + 1);
    for (int q = 0; q <= q_max; ++q) {
        out[q].reserve(radius_grid.size());
        for (double r : radius_grid) out[q].push_back(persistent_spectrum(f, q, r, r));
    }
    return out;
}

}  // namespace plmbo
