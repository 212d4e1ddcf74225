#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "plmbo/matrix.hpp"

namespace plmbo {

/// Extrema of the stored off-diagonal entries of a Laplacian.
struct OffdiagRange {
    double l_min = 0.0;
    double l_max = 0.0;
    double d = 0.0;  // l_max - l_min
};

inline OffdiagRange offdiag_range(const SparseSymMatrix& base) {
    bool found = false;
    OffdiagRange r;
    for (const auto& e : base.entries) {
        if (e.row == e.col) continue;
        if (!found) {
            r.l_min = r.l_max = e.value;
            found = true;
        } else {
            r.l_min = std::min(r.l_min, e.value);
            r.l_max = std::max(r.l_max, e.value);
        }
    }
    if (!found)
        throw std::invalid_argument("offdiag_range: matrix has no off-diagonal entries");
    r.d = r.l_max - r.l_min;
    return r;
}

/// k-th thresholded member: each stored off-diagonal entry is kept as -1 or
/// zeroed by comparing against a level set of the entry range, and the
/// diagonal is rebuilt as the negated row sum (the retained-edge count).
///
/// Default rule: entry zeroed when value <= l_min + (k/l_n)·d — the most
/// negative entries (strongest similarities) drop out first as k grows.
/// Inverted rule (invert = true): zeroed when value >= l_max − (k/l_n)·d,
/// dropping the weakest first. Both directions zero everything at k = l_n
/// and produce edge sets nested in k.
inline SparseSymMatrix persistent_laplacian(const SparseSymMatrix& base, int k, int l_n,
                                            bool invert = false) {
    if (l_n < 2)
        throw std::invalid_argument("persistent_laplacian: l_n must be at least 2 (got " +
                                    std::to_string(l_n) + ")");
    if (k < 1 || k > l_n)
        throw std::invalid_argument("persistent_laplacian: k must be in [1, l_n] (got " +
                                    std::to_string(k) + " with l_n = " + std::to_string(l_n) + ")");
    const OffdiagRange r = offdiag_range(base);
    const double frac = static_cast<double>(k) / static_cast<double>(l_n);
    // At k = l_n the cut sits exactly on the far extremum and must zero every
    // entry; computing it as an offset can land 1 ulp short of the endpoint,
    // so pin it.
    const double cut = k == l_n ? (invert ? r.l_min : r.l_max)
                                : (invert ? r.l_max - frac * r.d : r.l_min + frac * r.d);
    std::vector<SparseSymMatrix::Entry> trip;
    std::vector<double> retained(base.n, 0.0);
    for (const auto& e : base.entries) {
        if (e.row == e.col) continue;
        const bool zeroed = invert ? (e.value >= cut) : (e.value <= cut);
        if (zeroed) continue;
        trip.push_back({e.row, e.col, -1.0});
        retained[e.row] += 1.0;
        retained[e.col] += 1.0;
    }
    for (int i = 0; i < base.n; ++i)
        if (retained[i] != 0.0) trip.push_back({i, i, retained[i]});
    return SparseSymMatrix::from_triplets(base.n, trip);
}

/// The base Laplacian together with its thresholded members, ordered by k.
struct LaplacianFamily {
    SparseSymMatrix base;
    std::vector<SparseSymMatrix> members;  // k = 1, 2, ...
    int l_n = 0;
    OffdiagRange offdiag_stats;
    /// True when the base off-diagonals are all equal (d = 0): every member
    /// is then the zero matrix. Callers should surface this.
    bool degenerate = false;
};

/// Members for k = 1..l_n−1, or through k = l_n when include_last is set.
/// The k = l_n member is always the zero matrix, so it is excluded by
/// default; the flag exists to run the full ladder verbatim.
inline LaplacianFamily build_family(const SparseSymMatrix& base, int l_n, bool include_last = false,
                                    bool invert = false) {
    if (l_n < 2)
        throw std::invalid_argument("build_family: l_n must be at least 2 (got " +
                                    std::to_string(l_n) + ")");
    LaplacianFamily fam;
    fam.base = base;
    fam.l_n = l_n;
    fam.offdiag_stats = offdiag_range(base);
    fam.degenerate = fam.offdiag_stats.d == 0.0;
    const int k_max = include_last ? l_n : l_n - 1;
    fam.members.reserve(k_max);
    for (int k = 1; k <= k_max; ++k)
        fam.members.push_back(persistent_laplacian(base, k, l_n, invert));
    return fam;
}

}  // namespace plmbo
