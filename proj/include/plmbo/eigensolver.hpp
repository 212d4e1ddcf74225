#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "plmbo/matrix.hpp"
#include "plmbo/rng.hpp"

namespace plmbo {

/// Eigenvalues ascending; `vectors` holds the matching unit eigenvectors as
/// columns (one column per value).
struct EigenBasis {
    std::vector<double> values;
    DenseMatrix vectors;
};

/// Thrown when the iterative solver cannot push every requested pair below
/// the residual tolerance. Carries the best residual reached.
class EigenSolveError : public std::runtime_error {
public:
    EigenSolveError(const std::string& what, double residual)
        : std::runtime_error(what), best_residual(residual) {}
    double best_residual;
};

namespace detail {

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// On return `a` carries the accumulated orthogonal transform Q (full matrix),
/// `d` the diagonal and `e` the subdiagonal (e[i] between rows i and i+1).
inline void tridiagonalize(DenseMatrix& a, std::vector<double>& d, std::vector<double>& e) {
    const int n = a.rows;
    d.assign(n, 0.0);
    e.assign(n, 0.0);
    DenseMatrix q = DenseMatrix::identity(n);
    std::vector<double> u(n), p(n);

    for (int k = 0; k + 2 < n; ++k) {
        // Householder vector zeroing column k below row k+1.
        double scale = 0.0;
        for (int i = k + 1; i < n; ++i) scale += std::abs(a.at(i, k));
        if (scale == 0.0) continue;
        double norm2 = 0.0;
        for (int i = k + 1; i < n; ++i) {
            u[i] = a.at(i, k) / scale;
            norm2 += u[i] * u[i];
        }
        double alpha = std::sqrt(norm2);
        if (u[k + 1] > 0.0) alpha = -alpha;
        u[k + 1] -= alpha;
        double vn2 = 0.0;
        for (int i = k + 1; i < n; ++i) vn2 += u[i] * u[i];
        if (vn2 == 0.0) continue;
        const double beta = 2.0 / vn2;

        // p = beta * A u over the active trailing block (rows >= k).
        for (int i = k; i < n; ++i) {
            double s = 0.0;
            for (int j = k + 1; j < n; ++j) s += a.at(i, j) * u[j];
            p[i] = beta * s;
        }
        double upk = 0.0;
        for (int i = k + 1; i < n; ++i) upk += u[i] * p[i];
        const double kk = 0.5 * beta * upk;
        for (int i = k + 1; i < n; ++i) p[i] -= kk * u[i];
        // A <- A - q uᵀ - u qᵀ restricted to rows/cols >= k.
        // Row k only interacts through column k (u has no k component).
        for (int j = k + 1; j < n; ++j) a.at(k, j) -= p[k] * u[j];
        for (int i = k + 1; i < n; ++i) a.at(i, k) = a.at(k, i);
        for (int i = k + 1; i < n; ++i) {
            const double ui = u[i];
            const double pi = p[i];
            for (int j = k + 1; j < n; ++j) a.at(i, j) -= pi * u[j] + ui * p[j];
        }
        // Q <- Q (I - beta u uᵀ).
        for (int r = 0; r < n; ++r) {
            double s = 0.0;
            double* qr = q.row_ptr(r);
            for (int j = k + 1; j < n; ++j) s += qr[j] * u[j];
            s *= beta;
            for (int j = k + 1; j < n; ++j) qr[j] -= s * u[j];
        }
    }
    for (int i = 0; i < n; ++i) d[i] = a.at(i, i);
    for (int i = 0; i + 1 < n; ++i) e[i] = a.at(i + 1, i);
    a = std::move(q);
}

/// Implicit-shift QL iteration on a tridiagonal matrix (d diagonal, e
/// subdiagonal with e[i] coupling i and i+1). Eigenvectors accumulate into
/// the columns of z, which must enter holding the tridiagonalizing transform.
inline void tql_implicit(std::vector<double>& d, std::vector<double>& e, DenseMatrix& z) {
    const int n = static_cast<int>(d.size());
    if (n == 0) return;
    e.resize(n);
    e[n - 1] = 0.0;
    const double eps = std::numeric_limits<double>::epsilon();

    // Deflation needs an absolute floor as well as the local relative test:
    // long runs of entries that are tiny compared with the matrix norm (but
    // comparable with each other) otherwise never split, and the sweep cap is
    // hit. Dropping a subdiagonal at eps * anorm perturbs eigenvalues by at
    // most that amount, which is roundoff at the scale of the input.
    double anorm = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = std::abs(d[i]) + std::abs(e[i]);
        if (i > 0) row += std::abs(e[i - 1]);
        anorm = std::max(anorm, row);
    }
    const double floor = eps * anorm;

    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= eps * dd || std::abs(e[m]) <= floor) break;
            }
            if (m != l) {
                if (iter++ == 60)
                    throw std::runtime_error("tql_implicit: no convergence after 60 sweeps");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                int i;
                for (i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (int k = 0; k < n; ++k) {
                        f = z.at(k, i + 1);
                        z.at(k, i + 1) = s * z.at(k, i) + c * f;
                        z.at(k, i) = c * z.at(k, i) - s * f;
                    }
                }
                if (r == 0.0 && i >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

}  // namespace detail

/// Full symmetric eigendecomposition: eigenvalues ascending with orthonormal
/// eigenvector columns. Householder tridiagonalization followed by
/// implicit-shift QL. Intended envelope is a few hundred rows.
inline EigenBasis dense_eig(const DenseMatrix& m) {
    if (m.rows != m.cols) throw std::invalid_argument("dense_eig: matrix not square");
    const int n = m.rows;
    EigenBasis out;
    if (n == 0) {
        out.vectors = DenseMatrix(0, 0);
        return out;
    }

    // Work on the symmetrized copy; inputs are symmetric by contract and this
    // stays exact for them.
    DenseMatrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a.at(i, j) = 0.5 * (m.at(i, j) + m.at(j, i));

    std::vector<double> d, e;
    detail::tridiagonalize(a, d, e);
    detail::tql_implicit(d, e, a);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) { return d[x] < d[y]; });

    out.values.resize(n);
    out.vectors = DenseMatrix(n, n);
    for (int j = 0; j < n; ++j) {
        out.values[j] = d[order[j]];
        for (int i = 0; i < n; ++i) out.vectors.at(i, j) = a.at(i, order[j]);
    }
    return out;
}

/// Count of eigenvalues below the zero threshold. With zero_tol <= 0 the
/// threshold defaults to 1e-8 * max(1, largest eigenvalue), which keeps
/// component/Betti counts integer-stable under floating-point noise.
inline int nullity(const DenseMatrix& m, double zero_tol = 0.0) {
    const EigenBasis eig = dense_eig(m);
    if (eig.values.empty()) return 0;
    const double lmax = eig.values.back();
    const double tol = zero_tol > 0.0 ? zero_tol : 1e-8 * std::max(1.0, lmax);
    int count = 0;
    for (double v : eig.values)
        if (v < tol) ++count;
    return count;
}

namespace detail {

/// Orthonormal-basis workspace for the restarted Lanczos solver. Columns of V
/// are the basis, W caches M·V column by column, and H = Vᵀ M V is kept
/// explicitly so restarts and random injections stay consistent.
struct LanczosWorkspace {
    int n = 0;
    std::vector<std::vector<double>> v;  // basis vectors
    std::vector<std::vector<double>> w;  // w[i] = M v[i]
    DenseMatrix h;                       // projected operator, size x size

    int size() const { return static_cast<int>(v.size()); }

    void clear() {
        v.clear();
        w.clear();
        h = DenseMatrix(0, 0);
    }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

/// Two-pass Gram-Schmidt of x against every basis column. Returns the
/// remaining norm.
inline double orthogonalize(const LanczosWorkspace& ws, std::vector<double>& x) {
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& col : ws.v) {
            const double c = dot(col, x);
            for (int i = 0; i < ws.n; ++i) x[i] -= c * col[i];
        }
    }
    return norm2(x);
}

/// Append a unit vector to the workspace, computing its image under M and the
/// new row/column of H.
inline void append_basis_vector(const SparseSymMatrix& m, LanczosWorkspace& ws,
                                std::vector<double> x) {
    std::vector<double> mx;
    m.matvec(x, mx);
    const int old = ws.size();
    DenseMatrix h(old + 1, old + 1);
    for (int i = 0; i < old; ++i)
        for (int j = 0; j < old; ++j) h.at(i, j) = ws.h.at(i, j);
    for (int i = 0; i < old; ++i) {
        const double hij = dot(ws.v[i], mx);
        h.at(i, old) = hij;
        h.at(old, i) = hij;
    }
    h.at(old, old) = dot(x, mx);
    ws.h = std::move(h);
    ws.v.push_back(std::move(x));
    ws.w.push_back(std::move(mx));
}

inline std::vector<double> random_unit_vector(int n, Rng& rng) {
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.normal();
    const double nn = norm2(x);
    if (nn > 0.0)
        for (double& xi : x) xi /= nn;
    return x;
}

/// Reverse Cuthill-McKee ordering of the matrix pattern. Per connected
/// component a breadth-first sweep starts from a minimum-degree vertex and
/// visits neighbors in (degree, index) order; the concatenated visit order is
/// reversed. Deterministic, and cheap next to any factorization that uses it.
inline std::vector<int> rcm_order(const SparseSymMatrix& m) {
    const int n = m.n;
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : m.entries) {
        if (e.row == e.col) continue;
        adj[e.row].push_back(e.col);
        adj[e.col].push_back(e.row);
    }
    auto degree_less = [&adj](int a, int b) {
        const std::size_t da = adj[a].size(), db = adj[b].size();
        return da != db ? da < db : a < b;
    };
    for (auto& nb : adj) std::sort(nb.begin(), nb.end(), degree_less);
    std::vector<int> starts(n);
    std::iota(starts.begin(), starts.end(), 0);
    std::sort(starts.begin(), starts.end(), degree_less);

    std::vector<int> order;
    order.reserve(n);
    std::vector<char> seen(n, 0);
    std::vector<int> queue;
    for (int s : starts) {
        if (seen[s]) continue;
        seen[s] = 1;
        queue.clear();
        queue.push_back(s);
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const int u = queue[head];
            order.push_back(u);
            for (int w : adj[u]) {
                if (!seen[w]) {
                    seen[w] = 1;
                    queue.push_back(w);
                }
            }
        }
    }
    std::reverse(order.begin(), order.end());
    return order;
}

/// Banded Cholesky factorization of M + shift·I under a bandwidth-reducing
/// permutation. Only the lower band is stored, so the factorization costs
/// O(n·h²) and each solve O(n·h) for half-bandwidth h. build() reports
/// failure (band too large for the storage budget, or a non-positive pivot)
/// instead of throwing so callers can fall back to another method.
class BandCholesky {
public:
    bool build(const SparseSymMatrix& m, double shift, std::size_t max_stored) {
        n_ = m.n;
        perm_ = rcm_order(m);
        inv_.assign(n_, 0);
        for (int k = 0; k < n_; ++k) inv_[perm_[k]] = k;
        half_band_ = 0;
        for (const auto& e : m.entries)
            if (e.row != e.col)
                half_band_ = std::max(half_band_, std::abs(inv_[e.row] - inv_[e.col]));
        const std::size_t stored =
            static_cast<std::size_t>(n_) * (static_cast<std::size_t>(half_band_) + 1);
        if (stored > max_stored) return false;
        band_.assign(stored, 0.0);
        for (int i = 0; i < n_; ++i) at(i, i) = shift;
        for (const auto& e : m.entries) {
            int i = inv_[e.row], j = inv_[e.col];
            if (i < j) std::swap(i, j);
            at(i, j) += e.value;
        }
        for (int i = 0; i < n_; ++i) {
            const int j0 = std::max(0, i - half_band_);
            for (int j = j0; j <= i; ++j) {
                double s = at(i, j);
                for (int k = j0; k < j; ++k) s -= at(i, k) * at(j, k);
                if (j < i) {
                    at(i, j) = s / at(j, j);
                } else {
                    if (!(s > 0.0) || !std::isfinite(s)) return false;
                    at(i, i) = std::sqrt(s);
                }
            }
        }
        return true;
    }

    /// x ← (M + shift·I)⁻¹ b via the permuted factor.
    void solve(const std::vector<double>& b, std::vector<double>& x) const {
        std::vector<double> y(n_);
        for (int i = 0; i < n_; ++i) {
            double s = b[perm_[i]];
            const int k0 = std::max(0, i - half_band_);
            for (int k = k0; k < i; ++k) s -= at(i, k) * y[k];
            y[i] = s / at(i, i);
        }
        for (int i = n_ - 1; i >= 0; --i) {
            double s = y[i];
            const int kmax = std::min(n_ - 1, i + half_band_);
            for (int k = i + 1; k <= kmax; ++k) s -= at(k, i) * y[k];
            y[i] = s / at(i, i);
        }
        x.assign(n_, 0.0);
        for (int i = 0; i < n_; ++i) x[perm_[i]] = y[i];
    }

private:
    double& at(int i, int j) {
        return band_[static_cast<std::size_t>(i) * (half_band_ + 1) + (j - i + half_band_)];
    }
    double at(int i, int j) const {
        return band_[static_cast<std::size_t>(i) * (half_band_ + 1) + (j - i + half_band_)];
    }

    int n_ = 0;
    int half_band_ = 0;
    std::vector<int> perm_;  // perm_[position] = original index
    std::vector<int> inv_;   // inv_[original index] = position
    std::vector<double> band_;
};

/// Restarted-Lanczos fallback used when the banded factorization behind the
/// shift-invert path is unavailable (band over the storage budget, or the
/// shifted matrix failing the positivity check). Full reorthogonalization;
/// when the basis reaches its cap it is thick-restarted onto the leading Ritz
/// vectors with the chain vector carried across the restart, and one random
/// probe per cycle keeps repeated eigenvalues discoverable. Same contract as
/// smallest_eigenpairs.
inline EigenBasis smallest_eigenpairs_restarted(const SparseSymMatrix& m, int n_e, double tol) {
    const int n = m.n;
    if (n_e < 1 || n_e > n)
        throw std::invalid_argument("smallest_eigenpairs: n_e must be in [1, n]");

    // Degenerate full-spectrum request, and tiny problems: dense route.
    if (n_e == n || n <= 24) {
        EigenBasis full = dense_eig(m.to_dense());
        EigenBasis out;
        out.values.assign(full.values.begin(), full.values.begin() + n_e);
        out.vectors = DenseMatrix(n, n_e);
        for (int j = 0; j < n_e; ++j)
            for (int i = 0; i < n; ++i) out.vectors.at(i, j) = full.vectors.at(i, j);
        return out;
    }

    const double scale = std::max(1.0, m.frob_norm());
    const double resid_tol = tol * scale;
    const double drift_tol = std::max(resid_tol, 1e-13 * scale);
    // Basis cap and retained-subspace size. Keeping about half the basis and
    // growing the cap when progress stalls handles clustered spectra, where a
    // lean restart discards partially converged directions faster than the
    // chain rebuilds them. Growth is capped at n, where Rayleigh-Ritz on the
    // full space is exact.
    int cap = std::min(n, std::max(3 * n_e + 16, 48));
    auto keep_for = [n_e](int c) { return std::min(std::max(n_e + 8, c / 2), c - 8); };
    int keep = keep_for(cap);
    const int max_cycles = 120;

    Rng rng(derive_seed(0x51a7c3e5u, static_cast<std::uint64_t>(n)));
    detail::LanczosWorkspace ws;
    ws.n = n;

    auto inject = [&](int attempts) -> bool {
        for (int t = 0; t < attempts; ++t) {
            std::vector<double> x = detail::random_unit_vector(n, rng);
            const double rem = detail::orthogonalize(ws, x);
            if (rem > 1e-8) {
                for (double& xi : x) xi /= rem;
                detail::append_basis_vector(m, ws, std::move(x));
                return true;
            }
        }
        return false;
    };

    inject(4);

    double best_resid = std::numeric_limits<double>::infinity();
    double prev_worst = std::numeric_limits<double>::infinity();
    int slow_cycles = 0;
    std::vector<double> prev_theta;
    bool had_converged_round = false;

    for (int cycle = 0; cycle < max_cycles; ++cycle) {
        // Expand by the Lanczos recurrence (with full reorthogonalization the
        // recurrence direction is simply M v_last orthogonalized against V).
        while (ws.size() < cap) {
            std::vector<double> x = ws.w.back();
            const double rem = detail::orthogonalize(ws, x);
            if (rem <= 1e-10 * std::max(1.0, detail::norm2(ws.w.back()))) {
                if (!inject(4)) break;  // basis spans an invariant subspace (or all of R^n)
            } else {
                for (double& xi : x) xi /= rem;
                detail::append_basis_vector(m, ws, std::move(x));
            }
        }

        // Rayleigh-Ritz on the explicit projection.
        const int s = ws.size();
        EigenBasis small = dense_eig(ws.h);
        const int want = std::min(n_e, s);

        // Ritz vectors R = V Y and images M R = W Y for the leading pairs.
        const int lead = std::min(s, std::max(keep, want));
        DenseMatrix ritz(n, lead), mritz(n, lead);
        for (int j = 0; j < lead; ++j) {
            for (int i = 0; i < n; ++i) {
                double acc_v = 0.0, acc_w = 0.0;
                for (int t = 0; t < s; ++t) {
                    const double y = small.vectors.at(t, j);
                    acc_v += ws.v[t][i] * y;
                    acc_w += ws.w[t][i] * y;
                }
                ritz.at(i, j) = acc_v;
                mritz.at(i, j) = acc_w;
            }
        }

        double worst = 0.0;
        for (int j = 0; j < want; ++j) {
            double r2 = 0.0;
            const double theta = small.values[j];
            for (int i = 0; i < n; ++i) {
                const double r = mritz.at(i, j) - theta * ritz.at(i, j);
                r2 += r * r;
            }
            worst = std::max(worst, std::sqrt(r2));
        }
        best_resid = std::min(best_resid, worst);

        // Grow the basis when residuals shrink too slowly: clustered spectra
        // need a larger subspace, and each bump raises the attainable
        // per-cycle contraction.
        if (cycle > 0 && worst > 0.5 * prev_worst && worst > resid_tol) {
            if (++slow_cycles >= 2 && cap < n) {
                cap = std::min(n, cap + cap / 2);
                keep = keep_for(cap);
                slow_cycles = 0;
            }
        } else {
            slow_cycles = 0;
        }
        prev_worst = worst;

        const bool full_space = (s >= n);
        bool stable = false;
        if (worst <= resid_tol && want == n_e) {
            if (had_converged_round && static_cast<int>(prev_theta.size()) == n_e) {
                stable = true;
                for (int j = 0; j < n_e; ++j)
                    if (std::abs(small.values[j] - prev_theta[j]) > drift_tol) stable = false;
            }
            prev_theta.assign(small.values.begin(), small.values.begin() + n_e);
            had_converged_round = true;
            if (stable || full_space) {
                EigenBasis out;
                out.values = std::move(prev_theta);
                out.vectors = DenseMatrix(n, n_e);
                for (int j = 0; j < n_e; ++j)
                    for (int i = 0; i < n; ++i) out.vectors.at(i, j) = ritz.at(i, j);
                return out;
            }
        } else {
            had_converged_round = false;
            prev_theta.clear();
        }

        if (full_space && want == n_e) {
            // Whole space spanned yet residuals above tol: tolerance is
            // unreachable for this matrix.
            break;
        }

        // Thick restart. The chain's next direction is computed from the full
        // old basis before compression so the Lanczos recurrence continues
        // through the restart instead of starting cold.
        std::vector<double> chain = ws.w.back();
        const double chain_rem = detail::orthogonalize(ws, chain);
        bool have_chain = chain_rem > 1e-10 * std::max(1.0, detail::norm2(ws.w.back()));
        if (have_chain)
            for (double& ci : chain) ci /= chain_rem;

        // Compress onto the leading Ritz vectors. They are re-orthonormalized
        // and their images recomputed with fresh matvecs so orthogonality and
        // H == VᵀMV cannot drift across restarts (held Ritz vectors are not
        // exact eigenvectors, and cached images accumulate roundoff).
        const int hold = std::min(lead, keep);
        detail::LanczosWorkspace next;
        next.n = n;
        for (int j = 0; j < hold; ++j) {
            std::vector<double> col(n);
            for (int i = 0; i < n; ++i) col[i] = ritz.at(i, j);
            const double rem = detail::orthogonalize(next, col);
            if (rem <= 1e-12) continue;
            for (double& ci : col) ci /= rem;
            detail::append_basis_vector(m, next, std::move(col));
        }
        ws = std::move(next);

        // One random probe per cycle keeps eigenvalue multiplicities
        // discoverable; appended before the chain vector so the recurrence
        // resumes from the chain.
        inject(1);
        if (have_chain) {
            const double rem = detail::orthogonalize(ws, chain);
            if (rem > 1e-12) {
                for (double& ci : chain) ci /= rem;
                detail::append_basis_vector(m, ws, std::move(chain));
            } else {
                have_chain = false;
            }
        }
        if (!have_chain && ws.v.empty()) inject(4);
    }

    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "smallest_eigenpairs: residual tolerance not reached (best residual %.3e, "
                  "tolerance %.3e)",
                  best_resid, resid_tol);
    throw EigenSolveError(msg, best_resid);
}

}  // namespace detail

/// Smallest n_e eigenpairs of a sparse symmetric (PSD up to roundoff) matrix.
///
/// The matrix is shifted positive definite, reordered by reverse
/// Cuthill-McKee, and factored by a banded Cholesky; a block Krylov iteration
/// on the inverse then surfaces the smallest eigenvalues as the dominant ones.
/// That keeps the iteration count flat even when the bottom of the spectrum is
/// tightly clustered, as on near-one-dimensional neighborhood graphs where
/// plain Lanczos needs a basis proportional to the cluster's inverse spread.
/// Ritz values are re-measured as Rayleigh quotients of the original matrix,
/// and a solve is accepted only when every requested residual passes tolerance
/// on two consecutive checks with the values agreeing to drift tolerance.
/// When the factorization is unavailable the solver falls back to restarted
/// Lanczos with full reorthogonalization. Residual contract per returned pair
/// x, λ: ‖Mx − λx‖₂ ≤ tol·max(1, ‖M‖_F). Throws EigenSolveError on
/// non-convergence, carrying the best residual reached.
inline EigenBasis smallest_eigenpairs(const SparseSymMatrix& m, int n_e, double tol = 1e-10) {
    const int n = m.n;
    if (n_e < 1 || n_e > n)
        throw std::invalid_argument("smallest_eigenpairs: n_e must be in [1, n]");

    // Degenerate full-spectrum request, and tiny problems: dense route.
    if (n_e == n || n <= 24) {
        EigenBasis full = dense_eig(m.to_dense());
        EigenBasis out;
        out.values.assign(full.values.begin(), full.values.begin() + n_e);
        out.vectors = DenseMatrix(n, n_e);
        for (int j = 0; j < n_e; ++j)
            for (int i = 0; i < n; ++i) out.vectors.at(i, j) = full.vectors.at(i, j);
        return out;
    }

    const double scale = std::max(1.0, m.frob_norm());
    const double resid_tol = tol * scale;
    const double drift_tol = std::max(resid_tol, 1e-13 * scale);

    // The shift keeps the factorization positive definite through the roundoff
    // negatives a PSD matrix can carry, while leaving the inverted spectrum
    // steep enough to separate near-zero eigenvalues.
    const double sigma = 1e-6 * scale;
    detail::BandCholesky chol;
    if (!chol.build(m, sigma, std::size_t{20} * 1000 * 1000))
        return detail::smallest_eigenpairs_restarted(m, n_e, tol);

    Rng rng(derive_seed(0x51a7c3e5u, static_cast<std::uint64_t>(n)));

    const int block = std::min(n, n_e + 8);
    const int cap = std::min(n, 3 * n_e + 40);
    const int keep = std::min(cap - 1, n_e + 16);
    const int chunk = 8;
    const int max_checks = 400;

    std::vector<std::vector<double>> basis;  // orthonormal columns
    std::vector<std::vector<double>> image;  // image[j] = (M + σI)⁻¹ basis[j]
    DenseMatrix proj(cap, cap);              // basisᵀ·image, top-left block live

    auto orthogonalize_against = [&](std::vector<double>& x) {
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& col : basis) {
                const double c = detail::dot(col, x);
                for (int i = 0; i < n; ++i) x[i] -= c * col[i];
            }
        }
        return detail::norm2(x);
    };

    auto append_column = [&](std::vector<double> x) {
        std::vector<double> tx;
        chol.solve(x, tx);
        const int old = static_cast<int>(basis.size());
        for (int i = 0; i < old; ++i) {
            const double pij = detail::dot(basis[i], tx);
            proj.at(i, old) = pij;
            proj.at(old, i) = pij;
        }
        proj.at(old, old) = detail::dot(x, tx);
        basis.push_back(std::move(x));
        image.push_back(std::move(tx));
    };

    auto inject_random = [&](int attempts) -> bool {
        for (int t = 0; t < attempts; ++t) {
            std::vector<double> x = detail::random_unit_vector(n, rng);
            const double rem = orthogonalize_against(x);
            if (rem > 1e-8) {
                for (double& xi : x) xi /= rem;
                append_column(std::move(x));
                return true;
            }
        }
        return false;
    };

    for (int j = 0; j < block; ++j) inject_random(4);
    if (static_cast<int>(basis.size()) < n_e)
        return detail::smallest_eigenpairs_restarted(m, n_e, tol);

    // Round-robin expansion: each column's inverse image is consumed once as a
    // candidate direction, so the initial block drives parallel Krylov chains.
    int expand_ptr = 0;
    auto expand_one = [&]() -> bool {
        while (expand_ptr < static_cast<int>(basis.size())) {
            std::vector<double> x = image[expand_ptr];
            const double ref = detail::norm2(x);
            const double rem = orthogonalize_against(x);
            ++expand_ptr;
            if (rem > 1e-10 * std::max(1.0, ref)) {
                for (double& xi : x) xi /= rem;
                append_column(std::move(x));
                return true;
            }
        }
        return inject_random(4);
    };

    double best_resid = std::numeric_limits<double>::infinity();
    std::vector<double> prev_theta;
    bool prev_ok = false;

    for (int check = 0; check < max_checks; ++check) {
        int added = 0;
        while (added < chunk && static_cast<int>(basis.size()) < cap) {
            if (!expand_one()) break;
            ++added;
        }

        const int s = static_cast<int>(basis.size());
        const bool saturated = (added == 0) || (s >= n);

        // Rayleigh-Ritz on the inverse: its largest eigenvalues map to the
        // smallest of M, so the trailing columns are the wanted pairs.
        DenseMatrix hs(s, s);
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < s; ++j) hs.at(i, j) = proj.at(i, j);
        EigenBasis small = dense_eig(hs);

        DenseMatrix ritz(n, n_e);
        for (int j = 0; j < n_e; ++j) {
            const int col = s - 1 - j;
            for (int i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int t = 0; t < s; ++t) acc += basis[t][i] * small.vectors.at(t, col);
                ritz.at(i, j) = acc;
            }
        }

        std::vector<double> theta(n_e);
        double worst = 0.0;
        std::vector<double> x(n), mx;
        for (int j = 0; j < n_e; ++j) {
            for (int i = 0; i < n; ++i) x[i] = ritz.at(i, j);
            m.matvec(x, mx);
            theta[j] = detail::dot(x, mx);
            double r2 = 0.0;
            for (int i = 0; i < n; ++i) {
                const double r = mx[i] - theta[j] * x[i];
                r2 += r * r;
            }
            worst = std::max(worst, std::sqrt(r2));
        }
        best_resid = std::min(best_resid, worst);

        const bool ok = worst <= resid_tol;
        bool stable = false;
        if (ok && prev_ok && static_cast<int>(prev_theta.size()) == n_e) {
            stable = true;
            std::vector<double> a = theta, b = prev_theta;
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            for (int j = 0; j < n_e; ++j)
                if (std::abs(a[j] - b[j]) > drift_tol) stable = false;
        }

        if (ok && (stable || saturated)) {
            std::vector<int> order(n_e);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(),
                      [&theta](int a, int b) { return theta[a] < theta[b]; });
            EigenBasis out;
            out.values.resize(n_e);
            out.vectors = DenseMatrix(n, n_e);
            for (int j = 0; j < n_e; ++j) {
                out.values[j] = theta[order[j]];
                for (int i = 0; i < n; ++i) out.vectors.at(i, j) = ritz.at(i, order[j]);
            }
            return out;
        }
        prev_ok = ok;
        prev_theta = theta;

        if (saturated) break;  // exact subspace reached, tolerance unattainable

        if (s >= cap) {
            // Thick restart onto the leading inverse-Ritz vectors. Images and
            // projections are recomputed fresh so orthogonality and the
            // projected operator cannot drift across restarts.
            const int hold = std::min(keep, s);
            DenseMatrix held(n, hold);
            for (int j = 0; j < hold; ++j) {
                const int col = s - 1 - j;
                for (int i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (int t = 0; t < s; ++t) acc += basis[t][i] * small.vectors.at(t, col);
                    held.at(i, j) = acc;
                }
            }
            basis.clear();
            image.clear();
            expand_ptr = 0;
            for (int j = 0; j < hold; ++j) {
                std::vector<double> col(n);
                for (int i = 0; i < n; ++i) col[i] = held.at(i, j);
                const double rem = orthogonalize_against(col);
                if (rem <= 1e-12) continue;
                for (double& ci : col) ci /= rem;
                append_column(std::move(col));
            }
            if (basis.empty()) inject_random(4);
        }
    }

    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "smallest_eigenpairs: residual tolerance not reached (best residual %.3e, "
                  "tolerance %.3e)",
                  best_resid, resid_tol);
    throw EigenSolveError(msg, best_resid);
}

}  // namespace plmbo
