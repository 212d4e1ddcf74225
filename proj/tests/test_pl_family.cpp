#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "plmbo/eigensolver.hpp"
#include "plmbo/pl_family.hpp"
#include "plmbo/rng.hpp"

using plmbo::DenseMatrix;
using plmbo::SparseSymMatrix;

namespace {

/// Random symmetric-normalized-Laplacian-shaped base: unit diagonal, negative
/// off-diagonals on a connected random pattern.
SparseSymMatrix random_base(plmbo::Rng& rng, int n, double density) {
    std::vector<SparseSymMatrix::Entry> trips;
    std::vector<bool> touched(n, false);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.uniform01() < density || j == i + 1) {  // ring backbone keeps it connected
                trips.push_back({i, j, -0.05 - 0.9 * rng.uniform01()});
                touched[i] = touched[j] = true;
            }
    for (int i = 0; i < n; ++i) trips.push_back({i, i, 1.0});
    return SparseSymMatrix::from_triplets(n, trips);
}

std::set<std::pair<int, int>> retained_edges(const SparseSymMatrix& m) {
    std::set<std::pair<int, int>> s;
    for (const auto& e : m.entries)
        if (e.row != e.col && e.value != 0.0) s.insert({e.row, e.col});
    return s;
}

}  // namespace

TEST_CASE("off-diagonal range extraction") {
    const SparseSymMatrix m = SparseSymMatrix::from_triplets(
        3, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}, {0, 1, -0.9}, {1, 2, -0.2}});
    const plmbo::OffdiagRange r = plmbo::offdiag_range(m);
    REQUIRE(r.l_min == -0.9);
    REQUIRE(r.l_max == -0.2);
    REQUIRE(r.d == Catch::Approx(0.7));

    const SparseSymMatrix diag_only = SparseSymMatrix::identity(3);
    REQUIRE_THROWS_AS(plmbo::offdiag_range(diag_only), std::invalid_argument);
}

TEST_CASE("worked 3x3 example zeroes the strong entries first") {
    // Off-diagonals -0.9, -0.1, -0.5: with l_n = 2, k = 1 the cut level is
    // -0.9 + 0.4 = -0.5. Entries at or below the cut (-0.9 and -0.5) are
    // zeroed; only -0.1 survives as -1.
    const SparseSymMatrix m = SparseSymMatrix::from_triplets(
        3, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}, {0, 1, -0.9}, {0, 2, -0.1}, {1, 2, -0.5}});
    const DenseMatrix got = plmbo::persistent_laplacian(m, 1, 2).to_dense();
    const double expect[3][3] = {{1, 0, -1}, {0, 0, 0}, {-1, 0, 1}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) REQUIRE(got.at(i, j) == expect[i][j]);
}

TEST_CASE("k = l_n member is the zero matrix") {
    plmbo::Rng rng(5);
    const SparseSymMatrix base = random_base(rng, 8, 0.4);
    for (int l_n : {2, 3, 5}) {
        const SparseSymMatrix last = plmbo::persistent_laplacian(base, l_n, l_n);
        REQUIRE(last.nnz() == 0);
    }
}

TEST_CASE("family size honors include_last") {
    plmbo::Rng rng(6);
    const SparseSymMatrix base = random_base(rng, 10, 0.3);
    REQUIRE(plmbo::build_family(base, 4).members.size() == 3);
    REQUIRE(plmbo::build_family(base, 4, true).members.size() == 4);
    REQUIRE(plmbo::build_family(base, 2).members.size() == 1);
}

TEST_CASE("equal off-diagonals mark the family degenerate") {
    const SparseSymMatrix m = SparseSymMatrix::from_triplets(
        3, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}, {0, 1, -0.5}, {1, 2, -0.5}});
    const plmbo::LaplacianFamily fam = plmbo::build_family(m, 3);
    REQUIRE(fam.degenerate);
    // With d = 0 the cut level equals every entry, so all edges are zeroed at
    // any k >= 1 under the default rule.
    for (const SparseSymMatrix& member : fam.members) REQUIRE(member.nnz() == 0);
}

TEST_CASE("members match the literal thresholding transcription") {
    plmbo::Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 4 + static_cast<int>(rng.below(12));
        const SparseSymMatrix base = random_base(rng, n, 0.35);
        const int l_n = 2 + static_cast<int>(rng.below(5));
        for (int k = 1; k <= l_n; ++k) {
            const DenseMatrix got = plmbo::persistent_laplacian(base, k, l_n).to_dense();
            const DenseMatrix expect = oracles::threshold_script(base.to_dense(), k, l_n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) REQUIRE(got.at(i, j) == expect.at(i, j));
        }
    }
}

TEST_CASE("structural invariants hold on random bases") {
    plmbo::Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 4 + static_cast<int>(rng.below(14));
        const SparseSymMatrix base = random_base(rng, n, 0.3);
        const int l_n = 2 + static_cast<int>(rng.below(5));
        const plmbo::LaplacianFamily fam = plmbo::build_family(base, l_n, true);

        std::set<std::pair<int, int>> prev_edges;
        bool first = true;
        for (const SparseSymMatrix& member : fam.members) {
            const DenseMatrix d = member.to_dense();
            // Off-diagonals in {0, -1}.
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (i != j) REQUIRE((d.at(i, j) == 0.0 || d.at(i, j) == -1.0));
            // Exact zero row sums.
            for (int i = 0; i < n; ++i) {
                double sum = 0.0;
                for (int j = 0; j < n; ++j) sum += d.at(i, j);
                REQUIRE(sum == 0.0);
            }
            // PSD.
            const plmbo::EigenBasis e = plmbo::dense_eig(d);
            REQUIRE(e.values.front() >= -1e-10);
            // Edge sets nested as k grows.
            const std::set<std::pair<int, int>> edges = retained_edges(member);
            if (!first)
                for (const auto& edge : edges) REQUIRE(prev_edges.count(edge) == 1);
            prev_edges = edges;
            first = false;
            // Kernel dimension equals the component count of the retained
            // graph (isolated vertices included).
            std::vector<std::pair<int, int>> edge_list(edges.begin(), edges.end());
            REQUIRE(plmbo::nullity(d) == oracles::component_count(n, edge_list));
        }
        // Final member of the full ladder is empty.
        REQUIRE(fam.members.back().nnz() == 0);
    }
}

TEST_CASE("complete graph with distinct weights sheds edges stepwise") {
    // All C(n,2) off-diagonals distinct and equally spaced, with l_n equal to
    // the edge count: every cut level then swallows exactly one more entry,
    // so each step of the ladder drops one edge.
    const int n = 6;
    const int l_n = n * (n - 1) / 2;
    std::vector<SparseSymMatrix::Entry> trips;
    int v = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            trips.push_back({i, j, -0.9 + 0.8 * v / (l_n - 1)});
            ++v;
        }
    for (int i = 0; i < n; ++i) trips.push_back({i, i, 1.0});
    const SparseSymMatrix base = SparseSymMatrix::from_triplets(n, trips);
    const plmbo::LaplacianFamily fam = plmbo::build_family(base, l_n, true);
    std::size_t prev = retained_edges(base).size();
    for (const SparseSymMatrix& member : fam.members) {
        const std::size_t now = retained_edges(member).size();
        REQUIRE(now == prev - 1);
        prev = now;
    }
    REQUIRE(fam.members.back().nnz() == 0);
}

TEST_CASE("inverted rule drops weak edges first and still nests") {
    plmbo::Rng rng(29);
    const SparseSymMatrix base = random_base(rng, 10, 0.4);
    const plmbo::OffdiagRange r = plmbo::offdiag_range(base);
    const SparseSymMatrix first = plmbo::persistent_laplacian(base, 1, 4, true);
    // The most negative entry survives the first inverted cut.
    bool strongest_kept = false;
    for (const auto& e : first.entries)
        if (e.row != e.col && e.value == -1.0) {
            const DenseMatrix b = base.to_dense();
            if (b.at(e.row, e.col) == r.l_min) strongest_kept = true;
        }
    REQUIRE(strongest_kept);
    std::set<std::pair<int, int>> prev;
    bool first_member = true;
    for (int k = 1; k <= 4; ++k) {
        const std::set<std::pair<int, int>> edges =
            retained_edges(plmbo::persistent_laplacian(base, k, 4, true));
        if (!first_member)
            for (const auto& e : edges) REQUIRE(prev.count(e) == 1);
        prev = edges;
        first_member = false;
    }
    REQUIRE(plmbo::persistent_laplacian(base, 4, 4, true).nnz() == 0);
}

TEST_CASE("precondition violations are rejected") {
    plmbo::Rng rng(37);
    const SparseSymMatrix base = random_base(rng, 6, 0.5);
    REQUIRE_THROWS_AS(plmbo::persistent_laplacian(base, 0, 3), std::invalid_argument);
    REQUIRE_THROWS_AS(plmbo::persistent_laplacian(base, 4, 3), std::invalid_argument);
    REQUIRE_THROWS_AS(plmbo::persistent_laplacian(base, 1, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(plmbo::build_family(base, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(plmbo::build_family(SparseSymMatrix::identity(3), 3),
                      std::invalid_argument);
}
