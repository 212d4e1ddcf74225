#include <catch2/catch_amalgamated.hpp>

#include "plmbo/matrix.hpp"
#include "plmbo/rng.hpp"

using plmbo::DenseMatrix;
using plmbo::SparseSymMatrix;

TEST_CASE("identity matvec returns its input") {
    const SparseSymMatrix m = SparseSymMatrix::identity(3);
    const std::vector<double> x{1.0, 2.0, 3.0};
    const std::vector<double> y = m.matvec(x);
    REQUIRE(y == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("empty sparse matrix maps everything to zero") {
    const SparseSymMatrix m = SparseSymMatrix::from_triplets(3, {});
    const std::vector<double> y = m.matvec({4.0, -5.0, 6.0});
    REQUIRE(y == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("path graph Laplacian matvec on a basis vector") {
    // Unnormalized Laplacian of the 3-vertex path 0-1-2.
    const SparseSymMatrix m = SparseSymMatrix::from_triplets(
        3, {{0, 0, 1.0}, {1, 1, 2.0}, {2, 2, 1.0}, {0, 1, -1.0}, {1, 2, -1.0}});
    const std::vector<double> y = m.matvec({1.0, 0.0, 0.0});
    REQUIRE(y == std::vector<double>{1.0, -1.0, 0.0});
}

TEST_CASE("from_triplets validates and normalizes input") {
    SECTION("duplicate entries are rejected") {
        REQUIRE_THROWS_AS(SparseSymMatrix::from_triplets(2, {{0, 1, 1.0}, {1, 0, 2.0}}),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(SparseSymMatrix::from_triplets(2, {{0, 1, 1.0}, {0, 1, 2.0}}),
                          std::invalid_argument);
    }
    SECTION("out-of-range indices are rejected") {
        REQUIRE_THROWS_AS(SparseSymMatrix::from_triplets(2, {{0, 2, 1.0}}), std::invalid_argument);
        REQUIRE_THROWS_AS(SparseSymMatrix::from_triplets(2, {{-1, 0, 1.0}}), std::invalid_argument);
    }
    SECTION("explicit zeros are dropped") {
        const SparseSymMatrix m = SparseSymMatrix::from_triplets(3, {{0, 1, 0.0}, {1, 2, 3.0}});
        REQUIRE(m.nnz() == 1);
        REQUIRE(m.entries[0].row == 1);
        REQUIRE(m.entries[0].col == 2);
    }
    SECTION("lower-triangle input is normalized to upper and sorted") {
        const SparseSymMatrix m =
            SparseSymMatrix::from_triplets(3, {{2, 0, 5.0}, {1, 0, 4.0}, {1, 1, 7.0}});
        REQUIRE(m.nnz() == 3);
        REQUIRE(m.entries[0].row == 0);
        REQUIRE(m.entries[0].col == 1);
        REQUIRE(m.entries[0].value == 4.0);
        REQUIRE(m.entries[1].row == 0);
        REQUIRE(m.entries[1].col == 2);
        REQUIRE(m.entries[1].value == 5.0);
        REQUIRE(m.entries[2].row == 1);
        REQUIRE(m.entries[2].col == 1);
    }
}

TEST_CASE("dense matmul against hand-computed product") {
    DenseMatrix a(2, 3), b(3, 2);
    double av[] = {1, 2, 3, 4, 5, 6};
    double bv[] = {7, 8, 9, 10, 11, 12};
    std::copy(av, av + 6, a.data.begin());
    std::copy(bv, bv + 6, b.data.begin());
    const DenseMatrix c = plmbo::matmul(a, b);
    REQUIRE(c.rows == 2);
    REQUIRE(c.cols == 2);
    REQUIRE(c.at(0, 0) == 58.0);
    REQUIRE(c.at(0, 1) == 64.0);
    REQUIRE(c.at(1, 0) == 139.0);
    REQUIRE(c.at(1, 1) == 154.0);
}

TEST_CASE("matmul_tn equals transpose-then-multiply") {
    plmbo::Rng rng(7);
    DenseMatrix a(5, 3), b(5, 4);
    for (double& v : a.data) v = rng.normal();
    for (double& v : b.data) v = rng.normal();
    const DenseMatrix direct = plmbo::matmul_tn(a, b);
    const DenseMatrix via_transpose = plmbo::matmul(plmbo::transpose(a), b);
    REQUIRE(direct.rows == 3);
    REQUIRE(direct.cols == 4);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j)
            REQUIRE(direct.at(i, j) == Catch::Approx(via_transpose.at(i, j)).margin(1e-14));
}

TEST_CASE("transpose swaps indices") {
    DenseMatrix a(2, 3);
    a.at(0, 0) = 1;
    a.at(0, 1) = 2;
    a.at(0, 2) = 3;
    a.at(1, 0) = 4;
    a.at(1, 1) = 5;
    a.at(1, 2) = 6;
    const DenseMatrix t = plmbo::transpose(a);
    REQUIRE(t.rows == 3);
    REQUIRE(t.cols == 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) REQUIRE(t.at(j, i) == a.at(i, j));
}

TEST_CASE("Frobenius norms match hand values") {
    DenseMatrix a(2, 2);
    a.at(0, 0) = 3.0;
    a.at(1, 1) = 4.0;
    REQUIRE(plmbo::frobenius_norm(a) == Catch::Approx(5.0));

    // Off-diagonal entries count twice in the symmetric storage.
    const SparseSymMatrix m = SparseSymMatrix::from_triplets(2, {{0, 1, 3.0}});
    REQUIRE(m.frob_norm() == Catch::Approx(std::sqrt(18.0)));

    const SparseSymMatrix d = SparseSymMatrix::from_triplets(2, {{0, 0, 3.0}, {1, 1, 4.0}});
    REQUIRE(d.frob_norm() == Catch::Approx(5.0));
}

TEST_CASE("sparse matvec agrees with the densified product on random matrices") {
    plmbo::Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(10));
        std::vector<SparseSymMatrix::Entry> trips;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                if (rng.uniform01() < 0.4) trips.push_back({i, j, rng.normal()});
        const SparseSymMatrix m = SparseSymMatrix::from_triplets(n, trips);
        const DenseMatrix dense = m.to_dense();
        std::vector<double> x(n);
        for (double& v : x) v = rng.normal();
        const std::vector<double> y = m.matvec(x);
        for (int i = 0; i < n; ++i) {
            double expect = 0.0;
            for (int j = 0; j < n; ++j) expect += dense.at(i, j) * x[j];
            REQUIRE(y[i] == Catch::Approx(expect).margin(1e-12));
        }
    }
}

TEST_CASE("to_dense produces a symmetric matrix") {
    const SparseSymMatrix m =
        SparseSymMatrix::from_triplets(3, {{0, 1, 2.0}, {1, 2, -1.0}, {0, 0, 5.0}});
    const DenseMatrix d = m.to_dense();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) REQUIRE(d.at(i, j) == d.at(j, i));
    REQUIRE(d.at(0, 1) == 2.0);
    REQUIRE(d.at(2, 1) == -1.0);
    REQUIRE(d.at(0, 0) == 5.0);
    REQUIRE(d.at(2, 2) == 0.0);
}
