#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "plmbo/ensemble.hpp"
#include "plmbo/forest.hpp"
#include "plmbo/matrix.hpp"
#include "plmbo/rng.hpp"

using plmbo::DenseMatrix;
using plmbo::EnsembleFeatures;
using plmbo::ForestModel;
using plmbo::ForestParams;
using plmbo::LabeledSplit;

namespace {

DenseMatrix fill_matrix(int rows, int cols, double base) {
    DenseMatrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int c = 0; c < cols; ++c) m.at(i, c) = base + i + 0.01 * c;
    return m;
}

}  // namespace

TEST_CASE("single-member concatenation is the identity") {
    const DenseMatrix u = fill_matrix(5, 3, 1.0);
    const EnsembleFeatures f = plmbo::concatenate_outputs({u}, 3);
    REQUIRE(f.x.rows == 5);
    REQUIRE(f.x.cols == 3);
    REQUIRE(f.x.data == u.data);
}

TEST_CASE("binary members contribute only their first column") {
    std::vector<DenseMatrix> members;
    for (int m = 0; m < 3; ++m) members.push_back(fill_matrix(4, 2, 10.0 * m));
    const EnsembleFeatures f = plmbo::concatenate_outputs(members, 2);
    REQUIRE(f.x.rows == 4);
    REQUIRE(f.x.cols == 3);
    for (int i = 0; i < 4; ++i)
        for (int m = 0; m < 3; ++m) REQUIRE(f.x.at(i, m) == members[m].at(i, 0));
}

TEST_CASE("multiclass members stack as full blocks") {
    const DenseMatrix u1 = fill_matrix(6, 4, 0.0);
    const DenseMatrix u2 = fill_matrix(6, 4, 100.0);
    const EnsembleFeatures f = plmbo::concatenate_outputs({u1, u2}, 4);
    REQUIRE(f.x.rows == 6);
    REQUIRE(f.x.cols == 8);
    for (int i = 0; i < 6; ++i)
        for (int c = 0; c < 4; ++c) {
            REQUIRE(f.x.at(i, c) == u1.at(i, c));
            REQUIRE(f.x.at(i, 4 + c) == u2.at(i, c));
        }
}

TEST_CASE("concatenation validates its inputs") {
    CHECK_THROWS_AS(plmbo::concatenate_outputs({}, 2), std::invalid_argument);
    const DenseMatrix a = fill_matrix(4, 2, 0.0);
    const DenseMatrix b = fill_matrix(5, 2, 0.0);
    CHECK_THROWS_WITH(plmbo::concatenate_outputs({a, b}, 2),
                      Catch::Matchers::ContainsSubstring("row counts"));
    const DenseMatrix c = fill_matrix(4, 3, 0.0);
    CHECK_THROWS_WITH(plmbo::concatenate_outputs({a, c}, 2),
                      Catch::Matchers::ContainsSubstring("columns"));
}

TEST_CASE("mask split partitions rows in order") {
    EnsembleFeatures f;
    f.x = fill_matrix(4, 2, 0.0);
    const std::vector<int> labels = {0, 1, 0, 1};

    SECTION("alternating mask") {
        const LabeledSplit s = plmbo::split_by_mask(f, labels, {1, 0, 1, 0});
        REQUIRE(s.train_ids == std::vector<int>{0, 2});
        REQUIRE(s.test_ids == std::vector<int>{1, 3});
        REQUIRE(s.train_y == std::vector<int>{0, 0});
        REQUIRE(s.test_truth == std::vector<int>{1, 1});
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) {
                REQUIRE(s.train_x.at(r, c) == f.x.at(s.train_ids[r], c));
                REQUIRE(s.test_x.at(r, c) == f.x.at(s.test_ids[r], c));
            }
    }

    SECTION("all labeled leaves an empty test side") {
        const LabeledSplit s = plmbo::split_by_mask(f, labels, {1, 1, 1, 1});
        REQUIRE(s.test_x.rows == 0);
        REQUIRE(s.test_truth.empty());
        // Downstream scoring of the empty side is the documented error.
        CHECK_THROWS_AS(plmbo::accuracy({}, {}), std::invalid_argument);
    }

    SECTION("empty train side is rejected") {
        CHECK_THROWS_AS(plmbo::split_by_mask(f, labels, {0, 0, 0, 0}), std::invalid_argument);
        CHECK_THROWS_AS(plmbo::split_by_mask(f, labels, {1, 0, 1}), std::invalid_argument);
    }

    SECTION("counts add up over random masks") {
        plmbo::Rng rng(5);
        EnsembleFeatures wide;
        wide.x = fill_matrix(30, 3, 0.0);
        std::vector<int> wide_labels(30, 0);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<char> mask(30, 0);
            int m = 0;
            for (char& b : mask)
                if (rng.uniform01() < 0.4) b = 1, ++m;
            if (m == 0) mask[0] = 1, m = 1;
            const LabeledSplit s = plmbo::split_by_mask(wide, wide_labels, mask);
            REQUIRE(s.train_x.rows == m);
            REQUIRE(s.train_x.rows + s.test_x.rows == 30);
            REQUIRE(static_cast<int>(s.train_ids.size() + s.test_ids.size()) == 30);
        }
    }
}

TEST_CASE("forest separates a clean threshold in one dimension") {
    DenseMatrix x(100, 1);
    std::vector<int> y(100);
    for (int i = 0; i < 100; ++i) {
        x.at(i, 0) = (i - 49.5) / 50.0;  // -0.99 .. 0.99, never zero
        y[i] = x.at(i, 0) > 0.0 ? 1 : 0;
    }
    ForestParams params;
    const ForestModel model = plmbo::forest_fit(x, y, params);

    REQUIRE(plmbo::accuracy(plmbo::forest_predict(model, x), y) == 1.0);

    DenseMatrix grid(20, 1);
    std::vector<int> truth(20);
    for (int i = 0; i < 20; ++i) {
        const double v = (i < 10 ? -1.0 : 1.0) * (0.1 + 0.1 * (i % 10));
        grid.at(i, 0) = v;
        truth[i] = v > 0.0 ? 1 : 0;
    }
    REQUIRE(plmbo::accuracy(plmbo::forest_predict(model, grid), truth) == 1.0);
}

TEST_CASE("single-class training gives a constant classifier") {
    const DenseMatrix x = fill_matrix(12, 2, 0.0);
    const std::vector<int> y(12, 2);
    const ForestModel model = plmbo::forest_fit(x, y, ForestParams{});
    const std::vector<int> pred = plmbo::forest_predict(model, fill_matrix(7, 2, 50.0));
    for (int p : pred) REQUIRE(p == 2);
}

TEST_CASE("forest learns exclusive-or with deep enough trees") {
    plmbo::Rng rng(99);
    const int per_cluster = 25;
    DenseMatrix x(4 * per_cluster, 2);
    std::vector<int> y(4 * per_cluster);
    int row = 0;
    for (int sx : {-1, 1})
        for (int sy : {-1, 1})
            for (int p = 0; p < per_cluster; ++p, ++row) {
                x.at(row, 0) = sx + 0.2 * (rng.uniform01() - 0.5);
                x.at(row, 1) = sy + 0.2 * (rng.uniform01() - 0.5);
                y[row] = sx * sy > 0 ? 1 : 0;
            }
    ForestParams params;
    params.n_trees = 50;
    params.max_depth = 6;
    const ForestModel model = plmbo::forest_fit(x, y, params);
    const double train_acc = plmbo::accuracy(plmbo::forest_predict(model, x), y);
    REQUIRE(train_acc >= 0.95);
}

TEST_CASE("forests are deterministic and order-invariant") {
    plmbo::Rng rng(7);
    const int n = 60;
    DenseMatrix x(n, 3);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) x.at(i, c) = rng.uniform01();
        y[i] = x.at(i, 0) + x.at(i, 1) > 1.0 ? 1 : 0;
    }
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);

    ForestParams params;
    params.n_trees = 20;
    params.seed = 77;

    const ForestModel a = plmbo::forest_fit(x, y, params, ids);
    const ForestModel b = plmbo::forest_fit(x, y, params, ids);
    REQUIRE(plmbo::forest_to_json(a).dump() == plmbo::forest_to_json(b).dump());

    // Feed the same rows in reversed presentation order with matching ids.
    DenseMatrix xr(n, 3);
    std::vector<int> yr(n), idr(n);
    for (int i = 0; i < n; ++i) {
        const int src = n - 1 - i;
        for (int c = 0; c < 3; ++c) xr.at(i, c) = x.at(src, c);
        yr[i] = y[src];
        idr[i] = ids[src];
    }
    const ForestModel c = plmbo::forest_fit(xr, yr, params, idr);
    REQUIRE(plmbo::forest_to_json(c).dump() == plmbo::forest_to_json(a).dump());

    DenseMatrix probe(15, 3);
    for (double& v : probe.data) v = rng.uniform01();
    REQUIRE(plmbo::forest_predict(c, probe) == plmbo::forest_predict(a, probe));
}

TEST_CASE("forest JSON round-trips to an equivalent model") {
    plmbo::Rng rng(13);
    DenseMatrix x(40, 2);
    std::vector<int> y(40);
    for (int i = 0; i < 40; ++i) {
        x.at(i, 0) = rng.uniform01();
        x.at(i, 1) = rng.uniform01();
        y[i] = x.at(i, 0) > x.at(i, 1) ? 1 : 0;
    }
    ForestParams params;
    params.n_trees = 10;
    params.max_depth = 5;
    const ForestModel model = plmbo::forest_fit(x, y, params);

    const nlohmann::json j = plmbo::forest_to_json(model);
    const ForestModel back = plmbo::forest_from_json(j);
    REQUIRE(back.n_features == model.n_features);
    REQUIRE(back.n_classes == model.n_classes);
    REQUIRE(back.params.seed == model.params.seed);
    REQUIRE(plmbo::forest_to_json(back).dump() == j.dump());

    DenseMatrix probe(25, 2);
    for (double& v : probe.data) v = rng.uniform01();
    REQUIRE(plmbo::forest_predict(back, probe) == plmbo::forest_predict(model, probe));
}

TEST_CASE("forest inputs are validated") {
    const DenseMatrix x = fill_matrix(4, 2, 0.0);
    const std::vector<int> y = {0, 1, 0, 1};
    CHECK_THROWS_AS(plmbo::forest_fit(DenseMatrix(0, 2), {}, ForestParams{}),
                    std::invalid_argument);
    CHECK_THROWS_AS(plmbo::forest_fit(x, {0, 1}, ForestParams{}), std::invalid_argument);
    CHECK_THROWS_AS(plmbo::forest_fit(x, {0, 1, 0, -2}, ForestParams{}), std::invalid_argument);
    CHECK_THROWS_AS(plmbo::forest_fit(x, y, ForestParams{}, {0, 1}), std::invalid_argument);

    ForestParams bad;
    bad.n_trees = 0;
    CHECK_THROWS_AS(plmbo::forest_fit(x, y, bad), std::invalid_argument);
    bad = ForestParams{};
    bad.max_depth = 0;
    CHECK_THROWS_AS(plmbo::forest_fit(x, y, bad), std::invalid_argument);
    bad = ForestParams{};
    bad.min_leaf = 0;
    CHECK_THROWS_AS(plmbo::forest_fit(x, y, bad), std::invalid_argument);

    const ForestModel model = plmbo::forest_fit(x, y, ForestParams{});
    CHECK_THROWS_WITH(plmbo::forest_predict(model, fill_matrix(3, 5, 0.0)),
                      Catch::Matchers::ContainsSubstring("feature count"));
}

TEST_CASE("accuracy is the fraction of agreeing entries") {
    CHECK(plmbo::accuracy({1, 2, 0}, {1, 2, 0}) == 1.0);
    CHECK(plmbo::accuracy({1, 1, 1}, {0, 0, 0}) == 0.0);
    CHECK(plmbo::accuracy({1, 0, 1, 0}, {1, 0, 1, 1}) == 0.75);
    CHECK_THROWS_AS(plmbo::accuracy({1}, {1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(plmbo::accuracy({}, {}), std::invalid_argument);
}
