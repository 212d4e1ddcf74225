#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "plmbo/datagen.hpp"
#include "plmbo/pipeline.hpp"

using nlohmann::json;
using plmbo::Dataset;
using plmbo::RunConfig;
using plmbo::RunReport;

namespace {

/// Small, fast configuration for end-to-end runs in unit tests.
RunConfig small_config() {
    RunConfig cfg;
    cfg.generator = plmbo::GeneratorSpec{};
    cfg.generator->kind = "two-gaussians";
    cfg.generator->n = 150;
    cfg.generator->dim = 2;
    cfg.generator->bayes_error = 0.05;
    cfg.generator->seed = 7;
    cfg.n_n = 8;
    cfg.n_e = 20;
    cfg.n_labeled = 20;
    cfg.n_trials = 3;
    cfg.forest.n_trees = 20;
    return cfg;
}

}  // namespace

TEST_CASE("config defaults survive an empty object") {
    const RunConfig c = plmbo::config_from_json(json::object());
    CHECK(c.dataset.empty());
    CHECK(!c.generator);
    CHECK(c.metric == "euclidean");
    CHECK(c.n_n == 15);
    CHECK(!c.sigma);
    CHECK(c.l_n == 4);
    CHECK(!c.include_last);
    CHECK(!c.invert_threshold);
    CHECK(c.n_e == 50);
    CHECK(c.dt == 0.1);
    CHECK(c.mu == 50.0);
    CHECK(c.n_t == 30);
    CHECK(c.epsilon == 1.0);
    CHECK(c.init_mode == "voronoi");
    CHECK(c.n_labeled == 50);
    CHECK(c.n_trials == 10);
    CHECK(c.balanced_labels);
    CHECK(c.seed == 1);
    CHECK(c.forest.n_trees == 100);
    CHECK(c.forest.max_depth == 8);
    CHECK(c.forest.min_leaf == 1);
}

TEST_CASE("config JSON round-trips exactly") {
    RunConfig c = small_config();
    c.sigma = 1.25;
    c.include_last = true;
    c.output = "report.json";
    const json j1 = plmbo::config_to_json(c);
    const RunConfig back = plmbo::config_from_json(j1);
    const json j2 = plmbo::config_to_json(back);
    REQUIRE(j1.dump() == j2.dump());

    // The auto-sigma spelling also survives the trip.
    RunConfig auto_sigma = small_config();
    const json ja = plmbo::config_to_json(auto_sigma);
    REQUIRE(ja["sigma"] == "auto");
    const RunConfig auto_back = plmbo::config_from_json(ja);
    REQUIRE(!auto_back.sigma);
}

TEST_CASE("unknown config keys are rejected everywhere") {
    CHECK_THROWS_WITH(plmbo::config_from_json(json{{"n_neighbors", 10}}),
                      Catch::Matchers::ContainsSubstring("n_neighbors"));
    CHECK_THROWS_WITH(
        plmbo::config_from_json(json{{"generator", {{"kind", "banana"}, {"n", 10}, {"sd", 1}}}}),
        Catch::Matchers::ContainsSubstring("generator"));
    CHECK_THROWS_WITH(plmbo::config_from_json(json{{"forest", {{"trees", 5}}}}),
                      Catch::Matchers::ContainsSubstring("forest"));
}

TEST_CASE("sigma accepts a number or the auto spelling") {
    const RunConfig num = plmbo::config_from_json(json{{"sigma", 2.5}});
    REQUIRE(num.sigma);
    REQUIRE(*num.sigma == 2.5);
    const RunConfig a = plmbo::config_from_json(json{{"sigma", "auto"}});
    REQUIRE(!a.sigma);
    CHECK_THROWS_WITH(plmbo::config_from_json(json{{"sigma", "median"}}),
                      Catch::Matchers::ContainsSubstring("auto"));
}

TEST_CASE("config validation enforces module constraints") {
    RunConfig c;  // neither dataset nor generator
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.dataset = "x.csv";
    c.generator = plmbo::GeneratorSpec{};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);  // both set

    c = small_config();
    c.n_n = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config();
    c.sigma = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config();
    c.l_n = 1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config();
    c.metric = "manhattan";
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config();
    c.init_mode = "grid";
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config();
    c.mu = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config();
    c.forest.n_trees = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("generator dispatch covers both sources") {
    plmbo::GeneratorSpec g;
    g.kind = "two-gaussians";
    g.n = 24;
    g.dim = 5;
    const Dataset gauss = plmbo::generate(g);
    REQUIRE(gauss.size() == 24);
    REQUIRE(gauss.dim() == 5);

    g.kind = "banana";
    g.n = 30;
    const Dataset ban = plmbo::generate(g);
    REQUIRE(ban.size() == 30);
    REQUIRE(ban.dim() == 2);

    g.kind = "spiral";
    CHECK_THROWS_WITH(plmbo::generate(g), Catch::Matchers::ContainsSubstring("spiral"));
}

TEST_CASE("end-to-end run classifies the easy analog") {
    const RunConfig cfg = small_config();
    const RunReport report = plmbo::run_from_config(cfg);

    REQUIRE(report.n_points == 150);
    REQUIRE(report.n_classes == 2);
    REQUIRE(report.n_members == 3);  // default ladder of 4 steps, last omitted
    REQUIRE(report.n_ok == 3);
    REQUIRE(report.n_failed == 0);
    REQUIRE(report.contract_violations == 0);
    REQUIRE(report.sigma_used > 0.0);
    REQUIRE(!report.degenerate_family);
    REQUIRE(report.mean_accuracy >= 0.8);

    double sum = 0.0;
    for (const auto& t : report.trials) {
        REQUIRE(t.ok);
        REQUIRE(t.accuracy >= 0.0);
        REQUIRE(t.accuracy <= 1.0);
        REQUIRE(static_cast<int>(t.mbo_iterations.size()) == report.n_members);
        sum += t.accuracy;
    }
    REQUIRE(report.mean_accuracy == Catch::Approx(sum / 3.0).margin(1e-12));

    const json j = plmbo::report_to_json(report);
    REQUIRE(j.contains("config"));
    REQUIRE(j.contains("dataset"));
    REQUIRE(j.contains("graph"));
    REQUIRE(j.contains("trials"));
    REQUIRE(j.contains("summary"));
    REQUIRE(j.contains("timings"));
    REQUIRE(j["summary"]["contract_violations"] == 0);
}

TEST_CASE("identical configs give identical reports modulo timings") {
    const RunConfig cfg = small_config();
    const RunReport a = plmbo::run_from_config(cfg);
    const RunReport b = plmbo::run_from_config(cfg);
    REQUIRE(plmbo::report_to_json(a, false).dump() == plmbo::report_to_json(b, false).dump());
    // Timing keys exist only when requested.
    REQUIRE(!plmbo::report_to_json(a, false).contains("timings"));
}

TEST_CASE("failing trials are contained and reported") {
    // Balanced sampling with a budget below the class count fails inside
    // every trial; the run itself still completes with a full error ledger.
    RunConfig cfg = small_config();
    cfg.n_labeled = 1;
    const RunReport report = plmbo::run_from_config(cfg);
    REQUIRE(report.n_ok == 0);
    REQUIRE(report.n_failed == 3);
    REQUIRE(report.mean_accuracy == 0.0);
    for (const auto& t : report.trials) {
        REQUIRE(!t.ok);
        REQUIRE(!t.message.empty());
    }
    const json j = plmbo::report_to_json(report);
    for (const auto& jt : j["trials"]) REQUIRE(jt["status"] == "error");
}

TEST_CASE("runs require scorable ground truth") {
    RunConfig cfg = small_config();
    Dataset data = plmbo::generate(*cfg.generator);

    SECTION("a missing label is named") {
        data.labels[5] = -1;
        CHECK_THROWS_WITH(plmbo::run_classification(data, cfg),
                          Catch::Matchers::ContainsSubstring("point 5"));
    }

    SECTION("single-class data cannot be scored") {
        for (int& l : data.labels) l = 0;
        CHECK_THROWS_WITH(plmbo::run_classification(data, cfg),
                          Catch::Matchers::ContainsSubstring("2 classes"));
    }

    SECTION("labeling every point leaves nothing to score") {
        cfg.n_labeled = data.size();
        CHECK_THROWS_WITH(plmbo::run_classification(data, cfg),
                          Catch::Matchers::ContainsSubstring("unlabeled"));
        cfg.n_labeled = data.size() + 10;
        CHECK_THROWS_AS(plmbo::run_classification(data, cfg), std::invalid_argument);
    }
}
