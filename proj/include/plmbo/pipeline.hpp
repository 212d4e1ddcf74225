#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "plmbo/csv_io.hpp"
#include "plmbo/datagen.hpp"
#include "plmbo/dataset.hpp"
#include "plmbo/eigensolver.hpp"
#include "plmbo/ensemble.hpp"
#include "plmbo/forest.hpp"
#include "plmbo/graph.hpp"
#include "plmbo/mbo.hpp"
#include "plmbo/parallel.hpp"
#include "plmbo/pl_family.hpp"

namespace plmbo {

/// Synthetic-source description; `kind` selects which generator fields
/// apply (dim/bayes_error for two-gaussians, noise for banana).
struct GeneratorSpec {
    std::string kind;  // "two-gaussians" | "banana"
    int n = 0;
    int dim = 2;
    double bayes_error = 0.05;
    double noise = 0.1;
    std::uint64_t seed = 1;
};

inline Dataset generate(const GeneratorSpec& spec) {
    if (spec.kind == "two-gaussians")
        return gen_two_gaussians(spec.n, spec.dim, spec.bayes_error, spec.seed);
    if (spec.kind == "banana") return gen_banana(spec.n, spec.noise, spec.seed);
    throw std::invalid_argument("unknown generator '" + spec.kind +
                                "' (expected two-gaussians or banana)");
}

inline nlohmann::json generator_to_json(const GeneratorSpec& s) {
    nlohmann::json j;
    j["kind"] = s.kind;
    j["n"] = s.n;
    if (s.kind == "two-gaussians") {
        j["dim"] = s.dim;
        j["bayes_error"] = s.bayes_error;
    } else {
        j["noise"] = s.noise;
    }
    j["seed"] = s.seed;
    return j;
}

/// Full run configuration: data source, graph/family/MBO hyperparameters,
/// trial plan, and classifier settings. Defaults are the repo's working
/// values; n_e is additionally clamped to [1, N-1] at run time, so the
/// default 50 resolves to min(50, N-1).
struct RunConfig {
    std::string dataset;  // CSV path; empty when generator is set
    std::optional<GeneratorSpec> generator;
    std::string metric = "euclidean";
    int n_n = 15;
    std::optional<double> sigma;  // absent = auto (median retained-pair distance)
    int l_n = 4;
    bool include_last = false;
    bool invert_threshold = false;
    int n_e = 50;
    double dt = 0.1;
    double mu = 50.0;
    int n_t = 30;
    double epsilon = 1.0;
    std::string init_mode = "voronoi";
    int n_labeled = 50;
    int n_trials = 10;
    bool balanced_labels = true;
    std::uint64_t seed = 1;
    ForestParams forest;
    std::string output;  // report destination; empty = stdout

    void validate() const {
        if (dataset.empty() == !generator)
            throw std::invalid_argument("RunConfig: exactly one of dataset/generator required");
        metric_from_string(metric);
        init_mode_from_string(init_mode);
        if (n_n < 1) throw std::invalid_argument("RunConfig: n_n must be >= 1");
        if (sigma && *sigma <= 0.0) throw std::invalid_argument("RunConfig: sigma must be > 0");
        if (l_n < 2) throw std::invalid_argument("RunConfig: l_n must be >= 2");
        if (n_e < 1) throw std::invalid_argument("RunConfig: n_e must be >= 1");
        if (dt <= 0.0) throw std::invalid_argument("RunConfig: dt must be > 0");
        if (mu < 0.0) throw std::invalid_argument("RunConfig: mu must be >= 0");
        if (n_t < 0) throw std::invalid_argument("RunConfig: n_t must be >= 0");
        if (epsilon <= 0.0) throw std::invalid_argument("RunConfig: epsilon must be > 0");
        if (n_labeled < 1) throw std::invalid_argument("RunConfig: n_labeled must be >= 1");
        if (n_trials < 1) throw std::invalid_argument("RunConfig: n_trials must be >= 1");
        forest.validate();
    }
};

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    if (!c.dataset.empty()) j["dataset"] = c.dataset;
    if (c.generator) j["generator"] = generator_to_json(*c.generator);
    j["metric"] = c.metric;
    j["n_n"] = c.n_n;
    j["sigma"] = c.sigma ? nlohmann::json(*c.sigma) : nlohmann::json("auto");
    j["l_n"] = c.l_n;
    j["include_last"] = c.include_last;
    j["invert_threshold"] = c.invert_threshold;
    j["n_e"] = c.n_e;
    j["dt"] = c.dt;
    j["mu"] = c.mu;
    j["n_t"] = c.n_t;
    j["epsilon"] = c.epsilon;
    j["init_mode"] = c.init_mode;
    j["n_labeled"] = c.n_labeled;
    j["n_trials"] = c.n_trials;
    j["balanced_labels"] = c.balanced_labels;
    j["seed"] = c.seed;
    j["forest"] = {{"n_trees", c.forest.n_trees},
                   {"max_depth", c.forest.max_depth},
                   {"min_leaf", c.forest.min_leaf},
                   {"seed", c.forest.seed}};
    if (!c.output.empty()) j["output"] = c.output;
    return j;
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                                const std::string& where) {
    for (const auto& item : j.items())
        if (!known.count(item.key()))
            throw std::invalid_argument("unknown config key '" + item.key() + "'" +
                                        (where.empty() ? "" : " in " + where));
}

}  // namespace detail

/// Parse a config object, starting from defaults; unknown keys anywhere are
/// an error.
inline RunConfig config_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j,
        {"dataset", "generator", "metric", "n_n", "sigma", "l_n", "include_last",
         "invert_threshold", "n_e", "dt", "mu", "n_t", "epsilon", "init_mode", "n_labeled",
         "n_trials", "balanced_labels", "seed", "forest", "output"},
        "");
    RunConfig c;
    if (j.contains("dataset")) c.dataset = j["dataset"].get<std::string>();
    if (j.contains("generator")) {
        const nlohmann::json& g = j["generator"];
        detail::reject_unknown_keys(g, {"kind", "n", "dim", "bayes_error", "noise", "seed"},
                                    "generator");
        GeneratorSpec spec;
        spec.kind = g.at("kind").get<std::string>();
        spec.n = g.at("n").get<int>();
        if (g.contains("dim")) spec.dim = g["dim"].get<int>();
        if (g.contains("bayes_error")) spec.bayes_error = g["bayes_error"].get<double>();
        if (g.contains("noise")) spec.noise = g["noise"].get<double>();
        if (g.contains("seed")) spec.seed = g["seed"].get<std::uint64_t>();
        c.generator = spec;
    }
    if (j.contains("metric")) c.metric = j["metric"].get<std::string>();
    if (j.contains("n_n")) c.n_n = j["n_n"].get<int>();
    if (j.contains("sigma")) {
        if (j["sigma"].is_string()) {
            if (j["sigma"].get<std::string>() != "auto")
                throw std::invalid_argument("config: sigma must be a number or \"auto\"");
        } else {
            c.sigma = j["sigma"].get<double>();
        }
    }
    if (j.contains("l_n")) c.l_n = j["l_n"].get<int>();
    if (j.contains("include_last")) c.include_last = j["include_last"].get<bool>();
    if (j.contains("invert_threshold")) c.invert_threshold = j["invert_threshold"].get<bool>();
    if (j.contains("n_e")) c.n_e = j["n_e"].get<int>();
    if (j.contains("dt")) c.dt = j["dt"].get<double>();
    if (j.contains("mu")) c.mu = j["mu"].get<double>();
    if (j.contains("n_t")) c.n_t = j["n_t"].get<int>();
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("init_mode")) c.init_mode = j["init_mode"].get<std::string>();
    if (j.contains("n_labeled")) c.n_labeled = j["n_labeled"].get<int>();
    if (j.contains("n_trials")) c.n_trials = j["n_trials"].get<int>();
    if (j.contains("balanced_labels")) c.balanced_labels = j["balanced_labels"].get<bool>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("forest")) {
        const nlohmann::json& f = j["forest"];
        detail::reject_unknown_keys(f, {"n_trees", "max_depth", "min_leaf", "seed"}, "forest");
        if (f.contains("n_trees")) c.forest.n_trees = f["n_trees"].get<int>();
        if (f.contains("max_depth")) c.forest.max_depth = f["max_depth"].get<int>();
        if (f.contains("min_leaf")) c.forest.min_leaf = f["min_leaf"].get<int>();
        if (f.contains("seed")) c.forest.seed = f["seed"].get<std::uint64_t>();
    }
    if (j.contains("output")) c.output = j["output"].get<std::string>();
    return c;
}

struct TrialResult {
    int trial = 0;
    bool ok = false;
    std::string message;
    double accuracy = 0.0;
    std::vector<int> mbo_iterations;  // per family member
};

struct RunReport {
    nlohmann::json config_echo;
    std::string dataset_name;
    int n_points = 0, dim = 0, n_classes = 0;
    int n_edges = 0, n_members = 0;
    double sigma_used = 0.0;
    bool degenerate_family = false;
    std::vector<TrialResult> trials;
    double mean_accuracy = 0.0, std_accuracy = 0.0;
    int n_ok = 0, n_failed = 0;
    /// Rows violating the hard state contracts (non-indicator output rows or
    /// initializations that disturb a labeled row). Always 0 in a correct
    /// build; reported so end-to-end runs expose any breach.
    long long contract_violations = 0;
    struct Timings {
        double graph_s = 0.0, eigen_s = 0.0, trials_s = 0.0, total_s = 0.0;
    } timings;
};

inline nlohmann::json report_to_json(const RunReport& r, bool include_timings = true) {
    nlohmann::json j;
    j["config"] = r.config_echo;
    j["dataset"] = {{"name", r.dataset_name},
                    {"n_points", r.n_points},
                    {"dim", r.dim},
                    {"n_classes", r.n_classes}};
    j["graph"] = {{"n_edges", r.n_edges},
                  {"sigma_used", r.sigma_used},
                  {"n_members", r.n_members},
                  {"degenerate_family", r.degenerate_family}};
    nlohmann::json trials = nlohmann::json::array();
    for (const TrialResult& t : r.trials) {
        nlohmann::json jt;
        jt["trial"] = t.trial;
        jt["status"] = t.ok ? "ok" : "error";
        if (t.ok) {
            jt["accuracy"] = t.accuracy;
            jt["mbo_iterations"] = t.mbo_iterations;
        } else {
            jt["message"] = t.message;
        }
        trials.push_back(std::move(jt));
    }
    j["trials"] = std::move(trials);
    j["summary"] = {{"mean_accuracy", r.mean_accuracy},
                    {"std_accuracy", r.std_accuracy},
                    {"n_trials_ok", r.n_ok},
                    {"n_trials_failed", r.n_failed},
                    {"contract_violations", r.contract_violations}};
    if (include_timings)
        j["timings"] = {{"graph_s", r.timings.graph_s},
                        {"eigen_s", r.timings.eigen_s},
                        {"trials_s", r.timings.trials_s},
                        {"total_s", r.timings.total_s}};
    return j;
}

/// End-to-end classification benchmark. The graph, family, and eigenbases
/// are computed once and shared across trials (label sampling does not
/// affect them); each trial samples a labeled set, runs the per-member MBO
/// loops from one shared initialization, concatenates the outputs, and
/// scores a forest on the unlabeled rows. A failing trial is recorded and
/// the remaining trials continue.
inline RunReport run_classification(const Dataset& data, const RunConfig& cfg) {
    using clock = std::chrono::steady_clock;
    const auto seconds = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double>(b - a).count();
    };
    const auto t_start = clock::now();

    cfg.validate();
    data.validate();
    const int n = data.size();
    const int k = data.num_classes();
    if (k < 2)
        throw std::invalid_argument("run_classification: need ground-truth labels with >= 2 classes");
    for (int i = 0; i < n; ++i)
        if (data.labels[i] < 0)
            throw std::invalid_argument("run_classification: point " + std::to_string(i) +
                                        " lacks a ground-truth label (required for scoring)");
    if (cfg.n_labeled >= n)
        throw std::invalid_argument("run_classification: n_labeled must leave unlabeled points to score");

    RunReport report;
    report.config_echo = config_to_json(cfg);
    report.dataset_name = data.name;
    report.n_points = n;
    report.dim = data.dim();
    report.n_classes = k;

    // Graph, base Laplacian, family.
    const Metric metric = metric_from_string(cfg.metric);
    const std::vector<NeighborPair> pairs = knn_graph(data, cfg.n_n, metric);
    double sigma = 0.0;
    if (cfg.sigma) {
        sigma = *cfg.sigma;
    } else {
        sigma = median_pair_distance(pairs);
        if (sigma <= 0.0)
            throw std::invalid_argument(
                "run_classification: median neighbor distance is 0 (duplicate-heavy data); "
                "set sigma explicitly");
    }
    const SimilarityGraph graph = gaussian_weights(pairs, n, cfg.n_n, sigma);
    const SparseSymMatrix laplacian = symmetric_laplacian(graph);
    const LaplacianFamily family =
        build_family(laplacian, cfg.l_n, cfg.include_last, cfg.invert_threshold);
    report.n_edges = static_cast<int>(pairs.size());
    report.sigma_used = sigma;
    report.degenerate_family = family.degenerate;
    report.n_members = static_cast<int>(family.members.size());
    const auto t_graph = clock::now();
    report.timings.graph_s = seconds(t_start, t_graph);

    // Truncated eigenbases, one per member, shared by all trials. The
    // request is clamped into [1, N-1], so the default 50 resolves to
    // min(50, N-1).
    const int n_e = std::max(1, std::min(cfg.n_e, n - 1));
    std::vector<EigenBasis> bases(family.members.size());
    parallel_for(static_cast<int>(family.members.size()),
                 [&](int m) { bases[m] = smallest_eigenpairs(family.members[m], n_e); });
    const auto t_eigen = clock::now();
    report.timings.eigen_s = seconds(t_graph, t_eigen);

    TrialPlan plan;
    plan.n_labeled = cfg.n_labeled;
    plan.n_trials = cfg.n_trials;
    plan.seed = cfg.seed;
    plan.per_class_balance = cfg.balanced_labels;

    MboConfig mbo_cfg;
    mbo_cfg.dt = cfg.dt;
    mbo_cfg.n_t = cfg.n_t;
    mbo_cfg.n_e = n_e;
    mbo_cfg.epsilon = cfg.epsilon;
    mbo_cfg.init_mode = init_mode_from_string(cfg.init_mode);

    double sum = 0.0, sum_sq = 0.0;
    for (int t = 0; t < cfg.n_trials; ++t) {
        TrialResult trial;
        trial.trial = t;
        try {
            const std::vector<char> mask = sample_labels(data, plan, t);
            std::vector<int> masked(n, -1);
            for (int i = 0; i < n; ++i)
                if (mask[i]) masked[i] = data.labels[i];
            const FidelitySpec fid = make_fidelity(masked, k, cfg.mu);

            MboConfig trial_cfg = mbo_cfg;
            trial_cfg.seed = derive_seed(cfg.seed, 0x4d626f00ULL + static_cast<std::uint64_t>(t));
            const DenseMatrix u0 = initialize_state(fid, data, trial_cfg);
            for (int i = 0; i < n; ++i)
                if (mask[i])
                    for (int c = 0; c < k; ++c)
                        if (u0.at(i, c) != fid.u_labeled.at(i, c)) ++report.contract_violations;

            std::vector<DenseMatrix> outputs(family.members.size());
            trial.mbo_iterations.assign(family.members.size(), 0);
            parallel_for(static_cast<int>(family.members.size()), [&](int m) {
                MboResult res = mbo_iterate_from(u0, bases[m], fid, trial_cfg);
                outputs[m] = std::move(res.u);
                trial.mbo_iterations[m] = res.iterations;
            });
            for (const DenseMatrix& u : outputs)
                for (int i = 0; i < u.rows; ++i) {
                    int ones = 0;
                    bool clean = true;
                    for (int c = 0; c < u.cols; ++c) {
                        if (u.at(i, c) == 1.0)
                            ++ones;
                        else if (u.at(i, c) != 0.0)
                            clean = false;
                    }
                    if (ones != 1 || !clean) ++report.contract_violations;
                }

            const EnsembleFeatures feats =
                concatenate_outputs(outputs, k);
            const LabeledSplit split = split_by_mask(feats, data.labels, mask);
            ForestParams fp = cfg.forest;
            fp.seed = derive_seed(cfg.forest.seed, static_cast<std::uint64_t>(t));
            const ForestModel model = forest_fit(split.train_x, split.train_y, fp, split.train_ids);
            const std::vector<int> pred = forest_predict(model, split.test_x);
            trial.accuracy = accuracy(pred, split.test_truth);
            trial.ok = true;
            sum += trial.accuracy;
            sum_sq += trial.accuracy * trial.accuracy;
            ++report.n_ok;
        } catch (const std::exception& e) {
            trial.ok = false;
            trial.message = e.what();
            ++report.n_failed;
        }
        report.trials.push_back(std::move(trial));
    }
    const auto t_trials = clock::now();
    report.timings.trials_s = seconds(t_eigen, t_trials);

    if (report.n_ok > 0) {
        report.mean_accuracy = sum / report.n_ok;
        const double var = std::max(0.0, sum_sq / report.n_ok - report.mean_accuracy * report.mean_accuracy);
        report.std_accuracy = std::sqrt(var);
    }
    report.timings.total_s = seconds(t_start, clock::now());
    return report;
}

/// Resolve the configured data source (CSV path or generator) and run.
inline RunReport run_from_config(const RunConfig& cfg) {
    cfg.validate();
    const Dataset data = cfg.generator ? generate(*cfg.generator) : load_csv(cfg.dataset);
    return run_classification(data, cfg);
}

}  // namespace plmbo
