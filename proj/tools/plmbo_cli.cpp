// Command-line front end: synthetic data generation, end-to-end
// classification runs, filtration spectra, and hyperparameter sweeps.
//
// Exit codes: 0 success, 2 usage/config error, 3 runtime/numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "plmbo/csv_io.hpp"
#include "plmbo/pipeline.hpp"
#include "plmbo/simplicial.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::string manifest_path_for(const std::string& csv_path) {
    std::filesystem::path p(csv_path);
    p.replace_extension();
    return p.string() + ".manifest.json";
}

/// Generated CSVs carry a sidecar manifest echoing the generator so runs are
/// reproducible from the file alone.
void emit_dataset(const plmbo::Dataset& data, const plmbo::GeneratorSpec& spec,
                  const std::string& out_path) {
    plmbo::save_csv(data, out_path);
    nlohmann::json manifest;
    manifest["generator"] = plmbo::generator_to_json(spec);
    manifest["n_points"] = data.size();
    manifest["dim"] = data.dim();
    manifest["csv"] = std::filesystem::path(out_path).filename().string();
    write_text(manifest_path_for(out_path), manifest.dump(2) + "\n");
    std::cerr << "wrote " << data.size() << " points to " << out_path << " (+ manifest)\n";
}

struct ClassifyFlags {
    std::string config_path;
    std::string dataset;
    std::string metric;
    int n_n = 0;
    std::string sigma;
    int l_n = 0;
    bool include_last = false;
    bool invert_threshold = false;
    int n_e = 0;
    double dt = 0.0;
    double mu = 0.0;
    int n_t = 0;
    double epsilon = 0.0;
    std::string init_mode;
    int n_labeled = 0;
    int n_trials = 0;
    bool balanced = true;
    std::uint64_t seed = 0;
    int trees = 0, max_depth = 0, min_leaf = 0;
    std::uint64_t forest_seed = 0;
    std::string output;
};

/// Shared classify/bench options. Flags override config-file values; the
/// generator source is config-file only.
void add_classify_options(CLI::App* cmd, ClassifyFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file (flags override its values)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--dataset", f.dataset, "labeled dataset CSV");
    cmd->add_option("--metric", f.metric, "euclidean | cosine");
    cmd->add_option("--n-n", f.n_n, "nearest-neighbor count");
    cmd->add_option("--sigma", f.sigma, "Gaussian weight scale, or 'auto'");
    cmd->add_option("--l-n", f.l_n, "family ladder size");
    cmd->add_flag("--include-last,!--no-include-last", f.include_last,
                  "keep the always-zero last family member");
    cmd->add_flag("--invert-threshold,!--no-invert-threshold", f.invert_threshold,
                  "zero weakest (instead of strongest) entries first");
    cmd->add_option("--n-e", f.n_e, "eigenpairs per member");
    cmd->add_option("--dt", f.dt, "diffusion step");
    cmd->add_option("--mu", f.mu, "fidelity strength");
    cmd->add_option("--n-t", f.n_t, "max MBO iterations");
    cmd->add_option("--epsilon", f.epsilon, "energy interface width (monitoring)");
    cmd->add_option("--init-mode", f.init_mode, "random | voronoi");
    cmd->add_option("--n-labeled", f.n_labeled, "labeled points per trial");
    cmd->add_option("--n-trials", f.n_trials, "trial count");
    cmd->add_flag("--balanced,!--unbalanced", f.balanced, "stratify the label budget per class");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--trees", f.trees, "forest size");
    cmd->add_option("--max-depth", f.max_depth, "tree depth cap");
    cmd->add_option("--min-leaf", f.min_leaf, "minimum leaf size");
    cmd->add_option("--forest-seed", f.forest_seed, "forest seed");
    cmd->add_option("-o,--output", f.output, "report path (default: stdout)");
}

plmbo::RunConfig resolve_config(const CLI::App* cmd, const ClassifyFlags& f) {
    plmbo::RunConfig cfg;
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw std::invalid_argument("cannot open config '" + f.config_path + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("config '" + f.config_path + "': " + e.what());
        }
        cfg = plmbo::config_from_json(j);
    }
    const auto passed = [&](const std::string& name) { return cmd->count(name) > 0; };
    if (passed("--dataset")) {
        cfg.dataset = f.dataset;
        cfg.generator.reset();
    }
    if (passed("--metric")) cfg.metric = f.metric;
    if (passed("--n-n")) cfg.n_n = f.n_n;
    if (passed("--sigma")) {
        if (f.sigma == "auto") {
            cfg.sigma.reset();
        } else {
            try {
                std::size_t used = 0;
                cfg.sigma = std::stod(f.sigma, &used);
                if (used != f.sigma.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw std::invalid_argument("--sigma expects a number or 'auto', got '" + f.sigma +
                                            "'");
            }
        }
    }
    if (passed("--l-n")) cfg.l_n = f.l_n;
    if (passed("--include-last")) cfg.include_last = f.include_last;
    if (passed("--invert-threshold")) cfg.invert_threshold = f.invert_threshold;
    if (passed("--n-e")) cfg.n_e = f.n_e;
    if (passed("--dt")) cfg.dt = f.dt;
    if (passed("--mu")) cfg.mu = f.mu;
    if (passed("--n-t")) cfg.n_t = f.n_t;
    if (passed("--epsilon")) cfg.epsilon = f.epsilon;
    if (passed("--init-mode")) cfg.init_mode = f.init_mode;
    if (passed("--n-labeled")) cfg.n_labeled = f.n_labeled;
    if (passed("--n-trials")) cfg.n_trials = f.n_trials;
    if (passed("--balanced")) cfg.balanced_labels = f.balanced;
    if (passed("--seed")) cfg.seed = f.seed;
    if (passed("--trees")) cfg.forest.n_trees = f.trees;
    if (passed("--max-depth")) cfg.forest.max_depth = f.max_depth;
    if (passed("--min-leaf")) cfg.forest.min_leaf = f.min_leaf;
    if (passed("--forest-seed")) cfg.forest.seed = f.forest_seed;
    if (passed("--output")) cfg.output = f.output;
    return cfg;
}

void emit_report(const plmbo::RunReport& report, const std::string& output) {
    const std::string text = plmbo::report_to_json(report).dump(2) + "\n";
    if (output.empty()) {
        std::cout << text;
    } else {
        write_text(output, text);
        std::cerr << "report written to " << output << "\n";
    }
    char line[160];
    std::snprintf(line, sizeof(line),
                  "mean accuracy %.4f (std %.4f) over %d trial(s), %d failed\n",
                  report.mean_accuracy, report.std_accuracy, report.n_ok, report.n_failed);
    std::cerr << line;
}

int run_classify(const CLI::App* cmd, const ClassifyFlags& flags) {
    const plmbo::RunConfig cfg = resolve_config(cmd, flags);
    const plmbo::RunReport report = plmbo::run_from_config(cfg);
    emit_report(report, cfg.output);
    return 0;
}

int run_filtration(const std::string& points_path, double r_min, double r_max, double r_step,
                   const std::string& output) {
    if (r_step <= 0.0) throw std::invalid_argument("--r-step must be positive");
    if (r_max < r_min) throw std::invalid_argument("--r-max must be >= --r-min");
    const plmbo::Dataset data = plmbo::load_csv(points_path);
    if (data.dim() != 2 && data.dim() != 3)
        throw std::invalid_argument("filtration expects 2-D or 3-D points, got " +
                                    std::to_string(data.dim()) + "-D");
    if (data.size() > 200)
        throw std::invalid_argument("filtration caps at 200 points, got " +
                                    std::to_string(data.size()));
    std::vector<double> grid;
    for (double r = r_min; r <= r_max + 1e-12; r += r_step) grid.push_back(r);
    if (grid.empty()) throw std::invalid_argument("empty radius grid");

    const auto curves = plmbo::spectra_curves(data.features, grid, 1);
    std::ostringstream out;
    out << "radius,beta0,beta1,lambda0,lambda1\n";
    char buf[64];
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const plmbo::PersistentSpectrum& s0 = curves[0][i];
        const plmbo::PersistentSpectrum& s1 = curves[1][i];
        std::snprintf(buf, sizeof(buf), "%.17g", grid[i]);
        out << buf << ',' << s0.betti << ',' << s1.betti << ',';
        if (s0.lambda_min_nonzero) {
            std::snprintf(buf, sizeof(buf), "%.17g", *s0.lambda_min_nonzero);
            out << buf;
        }
        out << ',';
        if (s1.lambda_min_nonzero) {
            std::snprintf(buf, sizeof(buf), "%.17g", *s1.lambda_min_nonzero);
            out << buf;
        }
        out << '\n';
    }
    if (output.empty()) {
        std::cout << out.str();
    } else {
        write_text(output, out.str());
        std::cerr << "spectra written to " << output << "\n";
    }
    return 0;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw std::invalid_argument("bad integer '" + item + "' in sweep list");
        }
    }
    return values;
}

int run_bench(const CLI::App* cmd, const ClassifyFlags& flags, const std::string& sweep_n_labeled,
              const std::string& sweep_l_n, const std::string& out_dir) {
    const plmbo::RunConfig base = resolve_config(cmd, flags);
    std::vector<int> n_labeled_values =
        sweep_n_labeled.empty() ? std::vector<int>{base.n_labeled} : parse_int_list(sweep_n_labeled);
    std::vector<int> l_n_values =
        sweep_l_n.empty() ? std::vector<int>{base.l_n} : parse_int_list(sweep_l_n);
    if (n_labeled_values.empty() || l_n_values.empty())
        throw std::invalid_argument("sweep lists must not be empty");

    std::filesystem::create_directories(out_dir);
    // One dataset shared by every cell.
    const plmbo::Dataset data =
        base.generator ? plmbo::generate(*base.generator) : plmbo::load_csv(base.dataset);

    std::ostringstream table;
    table << "n_labeled,l_n,mean_accuracy,std_accuracy,n_trials_ok,n_trials_failed\n";
    for (int nl : n_labeled_values)
        for (int ln : l_n_values) {
            plmbo::RunConfig cell = base;
            cell.n_labeled = nl;
            cell.l_n = ln;
            const plmbo::RunReport report = plmbo::run_classification(data, cell);
            const std::string name =
                "report_nl" + std::to_string(nl) + "_ln" + std::to_string(ln) + ".json";
            write_text((std::filesystem::path(out_dir) / name).string(),
                       plmbo::report_to_json(report).dump(2) + "\n");
            char row[128];
            std::snprintf(row, sizeof(row), "%d,%d,%.17g,%.17g,%d,%d\n", nl, ln,
                          report.mean_accuracy, report.std_accuracy, report.n_ok,
                          report.n_failed);
            table << row;
            std::cerr << "cell n_labeled=" << nl << " l_n=" << ln << ": mean accuracy "
                      << report.mean_accuracy << "\n";
        }
    const std::string table_path = (std::filesystem::path(out_dir) / "bench_summary.csv").string();
    write_text(table_path, table.str());
    std::cerr << "sweep table written to " << table_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"persistent-Laplacian MBO semi-supervised classifier"};
    app.require_subcommand(1);

    // gen
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset CSV");
    gen->require_subcommand(1);
    plmbo::GeneratorSpec tg_spec;
    tg_spec.kind = "two-gaussians";
    std::string tg_out = "two-gaussians.csv";
    CLI::App* gen_tg =
        gen->add_subcommand("two-gaussians", "two isotropic Gaussians at a set Bayes error");
    gen_tg->add_option("--n", tg_spec.n, "point count")->required();
    gen_tg->add_option("--dim", tg_spec.dim, "feature dimension");
    gen_tg->add_option("--bayes-error", tg_spec.bayes_error, "Bayes error in (0, 0.5)");
    gen_tg->add_option("--seed", tg_spec.seed, "generator seed");
    gen_tg->add_option("-o,--output", tg_out, "output CSV path");

    plmbo::GeneratorSpec ba_spec;
    ba_spec.kind = "banana";
    std::string ba_out = "banana.csv";
    CLI::App* gen_ba = gen->add_subcommand("banana", "two jittered crescents in the plane");
    gen_ba->add_option("--n", ba_spec.n, "point count")->required();
    gen_ba->add_option("--noise", ba_spec.noise, "jitter standard deviation");
    gen_ba->add_option("--seed", ba_spec.seed, "generator seed");
    gen_ba->add_option("-o,--output", ba_out, "output CSV path");

    // classify
    CLI::App* classify =
        app.add_subcommand("classify", "run repeated-trial classification and report accuracy");
    ClassifyFlags classify_flags;
    add_classify_options(classify, classify_flags);

    // filtration
    CLI::App* filtration =
        app.add_subcommand("filtration", "Betti/spectra curves over a radius grid");
    std::string filt_points, filt_out;
    double r_min = 0.0, r_max = 0.0, r_step = 0.05;
    filtration->add_option("--points", filt_points, "2-D/3-D point CSV (max 200 points)")
        ->required()
        ->check(CLI::ExistingFile);
    filtration->add_option("--r-min", r_min, "grid start");
    filtration->add_option("--r-max", r_max, "grid end")->required();
    filtration->add_option("--r-step", r_step, "grid step");
    filtration->add_option("-o,--output", filt_out, "output CSV path (default: stdout)");

    // bench
    CLI::App* bench = app.add_subcommand("bench", "sweep n_labeled and/or l_n");
    ClassifyFlags bench_flags;
    add_classify_options(bench, bench_flags);
    std::string sweep_nl, sweep_ln, bench_dir = "bench_out";
    bench->add_option("--sweep-n-labeled", sweep_nl, "comma list of label budgets");
    bench->add_option("--sweep-l-n", sweep_ln, "comma list of family sizes");
    bench->add_option("--out-dir", bench_dir, "directory for per-cell reports");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen_tg->parsed()) {
            emit_dataset(plmbo::generate(tg_spec), tg_spec, tg_out);
            return 0;
        }
        if (gen_ba->parsed()) {
            emit_dataset(plmbo::generate(ba_spec), ba_spec, ba_out);
            return 0;
        }
        if (classify->parsed()) return run_classify(classify, classify_flags);
        if (filtration->parsed()) return run_filtration(filt_points, r_min, r_max, r_step, filt_out);
        if (bench->parsed()) return run_bench(bench, bench_flags, sweep_nl, sweep_ln, bench_dir);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
