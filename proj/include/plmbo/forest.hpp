#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "plmbo/matrix.hpp"
#include "plmbo/rng.hpp"

namespace plmbo {

struct ForestParams {
    int n_trees = 100;
    int max_depth = 8;
    int min_leaf = 1;
    std::uint64_t seed = 1;

    void validate() const {
        if (n_trees < 1) throw std::invalid_argument("ForestParams: n_trees must be >= 1");
        if (max_depth < 1) throw std::invalid_argument("ForestParams: max_depth must be >= 1");
        if (min_leaf < 1) throw std::invalid_argument("ForestParams: min_leaf must be >= 1");
    }
};

/// Axis-aligned split node. Leaves have feature = -1 and a class id; internal
/// nodes route value <= threshold left, else right.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf_class = -1;
};

struct ForestModel {
    std::vector<std::vector<TreeNode>> trees;
    ForestParams params;
    int n_features = 0;
    int n_classes = 0;
};

namespace detail {

inline int majority_class(const std::vector<int>& counts) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(counts.size()); ++c)
        if (counts[c] > counts[best]) best = c;
    return best;
}

inline double gini(const std::vector<int>& counts, int total) {
    if (total == 0) return 0.0;
    double sum_sq = 0.0;
    for (int c : counts) {
        const double p = static_cast<double>(c) / total;
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

/// Grow one tree on the bootstrap sample (indices into x/y, duplicates
/// allowed). Splits greedily by weighted-Gini decrease over `mtry` randomly
/// drawn features, thresholds at midpoints of consecutive distinct values.
class TreeBuilder {
public:
    TreeBuilder(const DenseMatrix& x, const std::vector<int>& y, int n_classes,
                const ForestParams& p, int mtry, Rng& rng)
        : x_(x), y_(y), n_classes_(n_classes), params_(p), mtry_(mtry), rng_(rng) {}

    std::vector<TreeNode> build(std::vector<int> sample) {
        nodes_.clear();
        grow(std::move(sample), 0);
        return std::move(nodes_);
    }

private:
    int leaf(const std::vector<int>& counts) {
        TreeNode node;
        node.leaf_class = majority_class(counts);
        nodes_.push_back(node);
        return static_cast<int>(nodes_.size()) - 1;
    }

    int grow(std::vector<int> sample, int depth) {
        std::vector<int> counts(n_classes_, 0);
        for (int idx : sample) ++counts[y_[idx]];
        const int total = static_cast<int>(sample.size());
        const bool pure = *std::max_element(counts.begin(), counts.end()) == total;
        if (pure || depth >= params_.max_depth || total < 2 * params_.min_leaf)
            return leaf(counts);

        // Feature subsample: deterministic prefix shuffle of [0, F).
        std::vector<int> features(x_.cols);
        std::iota(features.begin(), features.end(), 0);
        rng_.partial_shuffle(features, mtry_);
        features.resize(mtry_);

        const double parent_score = gini(counts, total) * total;
        int best_feature = -1;
        double best_threshold = 0.0, best_score = parent_score;
        for (int f : features) {
            std::vector<std::pair<double, int>> vals;  // (value, class)
            vals.reserve(sample.size());
            for (int idx : sample) vals.emplace_back(x_.at(idx, f), y_[idx]);
            std::sort(vals.begin(), vals.end());
            std::vector<int> left_counts(n_classes_, 0);
            std::vector<int> right_counts = counts;
            for (int t = 0; t + 1 < total; ++t) {
                ++left_counts[vals[t].second];
                --right_counts[vals[t].second];
                if (vals[t].first == vals[t + 1].first) continue;  // not a boundary
                const int n_left = t + 1, n_right = total - n_left;
                if (n_left < params_.min_leaf || n_right < params_.min_leaf) continue;
                const double score =
                    gini(left_counts, n_left) * n_left + gini(right_counts, n_right) * n_right;
                if (score < best_score) {
                    best_score = score;
                    best_feature = f;
                    best_threshold = 0.5 * (vals[t].first + vals[t + 1].first);
                }
            }
        }
        if (best_feature < 0) return leaf(counts);  // no impurity-reducing split

        std::vector<int> left_sample, right_sample;
        for (int idx : sample)
            (x_.at(idx, best_feature) <= best_threshold ? left_sample : right_sample)
                .push_back(idx);
        if (left_sample.empty() || right_sample.empty()) return leaf(counts);

        const int self = static_cast<int>(nodes_.size());
        TreeNode node;
        node.feature = best_feature;
        node.threshold = best_threshold;
        nodes_.push_back(node);
        const int l = grow(std::move(left_sample), depth + 1);
        const int r = grow(std::move(right_sample), depth + 1);
        nodes_[self].left = l;
        nodes_[self].right = r;
        return self;
    }

    const DenseMatrix& x_;
    const std::vector<int>& y_;
    int n_classes_;
    const ForestParams& params_;
    int mtry_;
    Rng& rng_;
    std::vector<TreeNode> nodes_;
};

inline int tree_predict(const std::vector<TreeNode>& tree, const double* row) {
    int at = 0;
    while (tree[at].feature >= 0)
        at = row[tree[at].feature] <= tree[at].threshold ? tree[at].left : tree[at].right;
    return tree[at].leaf_class;
}

}  // namespace detail

/// Bootstrap forest with sqrt-of-F feature subsampling and Gini splits.
/// Per-tree randomness comes from derive_seed(params.seed, tree index), so
/// serial and parallel training build identical trees. When `row_ids` is
/// given (original dataset positions of the training rows), samples are
/// first sorted by id, making the model invariant to the presentation order
/// of the training set. A single-class training set yields constant trees.
inline ForestModel forest_fit(const DenseMatrix& x, const std::vector<int>& y,
                              const ForestParams& params,
                              const std::vector<int>& row_ids = {}) {
    params.validate();
    if (x.rows == 0) throw std::invalid_argument("forest_fit: empty training set");
    if (static_cast<int>(y.size()) != x.rows)
        throw std::invalid_argument("forest_fit: label count != row count");
    if (!row_ids.empty() && static_cast<int>(row_ids.size()) != x.rows)
        throw std::invalid_argument("forest_fit: row_ids length != row count");
    int n_classes = 0;
    for (int label : y) {
        if (label < 0) throw std::invalid_argument("forest_fit: negative label");
        n_classes = std::max(n_classes, label + 1);
    }

    // Canonical sample order: by original row id when provided.
    std::vector<int> order(x.rows);
    std::iota(order.begin(), order.end(), 0);
    if (!row_ids.empty())
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return row_ids[a] < row_ids[b]; });
    DenseMatrix xs(x.rows, x.cols);
    std::vector<int> ys(x.rows);
    for (int i = 0; i < x.rows; ++i) {
        for (int c = 0; c < x.cols; ++c) xs.at(i, c) = x.at(order[i], c);
        ys[i] = y[order[i]];
    }

    ForestModel model;
    model.params = params;
    model.n_features = x.cols;
    model.n_classes = n_classes;
    model.trees.resize(params.n_trees);
    const int mtry =
        std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(x.cols)))));
    for (int t = 0; t < params.n_trees; ++t) {
        Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(t)));
        std::vector<int> sample(x.rows);
        for (int i = 0; i < x.rows; ++i)
            sample[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(x.rows)));
        detail::TreeBuilder builder(xs, ys, n_classes, params, mtry, rng);
        model.trees[t] = builder.build(std::move(sample));
    }
    return model;
}

/// Majority vote across trees; vote ties go to the lower class id.
inline std::vector<int> forest_predict(const ForestModel& model, const DenseMatrix& x) {
    if (x.cols != model.n_features)
        throw std::invalid_argument("forest_predict: feature count " + std::to_string(x.cols) +
                                    " != model's " + std::to_string(model.n_features));
    std::vector<int> pred(x.rows);
    std::vector<int> votes(model.n_classes);
    for (int i = 0; i < x.rows; ++i) {
        std::fill(votes.begin(), votes.end(), 0);
        for (const auto& tree : model.trees) ++votes[detail::tree_predict(tree, x.row_ptr(i))];
        pred[i] = detail::majority_class(votes);
    }
    return pred;
}

/// JSON form: {"n_features", "n_classes", "params": {...}, "trees": [[node...]]}
/// with each node as {"feature", "threshold", "left", "right", "leaf_class"}.
inline nlohmann::json forest_to_json(const ForestModel& model) {
    nlohmann::json j;
    j["n_features"] = model.n_features;
    j["n_classes"] = model.n_classes;
    j["params"] = {{"n_trees", model.params.n_trees},
                   {"max_depth", model.params.max_depth},
                   {"min_leaf", model.params.min_leaf},
                   {"seed", model.params.seed}};
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const TreeNode& n : tree)
            nodes.push_back({{"feature", n.feature},
                             {"threshold", n.threshold},
                             {"left", n.left},
                             {"right", n.right},
                             {"leaf_class", n.leaf_class}});
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j;
}

inline ForestModel forest_from_json(const nlohmann::json& j) {
    ForestModel model;
    model.n_features = j.at("n_features").get<int>();
    model.n_classes = j.at("n_classes").get<int>();
    const auto& p = j.at("params");
    model.params.n_trees = p.at("n_trees").get<int>();
    model.params.max_depth = p.at("max_depth").get<int>();
    model.params.min_leaf = p.at("min_leaf").get<int>();
    model.params.seed = p.at("seed").get<std::uint64_t>();
    for (const auto& tree : j.at("trees")) {
        std::vector<TreeNode> nodes;
        nodes.reserve(tree.size());
        for (const auto& n : tree) {
            TreeNode node;
            node.feature = n.at("feature").get<int>();
            node.threshold = n.at("threshold").get<double>();
            node.left = n.at("left").get<int>();
            node.right = n.at("right").get<int>();
            node.leaf_class = n.at("leaf_class").get<int>();
            nodes.push_back(node);
        }
        model.trees.push_back(std::move(nodes));
    }
    return model;
}

}  // namespace plmbo
