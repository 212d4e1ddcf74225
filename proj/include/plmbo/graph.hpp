#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "plmbo/dataset.hpp"
#include "plmbo/matrix.hpp"

namespace plmbo {

enum class Metric { euclidean, cosine };

inline Metric metric_from_string(const std::string& s) {
    if (s == "euclidean") return Metric::euclidean;
    if (s == "cosine") return Metric::cosine;
    throw std::invalid_argument("unknown metric '" + s + "' (expected euclidean or cosine)");
}

/// Undirected neighbor edge with i < j and the metric distance between the
/// endpoints.
struct NeighborPair {
    int i, j;
    double dist;
};

namespace detail {

/// Squared Euclidean distance, accumulated in fixed feature order so the
/// brute-force and tree-based paths agree bit for bit.
inline double sq_euclidean(const DenseMatrix& x, int a, int b) {
    const double* pa = x.row_ptr(a);
    const double* pb = x.row_ptr(b);
    double s = 0.0;
    for (int c = 0; c < x.cols; ++c) {
        const double d = pa[c] - pb[c];
        s += d * d;
    }
    return s;
}

/// Cosine distance 1 - cos(angle). Throws on a zero vector, where the angle
/// is undefined.
inline double cosine_dist(const DenseMatrix& x, int a, int b) {
    const double* pa = x.row_ptr(a);
    const double* pb = x.row_ptr(b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int c = 0; c < x.cols; ++c) {
        dot += pa[c] * pb[c];
        na += pa[c] * pa[c];
        nb += pb[c] * pb[c];
    }
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("cosine metric undefined for zero vector (point " +
                                    std::to_string(na == 0.0 ? a : b) + ")");
    return 1.0 - dot / std::sqrt(na * nb);
}

/// Candidate ordered by (key, index); `key` is the squared distance for the
/// Euclidean metric so both search paths rank identically.
struct Candidate {
    double key;
    int index;
    bool operator<(const Candidate& o) const {
        return key != o.key ? key < o.key : index < o.index;
    }
};

/// Per-point k nearest others by exhaustive scan. Returns candidates sorted
/// ascending by (key, index).
inline std::vector<Candidate> knn_point_brute(const DenseMatrix& x, int i, int n_n, Metric metric) {
    std::vector<Candidate> cand;
    cand.reserve(x.rows - 1);
    for (int j = 0; j < x.rows; ++j) {
        if (j == i) continue;
        const double key = metric == Metric::euclidean ? sq_euclidean(x, i, j) : cosine_dist(x, i, j);
        cand.push_back({key, j});
    }
    std::partial_sort(cand.begin(), cand.begin() + n_n, cand.end());
    cand.resize(n_n);
    return cand;
}

/// Static kd-tree over the rows of a coordinate matrix; exact k-nearest
/// queries with (distance, index) tie-breaking identical to the brute path.
class KdTree {
public:
    explicit KdTree(const DenseMatrix& points) : x_(points) {
        perm_.resize(x_.rows);
        for (int i = 0; i < x_.rows; ++i) perm_[i] = i;
        nodes_.reserve(static_cast<std::size_t>(x_.rows));
        root_ = build(0, x_.rows, 0);
    }

    /// k nearest rows to row `query`, excluding the query row itself; sorted
    /// ascending by (squared distance, index).
    std::vector<Candidate> query_knn(int query, int k) const {
        Heap heap;
        search(root_, query, k, heap);
        std::vector<Candidate> out(heap.size());
        for (int t = static_cast<int>(out.size()) - 1; t >= 0; --t) {
            out[t] = heap.top();
            heap.pop();
        }
        return out;
    }

private:
    struct Node {
        int axis = -1;       // split axis; -1 marks a leaf
        double split = 0.0;  // coordinate of the split point on axis
        int point = -1;      // row stored at this node
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf: range into perm_
    };
    // worst candidate on top
    using Heap = std::priority_queue<Candidate>;

    static constexpr int kLeafSize = 12;

    int build(int begin, int end, int depth) {
        if (end - begin <= kLeafSize) {
            Node leaf;
            leaf.begin = begin;
            leaf.end = end;
            nodes_.push_back(leaf);
            return static_cast<int>(nodes_.size()) - 1;
        }
        const int axis = widest_axis(begin, end);
        const int mid = begin + (end - begin) / 2;
        std::nth_element(perm_.begin() + begin, perm_.begin() + mid, perm_.begin() + end,
                         [&](int a, int b) {
                             const double ca = x_.at(a, axis), cb = x_.at(b, axis);
                             return ca != cb ? ca < cb : a < b;
                         });
        Node node;
        node.axis = axis;
        node.point = perm_[mid];
        node.split = x_.at(node.point, axis);
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        const int left = build(begin, mid, depth + 1);
        const int right = build(mid + 1, end, depth + 1);
        nodes_[self].left = left;
        nodes_[self].right = right;
        return self;
    }

    int widest_axis(int begin, int end) const {
        int best = 0;
        double best_spread = -1.0;
        for (int c = 0; c < x_.cols; ++c) {
            double lo = x_.at(perm_[begin], c), hi = lo;
            for (int t = begin + 1; t < end; ++t) {
                const double v = x_.at(perm_[t], c);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                best = c;
            }
        }
        return best;
    }

    void offer(int query, int k, int point, Heap& heap) const {
        if (point == query) return;
        const Candidate c{sq_euclidean(x_, query, point), point};
        if (static_cast<int>(heap.size()) < k) {
            heap.push(c);
        } else if (c < heap.top()) {
            heap.pop();
            heap.push(c);
        }
    }

    void search(int node_id, int query, int k, Heap& heap) const {
        const Node& node = nodes_[node_id];
        if (node.axis < 0) {
            for (int t = node.begin; t < node.end; ++t) offer(query, k, perm_[t], heap);
            return;
        }
        offer(query, k, node.point, heap);
        const double delta = x_.at(query, node.axis) - node.split;
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        search(near, query, k, heap);
        // Visit the far side unless every point there is strictly worse than
        // the current worst candidate. Equality must recurse: an equidistant
        // point with a lower index still wins the tie-break.
        if (static_cast<int>(heap.size()) < k || delta * delta <= heap.top().key)
            search(far, query, k, heap);
    }

    const DenseMatrix& x_;
    std::vector<int> perm_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

inline std::vector<NeighborPair> symmetrize_union(const std::vector<std::vector<Candidate>>& per_point,
                                                  Metric metric) {
    std::vector<NeighborPair> edges;
    for (int i = 0; i < static_cast<int>(per_point.size()); ++i)
        for (const Candidate& c : per_point[i]) {
            const int a = std::min(i, c.index), b = std::max(i, c.index);
            const double d = metric == Metric::euclidean ? std::sqrt(c.key) : c.key;
            edges.push_back({a, b, d});
        }
    std::sort(edges.begin(), edges.end(), [](const NeighborPair& p, const NeighborPair& q) {
        return p.i != q.i ? p.i < q.i : p.j < q.j;
    });
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](const NeighborPair& p, const NeighborPair& q) {
                                return p.i == q.i && p.j == q.j;
                            }),
                edges.end());
    return edges;
}

}  // namespace detail

/// n_n-nearest-neighbor edges, symmetrized by union: the pair (i,j) is kept
/// when either endpoint ranks the other among its n_n nearest. Exhaustive
/// exact search; ties at the cutoff go to the lower index.
inline std::vector<NeighborPair> knn_graph_brute(const Dataset& data, int n_n, Metric metric) {
    data.validate();
    const int n = data.size();
    if (n_n < 1 || n_n >= n)
        throw std::invalid_argument("knn_graph: n_n must satisfy 1 <= n_n < N (got " +
                                    std::to_string(n_n) + " for N = " + std::to_string(n) + ")");
    std::vector<std::vector<detail::Candidate>> per_point(n);
    for (int i = 0; i < n; ++i)
        per_point[i] = detail::knn_point_brute(data.features, i, n_n, metric);
    return detail::symmetrize_union(per_point, metric);
}

/// Same contract and same result as knn_graph_brute, via a kd-tree. The tree
/// only accelerates the Euclidean metric; cosine queries fall through to the
/// exhaustive scan.
inline std::vector<NeighborPair> knn_graph_kdtree(const Dataset& data, int n_n, Metric metric) {
    if (metric != Metric::euclidean) return knn_graph_brute(data, n_n, metric);
    data.validate();
    const int n = data.size();
    if (n_n < 1 || n_n >= n)
        throw std::invalid_argument("knn_graph: n_n must satisfy 1 <= n_n < N (got " +
                                    std::to_string(n_n) + " for N = " + std::to_string(n) + ")");
    detail::KdTree tree(data.features);
    std::vector<std::vector<detail::Candidate>> per_point(n);
    for (int i = 0; i < n; ++i) per_point[i] = tree.query_knn(i, n_n);
    return detail::symmetrize_union(per_point, Metric::euclidean);
}

/// Dispatch: the kd-tree pays off for low-dimensional Euclidean data; high
/// dimensions scan exhaustively.
inline std::vector<NeighborPair> knn_graph(const Dataset& data, int n_n, Metric metric) {
    if (metric == Metric::euclidean && data.dim() <= 8 && data.size() > 256)
        return knn_graph_kdtree(data, n_n, metric);
    return knn_graph_brute(data, n_n, metric);
}

/// Similarity graph: Gaussian weights on the retained neighbor pairs.
struct SimilarityGraph {
    SparseSymMatrix weights;
    int n_neighbors = 0;
    double sigma = 0.0;
};

/// Median distance over the retained neighbor pairs; the scale-aware default
/// for sigma. Even counts average the two middle values.
inline double median_pair_distance(const std::vector<NeighborPair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("median_pair_distance: no pairs");
    std::vector<double> d;
    d.reserve(pairs.size());
    for (const NeighborPair& p : pairs) d.push_back(p.dist);
    std::sort(d.begin(), d.end());
    const std::size_t m = d.size() / 2;
    return d.size() % 2 == 1 ? d[m] : 0.5 * (d[m - 1] + d[m]);
}

/// w(i,j) = exp(-dist^2 / sigma^2) on each retained pair. Weights that
/// underflow to zero are dropped so every stored weight is in (0, 1].
inline SimilarityGraph gaussian_weights(const std::vector<NeighborPair>& pairs, int n_vertices,
                                        int n_neighbors, double sigma) {
    if (sigma <= 0.0)
        throw std::invalid_argument("gaussian_weights: sigma must be positive (got " +
                                    std::to_string(sigma) + ")");
    std::vector<SparseSymMatrix::Entry> trip;
    trip.reserve(pairs.size());
    for (const NeighborPair& p : pairs) {
        const double w = std::exp(-(p.dist * p.dist) / (sigma * sigma));
        if (w > 0.0) trip.push_back({p.i, p.j, w});
    }
    SimilarityGraph g;
    g.weights = SparseSymMatrix::from_triplets(n_vertices, trip);
    g.n_neighbors = n_neighbors;
    g.sigma = sigma;
    return g;
}

/// Symmetric normalized Laplacian I - D^{-1/2} W D^{-1/2}: unit diagonal,
/// off-diagonal -w_ij / sqrt(d_i d_j). Requires every vertex to carry at
/// least one weight, since normalization divides by the degree.
inline SparseSymMatrix symmetric_laplacian(const SimilarityGraph& g) {
    const int n = g.weights.n;
    std::vector<double> degree(n, 0.0);
    for (const auto& e : g.weights.entries) {
        degree[e.row] += e.value;
        if (e.row != e.col) degree[e.col] += e.value;
    }
    for (int i = 0; i < n; ++i)
        if (degree[i] <= 0.0)
            throw std::invalid_argument("symmetric_laplacian: vertex " + std::to_string(i) +
                                        " is isolated (degree 0)");
    std::vector<SparseSymMatrix::Entry> trip;
    trip.reserve(g.weights.entries.size() + n);
    for (int i = 0; i < n; ++i) trip.push_back({i, i, 1.0});
    for (const auto& e : g.weights.entries) {
        if (e.row == e.col) continue;  // no self-loops by construction
        trip.push_back({e.row, e.col, -e.value / std::sqrt(degree[e.row] * degree[e.col])});
    }
    return SparseSymMatrix::from_triplets(n, trip);
}

}  // namespace plmbo
