#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "plmbo/dataset.hpp"
#include "plmbo/rng.hpp"

namespace plmbo {

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

/// Standard normal quantile: the x with CDF(x) = p, for p in (0, 1).
/// Bisection bracket followed by Newton polishing on the CDF.
inline double normal_quantile(double p) {
    if (p <= 0.0 || p >= 1.0)
        throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
    double lo = -12.0, hi = 12.0;
    for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    double x = 0.5 * (lo + hi);
    const double inv_sqrt_2pi = 0.3989422804014327;
    for (int i = 0; i < 8; ++i) {
        const double density = inv_sqrt_2pi * std::exp(-0.5 * x * x);
        if (density == 0.0) break;
        x -= (normal_cdf(x) - p) / density;
    }
    return x;
}

/// Two isotropic unit-variance Gaussians with equal priors, classes
/// alternating by index so counts stay balanced within one point. The means
/// sit at ±delta/2 along the first axis with delta chosen so the Bayes
/// error of the optimal rule equals `bayes_error`
/// (error = CDF(−delta/2) ⇒ delta = −2·quantile(bayes_error)).
inline Dataset gen_two_gaussians(int n, int dim, double bayes_error, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("gen_two_gaussians: n must be >= 2");
    if (dim < 1) throw std::invalid_argument("gen_two_gaussians: dim must be >= 1");
    if (bayes_error <= 0.0 || bayes_error >= 0.5)
        throw std::invalid_argument("gen_two_gaussians: bayes_error must be in (0, 0.5)");
    const double delta = -2.0 * normal_quantile(bayes_error);
    Rng rng(seed);
    Dataset data;
    data.name = "two-gaussians";
    data.features = DenseMatrix(n, dim);
    data.labels.resize(n);
    for (int i = 0; i < n; ++i) {
        const int cls = i % 2;
        data.labels[i] = cls;
        const double mean0 = cls == 0 ? -0.5 * delta : 0.5 * delta;
        for (int c = 0; c < dim; ++c)
            data.features.at(i, c) = (c == 0 ? mean0 : 0.0) + rng.normal();
    }
    return data;
}

/// Two crescent-shaped classes in the plane: class 0 on the upper unit
/// half-circle, class 1 on a vertically flipped copy shifted by
/// (0.5, −0.3), each with Gaussian jitter of standard deviation `noise`.
/// Classes alternate by index.
inline Dataset gen_banana(int n, double noise, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("gen_banana: n must be >= 2");
    if (noise < 0.0) throw std::invalid_argument("gen_banana: noise must be >= 0");
    const double pi = 3.14159265358979323846;
    Rng rng(seed);
    Dataset data;
    data.name = "banana";
    data.features = DenseMatrix(n, 2);
    data.labels.resize(n);
    for (int i = 0; i < n; ++i) {
        const int cls = i % 2;
        data.labels[i] = cls;
        const double t = rng.uniform01() * pi;
        const double jx = rng.normal() * noise;
        const double jy = rng.normal() * noise;
        if (cls == 0) {
            data.features.at(i, 0) = std::cos(t) + jx;
            data.features.at(i, 1) = std::sin(t) + jy;
        } else {
            data.features.at(i, 0) = 0.5 + std::cos(t) + jx;
            data.features.at(i, 1) = -0.3 - std::sin(t) + jy;
        }
    }
    return data;
}

/// Repeated-trial label-budget plan.
struct TrialPlan {
    int n_labeled = 50;
    int n_trials = 10;
    std::uint64_t seed = 1;
    bool per_class_balance = true;
};

/// Deterministic labeled mask for one trial, drawn with
/// derive_seed(plan.seed, trial_index). Balanced mode stratifies the budget
/// over classes (class c gets n/K plus one of the n mod K remainder slots,
/// assigned to the lowest class ids).
inline std::vector<char> sample_labels(const Dataset& data, const TrialPlan& plan,
                                       int trial_index) {
    const int n = data.size();
    const int k = data.num_classes();
    if (plan.n_trials < 1) throw std::invalid_argument("sample_labels: n_trials must be >= 1");
    if (plan.n_labeled < 1 || plan.n_labeled > n)
        throw std::invalid_argument("sample_labels: n_labeled must be in [1, N]");
    if (k < 1) throw std::invalid_argument("sample_labels: dataset has no ground-truth labels");
    for (int i = 0; i < n; ++i)
        if (data.labels[i] < 0)
            throw std::invalid_argument("sample_labels: point " + std::to_string(i) +
                                        " has no ground-truth label");

    Rng rng(derive_seed(plan.seed, static_cast<std::uint64_t>(trial_index)));
    std::vector<char> mask(n, 0);
    if (plan.per_class_balance) {
        if (plan.n_labeled < k)
            throw std::invalid_argument("sample_labels: balanced mode needs n_labeled >= K");
        for (int c = 0; c < k; ++c) {
            const int quota = plan.n_labeled / k + (c < plan.n_labeled % k ? 1 : 0);
            std::vector<int> members;
            for (int i = 0; i < n; ++i)
                if (data.labels[i] == c) members.push_back(i);
            if (static_cast<int>(members.size()) < quota)
                throw std::invalid_argument("sample_labels: class " + std::to_string(c) +
                                            " has only " + std::to_string(members.size()) +
                                            " points for a quota of " + std::to_string(quota));
            rng.partial_shuffle(members, quota);
            for (int t = 0; t < quota; ++t) mask[members[t]] = 1;
        }
    } else {
        std::vector<int> all(n);
        std::iota(all.begin(), all.end(), 0);
        rng.partial_shuffle(all, plan.n_labeled);
        for (int t = 0; t < plan.n_labeled; ++t) mask[all[t]] = 1;
    }
    return mask;
}

}  // namespace plmbo
