#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "plmbo/matrix.hpp"

namespace plmbo {

/// Per-point feature rows assembled from the family's MBO outputs, in
/// dataset row order.
struct EnsembleFeatures {
    DenseMatrix x;  // N x F
};

/// Stack member outputs side by side in family order. The binary case keeps
/// only the first column of each member (the second is its complement), so
/// F = members for K = 2 and members*K otherwise.
inline EnsembleFeatures concatenate_outputs(const std::vector<DenseMatrix>& members_u, int k) {
    if (members_u.empty())
        throw std::invalid_argument("concatenate_outputs: no member outputs");
    const int n = members_u.front().rows;
    for (const DenseMatrix& u : members_u) {
        if (u.rows != n)
            throw std::invalid_argument("concatenate_outputs: inconsistent row counts (" +
                                        std::to_string(u.rows) + " vs " + std::to_string(n) + ")");
        if (u.cols != k)
            throw std::invalid_argument("concatenate_outputs: member has " +
                                        std::to_string(u.cols) + " columns, expected " +
                                        std::to_string(k));
    }
    const int cols_per_member = k == 2 ? 1 : k;
    EnsembleFeatures f;
    f.x = DenseMatrix(n, cols_per_member * static_cast<int>(members_u.size()));
    int base = 0;
    for (const DenseMatrix& u : members_u) {
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < cols_per_member; ++c) f.x.at(i, base + c) = u.at(i, c);
        base += cols_per_member;
    }
    return f;
}

/// Feature rows and ground truth split by the labeled mask, keeping original
/// dataset row ids for both sides (train ids feed the forest's canonical
/// ordering; test ids tie predictions back to points).
struct LabeledSplit {
    DenseMatrix train_x;
    std::vector<int> train_y;
    std::vector<int> train_ids;
    DenseMatrix test_x;
    std::vector<int> test_truth;
    std::vector<int> test_ids;
};

inline LabeledSplit split_by_mask(const EnsembleFeatures& f, const std::vector<int>& labels,
                                  const std::vector<char>& mask) {
    const int n = f.x.rows;
    if (static_cast<int>(mask.size()) != n || static_cast<int>(labels.size()) != n)
        throw std::invalid_argument("split_by_mask: mask/labels length != row count");
    int n_train = 0;
    for (char m : mask)
        if (m) ++n_train;
    if (n_train == 0) throw std::invalid_argument("split_by_mask: empty train set");

    LabeledSplit s;
    s.train_x = DenseMatrix(n_train, f.x.cols);
    s.test_x = DenseMatrix(n - n_train, f.x.cols);
    int ti = 0, ui = 0;
    for (int i = 0; i < n; ++i) {
        if (mask[i]) {
            for (int c = 0; c < f.x.cols; ++c) s.train_x.at(ti, c) = f.x.at(i, c);
            s.train_y.push_back(labels[i]);
            s.train_ids.push_back(i);
            ++ti;
        } else {
            for (int c = 0; c < f.x.cols; ++c) s.test_x.at(ui, c) = f.x.at(i, c);
            s.test_truth.push_back(labels[i]);
            s.test_ids.push_back(i);
            ++ui;
        }
    }
    return s;
}

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("accuracy: length mismatch");
    if (pred.empty()) throw std::invalid_argument("accuracy: empty input");
    int hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace plmbo
