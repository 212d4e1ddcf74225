#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "plmbo/matrix.hpp"

namespace plmbo {

/// Point cloud with optional per-point class labels. `labels[i] == -1` marks
/// an unlabeled point; any other value is a class id in [0, K).
struct Dataset {
    DenseMatrix features;     // N x d
    std::vector<int> labels;  // length N, -1 = unlabeled
    std::string name;

    int size() const { return features.rows; }
    int dim() const { return features.cols; }

    /// K = 1 + max labeled class id; 0 when nothing is labeled.
    int num_classes() const {
        int k = 0;
        for (int l : labels)
            if (l >= 0) k = std::max(k, l + 1);
        return k;
    }

    void validate() const {
        if (features.rows < 2) throw std::invalid_argument("Dataset: need at least 2 points");
        if (features.cols < 1) throw std::invalid_argument("Dataset: need at least 1 feature");
        if (static_cast<int>(labels.size()) != features.rows)
            throw std::invalid_argument("Dataset: labels length " + std::to_string(labels.size()) +
                                        " != point count " + std::to_string(features.rows));
        for (int l : labels)
            if (l < -1) throw std::invalid_argument("Dataset: label " + std::to_string(l) +
                                                    " out of range");
    }
};

}  // namespace plmbo
