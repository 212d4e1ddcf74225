#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "plmbo/dataset.hpp"

namespace plmbo {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

/// Write `f0..f{d-1}` feature columns (17 significant digits, lossless for
/// doubles) plus a `label` column when any point is labeled; unlabeled
/// points get an empty label cell.
inline void save_csv(const Dataset& data, const std::string& path) {
    data.validate();
    bool any_label = false;
    for (int l : data.labels)
        if (l >= 0) any_label = true;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv: cannot open '" + path + "' for writing");
    for (int c = 0; c < data.dim(); ++c) {
        if (c) out << ',';
        out << 'f' << c;
    }
    if (any_label) out << ",label";
    out << '\n';
    for (int i = 0; i < data.size(); ++i) {
        for (int c = 0; c < data.dim(); ++c) {
            if (c) out << ',';
            out << detail::format_g17(data.features.at(i, c));
        }
        if (any_label) {
            out << ',';
            if (data.labels[i] >= 0) out << data.labels[i];
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("save_csv: write to '" + path + "' failed");
}

/// Read the schema written by save_csv. Errors carry the 1-based line
/// number. Empty label cells load as unlabeled (-1).
inline Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = detail::split_csv_line(line);
    bool has_label = !header.empty() && header.back() == "label";
    const int dim = static_cast<int>(header.size()) - (has_label ? 1 : 0);
    if (dim < 1) throw std::runtime_error("load_csv: header has no feature columns (line 1)");
    for (int c = 0; c < dim; ++c)
        if (header[c] != "f" + std::to_string(c))
            throw std::runtime_error("load_csv: expected header column 'f" + std::to_string(c) +
                                     "', got '" + header[c] + "' (line 1)");

    std::vector<double> features;
    std::vector<int> labels;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        if (static_cast<int>(cells.size()) != dim + (has_label ? 1 : 0))
            throw std::runtime_error("load_csv: line " + std::to_string(line_no) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(dim + (has_label ? 1 : 0)));
        for (int c = 0; c < dim; ++c) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cells[c], &used);
            } catch (const std::exception&) {
                throw std::runtime_error("load_csv: non-numeric feature '" + cells[c] +
                                         "' at line " + std::to_string(line_no));
            }
            if (used != cells[c].size())
                throw std::runtime_error("load_csv: non-numeric feature '" + cells[c] +
                                         "' at line " + std::to_string(line_no));
            features.push_back(v);
        }
        if (has_label && !cells[dim].empty()) {
            try {
                labels.push_back(std::stoi(cells[dim]));
            } catch (const std::exception&) {
                throw std::runtime_error("load_csv: non-integer label '" + cells[dim] +
                                         "' at line " + std::to_string(line_no));
            }
            if (labels.back() < 0)
                throw std::runtime_error("load_csv: negative label at line " +
                                         std::to_string(line_no));
        } else {
            labels.push_back(-1);
        }
    }

    Dataset data;
    data.features.rows = static_cast<int>(labels.size());
    data.features.cols = dim;
    data.features.data = std::move(features);
    data.labels = std::move(labels);
    data.name = std::filesystem::path(path).stem().string();
    data.validate();
    return data;
}

}  // namespace plmbo
