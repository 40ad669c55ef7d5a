#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "akooc/errors.hpp"
#include "akooc/harness.hpp"

namespace akooc {

/// Plain-text matrix bundle: repeated blocks of "name rows cols" followed by
/// row-major values, one matrix row per line.
inline void write_bundle(const std::vector<std::pair<std::string, Eigen::MatrixXd>>& mats,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open bundle output: " + path);
    for (const auto& [name, m] : mats) {
        out << name << " " << m.rows() << " " << m.cols() << "\n";
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                if (c) out << " ";
                out << detail::fmt_double(m(r, c));
            }
            out << "\n";
        }
    }
    if (!out) throw IoError("short write: " + path);
}

inline std::map<std::string, Eigen::MatrixXd> read_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open bundle: " + path);
    std::map<std::string, Eigen::MatrixXd> mats;
    std::string name;
    Eigen::Index rows, cols;
    while (in >> name >> rows >> cols) {
        if (rows < 0 || cols < 0) throw IoError("bad bundle header in " + path);
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                if (!(in >> m(r, c))) throw IoError("truncated bundle: " + path);
        mats[name] = std::move(m);
    }
    return mats;
}

}  // namespace akooc
