#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's numeric routines.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>

namespace support {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Gaussian kernel by definition, entry by entry.
inline MatrixXd brute_kernel(const MatrixXd& x, double sigma) {
    const Index n = x.rows();
    MatrixXd k(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            k(i, j) = std::exp(-(x.row(i) - x.row(j)).squaredNorm() / sigma);
        }
    }
    return k;
}

inline MatrixXd brute_symmetric(const MatrixXd& k) {
    const VectorXd d = k.rowwise().sum();
    MatrixXd a(k.rows(), k.cols());
    for (Index i = 0; i < k.rows(); ++i) {
        for (Index j = 0; j < k.cols(); ++j) {
            a(i, j) = k(i, j) / std::sqrt(d[i]) / std::sqrt(d[j]);
        }
    }
    return a;
}

struct Spectrum {
    VectorXd values;   // descending
    MatrixXd vectors;  // matching columns
};

/// Full symmetric eigendecomposition (Eigen's QR-based solver), descending.
inline Spectrum dense_eigs(const MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
    return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

/// Random matrix with i.i.d. standard normal entries from the standard library.
inline MatrixXd gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist;
    MatrixXd g(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            g(i, j) = dist(gen);
        }
    }
    return g;
}

/// Adjusted Rand index of two labelings.
inline double adjusted_rand_index(const Eigen::VectorXi& a, const Eigen::VectorXi& b) {
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> rows;
    std::map<int, double> cols;
    for (Index i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    const auto pairs = [](double m) { return m * (m - 1.0) / 2.0; };
    double index = 0.0;
    for (const auto& [key, m] : joint) index += pairs(m);
    double row_sum = 0.0;
    for (const auto& [key, m] : rows) row_sum += pairs(m);
    double col_sum = 0.0;
    for (const auto& [key, m] : cols) col_sum += pairs(m);
    const double expected = row_sum * col_sum / pairs(static_cast<double>(a.size()));
    const double max_index = 0.5 * (row_sum + col_sum);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

/// Two isotropic Gaussian blobs in the plane, centered at the origin and at (separation, 0).
struct Blobs {
    MatrixXd x;
    Eigen::VectorXi labels;
};

inline Blobs two_blobs(Index n, double separation, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist;
    Blobs b{MatrixXd(n, 2), Eigen::VectorXi(n)};
    for (Index i = 0; i < n; ++i) {
        const int label = i < n / 2 ? 0 : 1;
        b.labels[i] = label;
        b.x(i, 0) = dist(gen) + label * separation;
        b.x(i, 1) = dist(gen);
    }
    return b;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("dmap_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace support
