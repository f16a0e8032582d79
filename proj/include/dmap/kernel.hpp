#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "dmap/data_matrix.hpp"
#include "dmap/error.hpp"

namespace dmap {

inline constexpr Index kDefaultBlockRows = 1024;

/// Symmetric Gaussian similarity matrix and the width that built it.
struct KernelMatrix {
    Eigen::MatrixXd values;
    double sigma = 0.0;

    [[nodiscard]] Index n() const noexcept { return values.rows(); }
};

/// Row sums of a kernel matrix.
struct DegreeVector {
    Eigen::VectorXd values;

    [[nodiscard]] Index n() const noexcept { return values.size(); }
};

namespace detail {

inline void check_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ParameterError("kernel width sigma must be positive and finite");
    }
}

// Direct sum of squared differences; (a-b)^2 == (b-a)^2 keeps pairs symmetric.
inline double squared_distance(const double* a, const double* b, Index p) {
    double r = 0.0;
    for (Index k = 0; k < p; ++k) {
        const double diff = a[k] - b[k];
        r += diff * diff;
    }
    return r;
}

inline double gaussian(double squared_dist, double sigma) { return std::exp(-squared_dist / sigma); }

inline std::size_t square_bytes(Index n) {
    const auto un = static_cast<std::size_t>(n);
    if (un != 0 && un > std::numeric_limits<std::size_t>::max() / un / sizeof(double)) {
        return std::numeric_limits<std::size_t>::max();
    }
    return un * un * sizeof(double);
}

inline Eigen::MatrixXd allocate_square(Index n, const char* what) {
    const std::size_t bytes = square_bytes(n);
    try {
        if (bytes == std::numeric_limits<std::size_t>::max()) {
            throw std::bad_alloc();
        }
        return Eigen::MatrixXd(n, n);
    } catch (const std::bad_alloc&) {
        throw CapacityError(std::string("cannot allocate ") + what + " of order " +
                                std::to_string(n),
                            bytes);
    }
}

}  // namespace detail

/// K(i,j) = exp(-|x_i - x_j|^2 / sigma), evaluated once per unordered pair.
inline KernelMatrix gaussian_kernel_matrix(const DataMatrix& x, double sigma) {
    detail::check_sigma(sigma);
    const Index n = x.n();
    const Index p = x.p();
    const double* data = x.values().data();
    KernelMatrix k{detail::allocate_square(n, "kernel matrix"), sigma};
    for (Index j = 0; j < n; ++j) {
        double* column = k.values.col(j).data();
        const double* xj = data + j * p;
        column[j] = 1.0;
        for (Index i = j + 1; i < n; ++i) {
            const double value = detail::gaussian(detail::squared_distance(data + i * p, xj, p), sigma);
            column[i] = value;
            k.values(j, i) = value;
        }
    }
    return k;
}

/// Columns J of the Gaussian kernel without forming the full matrix.
inline Eigen::MatrixXd gaussian_kernel_columns(const DataMatrix& x, double sigma,
                                               std::span<const Index> columns) {
    detail::check_sigma(sigma);
    const Index n = x.n();
    const Index p = x.p();
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (const Index j : columns) {
        if (j < 0 || j >= n) {
            throw IndexError("kernel column index " + std::to_string(j) + " out of range [0, " +
                             std::to_string(n) + ")");
        }
        if (seen[static_cast<std::size_t>(j)]) {
            throw IndexError("duplicate kernel column index " + std::to_string(j));
        }
        seen[static_cast<std::size_t>(j)] = true;
    }
    const double* data = x.values().data();
    Eigen::MatrixXd out(n, static_cast<Index>(columns.size()));
    for (Index c = 0; c < out.cols(); ++c) {
        const Index j = columns[static_cast<std::size_t>(c)];
        const double* xj = data + j * p;
        double* column = out.col(c).data();
        for (Index i = 0; i < n; ++i) {
            column[i] = i == j ? 1.0
                               : detail::gaussian(detail::squared_distance(data + i * p, xj, p), sigma);
        }
    }
    return out;
}

/// Row sums of a materialized kernel, in the same order as degree_vector.
inline DegreeVector degrees_from_kernel(const KernelMatrix& k) {
    const Index n = k.n();
    DegreeVector deg{Eigen::VectorXd(n)};
    for (Index i = 0; i < n; ++i) {
        // K is symmetric, so row i equals column i, which is contiguous.
        const double* column = k.values.col(i).data();
        double sum = 0.0;
        for (Index j = 0; j < n; ++j) {
            sum += column[j];
        }
        deg.values[i] = sum;
    }
    return deg;
}

/// Kernel row sums, streamed in tiles of block_rows x n.
///
/// Peak extra memory is O(n * block_rows). Each row is summed over j in
/// ascending order, so the result matches degrees_from_kernel bitwise.
inline DegreeVector degree_vector(const DataMatrix& x, double sigma,
                                  Index block_rows = kDefaultBlockRows) {
    detail::check_sigma(sigma);
    if (block_rows < 1) {
        throw ParameterError("degree block size must be >= 1");
    }
    const Index n = x.n();
    const Index p = x.p();
    const double* data = x.values().data();
    DegreeVector deg{Eigen::VectorXd(n)};
    RowMatrix tile(std::min(block_rows, n), n);
    for (Index start = 0; start < n; start += block_rows) {
        const Index rows = std::min(block_rows, n - start);
        for (Index r = 0; r < rows; ++r) {
            const Index i = start + r;
            const double* xi = data + i * p;
            double* out = tile.row(r).data();
            for (Index j = 0; j < n; ++j) {
                out[j] = i == j ? 1.0 : detail::gaussian(detail::squared_distance(xi, data + j * p, p), sigma);
            }
        }
        for (Index r = 0; r < rows; ++r) {
            const double* row = tile.row(r).data();
            double sum = 0.0;
            for (Index j = 0; j < n; ++j) {
                sum += row[j];
            }
            deg.values[start + r] = sum;
        }
    }
    return deg;
}

}  // namespace dmap
