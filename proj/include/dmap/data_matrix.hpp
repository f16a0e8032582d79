#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>

#include "dmap/error.hpp"

namespace dmap {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// n observations by p variables. Rows are points.
class DataMatrix {
public:
    /// Throws ParameterError unless n >= 2, p >= 1 and every entry is finite.
    explicit DataMatrix(RowMatrix values) : values_(std::move(values)) {
        if (values_.rows() < 2) {
            throw ParameterError("data matrix needs at least 2 observations, got " +
                                 std::to_string(values_.rows()));
        }
        if (values_.cols() < 1) {
            throw ParameterError("data matrix needs at least 1 variable");
        }
        if (!values_.allFinite()) {
            throw ParameterError("data matrix contains non-finite entries");
        }
    }

    [[nodiscard]] const RowMatrix& values() const noexcept { return values_; }
    [[nodiscard]] Index n() const noexcept { return values_.rows(); }
    [[nodiscard]] Index p() const noexcept { return values_.cols(); }
    [[nodiscard]] auto row(Index i) const { return values_.row(i); }
    [[nodiscard]] double operator()(Index i, Index j) const { return values_(i, j); }

    friend bool operator==(const DataMatrix& a, const DataMatrix& b) {
        return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
               a.values_ == b.values_;
    }

private:
    RowMatrix values_;
};

}  // namespace dmap
