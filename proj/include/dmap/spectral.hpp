#pragma once

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dmap/error.hpp"
#include "dmap/kernel.hpp"

namespace dmap {

enum class Method { deterministic, nystrom_columns, nystrom_projection };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::deterministic: return "deterministic";
        case Method::nystrom_columns: return "nystrom_columns";
        case Method::nystrom_projection: return "nystrom_projection";
    }
    return "unknown";
}

inline Method method_from_string(std::string_view s) {
    if (s == "deterministic" || s == "det") return Method::deterministic;
    if (s == "nystrom_columns" || s == "nys-cols") return Method::nystrom_columns;
    if (s == "nystrom_projection" || s == "nys-rp") return Method::nystrom_projection;
    throw ParameterError("unknown method '" + std::string(s) + "'");
}

/// Dominant eigenpairs of the symmetric diffusion operator A = D^-1/2 K D^-1/2.
struct SpectralModel {
    Eigen::VectorXd eigenvalues;          ///< descending
    Eigen::MatrixXd eigenvectors_sym;     ///< orthonormal eigenvectors of A
    Eigen::MatrixXd eigenvectors_markov;  ///< unit-norm eigenvectors of P = D^-1 K
    DegreeVector degrees;
    Method method = Method::deterministic;
    Index rank_d = 0;
    std::vector<std::string> warnings;
};

struct EigenPairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

namespace detail {

inline void check_degrees(const KernelMatrix& k, const DegreeVector& deg) {
    if (k.values.rows() != k.values.cols()) {
        throw DimensionError("kernel matrix is not square");
    }
    if (deg.n() != k.n()) {
        throw DimensionError("degree vector has length " + std::to_string(deg.n()) +
                             " but kernel has order " + std::to_string(k.n()));
    }
}

inline Eigen::VectorXd inverse_sqrt_degrees(const DegreeVector& deg) {
    if (!(deg.values.array() > 0.0).all()) {
        throw DegeneracyError("degree vector has a nonpositive entry");
    }
    return deg.values.array().sqrt().inverse();
}

inline void check_symmetric(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) {
        throw ContractError("matrix is not square");
    }
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    for (Index j = 0; j < a.cols(); ++j) {
        for (Index i = j + 1; i < a.rows(); ++i) {
            if (!(std::abs(a(i, j) - a(j, i)) <= 1e-10 * scale)) {
                throw ContractError("matrix is not symmetric at (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ")");
            }
        }
    }
}

// Top-d eigenpairs via LAPACK dsyevr; overwrites a.
inline EigenPairs lapack_top_eigenpairs(Eigen::MatrixXd& a, Index d) {
    const Index n = a.rows();
    if (n > std::numeric_limits<lapack_int>::max()) {
        throw CapacityError("matrix order exceeds LAPACK index range", detail::square_bytes(n));
    }
    const auto ln = static_cast<lapack_int>(n);
    const auto il = static_cast<lapack_int>(n - d + 1);
    lapack_int found = 0;
    Eigen::VectorXd w(n);
    Eigen::MatrixXd z(n, d);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
    const lapack_int info =
        LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', ln, a.data(), ln, 0.0, 0.0, il, ln, 0.0,
                       &found, w.data(), z.data(), ln, support.data());
    if (info > 0) {
        throw NumericError("symmetric eigensolver failed to converge (LAPACK info " +
                           std::to_string(info) + ")");
    }
    if (info < 0 || found != static_cast<lapack_int>(d)) {
        throw NumericError("symmetric eigensolver returned " + std::to_string(found) + " of " +
                           std::to_string(d) + " pairs (LAPACK info " + std::to_string(info) + ")");
    }
    // dsyevr returns ascending order.
    EigenPairs out{w.head(d).reverse(), z.rowwise().reverse()};
    return out;
}

}  // namespace detail

/// Flips each column so its largest-magnitude entry (first on ties) is positive.
inline void fix_signs(Eigen::MatrixXd& v) {
    for (Index c = 0; c < v.cols(); ++c) {
        Index at = 0;
        double best = -1.0;
        for (Index i = 0; i < v.rows(); ++i) {
            const double mag = std::abs(v(i, c));
            if (mag > best) {
                best = mag;
                at = i;
            }
        }
        if (v.rows() > 0 && v(at, c) < 0.0) {
            v.col(c) = -v.col(c);
        }
    }
}

/// P = D^-1 K. Rows sum to one.
inline Eigen::MatrixXd markov_matrix(const KernelMatrix& k, const DegreeVector& deg) {
    detail::check_degrees(k, deg);
    if (!(deg.values.array() > 0.0).all()) {
        throw DegeneracyError("degree vector has a nonpositive entry");
    }
    const Index n = k.n();
    Eigen::MatrixXd p = detail::allocate_square(n, "markov matrix");
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            p(i, j) = k.values(i, j) / deg.values[i];
        }
    }
    return p;
}

/// A(i,j) = K(i,j) / sqrt(deg_i * deg_j), exactly symmetric.
inline Eigen::MatrixXd symmetric_matrix(const KernelMatrix& k, const DegreeVector& deg) {
    detail::check_degrees(k, deg);
    if (!(deg.values.array() > 0.0).all()) {
        throw DegeneracyError("degree vector has a nonpositive entry");
    }
    const Index n = k.n();
    Eigen::MatrixXd a = detail::allocate_square(n, "symmetric operator");
    const Eigen::VectorXd& d = deg.values;
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            a(i, j) = k.values(i, j) / std::sqrt(d[i] * d[j]);
        }
    }
    return a;
}

/// In-place variant; the kernel's storage becomes A.
inline Eigen::MatrixXd symmetric_matrix(KernelMatrix&& k, const DegreeVector& deg) {
    detail::check_degrees(k, deg);
    if (!(deg.values.array() > 0.0).all()) {
        throw DegeneracyError("degree vector has a nonpositive entry");
    }
    Eigen::MatrixXd a = std::move(k.values);
    const Eigen::VectorXd& d = deg.values;
    for (Index j = 0; j < a.cols(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
            a(i, j) /= std::sqrt(d[i] * d[j]);
        }
    }
    return a;
}

/// Top-d eigenpairs of a symmetric matrix, descending, sign-fixed.
///
/// Uses LAPACK's MRRR driver restricted to the index range of the wanted
/// pairs. The rvalue overload reuses the input storage as workspace.
inline EigenPairs eigendecompose(Eigen::MatrixXd&& a, Index d) {
    detail::check_symmetric(a);
    if (d < 1 || d > a.rows()) {
        throw ParameterError("eigenpair count must lie in [1, " + std::to_string(a.rows()) +
                             "], got " + std::to_string(d));
    }
    EigenPairs pairs = detail::lapack_top_eigenpairs(a, d);
    fix_signs(pairs.vectors);
    return pairs;
}

inline EigenPairs eigendecompose(const Eigen::MatrixXd& a, Index d) {
    Eigen::MatrixXd work = a;
    return eigendecompose(std::move(work), d);
}

/// Markov eigenvectors D^-1/2 u, renormalized to unit length and sign-fixed.
inline Eigen::MatrixXd recover_markov_eigvecs(const Eigen::MatrixXd& u_sym, const DegreeVector& deg) {
    if (u_sym.rows() != deg.n()) {
        throw DimensionError("eigenvector rows (" + std::to_string(u_sym.rows()) +
                             ") differ from degree length (" + std::to_string(deg.n()) + ")");
    }
    const Eigen::VectorXd scale = detail::inverse_sqrt_degrees(deg);
    Eigen::MatrixXd v = scale.asDiagonal() * u_sym;
    for (Index c = 0; c < v.cols(); ++c) {
        const double norm = v.col(c).norm();
        if (norm > 0.0) {
            v.col(c) /= norm;
        }
    }
    fix_signs(v);
    return v;
}

/// Exact dense route: eigendecompose A and recover the Markov eigenvectors.
inline SpectralModel deterministic_model(Eigen::MatrixXd&& a, const DegreeVector& deg, Index d) {
    if (a.rows() != deg.n()) {
        throw DimensionError("operator order differs from degree length");
    }
    EigenPairs pairs = eigendecompose(std::move(a), d);
    SpectralModel model;
    model.eigenvectors_markov = recover_markov_eigvecs(pairs.vectors, deg);
    model.eigenvalues = std::move(pairs.values);
    model.eigenvectors_sym = std::move(pairs.vectors);
    model.degrees = deg;
    model.method = Method::deterministic;
    model.rank_d = d;
    return model;
}

inline SpectralModel deterministic_model(const Eigen::MatrixXd& a, const DegreeVector& deg, Index d) {
    Eigen::MatrixXd work = a;
    return deterministic_model(std::move(work), deg, d);
}

}  // namespace dmap
