#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmap/data_matrix.hpp"
#include "dmap/error.hpp"
#include "dmap/kernel.hpp"
#include "dmap/random.hpp"
#include "dmap/spectral.hpp"

namespace dmap {

enum class SketchStrategy { uniform_columns, gaussian_projection };

inline Method method_for(SketchStrategy s) {
    return s == SketchStrategy::uniform_columns ? Method::nystrom_columns : Method::nystrom_projection;
}

inline constexpr double kDefaultPinvTolerance = 1e-12;

struct SketchConfig {
    Index target_rank_d = 1;
    Index oversampling = 10;
    Index power_iterations_q = 2;
    SketchStrategy strategy = SketchStrategy::gaussian_projection;
    std::uint64_t seed = 0;
    double pinv_tolerance = kDefaultPinvTolerance;

    /// l = d + oversampling.
    [[nodiscard]] Index sketch_size() const noexcept { return target_rank_d + oversampling; }

    void validate(Index n) const {
        if (target_rank_d < 1) {
            throw ParameterError("target rank must be >= 1");
        }
        if (oversampling < 0 || power_iterations_q < 0) {
            throw ParameterError("oversampling and power iterations must be >= 0");
        }
        if (sketch_size() > n) {
            throw ParameterError("sketch size d + oversampling = " + std::to_string(sketch_size()) +
                                 " exceeds n = " + std::to_string(n));
        }
        if (!(pinv_tolerance > 0.0 && pinv_tolerance < 1.0)) {
            throw ParameterError("pseudo-inverse tolerance must lie in (0, 1)");
        }
    }
};

/// A ~= C W^+ C^T.
struct NystromFactors {
    Eigen::MatrixXd c;
    Eigen::MatrixXd w;
};

struct ColumnSample {
    NystromFactors factors;
    std::vector<Index> indices;
};

struct SketchBasis {
    Eigen::MatrixXd q;
    std::vector<std::string> warnings;
};

/// Returns the requested kernel columns K(:, J) as an n x |J| matrix.
template <typename F>
concept ColumnProvider = requires(F f, std::span<const Index> j) {
    { f(j) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// Returns A * B for an n x k block B.
template <typename F>
concept BlockMultiply = requires(F f, const Eigen::MatrixXd& b) {
    { f(b) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// Column provider over the Gaussian kernel of x; never forms K.
inline auto kernel_column_provider(const DataMatrix& x, double sigma) {
    return [&x, sigma](std::span<const Index> j) { return gaussian_kernel_columns(x, sigma, j); };
}

/// Row-blocked product with a materialized symmetric operator.
inline auto dense_multiply(const Eigen::MatrixXd& a, Index block_rows = kDefaultBlockRows) {
    return [&a, block_rows](const Eigen::MatrixXd& b) {
        if (b.rows() != a.cols()) {
            throw DimensionError("multiply block has " + std::to_string(b.rows()) +
                                 " rows, operator has order " + std::to_string(a.cols()));
        }
        Eigen::MatrixXd out(a.rows(), b.cols());
        for (Index start = 0; start < a.rows(); start += block_rows) {
            const Index rows = std::min(block_rows, a.rows() - start);
            out.middleRows(start, rows).noalias() = a.middleRows(start, rows) * b;
        }
        return out;
    };
}

/// Uniform column sampling without replacement: C = A(:, J), W = A(J, J).
///
/// Columns of A = D^-1/2 K D^-1/2 are formed from streamed kernel columns and
/// the precomputed degrees, so A itself is never materialized.
template <ColumnProvider Provider>
ColumnSample sample_columns(Provider&& kernel_columns, const DegreeVector& deg, Index l,
                            std::uint64_t seed) {
    const Index n = deg.n();
    if (l < 1 || l > n) {
        throw ParameterError("column sample size must lie in [1, " + std::to_string(n) + "], got " +
                             std::to_string(l));
    }
    if (!(deg.values.array() > 0.0).all()) {
        throw DegeneracyError("degree vector has a nonpositive entry");
    }
    // Partial Fisher-Yates.
    std::vector<Index> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), Index{0});
    Rng rng(seed);
    for (Index i = 0; i < l; ++i) {
        const auto pick = i + static_cast<Index>(rng.index(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick)]);
    }
    pool.resize(static_cast<std::size_t>(l));

    Eigen::MatrixXd c = kernel_columns(std::span<const Index>(pool));
    if (c.rows() != n || c.cols() != l) {
        throw DimensionError("column provider returned a " + std::to_string(c.rows()) + " x " +
                             std::to_string(c.cols()) + " block");
    }
    const Eigen::VectorXd& d = deg.values;
    for (Index col = 0; col < l; ++col) {
        const double dj = d[pool[static_cast<std::size_t>(col)]];
        for (Index i = 0; i < n; ++i) {
            c(i, col) /= std::sqrt(d[i] * dj);
        }
    }
    Eigen::MatrixXd w(l, l);
    for (Index a = 0; a < l; ++a) {
        w.row(a) = c.row(pool[static_cast<std::size_t>(a)]);
    }
    return {{std::move(c), std::move(w)}, std::move(pool)};
}

namespace detail {

// Householder QR; columns whose R diagonal falls to roundoff level are
// replaced by fresh random directions orthogonal to the rest.
inline Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y, Rng& rng,
                                         std::vector<std::string>& warnings, const char* stage) {
    const Index n = y.rows();
    const Index l = y.cols();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, l);
    const Eigen::VectorXd diag = qr.matrixQR().diagonal().cwiseAbs();
    const double tol = static_cast<double>(std::max(n, l)) * std::numeric_limits<double>::epsilon() *
                       (diag.size() ? diag.maxCoeff() : 0.0);
    std::vector<Index> collapsed;
    for (Index i = 0; i < l; ++i) {
        if (!(diag[i] > tol)) {
            collapsed.push_back(i);
            q.col(i).setZero();
        }
    }
    if (collapsed.empty()) {
        return q;
    }
    for (const Index i : collapsed) {
        Eigen::VectorXd v(n);
        for (Index r = 0; r < n; ++r) {
            v[r] = rng.normal();
        }
        for (int pass = 0; pass < 2; ++pass) {
            v -= q * (q.transpose() * v);
        }
        q.col(i) = v / v.norm();
    }
    warnings.push_back("rank collapse in " + std::string(stage) + ": numerical rank " +
                       std::to_string(l - static_cast<Index>(collapsed.size())) + " < " +
                       std::to_string(l) + "; padded " + std::to_string(collapsed.size()) +
                       " random directions");
    return q;
}

struct InverseSqrt {
    Eigen::MatrixXd matrix;
    Index rank = 0;
};

inline InverseSqrt psd_inverse_sqrt_ranked(const Eigen::MatrixXd& w, double tol) {
    check_symmetric(w);
    if (!(tol > 0.0 && tol < 1.0)) {
        throw ParameterError("pseudo-inverse tolerance must lie in (0, 1)");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
    if (es.info() != Eigen::Success) {
        throw NumericError("eigensolver failed on the Nystrom core matrix");
    }
    const Eigen::VectorXd& lambda = es.eigenvalues();
    const double top = lambda.size() ? lambda.maxCoeff() : 0.0;
    if (!(top > 0.0)) {
        throw DegeneracyError("Nystrom core matrix has no positive eigenvalue; the sketch captured nothing");
    }
    Eigen::VectorXd scale = Eigen::VectorXd::Zero(lambda.size());
    Index rank = 0;
    for (Index i = 0; i < lambda.size(); ++i) {
        if (lambda[i] > tol * top) {
            scale[i] = 1.0 / std::sqrt(lambda[i]);
            ++rank;
        }
    }
    const Eigen::MatrixXd& v = es.eigenvectors();
    return {v * scale.asDiagonal() * v.transpose(), rank};
}

}  // namespace detail

/// Orthonormal basis for the range of A from a Gaussian sketch S = A Omega,
/// refined by q subspace-iteration passes (two multiplies each, with an
/// orthonormalization after every multiply).
template <BlockMultiply Multiply>
SketchBasis gaussian_sketch_basis(Multiply&& apply, Index n, Index l, Index q, std::uint64_t seed) {
    if (l < 1 || l > n) {
        throw ParameterError("sketch size must lie in [1, " + std::to_string(n) + "], got " +
                             std::to_string(l));
    }
    if (q < 0) {
        throw ParameterError("power iterations must be >= 0");
    }
    Rng rng(seed);
    Eigen::MatrixXd omega(n, l);
    for (Index c = 0; c < l; ++c) {
        for (Index r = 0; r < n; ++r) {
            omega(r, c) = rng.normal();
        }
    }
    SketchBasis basis;
    const auto multiply = [&](const Eigen::MatrixXd& b) -> Eigen::MatrixXd {
        Eigen::MatrixXd out = apply(b);
        if (out.rows() != n || out.cols() != b.cols()) {
            throw DimensionError("multiply provider returned a " + std::to_string(out.rows()) + " x " +
                                 std::to_string(out.cols()) + " block");
        }
        return out;
    };
    basis.q = detail::orthonormal_basis(multiply(omega), rng, basis.warnings, "sketch");
    for (Index pass = 0; pass < q; ++pass) {
        const std::string stage = "power iteration " + std::to_string(pass + 1);
        basis.q = detail::orthonormal_basis(multiply(basis.q), rng, basis.warnings, stage.c_str());
        basis.q = detail::orthonormal_basis(multiply(basis.q), rng, basis.warnings, stage.c_str());
    }
    return basis;
}

/// C = A Q, W = Q^T C symmetrized.
template <BlockMultiply Multiply>
NystromFactors project(Multiply&& apply, const Eigen::MatrixXd& q) {
    const Index l = q.cols();
    const Eigen::MatrixXd gram = q.transpose() * q;
    if (!((gram - Eigen::MatrixXd::Identity(l, l)).cwiseAbs().maxCoeff() <= 1e-8)) {
        throw ContractError("projection basis is not orthonormal");
    }
    Eigen::MatrixXd c = apply(q);
    if (c.rows() != q.rows() || c.cols() != l) {
        throw DimensionError("multiply provider returned a " + std::to_string(c.rows()) + " x " +
                             std::to_string(c.cols()) + " block for a " + std::to_string(q.rows()) +
                             " x " + std::to_string(l) + " basis");
    }
    Eigen::MatrixXd w = q.transpose() * c;
    Eigen::MatrixXd sym = 0.5 * (w + w.transpose());
    return {std::move(c), std::move(sym)};
}

/// Spectral pseudo-inverse square root: eigenvalues at or below
/// tol * max eigenvalue are treated as zero.
inline Eigen::MatrixXd psd_inverse_sqrt(const Eigen::MatrixXd& w, double tol = kDefaultPinvTolerance) {
    return detail::psd_inverse_sqrt_ranked(w, tol).matrix;
}

/// Eigenpairs from the approximate Cholesky factor F = C W^-1/2.
///
/// The thin SVD F = U S V^T gives eigenvectors U and eigenvalues S^2. F is
/// reduced by Householder QR first, so only an l x l SVD is needed. When
/// fewer than d singular values survive the tolerance the model is truncated
/// and a warning recorded.
inline SpectralModel nystrom_eigs(const NystromFactors& factors, Index d, const DegreeVector& deg,
                                  double tol = kDefaultPinvTolerance,
                                  Method method = Method::nystrom_projection) {
    const Index n = factors.c.rows();
    const Index l = factors.c.cols();
    if (factors.w.rows() != l || factors.w.cols() != l) {
        throw DimensionError("core matrix W must be " + std::to_string(l) + " x " + std::to_string(l));
    }
    if (deg.n() != n) {
        throw DimensionError("degree vector length differs from the rows of C");
    }
    if (d < 1 || d > l) {
        throw ParameterError("target rank must lie in [1, " + std::to_string(l) + "], got " +
                             std::to_string(d));
    }
    if (l > n) {
        throw DimensionError("C has more columns than rows");
    }
    const detail::InverseSqrt root = detail::psd_inverse_sqrt_ranked(factors.w, tol);
    const Eigen::MatrixXd f = factors.c * root.matrix;

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(f);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(l).triangularView<Eigen::Upper>();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullU);
    if (svd.info() != Eigen::Success) {
        throw NumericError("SVD of the Nystrom factor did not converge");
    }
    const Eigen::VectorXd& sv = svd.singularValues();
    Index effective = 0;
    const double top = sv.size() ? sv[0] * sv[0] : 0.0;
    for (Index i = 0; i < sv.size(); ++i) {
        if (sv[i] * sv[i] > tol * top) {
            ++effective;
        }
    }
    effective = std::min(effective, root.rank);
    if (effective < 1) {
        throw DegeneracyError("Nystrom factor has numerical rank 0");
    }

    SpectralModel model;
    const Index kept = std::min(d, effective);
    if (kept < d) {
        model.warnings.push_back("truncated: requested " + std::to_string(d) +
                                 " components but the Nystrom factor has effective rank " +
                                 std::to_string(effective));
    }
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, kept);
    u.topRows(l) = svd.matrixU().leftCols(kept);
    u.applyOnTheLeft(qr.householderQ());
    fix_signs(u);
    model.eigenvalues = sv.head(kept).array().square();
    model.eigenvectors_markov = recover_markov_eigvecs(u, deg);
    model.eigenvectors_sym = std::move(u);
    model.degrees = deg;
    model.method = method;
    model.rank_d = kept;
    return model;
}

/// Random-projection route: sketch, project, factor.
template <BlockMultiply Multiply>
SpectralModel nystrom_projection_model(Multiply&& apply, const DegreeVector& deg,
                                       const SketchConfig& config) {
    config.validate(deg.n());
    SketchBasis basis = gaussian_sketch_basis(apply, deg.n(), config.sketch_size(),
                                              config.power_iterations_q, config.seed);
    const NystromFactors factors = project(apply, basis.q);
    SpectralModel model = nystrom_eigs(factors, config.target_rank_d, deg, config.pinv_tolerance,
                                       Method::nystrom_projection);
    model.warnings.insert(model.warnings.begin(), basis.warnings.begin(), basis.warnings.end());
    return model;
}

/// Column-sampling route.
template <ColumnProvider Provider>
SpectralModel nystrom_columns_model(Provider&& kernel_columns, const DegreeVector& deg,
                                    const SketchConfig& config) {
    config.validate(deg.n());
    const ColumnSample sample = sample_columns(kernel_columns, deg, config.sketch_size(), config.seed);
    return nystrom_eigs(sample.factors, config.target_rank_d, deg, config.pinv_tolerance,
                        Method::nystrom_columns);
}

}  // namespace dmap
