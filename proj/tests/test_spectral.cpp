#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include "dmap/datasets.hpp"
#include "dmap/kernel.hpp"
#include "dmap/spectral.hpp"
#include "support.hpp"

using dmap::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Operators {
    dmap::KernelMatrix k;
    dmap::DegreeVector deg;
};

Operators operators(const dmap::DataMatrix& x, double sigma) {
    auto k = dmap::gaussian_kernel_matrix(x, sigma);
    auto deg = dmap::degrees_from_kernel(k);
    return {std::move(k), std::move(deg)};
}

dmap::DataMatrix triangle() {
    dmap::RowMatrix m(3, 2);
    m << 0, 0, 1, 0, 0, 2;
    return dmap::DataMatrix(m);
}

}  // namespace

TEST(Markov, RowsSumToOne) {
    const auto ops = operators(dmap::generate_swiss_roll(300, 0.05, 1).data, 2.0);
    const MatrixXd p = dmap::markov_matrix(ops.k, ops.deg);
    EXPECT_LE((p.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Markov, ThreePointTable) {
    const auto ops = operators(triangle(), 0.5);
    const MatrixXd p = dmap::markov_matrix(ops.k, ops.deg);
    const std::array<std::array<double, 3>, 3> expected{{
        {0.88053690177496159855, 0.11916771100200383689, 0.00029538722303456455904},
        {0.1191981555113185572, 0.8807618579621924836, 0.000039986526488959197946},
        {0.00033533491139048529356, 0.000045382645212155746782, 0.99961928244339735896},
    }};
    for (Index i = 0; i < 3; ++i) {
        for (Index j = 0; j < 3; ++j) EXPECT_NEAR(p(i, j), expected[i][j], 1e-15);
    }
}

TEST(Markov, AllOnesKernelGivesUniformRows) {
    const dmap::KernelMatrix k{MatrixXd::Ones(5, 5), 1.0};
    const auto deg = dmap::degrees_from_kernel(k);
    const MatrixXd p = dmap::markov_matrix(k, deg);
    EXPECT_LE((p.array() - 0.2).abs().maxCoeff(), 1e-16);
    const auto pairs = dmap::eigendecompose(dmap::symmetric_matrix(k, deg), 2);
    EXPECT_NEAR(pairs.values[0], 1.0, 1e-14);
    EXPECT_NEAR(pairs.values[1], 0.0, 1e-14);
}

TEST(Symmetric, ThreePointTableAndExactSymmetry) {
    const auto ops = operators(triangle(), 0.5);
    const MatrixXd a = dmap::symmetric_matrix(ops.k, ops.deg);
    EXPECT_NEAR(a(0, 1), 0.11918293228455457294, 1e-15);
    EXPECT_NEAR(a(0, 2), 0.00031472789558947141861, 1e-15);
    EXPECT_NEAR(a(1, 2), 0.000042599229393439772508, 1e-15);
    EXPECT_TRUE(a == a.transpose());
}

TEST(Symmetric, SqrtDegreeIsAFixedVector) {
    const auto x = dmap::generate_helix(250, 0.05, 3);
    const auto ops = operators(x, 0.5);
    const MatrixXd a = dmap::symmetric_matrix(ops.k, ops.deg);
    const VectorXd s = ops.deg.values.array().sqrt();
    EXPECT_LE((a * s - s).norm(), 1e-12 * s.norm());
    EXPECT_LE((a - support::brute_symmetric(support::brute_kernel(x.values(), 0.5))).cwiseAbs().maxCoeff(),
              1e-14);

    dmap::KernelMatrix moved = ops.k;
    EXPECT_EQ(dmap::symmetric_matrix(std::move(moved), ops.deg), a);
}

TEST(Eigendecompose, IdentityAndDiagonal) {
    const auto id = dmap::eigendecompose(MatrixXd::Identity(6, 6), 3);
    EXPECT_EQ(id.values.size(), 3);
    EXPECT_LE((id.values.array() - 1.0).abs().maxCoeff(), 1e-15);
    EXPECT_LE((id.vectors.transpose() * id.vectors - MatrixXd::Identity(3, 3)).norm(), 1e-14);

    VectorXd diag(5);
    diag << 0.3, -2.0, 5.0, 1.0, 0.7;
    const auto pairs = dmap::eigendecompose(MatrixXd(diag.asDiagonal()), 3);
    EXPECT_NEAR(pairs.values[0], 5.0, 1e-14);
    EXPECT_NEAR(pairs.values[1], 1.0, 1e-14);
    EXPECT_NEAR(pairs.values[2], 0.7, 1e-14);
    EXPECT_NEAR(pairs.vectors(2, 0), 1.0, 1e-14);
    EXPECT_NEAR(pairs.vectors(3, 1), 1.0, 1e-14);
    EXPECT_NEAR(pairs.vectors(4, 2), 1.0, 1e-14);
}

TEST(Eigendecompose, MatchesReferenceSolver) {
    const MatrixXd g = support::gaussian_matrix(60, 60, 8);
    const MatrixXd a = g + g.transpose();
    const auto pairs = dmap::eigendecompose(a, 10);
    const auto ref = support::dense_eigs(a);
    EXPECT_LE((pairs.values - ref.values.head(10)).cwiseAbs().maxCoeff(), 1e-12 * ref.values.cwiseAbs().maxCoeff());
    for (Index c = 0; c < 10; ++c) {
        EXPECT_NEAR(std::abs(pairs.vectors.col(c).dot(ref.vectors.col(c))), 1.0, 1e-10);
    }
}

TEST(Eigendecompose, RejectsAsymmetricInputAndBadRank) {
    MatrixXd a = MatrixXd::Identity(4, 4);
    a(0, 1) = 1e-3;
    EXPECT_THROW(dmap::eigendecompose(a, 2), dmap::ContractError);
    EXPECT_THROW(dmap::eigendecompose(MatrixXd(3, 4), 1), dmap::ContractError);
    EXPECT_THROW(dmap::eigendecompose(MatrixXd::Identity(4, 4), 0), dmap::ParameterError);
    EXPECT_THROW(dmap::eigendecompose(MatrixXd::Identity(4, 4), 5), dmap::ParameterError);
}

TEST(FixSigns, LargestEntryBecomesPositive) {
    MatrixXd v(3, 2);
    v << 0.1, 0.5, -0.9, -0.5, 0.2, 0.1;
    dmap::fix_signs(v);
    EXPECT_EQ(v(1, 0), 0.9);
    // tie: the first largest entry wins
    EXPECT_EQ(v(0, 1), 0.5);
    EXPECT_EQ(v(1, 1), -0.5);
}

TEST(DeterministicModel, LeadingEigenvalueIsOneOnHelix) {
    const auto ops = operators(dmap::generate_helix(500, 0.05, 0), 0.5);
    const auto model = dmap::deterministic_model(dmap::symmetric_matrix(ops.k, ops.deg), ops.deg, 10);
    EXPECT_NEAR(model.eigenvalues[0], 1.0, 1e-12);
    for (Index i = 1; i < 10; ++i) {
        EXPECT_LE(model.eigenvalues[i], model.eigenvalues[i - 1]);
        EXPECT_LT(std::abs(model.eigenvalues[i]), 1.0);
    }
    EXPECT_EQ(model.rank_d, 10);
    EXPECT_EQ(model.method, dmap::Method::deterministic);
    // the leading Markov eigenvector is constant
    const VectorXd v0 = model.eigenvectors_markov.col(0);
    EXPECT_LE((v0.array() - 1.0 / std::sqrt(500.0)).abs().maxCoeff(), 1e-10);
}

TEST(DeterministicModel, MarkovEigenvectorsSatisfyTheEigenEquation) {
    const auto ops = operators(dmap::generate_swiss_roll(400, 0.05, 2).data, 3.0);
    const MatrixXd p = dmap::markov_matrix(ops.k, ops.deg);
    const auto model = dmap::deterministic_model(dmap::symmetric_matrix(ops.k, ops.deg), ops.deg, 20);
    for (Index c = 0; c < 20; ++c) {
        const VectorXd v = model.eigenvectors_markov.col(c);
        EXPECT_NEAR(v.norm(), 1.0, 1e-14);
        EXPECT_LE((p * v - model.eigenvalues[c] * v).norm(), 1e-10) << "component " << c;
    }
}

// P is not symmetric; a general eigensolver on P must agree with the
// symmetric route through A.
TEST(DeterministicModel, AgreesWithNonsymmetricSolveOfMarkovMatrix) {
    for (const Index n : {40, 150, 300}) {
        const auto ops = operators(dmap::generate_helix(n, 0.05, static_cast<std::uint64_t>(n)), 0.5);
        const MatrixXd p = dmap::markov_matrix(ops.k, ops.deg);
        const Index d = 6;
        const auto model = dmap::deterministic_model(dmap::symmetric_matrix(ops.k, ops.deg), ops.deg, d);

        Eigen::EigenSolver<MatrixXd> es(p);
        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](Index a, Index b) { return es.eigenvalues()[a].real() > es.eigenvalues()[b].real(); });
        for (Index c = 0; c < d; ++c) {
            const auto lambda = es.eigenvalues()[order[c]];
            EXPECT_LE(std::abs(lambda.imag()), 1e-10);
            EXPECT_NEAR(model.eigenvalues[c], lambda.real(), 1e-10) << "n " << n << " component " << c;
            const double gap = std::min(c > 0 ? model.eigenvalues[c - 1] - model.eigenvalues[c] : 1.0,
                                        c + 1 < d ? model.eigenvalues[c] - model.eigenvalues[c + 1] : 1.0);
            if (gap < 1e-4) continue;
            VectorXd ref = es.eigenvectors().col(order[c]).real();
            ref.normalize();
            EXPECT_NEAR(std::abs(ref.dot(model.eigenvectors_markov.col(c))), 1.0, 1e-8);
        }
    }
}

TEST(DeterministicModel, PermutingPointsPermutesEigenvectors) {
    const auto x = dmap::generate_helix(200, 0.05, 4);
    std::vector<Index> perm(200);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 gen(99);
    std::shuffle(perm.begin(), perm.end(), gen);
    dmap::RowMatrix shuffled(200, 3);
    for (Index i = 0; i < 200; ++i) shuffled.row(i) = x.row(perm[i]);

    const auto a = operators(x, 0.5);
    const auto b = operators(dmap::DataMatrix(shuffled), 0.5);
    const auto ma = dmap::deterministic_model(dmap::symmetric_matrix(a.k, a.deg), a.deg, 5);
    const auto mb = dmap::deterministic_model(dmap::symmetric_matrix(b.k, b.deg), b.deg, 5);
    EXPECT_LE((ma.eigenvalues - mb.eigenvalues).cwiseAbs().maxCoeff(), 1e-12);
    for (Index c = 0; c < 5; ++c) {
        for (Index i = 0; i < 200; ++i) {
            EXPECT_NEAR(std::abs(mb.eigenvectors_markov(i, c)), std::abs(ma.eigenvectors_markov(perm[i], c)), 1e-9);
        }
    }
}

TEST(Recover, RejectsMismatchedDegrees) {
    const dmap::DegreeVector deg{VectorXd::Ones(4)};
    EXPECT_THROW(dmap::recover_markov_eigvecs(MatrixXd::Identity(5, 2), deg), dmap::DimensionError);
    const dmap::DegreeVector bad{VectorXd::Zero(5)};
    EXPECT_THROW(dmap::recover_markov_eigvecs(MatrixXd::Identity(5, 2), bad), dmap::DegeneracyError);
}

TEST(Method, NamesRoundTrip) {
    for (const auto m : {dmap::Method::deterministic, dmap::Method::nystrom_columns, dmap::Method::nystrom_projection}) {
        EXPECT_EQ(dmap::method_from_string(dmap::to_string(m)), m);
    }
    EXPECT_EQ(dmap::method_from_string("nys-rp"), dmap::Method::nystrom_projection);
    EXPECT_THROW(dmap::method_from_string("lanczos"), dmap::ParameterError);
}

TEST(Symmetric, FarApartPointsGiveIdentity) {
    dmap::RowMatrix m(4, 2);
    m << 0, 0, 100, 0, 0, 100, 100, 100;
    const auto ops = operators(dmap::DataMatrix(m), 0.5);
    EXPECT_EQ(dmap::symmetric_matrix(ops.k, ops.deg), MatrixXd::Identity(4, 4));
}

TEST(Symmetric, AllOnesKernelGivesRankOneOperator) {
    const Index n = 6;
    const dmap::KernelMatrix k{MatrixXd::Ones(n, n), 1.0};
    const auto deg = dmap::degrees_from_kernel(k);
    const MatrixXd a = dmap::symmetric_matrix(k, deg);
    EXPECT_LE((a.array() - 1.0 / n).abs().maxCoeff(), 1e-16);
    const auto ref = support::dense_eigs(a);
    EXPECT_NEAR(ref.values[0], 1.0, 1e-14);
    EXPECT_LE(ref.values.tail(n - 1).cwiseAbs().maxCoeff(), 1e-14);
    const auto pairs = dmap::eigendecompose(a, n);
    EXPECT_NEAR(pairs.values[0], 1.0, 1e-14);
    EXPECT_LE(pairs.values.tail(n - 1).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Eigendecompose, DiagonalTopTwo) {
    VectorXd diag(3);
    diag << 3.0, 2.0, 1.0;
    const auto pairs = dmap::eigendecompose(MatrixXd(diag.asDiagonal()), 2);
    EXPECT_NEAR(pairs.values[0], 3.0, 1e-15);
    EXPECT_NEAR(pairs.values[1], 2.0, 1e-15);
    EXPECT_LE((pairs.vectors - MatrixXd::Identity(3, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Recover, UnitDegreesLeaveSignFixedVectors) {
    MatrixXd u = support::gaussian_matrix(10, 3, 2);
    for (Index c = 0; c < 3; ++c) u.col(c).normalize();
    dmap::fix_signs(u);
    const dmap::DegreeVector deg{VectorXd::Ones(10)};
    EXPECT_LE((dmap::recover_markov_eigvecs(u, deg) - u).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DeterministicModel, HelixPairsSatisfyTheResidualBound) {
    const auto ops = operators(dmap::generate_helix(500, 0.05, 0), 0.5);
    const MatrixXd p = dmap::markov_matrix(ops.k, ops.deg);
    const double p_norm = p.cwiseAbs().rowwise().sum().maxCoeff();
    const auto model = dmap::deterministic_model(dmap::symmetric_matrix(ops.k, ops.deg), ops.deg, 10);
    for (Index c = 0; c < 10; ++c) {
        const VectorXd v = model.eigenvectors_markov.col(c);
        EXPECT_LE((p * v - model.eigenvalues[c] * v).norm(), 1e-8 * p_norm);
    }
}
