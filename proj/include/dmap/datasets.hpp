#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "dmap/data_matrix.hpp"
#include "dmap/error.hpp"
#include "dmap/random.hpp"

namespace dmap {

namespace detail {

inline void check_generator_args(Index n, double noise_std) {
    if (n < 2) {
        throw ParameterError("generator needs n >= 2, got " + std::to_string(n));
    }
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
        throw ParameterError("noise_std must be finite and >= 0");
    }
}

inline void add_noise(RowMatrix& x, double noise_std, Rng& rng) {
    if (noise_std == 0.0) {
        return;
    }
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) {
            x(i, j) += noise_std * rng.normal();
        }
    }
}

}  // namespace detail

inline constexpr double kDefaultNoiseStd = 0.05;

/// Two turns of a unit-radius helix rising from z = 0 to z = 1.
///
/// The parameter s runs over an even grid on [0, 4*pi]; point i sits at
/// (cos s, sin s, s / (4*pi)) before i.i.d. Gaussian noise is added.
inline DataMatrix generate_helix(Index n, double noise_std, std::uint64_t seed) {
    detail::check_generator_args(n, noise_std);
    constexpr double span = 4.0 * std::numbers::pi;
    RowMatrix x(n, 3);
    for (Index i = 0; i < n; ++i) {
        const double s = span * static_cast<double>(i) / static_cast<double>(n - 1);
        x(i, 0) = std::cos(s);
        x(i, 1) = std::sin(s);
        x(i, 2) = s / span;
    }
    Rng rng(seed);
    detail::add_noise(x, noise_std, rng);
    return DataMatrix(std::move(x));
}

struct SwissRoll {
    DataMatrix data;
    /// Generative roll angle s of each point.
    Eigen::VectorXd parameter;
};

/// Swiss roll: s = 1.5*pi*(1 + 2u), point (s cos s, h, s sin s) with h uniform on [0, 21].
inline SwissRoll generate_swiss_roll(Index n, double noise_std, std::uint64_t seed) {
    detail::check_generator_args(n, noise_std);
    constexpr double height = 21.0;
    Rng rng(seed);
    RowMatrix x(n, 3);
    Eigen::VectorXd s(n);
    for (Index i = 0; i < n; ++i) {
        s[i] = 1.5 * std::numbers::pi * (1.0 + 2.0 * rng.uniform());
        x(i, 0) = s[i] * std::cos(s[i]);
        x(i, 1) = height * rng.uniform();
        x(i, 2) = s[i] * std::sin(s[i]);
    }
    detail::add_noise(x, noise_std, rng);
    return {DataMatrix(std::move(x)), std::move(s)};
}

struct LorenzParams {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
    std::array<double, 3> x0{-8.0, 8.0, 27.0};
    double t_end = 5.0;
    double dt = 1e-4;

    void validate() const {
        if (!(dt > 0.0) || !(t_end > 0.0) || !(dt < t_end)) {
            throw ParameterError("lorenz parameters need 0 < dt < t_end");
        }
        if (!std::isfinite(sigma) || !std::isfinite(rho) || !std::isfinite(beta) ||
            !std::isfinite(x0[0]) || !std::isfinite(x0[1]) || !std::isfinite(x0[2])) {
            throw ParameterError("lorenz parameters must be finite");
        }
    }

    /// floor(t_end / dt) + 1; the ratio is nudged up so 5 / 1e-4 counts 50000 steps.
    [[nodiscard]] Index row_count() const {
        return static_cast<Index>(std::floor(t_end / dt * (1.0 + 1e-12))) + 1;
    }
};

inline Eigen::Vector3d lorenz_derivative(const LorenzParams& p, const Eigen::Vector3d& v) {
    return {p.sigma * (v[1] - v[0]), v[0] * (p.rho - v[2]) - v[1], v[0] * v[1] - p.beta * v[2]};
}

/// Fixed-step classical RK4. One row per step, the initial state first.
inline DataMatrix integrate_lorenz(const LorenzParams& params) {
    params.validate();
    const Index rows = params.row_count();
    const double h = params.dt;
    RowMatrix out(rows, 3);
    Eigen::Vector3d v(params.x0[0], params.x0[1], params.x0[2]);
    out.row(0) = v.transpose();
    for (Index step = 1; step < rows; ++step) {
        const Eigen::Vector3d k1 = lorenz_derivative(params, v);
        const Eigen::Vector3d k2 = lorenz_derivative(params, v + 0.5 * h * k1);
        const Eigen::Vector3d k3 = lorenz_derivative(params, v + 0.5 * h * k2);
        const Eigen::Vector3d k4 = lorenz_derivative(params, v + h * k3);
        v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!v.allFinite()) {
            throw IntegrationError("lorenz trajectory diverged", static_cast<std::size_t>(step));
        }
        out.row(step) = v.transpose();
    }
    return DataMatrix(std::move(out));
}

/// Keeps n rows at evenly spaced positions, always including the first and last.
inline DataMatrix subsample_rows(const DataMatrix& x, Index n) {
    if (n < 2 || n > x.n()) {
        throw ParameterError("subsample size must lie in [2, " + std::to_string(x.n()) + "], got " +
                             std::to_string(n));
    }
    if (n == x.n()) {
        return x;
    }
    RowMatrix out(n, x.p());
    const Index span = x.n() - 1;
    const Index gaps = n - 1;
    for (Index i = 0; i < n; ++i) {
        out.row(i) = x.row((i * span + gaps / 2) / gaps);
    }
    return DataMatrix(std::move(out));
}

}  // namespace dmap
