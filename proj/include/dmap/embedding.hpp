#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmap/csv.hpp"
#include "dmap/error.hpp"
#include "dmap/random.hpp"
#include "dmap/spectral.hpp"

namespace dmap {

/// How a component is weighted by its eigenvalue at diffusion time t.
enum class Weighting {
    sqrt_power,  ///< sqrt(lambda^t)
    power,       ///< lambda^t, the classical diffusion-map weight
};

inline std::string_view to_string(Weighting w) {
    return w == Weighting::sqrt_power ? "sqrt" : "classic";
}

inline Weighting weighting_from_string(std::string_view s) {
    if (s == "sqrt") return Weighting::sqrt_power;
    if (s == "classic") return Weighting::power;
    throw ParameterError("unknown weighting '" + std::string(s) + "'");
}

inline constexpr double kEigenvalueClampTolerance = 1e-10;

struct DiffusionEmbedding {
    Eigen::MatrixXd coords;  ///< row i is the diffusion map of point i
    double t = 1.0;
    Eigen::VectorXd component_eigenvalues;

    [[nodiscard]] Index n() const noexcept { return coords.rows(); }
    [[nodiscard]] Index d() const noexcept { return coords.cols(); }
};

struct ClusterLabels {
    Eigen::VectorXi labels;
    Index k = 0;
    double inertia = 0.0;
    Index iterations = 0;
    std::vector<double> inertia_history;
};

namespace detail {

inline bool is_integer(double t) { return std::floor(t) == t; }

inline double component_weight(double lambda, double t, Weighting weighting) {
    if (lambda < -kEigenvalueClampTolerance) {
        const bool integral = is_integer(t);
        if (weighting == Weighting::sqrt_power && integral && std::fmod(t, 2.0) == 0.0) {
            return std::exp(0.5 * t * std::log(-lambda));
        }
        if (weighting == Weighting::power && integral) {
            return std::pow(lambda, t);
        }
        throw NumericError("eigenvalue " + format_real(lambda) +
                           " is negative beyond tolerance; its power at t = " + format_real(t) +
                           " is not real");
    }
    if (lambda <= 0.0) {
        return 0.0;
    }
    const double log_power = t * std::log(lambda);
    return weighting == Weighting::sqrt_power ? std::exp(0.5 * log_power) : std::exp(log_power);
}

}  // namespace detail

/// Diffusion-map coordinates: column c is weight(lambda_c, t) times Markov eigenvector c.
///
/// With drop_trivial the leading (lambda = 1, constant) component is skipped
/// and components 2..d+1 are used.
inline DiffusionEmbedding diffusion_map(const SpectralModel& model, double t, Index d,
                                        bool drop_trivial = false,
                                        Weighting weighting = Weighting::sqrt_power) {
    if (!(t > 0.0) || !std::isfinite(t)) {
        throw ParameterError("diffusion time must be positive and finite");
    }
    const Index first = drop_trivial ? 1 : 0;
    const Index available = std::min<Index>(model.rank_d, model.eigenvalues.size());
    if (d < 1 || first + d > available) {
        throw ParameterError("embedding needs " + std::to_string(first + d) +
                             " components but the model holds " + std::to_string(available));
    }
    if (model.eigenvectors_markov.cols() < first + d) {
        throw DimensionError("model has fewer Markov eigenvectors than eigenvalues");
    }
    DiffusionEmbedding emb;
    emb.t = t;
    emb.component_eigenvalues = model.eigenvalues.segment(first, d);
    emb.coords.resize(model.eigenvectors_markov.rows(), d);
    for (Index c = 0; c < d; ++c) {
        const double w = detail::component_weight(model.eigenvalues[first + c], t, weighting);
        emb.coords.col(c) = w * model.eigenvectors_markov.col(first + c);
    }
    return emb;
}

/// Squared diffusion distance between points i and j.
inline double diffusion_distance(const DiffusionEmbedding& emb, Index i, Index j) {
    if (i < 0 || j < 0 || i >= emb.n() || j >= emb.n()) {
        throw IndexError("diffusion distance index out of range [0, " + std::to_string(emb.n()) + ")");
    }
    double sum = 0.0;
    for (Index c = 0; c < emb.d(); ++c) {
        const double diff = emb.coords(i, c) - emb.coords(j, c);
        sum += diff * diff;
    }
    return sum;
}

/// || |ref| - |approx| ||_F / || |ref| ||_F. Absolute values remove the sign ambiguity
/// of eigenvectors.
inline double relative_embedding_error(const DiffusionEmbedding& ref, const DiffusionEmbedding& approx) {
    if (ref.n() != approx.n() || ref.d() != approx.d()) {
        throw DimensionError("embedding shapes differ: " + std::to_string(ref.n()) + " x " +
                             std::to_string(ref.d()) + " vs " + std::to_string(approx.n()) + " x " +
                             std::to_string(approx.d()));
    }
    const double denom = ref.coords.norm();
    if (!(denom > 0.0)) {
        throw DegeneracyError("reference embedding is identically zero");
    }
    return (ref.coords.cwiseAbs() - approx.coords.cwiseAbs()).norm() / denom;
}

namespace detail {

inline double row_distance(const Eigen::MatrixXd& x, Index i, const Eigen::MatrixXd& centers, Index c) {
    double sum = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
        const double diff = x(i, j) - centers(c, j);
        sum += diff * diff;
    }
    return sum;
}

inline Eigen::MatrixXd kmeanspp_centers(const Eigen::MatrixXd& x, Index k, Rng& rng) {
    const Index n = x.rows();
    Eigen::MatrixXd centers(k, x.cols());
    std::vector<bool> chosen(static_cast<std::size_t>(n), false);
    Index pick = static_cast<Index>(rng.index(static_cast<std::uint64_t>(n)));
    centers.row(0) = x.row(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
    Eigen::VectorXd nearest(n);
    for (Index i = 0; i < n; ++i) {
        nearest[i] = row_distance(x, i, centers, 0);
    }
    for (Index c = 1; c < k; ++c) {
        const double total = nearest.sum();
        pick = -1;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double running = 0.0;
            for (Index i = 0; i < n; ++i) {
                if (nearest[i] <= 0.0) {
                    continue;
                }
                running += nearest[i];
                pick = i;
                if (running > target) {
                    break;
                }
            }
        }
        if (pick < 0) {
            for (Index i = 0; i < n; ++i) {
                if (!chosen[static_cast<std::size_t>(i)]) {
                    pick = i;
                    break;
                }
            }
        }
        centers.row(c) = x.row(pick);
        chosen[static_cast<std::size_t>(pick)] = true;
        for (Index i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], row_distance(x, i, centers, c));
        }
    }
    return centers;
}

}  // namespace detail

/// Lloyd's k-means on the diffusion coordinates with k-means++ seeding.
///
/// An empty cluster is re-seeded at the point farthest from its centroid.
/// inertia_history records the objective after every update step.
inline ClusterLabels kmeans_cluster(const DiffusionEmbedding& emb, Index k, std::uint64_t seed,
                                    Index max_iters = 300) {
    const Eigen::MatrixXd& x = emb.coords;
    const Index n = x.rows();
    if (k < 1 || k > n) {
        throw ParameterError("cluster count must lie in [1, " + std::to_string(n) + "], got " +
                             std::to_string(k));
    }
    if (max_iters < 1) {
        throw ParameterError("k-means needs max_iters >= 1");
    }
    Rng rng(seed);
    Eigen::MatrixXd centers = detail::kmeanspp_centers(x, k, rng);
    ClusterLabels out;
    out.k = k;
    out.labels = Eigen::VectorXi::Constant(n, -1);
    Eigen::VectorXd dist(n);
    std::vector<Index> sizes(static_cast<std::size_t>(k));

    for (Index iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        std::fill(sizes.begin(), sizes.end(), 0);
        for (Index i = 0; i < n; ++i) {
            Index best = 0;
            double best_dist = detail::row_distance(x, i, centers, 0);
            for (Index c = 1; c < k; ++c) {
                const double dc = detail::row_distance(x, i, centers, c);
                if (dc < best_dist) {
                    best_dist = dc;
                    best = c;
                }
            }
            changed = changed || out.labels[i] != best;
            out.labels[i] = static_cast<int>(best);
            dist[i] = best_dist;
            ++sizes[static_cast<std::size_t>(best)];
        }
        for (Index c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] != 0) {
                continue;
            }
            Index far = -1;
            for (Index i = 0; i < n; ++i) {
                if (sizes[static_cast<std::size_t>(out.labels[i])] > 1 && (far < 0 || dist[i] > dist[far])) {
                    far = i;
                }
            }
            --sizes[static_cast<std::size_t>(out.labels[far])];
            ++sizes[static_cast<std::size_t>(c)];
            out.labels[far] = static_cast<int>(c);
            dist[far] = 0.0;
            centers.row(c) = x.row(far);
            changed = true;
        }
        centers.setZero();
        for (Index i = 0; i < n; ++i) {
            centers.row(out.labels[i]) += x.row(i);
        }
        for (Index c = 0; c < k; ++c) {
            centers.row(c) /= static_cast<double>(sizes[static_cast<std::size_t>(c)]);
        }
        double inertia = 0.0;
        for (Index i = 0; i < n; ++i) {
            inertia += detail::row_distance(x, i, centers, out.labels[i]);
        }
        out.inertia_history.push_back(inertia);
        out.inertia = inertia;
        out.iterations = iter + 1;
        if (!changed) {
            break;
        }
    }
    return out;
}

/// Embedding as CSV: columns c1..cd and, when given, an integer label column.
inline void write_embedding_csv(const std::string& path, const DiffusionEmbedding& emb,
                                const std::optional<Eigen::VectorXi>& labels = std::nullopt) {
    if (labels && labels->size() != emb.n()) {
        throw DimensionError("label count differs from embedding rows");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open '" + path + "' for writing");
    }
    for (Index c = 0; c < emb.d(); ++c) {
        out << (c ? ",c" : "c") << (c + 1);
    }
    if (labels) {
        out << ",label";
    }
    out << '\n';
    for (Index i = 0; i < emb.n(); ++i) {
        for (Index c = 0; c < emb.d(); ++c) {
            out << (c ? "," : "") << format_real(emb.coords(i, c));
        }
        if (labels) {
            out << ',' << (*labels)[i];
        }
        out << '\n';
    }
    if (!out) {
        throw Error("failed writing '" + path + "'");
    }
}

}  // namespace dmap
