#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dmap/csv.hpp"
#include "dmap/data_matrix.hpp"
#include "dmap/datasets.hpp"
#include "dmap/embedding.hpp"
#include "dmap/error.hpp"
#include "dmap/kernel.hpp"
#include "dmap/nystrom.hpp"
#include "dmap/spectral.hpp"

namespace dmap {

enum class Dataset { helix, swiss_roll, lorenz, csv };

inline std::string_view to_string(Dataset d) {
    switch (d) {
        case Dataset::helix: return "helix";
        case Dataset::swiss_roll: return "swiss";
        case Dataset::lorenz: return "lorenz";
        case Dataset::csv: return "csv";
    }
    return "unknown";
}

inline Dataset dataset_from_string(std::string_view s) {
    if (s == "helix") return Dataset::helix;
    if (s == "swiss" || s == "swiss_roll") return Dataset::swiss_roll;
    if (s == "lorenz") return Dataset::lorenz;
    if (s == "csv") return Dataset::csv;
    throw ParameterError("unknown dataset '" + std::string(s) + "'");
}

/// CLI spelling of a method: det, nys-cols, nys-rp.
inline std::string_view method_flag(Method m) {
    switch (m) {
        case Method::deterministic: return "det";
        case Method::nystrom_columns: return "nys-cols";
        case Method::nystrom_projection: return "nys-rp";
    }
    return "unknown";
}

/// Everything one experiment needs. A sigma of 0 selects the dataset
/// default (0.5 for helix and swiss, 10 for lorenz) when resolved.
struct ExperimentConfig {
    Dataset dataset = Dataset::helix;
    std::string csv_path;
    bool csv_header = false;
    Index n = 2000;
    double sigma = 0.0;
    Index rank = 20;
    double t = 1.0;
    Method method = Method::deterministic;
    Index oversample = 10;
    Index power_iters = 2;
    double pinv_tolerance = kDefaultPinvTolerance;
    std::uint64_t seed = 0;
    std::string out = "out";
    bool drop_trivial = false;
    Index cluster = 0;
    Weighting weighting = Weighting::sqrt_power;
    double noise = kDefaultNoiseStd;
    bool reference = false;
    double lorenz_dt = 1e-4;
    double lorenz_t_end = 5.0;
    Index kmeans_max_iters = 300;
    Index block_rows = kDefaultBlockRows;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

    [[nodiscard]] SketchConfig sketch(SketchStrategy strategy) const {
        SketchConfig s;
        s.target_rank_d = rank;
        s.oversampling = oversample;
        s.power_iterations_q = power_iters;
        s.strategy = strategy;
        s.seed = seed;
        s.pinv_tolerance = pinv_tolerance;
        return s;
    }
};

/// Fills dataset-dependent defaults.
inline ExperimentConfig resolve_defaults(ExperimentConfig config) {
    if (config.sigma == 0.0) {
        switch (config.dataset) {
            case Dataset::helix:
            case Dataset::swiss_roll: config.sigma = 0.5; break;
            case Dataset::lorenz: config.sigma = 10.0; break;
            case Dataset::csv: throw ParameterError("csv datasets need an explicit sigma");
        }
    }
    return config;
}

/// Checks everything that can be checked before any data is touched.
inline void validate(const ExperimentConfig& c) {
    if (c.dataset == Dataset::csv && c.csv_path.empty()) {
        throw ParameterError("dataset csv needs a csv path");
    }
    if (c.dataset == Dataset::csv || c.dataset == Dataset::lorenz) {
        if (c.n != 0 && c.n < 2) {
            throw ParameterError("n must be 0 (all rows) or >= 2");
        }
    } else if (c.n < 2) {
        throw ParameterError("n must be >= 2");
    }
    if (!(c.sigma > 0.0) || !std::isfinite(c.sigma)) {
        throw ParameterError("sigma must be positive");
    }
    if (c.rank < 1) {
        throw ParameterError("rank must be >= 1");
    }
    if (c.drop_trivial && c.rank < 2) {
        throw ParameterError("drop_trivial needs rank >= 2");
    }
    if (!(c.t > 0.0) || !std::isfinite(c.t)) {
        throw ParameterError("t must be positive");
    }
    if (c.oversample < 0 || c.power_iters < 0) {
        throw ParameterError("oversample and power_iters must be >= 0");
    }
    if (!(c.pinv_tolerance > 0.0 && c.pinv_tolerance < 1.0)) {
        throw ParameterError("pinv_tolerance must lie in (0, 1)");
    }
    if (c.cluster < 0) {
        throw ParameterError("cluster must be >= 0");
    }
    if (!(c.noise >= 0.0)) {
        throw ParameterError("noise must be >= 0");
    }
    if (c.kmeans_max_iters < 1 || c.block_rows < 1) {
        throw ParameterError("kmeans_max_iters and block_rows must be >= 1");
    }
    if (c.out.empty()) {
        throw ParameterError("output directory must not be empty");
    }
    if (c.dataset == Dataset::lorenz) {
        LorenzParams p;
        p.dt = c.lorenz_dt;
        p.t_end = c.lorenz_t_end;
        p.validate();
    }
}

// ---------------------------------------------------------------------------
// key = value config text

namespace detail {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline Index parse_index(const std::string& key, const std::string& value) {
    Index out = 0;
    const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || end != value.data() + value.size()) {
        throw ParameterError("config key '" + key + "' expects an integer, got '" + value + "'");
    }
    return out;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || end != value.data() + value.size()) {
        throw ParameterError("config key '" + key + "' expects a non-negative integer, got '" + value + "'");
    }
    return out;
}

inline double parse_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || end != value.data() + value.size() || !std::isfinite(out)) {
        throw ParameterError("config key '" + key + "' expects a number, got '" + value + "'");
    }
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ParameterError("config key '" + key + "' expects true or false, got '" + value + "'");
}

}  // namespace detail

/// Applies one key to a config. Keys are the long CLI flag names with
/// dashes replaced by underscores.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "dataset") c.dataset = dataset_from_string(value);
    else if (key == "csv_path") c.csv_path = value;
    else if (key == "csv_header") c.csv_header = parse_bool(key, value);
    else if (key == "n") c.n = parse_index(key, value);
    else if (key == "sigma") c.sigma = parse_double(key, value);
    else if (key == "rank") c.rank = parse_index(key, value);
    else if (key == "t") c.t = parse_double(key, value);
    else if (key == "method") c.method = method_from_string(value);
    else if (key == "oversample") c.oversample = parse_index(key, value);
    else if (key == "power_iters") c.power_iters = parse_index(key, value);
    else if (key == "pinv_tolerance") c.pinv_tolerance = parse_double(key, value);
    else if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "out") c.out = value;
    else if (key == "drop_trivial") c.drop_trivial = parse_bool(key, value);
    else if (key == "cluster") c.cluster = parse_index(key, value);
    else if (key == "weighting") c.weighting = weighting_from_string(value);
    else if (key == "noise") c.noise = parse_double(key, value);
    else if (key == "reference") c.reference = parse_bool(key, value);
    else if (key == "lorenz_dt") c.lorenz_dt = parse_double(key, value);
    else if (key == "lorenz_t_end") c.lorenz_t_end = parse_double(key, value);
    else if (key == "kmeans_max_iters") c.kmeans_max_iters = parse_index(key, value);
    else if (key == "block_rows") c.block_rows = parse_index(key, value);
    else throw ParameterError("unknown config key '" + key + "'");
}

/// Parses "key = value" lines onto base. '#' starts a comment.
inline ExperimentConfig parse_config_text(std::string_view text, ExperimentConfig base = {}) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string body = detail::trim(line);
        if (body.empty()) {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ParseError("expected 'key = value'", line_no);
        }
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        try {
            set_config_value(base, key, value);
        } catch (const ParameterError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return base;
}

inline ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open config '" + path + "'", 0);
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), std::move(base));
}

inline std::string to_config_text(const ExperimentConfig& c) {
    std::ostringstream o;
    const auto b = [](bool v) { return v ? "true" : "false"; };
    o << "dataset = " << to_string(c.dataset) << '\n'
      << "csv_path = " << c.csv_path << '\n'
      << "csv_header = " << b(c.csv_header) << '\n'
      << "n = " << c.n << '\n'
      << "sigma = " << format_real(c.sigma) << '\n'
      << "rank = " << c.rank << '\n'
      << "t = " << format_real(c.t) << '\n'
      << "method = " << method_flag(c.method) << '\n'
      << "oversample = " << c.oversample << '\n'
      << "power_iters = " << c.power_iters << '\n'
      << "pinv_tolerance = " << format_real(c.pinv_tolerance) << '\n'
      << "seed = " << c.seed << '\n'
      << "out = " << c.out << '\n'
      << "drop_trivial = " << b(c.drop_trivial) << '\n'
      << "cluster = " << c.cluster << '\n'
      << "weighting = " << to_string(c.weighting) << '\n'
      << "noise = " << format_real(c.noise) << '\n'
      << "reference = " << b(c.reference) << '\n'
      << "lorenz_dt = " << format_real(c.lorenz_dt) << '\n'
      << "lorenz_t_end = " << format_real(c.lorenz_t_end) << '\n'
      << "kmeans_max_iters = " << c.kmeans_max_iters << '\n'
      << "block_rows = " << c.block_rows << '\n';
    return o.str();
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    return {
        {"dataset", to_string(c.dataset)},
        {"csv_path", c.csv_path},
        {"csv_header", c.csv_header},
        {"n", c.n},
        {"sigma", c.sigma},
        {"rank", c.rank},
        {"t", c.t},
        {"method", method_flag(c.method)},
        {"oversample", c.oversample},
        {"power_iters", c.power_iters},
        {"pinv_tolerance", c.pinv_tolerance},
        {"seed", c.seed},
        {"out", c.out},
        {"drop_trivial", c.drop_trivial},
        {"cluster", c.cluster},
        {"weighting", to_string(c.weighting)},
        {"noise", c.noise},
        {"reference", c.reference},
        {"lorenz_dt", c.lorenz_dt},
        {"lorenz_t_end", c.lorenz_t_end},
        {"kmeans_max_iters", c.kmeans_max_iters},
        {"block_rows", c.block_rows},
    };
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.dataset = dataset_from_string(j.at("dataset").get<std::string>());
    c.csv_path = j.at("csv_path").get<std::string>();
    c.csv_header = j.at("csv_header").get<bool>();
    c.n = j.at("n").get<Index>();
    c.sigma = j.at("sigma").get<double>();
    c.rank = j.at("rank").get<Index>();
    c.t = j.at("t").get<double>();
    c.method = method_from_string(j.at("method").get<std::string>());
    c.oversample = j.at("oversample").get<Index>();
    c.power_iters = j.at("power_iters").get<Index>();
    c.pinv_tolerance = j.at("pinv_tolerance").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.out = j.at("out").get<std::string>();
    c.drop_trivial = j.at("drop_trivial").get<bool>();
    c.cluster = j.at("cluster").get<Index>();
    c.weighting = weighting_from_string(j.at("weighting").get<std::string>());
    c.noise = j.at("noise").get<double>();
    c.reference = j.at("reference").get<bool>();
    c.lorenz_dt = j.at("lorenz_dt").get<double>();
    c.lorenz_t_end = j.at("lorenz_t_end").get<double>();
    c.kmeans_max_iters = j.at("kmeans_max_iters").get<Index>();
    c.block_rows = j.at("block_rows").get<Index>();
    return c;
}

// ---------------------------------------------------------------------------
// reports

/// Wall time per pipeline stage, in seconds. The kernel stage covers building
/// K and normalizing it to A; it is zero for column sampling, which never
/// materializes either.
struct StageTimings {
    double kernel = 0.0;
    double degrees = 0.0;
    double decomposition = 0.0;
    double embedding = 0.0;

    [[nodiscard]] double total() const { return kernel + degrees + decomposition + embedding; }
};

struct ClusterSummary {
    Index k = 0;
    double inertia = 0.0;
    Index iterations = 0;
};

struct MethodResult {
    Method method = Method::deterministic;
    StageTimings timings;
    Eigen::VectorXd eigenvalues;
    Index effective_rank = 0;
    std::optional<double> relative_error;
    std::optional<double> speedup_decomposition;
    std::optional<double> speedup_total;
    std::optional<ClusterSummary> clustering;
    std::vector<std::string> warnings;
};

struct ExperimentReport {
    std::string mode;  ///< "run" or "compare"
    ExperimentConfig config;
    Index n = 0;
    Index p = 0;
    double dataset_seconds = 0.0;
    std::vector<MethodResult> results;
    std::vector<std::string> warnings;

    [[nodiscard]] const MethodResult* find(Method m) const {
        for (const auto& r : results) {
            if (r.method == m) return &r;
        }
        return nullptr;
    }
};

inline constexpr std::string_view kReportSchema = "dmap-report/1";

inline nlohmann::json report_to_json(const ExperimentReport& r) {
    nlohmann::json results = nlohmann::json::array();
    for (const auto& m : r.results) {
        nlohmann::json j;
        j["method"] = to_string(m.method);
        j["timings"] = {{"kernel", m.timings.kernel},
                        {"degrees", m.timings.degrees},
                        {"decomposition", m.timings.decomposition},
                        {"embedding", m.timings.embedding},
                        {"total", m.timings.total()}};
        j["eigenvalues"] = std::vector<double>(m.eigenvalues.data(), m.eigenvalues.data() + m.eigenvalues.size());
        j["effective_rank"] = m.effective_rank;
        if (m.relative_error) j["relative_error"] = *m.relative_error;
        if (m.speedup_decomposition) j["speedup_decomposition"] = *m.speedup_decomposition;
        if (m.speedup_total) j["speedup_total"] = *m.speedup_total;
        if (m.clustering) {
            j["clustering"] = {{"k", m.clustering->k},
                               {"inertia", m.clustering->inertia},
                               {"iterations", m.clustering->iterations}};
        }
        j["warnings"] = m.warnings;
        results.push_back(std::move(j));
    }
    return {{"schema", kReportSchema},
            {"mode", r.mode},
            {"config", config_to_json(r.config)},
            {"dataset", {{"n", r.n}, {"p", r.p}, {"seconds", r.dataset_seconds}}},
            {"results", std::move(results)},
            {"warnings", r.warnings}};
}

/// Checks the structural contract of a serialized report.
inline bool report_json_is_valid(const nlohmann::json& j, std::string* why = nullptr) {
    const auto fail = [why](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (!j.is_object()) return fail("report is not an object");
    if (j.value("schema", "") != kReportSchema) return fail("schema tag missing or wrong");
    for (const char* key : {"mode", "config", "dataset", "results", "warnings"}) {
        if (!j.contains(key)) return fail(std::string("missing key ") + key);
    }
    if (!j["results"].is_array() || j["results"].empty()) return fail("results must be a nonempty array");
    try {
        (void)config_from_json(j["config"]);
    } catch (const std::exception& e) {
        return fail(std::string("config echo invalid: ") + e.what());
    }
    for (const auto& m : j["results"]) {
        for (const char* key : {"method", "timings", "eigenvalues", "effective_rank", "warnings"}) {
            if (!m.contains(key)) return fail(std::string("result missing key ") + key);
        }
        for (const char* stage : {"kernel", "degrees", "decomposition", "embedding", "total"}) {
            if (!m["timings"].contains(stage) || !m["timings"][stage].is_number() ||
                m["timings"][stage].get<double>() < 0.0) {
                return fail(std::string("bad timing ") + stage);
            }
        }
        const auto& ev = m["eigenvalues"];
        if (!ev.is_array()) return fail("eigenvalues must be an array");
        for (std::size_t i = 1; i < ev.size(); ++i) {
            if (ev[i].get<double>() > ev[i - 1].get<double>()) return fail("eigenvalues not descending");
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// execution

/// A library error annotated with the pipeline stage it came from.
class ExperimentError : public Error {
public:
    enum class Kind { config, numeric, io };

    ExperimentError(std::string stage, Kind kind, const std::string& what)
        : Error("stage '" + stage + "': " + what), stage_(std::move(stage)), kind_(kind) {}

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }
    [[nodiscard]] Kind kind() const noexcept { return kind_; }

    /// 2 for bad configuration, 3 for numeric failure, 1 otherwise.
    [[nodiscard]] int exit_code() const noexcept {
        switch (kind_) {
            case Kind::config: return 2;
            case Kind::numeric: return 3;
            case Kind::io: return 1;
        }
        return 1;
    }

private:
    std::string stage_;
    Kind kind_;
};

namespace detail {

template <typename F>
auto in_stage(const std::string& stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const ExperimentError&) {
        throw;
    } catch (const NumericError& e) {
        throw ExperimentError(stage, ExperimentError::Kind::numeric, e.what());
    } catch (const DegeneracyError& e) {
        throw ExperimentError(stage, ExperimentError::Kind::numeric, e.what());
    } catch (const CapacityError& e) {
        throw ExperimentError(stage, ExperimentError::Kind::numeric, e.what());
    } catch (const ParameterError& e) {
        throw ExperimentError(stage, ExperimentError::Kind::config, e.what());
    } catch (const ParseError& e) {
        throw ExperimentError(stage, ExperimentError::Kind::config, e.what());
    } catch (const IndexError& e) {
        throw ExperimentError(stage, ExperimentError::Kind::config, e.what());
    } catch (const DimensionError& e) {
        throw ExperimentError(stage, ExperimentError::Kind::config, e.what());
    } catch (const ContractError& e) {
        throw ExperimentError(stage, ExperimentError::Kind::config, e.what());
    } catch (const std::bad_alloc&) {
        throw ExperimentError(stage, ExperimentError::Kind::numeric, "out of memory");
    } catch (const std::exception& e) {
        throw ExperimentError(stage, ExperimentError::Kind::io, e.what());
    }
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

inline DataMatrix make_dataset(const ExperimentConfig& c) {
    switch (c.dataset) {
        case Dataset::helix: return generate_helix(c.n, c.noise, c.seed);
        case Dataset::swiss_roll: return generate_swiss_roll(c.n, c.noise, c.seed).data;
        case Dataset::lorenz: {
            LorenzParams p;
            p.dt = c.lorenz_dt;
            p.t_end = c.lorenz_t_end;
            DataMatrix trajectory = integrate_lorenz(p);
            return c.n == 0 ? trajectory : subsample_rows(trajectory, c.n);
        }
        case Dataset::csv: {
            DataMatrix x = load_csv(c.csv_path, CsvOptions{c.csv_header});
            return c.n == 0 ? x : subsample_rows(x, c.n);
        }
    }
    throw ParameterError("unknown dataset");
}

/// Computed results of one experiment, before anything is written.
struct ExperimentOutcome {
    ExperimentReport report;
    std::vector<std::pair<Method, DiffusionEmbedding>> embeddings;
    std::vector<std::optional<Eigen::VectorXi>> labels;
};

/// Runs the pipeline for each requested method on the same data. Results
/// are reported in the order of `methods`.
///
/// Kernel, degrees and the operator A are built once and shared. Methods that
/// multiply by A run first; the deterministic solve runs last and reuses A's
/// storage as workspace. When the deterministic method is present, each other
/// method is scored against it.
inline ExperimentOutcome execute_methods(ExperimentConfig config, const std::vector<Method>& methods,
                                         std::string mode) {
    detail::in_stage("config", [&] {
        config = resolve_defaults(std::move(config));
        validate(config);
    });

    ExperimentOutcome outcome;
    ExperimentReport& report = outcome.report;
    report.mode = std::move(mode);
    report.config = config;

    detail::Stopwatch dataset_clock;
    const DataMatrix x = detail::in_stage("dataset", [&] { return make_dataset(config); });
    report.dataset_seconds = dataset_clock.seconds();
    report.n = x.n();
    report.p = x.p();
    if (report.config.n == 0) {
        report.config.n = x.n();
    }
    detail::in_stage("config", [&] {
        for (const Method m : methods) {
            if (m != Method::deterministic) {
                config.sketch(SketchStrategy::gaussian_projection).validate(x.n());
            } else if (config.rank > x.n()) {
                throw ParameterError("rank exceeds n");
            }
        }
    });

    const auto uses = [&](Method m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
    const bool needs_operator = uses(Method::deterministic) || uses(Method::nystrom_projection);

    StageTimings shared;
    DegreeVector deg;
    Eigen::MatrixXd a;
    if (needs_operator) {
        detail::Stopwatch kernel_clock;
        KernelMatrix k = detail::in_stage("kernel", [&] { return gaussian_kernel_matrix(x, config.sigma); });
        const double kernel_seconds = kernel_clock.seconds();
        detail::Stopwatch degree_clock;
        deg = detail::in_stage("degrees", [&] { return degrees_from_kernel(k); });
        shared.degrees = degree_clock.seconds();
        detail::Stopwatch operator_clock;
        a = detail::in_stage("kernel", [&] { return symmetric_matrix(std::move(k), deg); });
        shared.kernel = kernel_seconds + operator_clock.seconds();
    } else {
        detail::Stopwatch degree_clock;
        deg = detail::in_stage("degrees", [&] { return degree_vector(x, config.sigma, config.block_rows); });
        shared.degrees = degree_clock.seconds();
    }

    std::vector<Method> order;
    for (const Method m : {Method::nystrom_projection, Method::nystrom_columns, Method::deterministic}) {
        if (uses(m)) order.push_back(m);
    }

    std::map<Method, MethodResult> results;
    std::map<Method, DiffusionEmbedding> embeddings;
    std::map<Method, std::optional<Eigen::VectorXi>> labels;
    for (const Method m : order) {
        MethodResult result;
        result.method = m;
        result.timings = shared;
        if (m == Method::nystrom_columns) {
            result.timings.kernel = 0.0;
        }
        detail::Stopwatch decomposition_clock;
        SpectralModel model = detail::in_stage("decomposition", [&] {
            switch (m) {
                case Method::deterministic:
                    return deterministic_model(std::move(a), deg, config.rank);
                case Method::nystrom_projection:
                    return nystrom_projection_model(dense_multiply(a, config.block_rows), deg,
                                                    config.sketch(SketchStrategy::gaussian_projection));
                case Method::nystrom_columns:
                    return nystrom_columns_model(kernel_column_provider(x, config.sigma), deg,
                                                 config.sketch(SketchStrategy::uniform_columns));
            }
            throw ParameterError("unknown method");
        });
        result.timings.decomposition = decomposition_clock.seconds();
        if (m == Method::deterministic) {
            a = Eigen::MatrixXd();
        }
        result.eigenvalues = model.eigenvalues;
        result.effective_rank = model.rank_d;
        result.warnings = model.warnings;

        detail::Stopwatch embedding_clock;
        detail::in_stage("embedding", [&] {
            const Index components = model.rank_d - (config.drop_trivial ? 1 : 0);
            if (components < 1) {
                throw DegeneracyError("no diffusion components left after dropping the trivial one");
            }
            DiffusionEmbedding emb =
                diffusion_map(model, config.t, components, config.drop_trivial, config.weighting);
            if (config.cluster > 0) {
                ClusterLabels cl = kmeans_cluster(emb, config.cluster, config.seed, config.kmeans_max_iters);
                result.clustering = ClusterSummary{cl.k, cl.inertia, cl.iterations};
                labels[m] = std::move(cl.labels);
            } else {
                labels[m] = std::nullopt;
            }
            embeddings.emplace(m, std::move(emb));
        });
        result.timings.embedding = embedding_clock.seconds();
        results.emplace(m, std::move(result));
    }

    if (results.count(Method::deterministic)) {
        const MethodResult& det = results.at(Method::deterministic);
        const DiffusionEmbedding& ref = embeddings.at(Method::deterministic);
        for (auto& [m, result] : results) {
            if (m == Method::deterministic) {
                continue;
            }
            DiffusionEmbedding approx = embeddings.at(m);
            if (approx.d() < ref.d()) {
                result.warnings.push_back("embedding has " + std::to_string(approx.d()) + " of " +
                                          std::to_string(ref.d()) +
                                          " reference components; missing components scored as zero");
                Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(approx.n(), ref.d());
                padded.leftCols(approx.d()) = approx.coords;
                approx.coords = std::move(padded);
            }
            result.relative_error = detail::in_stage("embedding", [&] { return relative_embedding_error(ref, approx); });
            if (result.timings.decomposition > 0.0) {
                result.speedup_decomposition = det.timings.decomposition / result.timings.decomposition;
            }
            if (result.timings.total() > 0.0) {
                result.speedup_total = det.timings.total() / result.timings.total();
            }
        }
    }

    for (const Method m : methods) {
        if (!results.count(m)) continue;
        for (const auto& w : results.at(m).warnings) {
            report.warnings.push_back(std::string(to_string(m)) + ": " + w);
        }
        report.results.push_back(std::move(results.at(m)));
        outcome.embeddings.emplace_back(m, std::move(embeddings.at(m)));
        outcome.labels.push_back(std::move(labels.at(m)));
    }
    return outcome;
}

/// Spectrum table for plotting: one row per eigenvalue index, one column per method.
inline std::string spectrum_csv(const ExperimentReport& report) {
    std::ostringstream o;
    o << "eigval_index,deterministic,nystrom_projection,nystrom_columns\n";
    Index rows = 0;
    for (const auto& r : report.results) {
        rows = std::max<Index>(rows, r.eigenvalues.size());
    }
    for (Index i = 0; i < rows; ++i) {
        o << (i + 1);
        for (const Method m : {Method::deterministic, Method::nystrom_projection, Method::nystrom_columns}) {
            o << ',';
            const MethodResult* r = report.find(m);
            if (r && i < r->eigenvalues.size()) {
                o << format_real(r->eigenvalues[i]);
            }
        }
        o << '\n';
    }
    return o.str();
}

/// Writes report.json, config.txt, spectrum.csv and the embedding CSV(s);
/// a run writes only the first method's embedding.
/// On failure every file written so far is removed.
inline std::vector<std::filesystem::path> write_outputs(const ExperimentOutcome& outcome) {
    namespace fs = std::filesystem;
    const ExperimentReport& report = outcome.report;
    const fs::path dir(report.config.out);
    std::vector<fs::path> written;
    try {
        fs::create_directories(dir);
        const auto write_text = [&](const fs::path& path, const std::string& text) {
            written.push_back(path);
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            out << text;
            if (!out) {
                throw Error("failed writing '" + path.string() + "'");
            }
        };
        for (std::size_t i = 0; i < outcome.embeddings.size(); ++i) {
            const auto& [method, emb] = outcome.embeddings[i];
            const fs::path path = report.mode == "compare"
                                      ? dir / ("embedding_" + std::string(to_string(method)) + ".csv")
                                      : dir / "embedding.csv";
            written.push_back(path);
            write_embedding_csv(path.string(), emb, outcome.labels[i]);
            if (report.mode != "compare") {
                break;
            }
        }
        write_text(dir / "spectrum.csv", spectrum_csv(report));
        write_text(dir / "config.txt", to_config_text(report.config));
        write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
    } catch (const std::exception& e) {
        std::error_code ignored;
        for (const auto& path : written) {
            fs::remove(path, ignored);
        }
        throw ExperimentError("output", ExperimentError::Kind::io, e.what());
    }
    return written;
}

/// Single-method run: dataset, kernel and degrees, decomposition, embedding.
/// With config.reference a deterministic reference is also computed and the
/// relative embedding error reported.
inline ExperimentReport run_experiment(const ExperimentConfig& config) {
    std::vector<Method> methods{config.method};
    if (config.reference && config.method != Method::deterministic) {
        methods.push_back(Method::deterministic);
    }
    const ExperimentOutcome outcome = execute_methods(config, methods, "run");
    write_outputs(outcome);
    return outcome.report;
}

/// Deterministic reference plus both Nystrom strategies on identical data.
inline ExperimentReport compare_methods(const ExperimentConfig& config) {
    const ExperimentOutcome outcome = execute_methods(
        config, {Method::deterministic, Method::nystrom_projection, Method::nystrom_columns}, "compare");
    write_outputs(outcome);
    return outcome.report;
}

}  // namespace dmap
