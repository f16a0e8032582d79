// Benchmark CLI for deterministic and Nystrom-accelerated diffusion maps.
//
//   dmap run --dataset helix --n 2000 --rank 50 --method nys-rp --out out/helix
//   dmap compare --dataset lorenz --n 3000 --rank 100 --out out/lorenz
//
// Exit codes: 0 success, 2 bad configuration, 3 numeric failure, 1 I/O.

#include <CLI11.hpp>

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "dmap/dmap.hpp"

namespace {

struct Flags {
    std::optional<std::string> config_file;
    std::optional<std::string> dataset;
    std::optional<std::string> csv_path;
    bool csv_header = false;
    std::optional<long> n;
    std::optional<double> sigma;
    std::optional<long> rank;
    std::optional<double> t;
    std::optional<std::string> method;
    std::optional<long> oversample;
    std::optional<long> power_iters;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool drop_trivial = false;
    std::optional<long> cluster;
    std::optional<std::string> weighting;
    std::optional<double> noise;
    bool reference = false;
};

void add_shared_flags(CLI::App& cmd, Flags& f) {
    cmd.add_option("--config", f.config_file, "key = value config file; its values override flags");
    cmd.add_option("--dataset", f.dataset, "helix | swiss | lorenz | csv");
    cmd.add_option("--csv-path", f.csv_path, "input CSV for --dataset csv");
    cmd.add_flag("--csv-header", f.csv_header, "skip the first CSV row");
    cmd.add_option("--n", f.n, "observations (lorenz/csv: evenly subsampled; 0 keeps all rows)");
    cmd.add_option("--sigma", f.sigma, "Gaussian kernel width (default 0.5 toys, 10 lorenz)");
    cmd.add_option("--rank", f.rank, "number of eigenpairs d");
    cmd.add_option("--t", f.t, "diffusion time");
    cmd.add_option("--oversample", f.oversample, "extra sketch columns (l = d + oversample)");
    cmd.add_option("--power-iters", f.power_iters, "subspace iterations q");
    cmd.add_option("--seed", f.seed, "seed for data noise, sketches and k-means");
    cmd.add_option("--out", f.out, "output directory");
    cmd.add_flag("--drop-trivial", f.drop_trivial, "drop the constant lambda = 1 component");
    cmd.add_option("--cluster", f.cluster, "k-means cluster count (0 = no clustering)");
    cmd.add_option("--weighting", f.weighting, "sqrt (sqrt(lambda^t), default) | classic (lambda^t)");
    cmd.add_option("--noise", f.noise, "Gaussian noise std for helix/swiss");
}

dmap::ExperimentConfig build_config(const Flags& f) {
    dmap::ExperimentConfig c;
    if (f.dataset) dmap::set_config_value(c, "dataset", *f.dataset);
    if (f.csv_path) c.csv_path = *f.csv_path;
    if (f.csv_header) c.csv_header = true;
    if (f.n) c.n = *f.n;
    if (f.sigma) c.sigma = *f.sigma;
    if (f.rank) c.rank = *f.rank;
    if (f.t) c.t = *f.t;
    if (f.method) dmap::set_config_value(c, "method", *f.method);
    if (f.oversample) c.oversample = *f.oversample;
    if (f.power_iters) c.power_iters = *f.power_iters;
    if (f.seed) c.seed = *f.seed;
    if (f.out) c.out = *f.out;
    if (f.drop_trivial) c.drop_trivial = true;
    if (f.cluster) c.cluster = *f.cluster;
    if (f.weighting) dmap::set_config_value(c, "weighting", *f.weighting);
    if (f.noise) c.noise = *f.noise;
    if (f.reference) c.reference = true;
    if (f.config_file) c = dmap::load_config_file(*f.config_file, c);
    return c;
}

void print_summary(const dmap::ExperimentReport& r) {
    std::cout << r.mode << ": " << dmap::to_string(r.config.dataset) << " n=" << r.n << " p=" << r.p
              << " d=" << r.config.rank << " sigma=" << r.config.sigma << " t=" << r.config.t << '\n';
    std::cout << std::left << std::setw(20) << "method" << std::setw(12) << "decomp[s]" << std::setw(12)
              << "total[s]" << std::setw(10) << "speedup" << "error\n";
    const auto fixed = [](double v) {
        std::ostringstream o;
        o << std::fixed << std::setprecision(3) << v;
        return o.str();
    };
    for (const auto& m : r.results) {
        std::cout << std::setw(20) << dmap::to_string(m.method) << std::setw(12) << fixed(m.timings.decomposition)
                  << std::setw(12) << fixed(m.timings.total()) << std::setw(10)
                  << (m.speedup_decomposition ? fixed(*m.speedup_decomposition) : "-");
        if (m.relative_error) {
            std::cout << std::scientific << std::setprecision(3) << *m.relative_error << std::defaultfloat;
        } else {
            std::cout << '-';
        }
        std::cout << '\n';
    }
    for (const auto& w : r.warnings) {
        std::cout << "warning: " << w << '\n';
    }
    std::cout << "outputs: " << r.config.out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion maps with Nystrom-accelerated eigendecomposition"};
    app.require_subcommand(1);

    Flags run_flags;
    CLI::App* run = app.add_subcommand("run", "run one method and write report, embedding and spectrum");
    add_shared_flags(*run, run_flags);
    run->add_option("--method", run_flags.method, "det | nys-cols | nys-rp");
    run->add_flag("--reference", run_flags.reference, "also run the deterministic path and report the error");

    Flags compare_flags;
    CLI::App* compare = app.add_subcommand("compare", "deterministic reference versus both Nystrom strategies");
    add_shared_flags(*compare, compare_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const bool is_run = run->parsed();
        const dmap::ExperimentConfig config = build_config(is_run ? run_flags : compare_flags);
        const dmap::ExperimentReport report =
            is_run ? dmap::run_experiment(config) : dmap::compare_methods(config);
        print_summary(report);
        return 0;
    } catch (const dmap::ExperimentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const dmap::ParseError& e) {
        std::cerr << "error: config " << e.what() << '\n';
        return 2;
    } catch (const dmap::ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
