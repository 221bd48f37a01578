#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "rebal/config.hpp"
#include "rebal/experiment.hpp"
#include "rebal/proptest.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitPropertyFailure = 3;

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned workers = 0;
    std::string out;
};

void add_run_options(CLI::App* cmd, RunArgs& args) {
    cmd->add_option("--config", args.config, "Experiment config file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "Override run.master_seed");
    cmd->add_option("--workers", args.workers, "Worker threads (default: hardware concurrency)");
    cmd->add_option("--out", args.out, "CSV output path (default: output.path, else stdout)");
}

unsigned worker_count(unsigned requested) {
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

void write_output(const std::string& path, const std::string& csv) {
    if (path.empty() || path == "-") {
        std::cout << csv;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw rebal::Error(rebal::ErrorCode::ConfigError, "cannot write " + path);
    out << csv;
    if (!out.flush()) throw rebal::Error(rebal::ErrorCode::ConfigError, "failed writing " + path);
}

int run_experiment(const RunArgs& args, bool frontier) {
    rebal::ExperimentConfig cfg = rebal::load_config(args.config);
    if (args.seed) cfg.set_master_seed(*args.seed);
    const unsigned workers = worker_count(args.workers);
    const std::string csv = frontier ? rebal::run_frontier(cfg, workers) : rebal::run_convergence(cfg, workers);
    const std::string& out = args.out.empty() ? cfg.output_path : args.out;
    write_output(out, csv);
    if (!out.empty() && out != "-") std::cerr << "wrote " << out << " (config " << cfg.hash_hex() << ")\n";
    return kExitOk;
}

int run_proptest(const std::string& suite, std::uint64_t seed, std::size_t cases) {
    const rebal::PropertyReport rep = rebal::run_property_suite(suite, seed, cases);
    std::printf("suite=%s cases=%zu checks=%zu failures=%zu worst=%.6g\n", rep.suite.c_str(), rep.cases, rep.checks,
                rep.failures, rep.worst);
    for (const auto& m : rep.messages) std::printf("  %s\n", m.c_str());
    return rep.failures == 0 ? kExitOk : kExitPropertyFailure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete rebalancing experiments: convergence studies, frontier studies and property batteries"};
    app.require_subcommand(1);

    RunArgs conv_args, front_args;
    CLI::App* converge = app.add_subcommand("converge", "Per-path costs for every schedule parameter");
    add_run_options(converge, conv_args);
    CLI::App* frontier = app.add_subcommand("frontier", "Ensemble aggregates against the lower bound");
    add_run_options(frontier, front_args);

    std::string suite;
    std::uint64_t prop_seed = 1;
    std::size_t cases = 1000;
    CLI::App* proptest = app.add_subcommand("proptest", "Randomized property batteries");
    proptest->add_option("--suite", suite, "riccati, moments or structure")
        ->required()
        ->check(CLI::IsMember({"riccati", "moments", "structure"}));
    proptest->add_option("--seed", prop_seed, "Random seed");
    proptest->add_option("--cases", cases, "Number of random cases")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*converge) return run_experiment(conv_args, false);
        if (*frontier) return run_experiment(front_args, true);
        return run_proptest(suite, prop_seed, cases);
    } catch (const rebal::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.code()) {
        case rebal::ErrorCode::ConfigError:
        case rebal::ErrorCode::InvalidInput: return kExitUsage;
        default: return kExitNumerical;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}
