#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "config.hpp"
#include "pipelines.hpp"

using namespace fedscale;
using namespace fedscale::cli;

namespace {

struct Options {
    std::string config;
    std::string out = "results";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> variant;
    std::optional<unsigned> jobs;
};

void add_common(CLI::App* sub, Options& o)
{
    sub->add_option("--config", o.config, "TOML experiment config (defaults when omitted)")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--variant", o.variant, "main | appendix");
    sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Optimal model size and generalization experiments for federated vs centralized SGD"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Options opts;
    const std::pair<Pipeline, const char*> commands[] = {
        {Pipeline::BoundSweep, "PAC-Bayes bound terms over model size and rounds"},
        {Pipeline::SizeVsClients, "optimal federated size versus client count, with power-law fit"},
        {Pipeline::McValidate, "Monte Carlo check of the stationary covariances"},
        {Pipeline::GapAnalysis, "generalization gap and its sign conditions over (n, gamma, T)"},
        {Pipeline::ClientAverage, "federated optimum versus the mean of per-client optima"},
        {Pipeline::HeteroStudy, "heterogeneity statistics of Dirichlet client mixtures"},
    };
    for (const auto& [p, help] : commands) {
        add_common(app.add_subcommand(to_string(p), help), opts);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    const Pipeline pipeline = *parse_pipeline(app.get_subcommands().front()->get_name());

    ExperimentConfig cfg;
    try {
        if (!opts.config.empty()) {
            cfg = load_config(opts.config);
        }
        if (opts.seed) {
            cfg.seed = *opts.seed;
        }
        if (opts.variant) {
            if (*opts.variant == "main") {
                cfg.variant = Variant::MainText;
            } else if (*opts.variant == "appendix") {
                cfg.variant = Variant::Appendix;
            } else {
                throw ConfigError("--variant must be 'main' or 'appendix'");
            }
        }
        if (opts.jobs) {
            cfg.jobs = *opts.jobs;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    const auto start = std::chrono::steady_clock::now();
    PipelineOutput out;
    try {
        out = run_pipeline(pipeline, cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const fedscale::Error& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
        write_outputs(opts.out, pipeline, cfg, out, elapsed);
    } catch (const std::exception& e) {
        std::cerr << "output error: " << e.what() << '\n';
        return 2;
    }
    std::printf("%s: %zu rows -> %s (exit %d)\n", to_string(pipeline), out.results.rows.size(), opts.out.c_str(),
                out.exit_code);
    return out.exit_code;
}
