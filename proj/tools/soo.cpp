#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "soo/cli.hpp"

int main(int argc, char** argv) {
    using namespace soo::cli;

    CLI::App app{"Stochastic order-oracle descent: simulation and asymptotic theory"};
    app.require_subcommand(1);

    CommandOptions opts;
    std::size_t runs = 0;
    std::size_t steps = 0;
    std::string out_dir;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "Experiment config (JSON)")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides config)");
        sub->add_option("--threads", opts.threads, "Worker threads (0 = machine parallelism)");
        sub->add_option("--runs", runs, "Number of runs (overrides config)");
        sub->add_option("--steps", steps, "Steps per run (overrides config)");
    };

    auto* simulate = app.add_subcommand("simulate", "Run the configured setting and write samples.csv, report.json");
    add_common(simulate);
    auto* theory = app.add_subcommand("theory", "Print the closed-form objects as JSON");
    add_common(theory);
    auto* compare = app.add_subcommand("compare", "Compare a samples CSV against the setting's theory");
    add_common(compare);
    compare->add_option("samples", opts.samples, "samples.csv")->required();
    auto* estimate = app.add_subcommand("estimate", "Estimate c*alpha from setting-1 samples");
    add_common(estimate);
    estimate->add_option("samples", opts.samples, "samples.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfig;
    }

    auto* active = app.get_subcommands().front();
    if (active->count("--runs")) opts.runs = runs;
    if (active->count("--steps")) opts.steps = steps;
    if (active->count("--out")) opts.out_dir = out_dir;

    if (active == simulate) return dispatch(cmd_simulate, opts, std::cout, std::cerr);
    if (active == theory) return dispatch(cmd_theory, opts, std::cout, std::cerr);
    if (active == compare) return dispatch(cmd_compare, opts, std::cout, std::cerr);
    return dispatch(cmd_estimate, opts, std::cout, std::cerr);
}
