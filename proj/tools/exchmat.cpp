// exchmat: run experiments from a config file, or the bundled oracle selftest.
//
// exit codes: 0 ok, 1 other error, 2 invalid config, 3 kernel failure budget exceeded
// or a positivity violation.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "exchmat/exchmat.hpp"
#include "exchmat/runner.hpp"
#include "selftest.hpp"

int main(int argc, char** argv) {
    CLI::App app{"exchmat - random matrices with exchangeable entries"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run the experiment described by a config file");
    std::string config_path;
    std::optional<std::string> rng_seed, out_dir;
    std::size_t threads = 1;
    bool trace = false;
    run->add_option("--config", config_path, "config file (key = value lines)")->required();
    run->add_option("--rng-seed", rng_seed, "override master_seed (decimal or 0x hex)");
    run->add_option("--out", out_dir, "override output_dir");
    run->add_option("--threads", threads, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
    run->add_flag("--trace-kernels", trace, "dump eigen-iteration traces to stderr")->group("");

    auto* self = app.add_subcommand("selftest", "run the bundled oracle checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (self->parsed()) return exchmat::selftest::run(stdout) == 0 ? 0 : 1;

    exchmat::kernel_trace().store(trace);
    try {
        const bool overrides_complete = rng_seed.has_value() && out_dir.has_value();
        exchmat::ExperimentConfig cfg = exchmat::load_config(config_path, !overrides_complete);
        if (rng_seed) {
            try {
                cfg.set_master_seed(exchmat::parse_seed(*rng_seed));
            } catch (const exchmat::ValidationError& e) {
                throw exchmat::ValidationError(std::string("--rng-seed: ") + e.what());
            }
        }
        if (out_dir) cfg.set_output_dir(*out_dir);
        if (cfg.output_dir.empty()) throw exchmat::ValidationError("config: key 'output_dir': missing");

        const auto report = exchmat::run_experiment(cfg, threads);
        const auto files = exchmat::write_report(report, cfg.output_dir);
        for (const auto& f : files) std::cout << f.string() << '\n';
        std::fprintf(stderr, "%s: %zu trials, %zu kernel failures, %.3f s\n", exchmat::to_string(cfg.experiment).c_str(),
                     report.trials, report.kernel_failures, report.wall_seconds);
        if (report.budget_exceeded()) {
            std::fprintf(stderr, "error: kernel failures exceed 1%% of trials\n");
            return 3;
        }
        return 0;
    } catch (const exchmat::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const exchmat::NumericFailure& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
