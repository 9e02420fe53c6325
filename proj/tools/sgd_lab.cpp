// sgd-lab: experiment runner for stochastic game dynamics.
//
//   sgd-lab run <config> [--seed N] [--out-dir DIR] [--runs N]
//   sgd-lab list
//
// Exit codes: 0 success, 2 config error, 3 numerical/runtime failure.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "sgdlab/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"stochastic game dynamics lab"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_dir_override;
    std::optional<int> runs_override;

    auto* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("config", config_path, "experiment config (.json or sectioned text)")
        ->required();
    std::uint64_t seed_opt = 0;
    std::string dir_opt;
    int runs_opt = 0;
    auto* so = run->add_option("--seed", seed_opt, "override [sim] seed");
    auto* oo = run->add_option("--out-dir", dir_opt, "override [output] dir");
    auto* ro = run->add_option("--runs", runs_opt, "override Monte Carlo run count");

    auto* list = app.add_subcommand("list", "print the builtin game catalog");

    CLI11_PARSE(app, argc, argv);

    if (list->parsed()) {
        std::cout << sgdlab::experiment::catalog_text();
        return 0;
    }

    sgdlab::experiment::ExperimentConfig ec;
    try {
        ec = sgdlab::experiment::load_experiment(config_path);
        if (so->count()) {
            ec.sim.seed = seed_opt;
            ec.config_text += "\n# override: seed = " + std::to_string(seed_opt) + "\n";
        }
        if (oo->count()) ec.out_dir = dir_opt;
        if (ro->count()) {
            if (runs_opt < 1) throw sgdlab::experiment::ConfigError("--runs must be >= 1");
            runs_override = runs_opt;
        }
    } catch (const sgdlab::experiment::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        const auto summary = sgdlab::experiment::run_experiment(ec, runs_override);
        std::cout << "wrote " << ec.out_dir << "/summary.json\n";
        return 0;
    } catch (const sgdlab::experiment::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 3;
    }
}
