// qretro — command-line front end: run scenarios, sweep parameters, and run
// the self-check suites.  Exit codes: 0 success, 1 failed checks or a failed
// computation, 2 usage or scenario errors.
#include <qretro/run.hpp>
#include <qretro/verify.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    CLI::App app{"quantum retrodiction engine — scenario runner and verifier", "qretro"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    std::string param;
    std::string suite = "all";
    std::vector<double> values;
    std::uint64_t seed = 42;
    std::size_t steps_override = 0;

    auto* run_cmd = app.add_subcommand("run", "integrate a scenario and write its outputs");
    run_cmd->add_option("--scenario", scenario_path, "scenario file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    run_cmd->add_option("--out", out_dir, "output directory (default: out/<name>)");
    run_cmd->add_option("--steps-override", steps_override, "replace the scenario's step count")
        ->check(CLI::PositiveNumber);

    auto* verify_cmd = app.add_subcommand("verify", "run a self-check suite");
    verify_cmd->add_option("--suite", suite, "analytic, bayes, invariants or all")
        ->check(CLI::IsMember({"analytic", "bayes", "invariants", "all"}));
    verify_cmd->add_option("--seed", seed, "seed for the randomised checks");

    auto* sweep_cmd = app.add_subcommand("sweep", "run a scenario once per parameter value");
    sweep_cmd->add_option("--scenario", scenario_path, "scenario file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sweep_cmd->add_option("--param", param, "field to sweep, e.g. two_level.V or priors[0]")
        ->required();
    sweep_cmd->add_option("--values", values, "comma-separated values")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--out", out_dir, "output root (default: out/<name>_sweep)");
    sweep_cmd->add_option("--steps-override", steps_override, "replace every entry's step count")
        ->check(CLI::PositiveNumber);

    auto* schema_cmd = app.add_subcommand("schema", "print the scenario file format");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        app.exit(e);
        return 2;
    }

    using namespace qretro::shell;
    try {
        if (schema_cmd->parsed()) {
            std::cout << schema_text();
            return 0;
        }
        RunOptions options;
        options.out_dir = out_dir;
        if (steps_override > 0) options.steps_override = steps_override;

        RunReport report;
        if (run_cmd->parsed())
            report = run(load_scenario(scenario_path), options);
        else if (sweep_cmd->parsed())
            report = sweep(scenario_path, param, values, options);
        else
            report = verify(verify_suite_from(suite), seed);
        std::cout << render_report(report);
        return report.all_passed() ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
