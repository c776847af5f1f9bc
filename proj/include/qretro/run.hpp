// run.hpp — scenario execution: trajectories, probability tables, the plot
// script, and the per-run invariant checks.
#pragma once

#include <qretro/scenario.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qretro::shell {

struct CheckResult {
    std::string name;
    bool pass = false;
    double worst = 0.0;  // worst deviation seen; sign kept where it means something
    std::string note;
};

struct RunReport {
    std::string scenario;
    std::vector<std::string> trajectory_files;
    std::vector<std::string> table_files;
    std::vector<std::string> other_files;  // plot script, sweep index
    std::vector<CheckResult> checks;
    std::vector<std::string> warnings;
    double seconds = 0.0;

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

struct RunOptions {
    std::filesystem::path out_dir;  // empty: the scenario's outputs.directory, else out/<name>
    std::optional<std::size_t> steps_override;
};

// Integrates the scenario and writes its outputs.  Checks run once each:
// hermiticity_drift and positivity_floor always; trace_preservation except for
// raw measurement-operator windows (their traces genuinely move);
// analytic_match for backward two-level runs; bayes_consistency whenever both
// a preparation side and a measurement side are present.
RunReport run(const Scenario& scenario, const RunOptions& options = {});

// Runs the scenario once per value with the addressed field replaced, each
// entry into its own subdirectory, entries in parallel.  Writes index.csv
// mapping value -> directory.  The aggregate report carries every entry's
// checks prefixed with "<param>=<value>/".
RunReport sweep(const std::filesystem::path& scenario_file, const std::string& param,
                const std::vector<double>& values, const RunOptions& options = {});

std::string render_report(const RunReport& report);

}  // namespace qretro::shell
