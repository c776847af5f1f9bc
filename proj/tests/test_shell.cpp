// Scenario ingestion, run orchestration, persistence and the CLI contract.
#include <qretro/run.hpp>
#include <qretro/scenario.hpp>
#include <qretro/verify.hpp>

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "test_helpers.hpp"

using namespace qretro;
using shell::RunOptions;
using shell::Scenario;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / "qretro_shell_tests" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    REQUIRE_MESSAGE(bool(in), "cannot read " << file.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(file));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::string cell;
        std::istringstream cells(line);
        while (std::getline(cells, cell, ',')) row.push_back(cell);
        rows.push_back(std::move(row));
    }
    return rows;
}

const std::string minimal = R"({
  "two_level": {"V": 2.0, "gamma": 1.0},
  "detection": "excited",
  "evolution": {"tau_end": 5.0, "steps": 5000}
})";

int cli(const std::string& args) {
    const std::string cmd = std::string(QRETRO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("a minimal two-level scenario parses with an inferred equation") {
    const Scenario sc = shell::parse_scenario(minimal, "minimal.json");
    CHECK(sc.name == "minimal");
    CHECK(sc.two_level.has_value());
    CHECK(sc.detection.has_value());
    CHECK(sc.equation == lindblad::Equation::retrodictive_nonlinear);
    CHECK(sc.duration == 5.0);
    CHECK(sc.steps == 5000);
    CHECK(sc.model.hamiltonian.rows() == 2);
    CHECK(sc.write_csv);
    CHECK(sc.write_plot);
}

TEST_CASE("unknown keys are rejected wherever they appear") {
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"two_level": {"V": 1, "gamma": 1}, "colour": "blue",
                                  "detection": "excited",
                                  "evolution": {"tau_end": 1, "steps": 10}})",
                              "x"),
        doctest::Contains("unknown key 'colour'"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"two_level": {"V": 1, "gamma": 1, "detuning": 0},
                                  "detection": "excited",
                                  "evolution": {"tau_end": 1, "steps": 10}})",
                              "x"),
        doctest::Contains("unknown key 'detuning'"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"two_level": {"V": 1, "gamma": 1}, "detection": "excited",
                                  "evolution": {"tau_end": 1, "steps": 10, "solver": "rk4"}})",
                              "x"),
        doctest::Contains("unknown key 'solver'"), std::invalid_argument);
}

TEST_CASE("a non-Hermitian hamiltonian entry is named") {
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"model": {"dimension": 2, "hamiltonian": [[0, 1], [0, 0]]},
                                  "measurement_device": {"operators": [[[1, 0], [0, 0]]]},
                                  "evolution": {"tau_end": 1, "steps": 10}})",
                              "x"),
        doctest::Contains("hamiltonian"), std::invalid_argument);
}

TEST_CASE("priors must sum to one") {
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"two_level": {"V": 1, "gamma": 1}, "detection": "excited",
                                  "preparation_device": {
                                    "states": [[[1, 0], [0, 0]], [[0, 0], [0, 1]]],
                                    "priors": [0.45, 0.45]},
                                  "evolution": {"tau_end": 1, "steps": 10}})",
                              "x"),
        doctest::Contains("priors must sum to 1"), std::invalid_argument);
}

TEST_CASE("device operator validation keeps the field context") {
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"two_level": {"V": 1, "gamma": 1},
                                  "measurement_device": {"operators": [[[0, 1], [0, 0]]]},
                                  "evolution": {"tau_end": 1, "steps": 10}})",
                              "x"),
        doctest::Contains("measurement_device"), std::invalid_argument);
    // dimension mismatch against the model
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"two_level": {"V": 1, "gamma": 1},
                                  "measurement_device": {
                                    "operators": [[[1, 0, 0], [0, 0, 0], [0, 0, 0]]]},
                                  "evolution": {"tau_end": 1, "steps": 10}})",
                              "x"),
        doctest::Contains("dimension"), std::invalid_argument);
}

TEST_CASE("detection shorthand constraints") {
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"two_level": {"V": 1, "gamma": 1}, "detection": "excited",
                                  "measurement_device": {"operators": [[[1, 0], [0, 0]]]},
                                  "evolution": {"tau_end": 1, "steps": 10}})",
                              "x"),
        doctest::Contains("not both"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"model": {"dimension": 2, "hamiltonian": [[0, 0], [0, 0]]},
                                  "detection": "excited",
                                  "evolution": {"tau_end": 1, "steps": 10}})",
                              "x"),
        doctest::Contains("two_level"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"two_level": {"V": 1, "gamma": 1}, "detection": "banana",
                                  "evolution": {"tau_end": 1, "steps": 10}})",
                              "x"),
        doctest::Contains("banana"), std::invalid_argument);
    // detection is measurement-side: it cannot drive a forward run
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"two_level": {"V": 1, "gamma": 1}, "detection": "excited",
                                  "preparation_device": {
                                    "states": [[[1, 0], [0, 0]]], "priors": [1.0]},
                                  "evolution": {"t_end": 1, "steps": 10}})",
                              "x"),
        doctest::Contains("predictive"), std::invalid_argument);
}

TEST_CASE("evolution window validation") {
    const auto bad = [](const std::string& evolution, const std::string& needle) {
        CHECK_THROWS_WITH_AS(
            shell::parse_scenario(std::string(R"({"two_level": {"V": 1, "gamma": 1},
                                                  "detection": "excited", "evolution": )") +
                                      evolution + "}",
                                  "x"),
            doctest::Contains(needle.c_str()), std::invalid_argument);
    };
    bad(R"({"t_end": 1, "tau_end": 1, "steps": 10})", "exactly one of t_end and tau_end");
    bad(R"({"steps": 10})", "exactly one of t_end and tau_end");
    bad(R"({"tau_end": 1, "steps": 0})", "positive integer");
    bad(R"({"tau_end": 1, "steps": 2.5})", "positive integer");
    bad(R"({"tau_end": -1, "steps": 10})", "must be positive");
    bad(R"({"tau_end": 1, "steps": 10, "equation": "magic"})", "unknown equation");
    bad(R"({"t_end": 1, "steps": 10, "equation": "retrodictive"})", "tau_end");
}

TEST_CASE("device spec shape errors") {
    const auto bad = [](const std::string& device, const std::string& needle) {
        CHECK_THROWS_WITH_AS(
            shell::parse_scenario(std::string(R"({"two_level": {"V": 1, "gamma": 1},
                                                  "detection": "excited",
                                                  "preparation_device": )") +
                                      device +
                                      R"(, "evolution": {"tau_end": 1, "steps": 10}})",
                                  "x"),
            doctest::Contains(needle.c_str()), std::invalid_argument);
    };
    bad(R"({"operators": [[[1, 0], [0, 0]]], "states": [[[1, 0], [0, 0]]], "priors": [1]})",
        "exactly one of operators and states");
    bad(R"({"states": [[[1, 0], [0, 0]]]})", "priors");
    bad(R"({"operators": [[[1, 0], [0, 0]]], "labels": ["a", "b"]})", "one label per operator");
    bad(R"({"operators": [[[1, 0], [0, 0], [0, 0]]]})", "square");
    bad(R"({"operators": [[[1, [0, 0, 0]], [0, 0]]]})", "[re, im]");
}

TEST_CASE("output format validation") {
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"two_level": {"V": 1, "gamma": 1}, "detection": "excited",
                                  "evolution": {"tau_end": 1, "steps": 10},
                                  "outputs": {"formats": ["png"]}})",
                              "x"),
        doctest::Contains("unknown format 'png'"), std::invalid_argument);
    const Scenario sc = shell::parse_scenario(
        R"({"two_level": {"V": 1, "gamma": 1}, "detection": "excited",
            "evolution": {"tau_end": 1, "steps": 10},
            "outputs": {"directory": "elsewhere", "formats": ["csv"]}})",
        "x");
    CHECK(sc.out_directory == "elsewhere");
    CHECK(sc.write_csv);
    CHECK_FALSE(sc.write_plot);
}

TEST_CASE("runs need the matching device side") {
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"two_level": {"V": 1, "gamma": 1},
                                  "evolution": {"t_end": 1, "steps": 10}})",
                              "x"),
        doctest::Contains("preparation_device"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        shell::parse_scenario(R"({"two_level": {"V": 1, "gamma": 1},
                                  "evolution": {"tau_end": 1, "steps": 10}})",
                              "x"),
        doctest::Contains("measurement_device or a detection event"), std::invalid_argument);
}

TEST_CASE("JSON syntax errors report the line") {
    CHECK_THROWS_WITH_AS(shell::parse_scenario("{\n  \"two_level\": {\n", "broken.json"),
                         doctest::Contains("line"), std::invalid_argument);
}

TEST_CASE("load_scenario reads files and defaults the name to the stem") {
    const fs::path dir = scratch_dir("load");
    const fs::path file = dir / "my_case.json";
    std::ofstream(file) << minimal;
    const Scenario sc = shell::load_scenario(file);
    CHECK(sc.name == "my_case");
    CHECK_THROWS_WITH_AS(shell::load_scenario(dir / "absent.json"), doctest::Contains("cannot read"),
                         std::invalid_argument);
}

TEST_CASE("running the plus-detection scenario writes checked artefacts") {
    const fs::path dir = scratch_dir("plus_run");
    const Scenario sc =
        shell::load_scenario(fs::path(QRETRO_SCENARIO_DIR) / "plus_detection.json");
    RunOptions options;
    options.out_dir = dir;
    options.steps_override = 500;
    const auto report = shell::run(sc, options);

    CHECK(report.all_passed());
    std::vector<std::string> names;
    for (const auto& c : report.checks) names.push_back(c.name);
    std::sort(names.begin(), names.end());
    CHECK(names == std::vector<std::string>{"analytic_match", "bayes_consistency",
                                            "hermiticity_drift", "positivity_floor",
                                            "trace_preservation"});

    const auto traj = read_csv(dir / "trajectory_plus_superposition.csv");
    REQUIRE(traj.size() == 502);  // header + every grid point
    CHECK(traj[0][0] == "tau");
    CHECK(traj[0].size() == 1 + 8 + 4);  // tau, re/im of 4 entries, u v w x
    CHECK(std::stod(traj[1][0]) == 0.0);
    CHECK(std::stod(traj.back()[0]) == doctest::Approx(5.0).epsilon(1e-12));

    const auto probs = read_csv(dir / "preparation_probabilities_plus_superposition.csv");
    REQUIRE(probs.size() == 502);
    CHECK(probs[0] == std::vector<std::string>{"tau", "P(plus)", "P(minus)"});
    const double expected = 0.5 * (1.0 + std::exp(-5.0));
    CHECK(std::stod(probs.back()[1]) == doctest::Approx(expected).epsilon(1e-8));
    CHECK(std::stod(probs.back()[2]) == doctest::Approx(1.0 - expected).epsilon(1e-8));
    CHECK(std::stod(probs[1][1]) == doctest::Approx(1.0).epsilon(1e-12));  // tau = 0: certainty

    CHECK(fs::exists(dir / "plot.gp"));
}

TEST_CASE("identical runs produce byte-identical outputs") {
    const fs::path dir1 = scratch_dir("det_a");
    const fs::path dir2 = scratch_dir("det_b");
    const Scenario sc =
        shell::load_scenario(fs::path(QRETRO_SCENARIO_DIR) / "plus_detection.json");
    for (const auto& dir : {dir1, dir2}) {
        RunOptions options;
        options.out_dir = dir;
        options.steps_override = 400;
        shell::run(sc, options);
    }
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(dir1)) {
        const auto other = dir2 / entry.path().filename();
        REQUIRE(fs::exists(other));
        CHECK_MESSAGE(slurp(entry.path()) == slurp(other), entry.path().filename().string());
        ++compared;
    }
    CHECK(compared >= 3);  // trajectory, probability table, plot script
}

TEST_CASE("a predictive run writes the joint outcome table") {
    const fs::path dir = scratch_dir("predictive");
    const Scenario sc =
        shell::load_scenario(fs::path(QRETRO_SCENARIO_DIR) / "predictive_decay.json");
    RunOptions options;
    options.out_dir = dir;
    options.steps_override = 400;
    const auto report = shell::run(sc, options);
    CHECK(report.all_passed());

    const auto table = read_csv(dir / "joint_table.csv");
    REQUIRE(table.size() == 3);
    CHECK(table[0] == std::vector<std::string>{"preparation", "up", "down"});
    REQUIRE(table[1][0] == "excited");
    // the excited branch decays for t_end = 4 before an up/down readout
    CHECK(std::stod(table[1][1]) == doctest::Approx(0.5 * std::exp(-8.0)).epsilon(1e-6));
    CHECK(std::stod(table[1][2]) == doctest::Approx(0.5 * (1.0 - std::exp(-8.0))).epsilon(1e-9));
    CHECK(std::stod(table[2][1]) == doctest::Approx(0.0).scale(1).epsilon(1e-12));

    std::vector<std::string> names;
    for (const auto& c : report.checks) names.push_back(c.name);
    std::sort(names.begin(), names.end());
    CHECK(names == std::vector<std::string>{"bayes_consistency", "hermiticity_drift",
                                            "positivity_floor", "trace_preservation"});
}

TEST_CASE("sweeps run every value into its own directory and index them") {
    const fs::path dir = scratch_dir("sweep");
    RunOptions options;
    options.out_dir = dir;
    options.steps_override = 2000;
    const auto report = shell::sweep(fs::path(QRETRO_SCENARIO_DIR) / "excited_detection.json",
                                     "two_level.V", {0.5, 2.0}, options);
    CHECK(report.all_passed());  // includes V = gamma/2, the degenerate branch

    const auto index = read_csv(dir / "index.csv");
    REQUIRE(index.size() == 3);
    CHECK(index[0] == std::vector<std::string>{"value", "directory", "status"});
    CHECK(index[1][2] == "ok");
    CHECK(index[2][2] == "ok");
    CHECK(fs::exists(dir / index[1][1] / "trajectory_excited.csv"));
    CHECK(fs::exists(dir / index[2][1] / "trajectory_excited.csv"));
}

TEST_CASE("sweep path expressions resolve and fail loudly") {
    const std::string patched = shell::patch_scenario_field(minimal, "two_level.V", 3.5, "x");
    CHECK(shell::parse_scenario(patched, "x").two_level->V == 3.5);
    // bare names fall back one level when unique
    CHECK(shell::parse_scenario(shell::patch_scenario_field(minimal, "V", 0.25, "x"), "x")
              .two_level->V == 0.25);
    CHECK(shell::parse_scenario(shell::patch_scenario_field(minimal, "steps", 800, "x"), "x")
              .steps == 800);

    const std::string with_priors = R"({
      "two_level": {"V": 2.0, "gamma": 1.0},
      "detection": "excited",
      "preparation_device": {
        "states": [[[1, 0], [0, 0]], [[0, 0], [0, 1]]],
        "priors": [0.3, 0.7]},
      "evolution": {"tau_end": 1.0, "steps": 100}
    })";
    const Scenario sc = shell::parse_scenario(
        shell::patch_scenario_field(
            shell::patch_scenario_field(with_priors, "preparation_device.priors[0]", 0.4, "x"),
            "priors[1]", 0.6, "x"),
        "x");
    CHECK(devices::a_priori_probability(*sc.preparation, "p0") == doctest::Approx(0.4));

    CHECK_THROWS_WITH_AS(shell::patch_scenario_field(minimal, "two_level.detuning", 1.0, "x"),
                         doctest::Contains("not found"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(shell::patch_scenario_field(minimal, "detection", 1.0, "x"),
                         doctest::Contains("numeric scalar"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(shell::patch_scenario_field(minimal, "priors[0]", 1.0, "x"),
                         doctest::Contains("not found"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(shell::patch_scenario_field(minimal, "..", 1.0, "x"),
                         doctest::Contains("invalid path"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        shell::patch_scenario_field(R"({"a": {"x": 1}, "b": {"x": 2}})", "x", 3.0, "y"),
        doctest::Contains("ambiguous"), std::invalid_argument);
}

TEST_CASE("the analytic verification suite passes on an arbitrary seed") {
    const auto report = shell::verify(shell::VerifySuite::analytic, 7);
    CHECK(report.checks.size() == 3);
    CHECK(report.all_passed());
    const std::string rendered = shell::render_report(report);
    CHECK(rendered.find("analytic_vs_integrator") != std::string::npos);
    CHECK(rendered.find("FAIL") == std::string::npos);
}

TEST_CASE("suite names map to suites") {
    CHECK(shell::verify_suite_from("bayes") == shell::VerifySuite::bayes);
    CHECK(shell::verify_suite_from("all") == shell::VerifySuite::all);
    CHECK_THROWS_AS(shell::verify_suite_from("everything"), std::invalid_argument);
}

TEST_CASE("the CLI honours the exit-code contract") {
    const std::string scenarios = QRETRO_SCENARIO_DIR;
    const fs::path dir = scratch_dir("cli");
    CHECK(cli("schema") == 0);
    CHECK(cli("run --scenario " + scenarios + "/does_not_exist.json") == 2);
    CHECK(cli("sweep --scenario " + scenarios + "/excited_detection.json --param bogus.field "
              "--values 1,2 --out " + (dir / "s").string()) == 2);
    // far too few steps: the integration itself degrades and the run reports failure
    CHECK(cli("run --scenario " + scenarios + "/excited_detection.json --steps-override 3 --out " +
              (dir / "r").string()) == 1);
    CHECK(cli("run --scenario " + scenarios + "/plus_detection.json --steps-override 300 --out " +
              (dir / "ok").string()) == 0);
}
