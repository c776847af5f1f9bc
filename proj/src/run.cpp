#include <qretro/run.hpp>

#include <qretro/opalg.hpp>
#include <qretro/output.hpp>
#include <qretro/probcalc.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace qretro::shell {
namespace {

using lindblad::Direction;
using lindblad::Equation;
using lindblad::Trajectory;

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
    return out;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Checks are declared once each; a duplicate is a programming error.
struct CheckRecorder {
    std::vector<CheckResult>& out;
    void add(std::string name, bool pass, double worst, std::string note = {}) {
        for (const auto& c : out)
            if (c.name == name) throw std::logic_error("run: duplicate check '" + name + "'");
        out.push_back({std::move(name), pass, worst, std::move(note)});
    }
};

// One evolved operator per device label; zero-weight labels stay empty.
struct Branch {
    std::string label;
    Trajectory traj;
    bool live = false;
};

}  // namespace

RunReport run(const Scenario& scenario, const RunOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    RunReport report;
    report.scenario = scenario.name;
    CheckRecorder checks{report.checks};

    std::string stage = "setup";
    try {
        Scenario sc = scenario;
        if (options.steps_override) sc.steps = *options.steps_override;
        if (sc.steps < 1) throw std::invalid_argument("steps override must be positive");

        const std::filesystem::path dir =
            !options.out_dir.empty()      ? options.out_dir
            : !sc.out_directory.empty()   ? std::filesystem::path(sc.out_directory)
                                          : std::filesystem::path("out") / sanitize(sc.name);
        std::filesystem::create_directories(dir);

        const Eigen::Index dim = sc.model.hamiltonian.rows();
        const bool bloch = sc.two_level.has_value() && dim == 2;
        const bool backward = sc.equation != Equation::predictive;
        const lindblad::EvolutionWindow window{0.0, sc.duration, sc.steps,
                                               backward ? Direction::retrodictive_backward
                                                        : Direction::predictive_forward};

        // ----- evolve one branch per device label -----
        stage = "evolution";
        std::vector<Branch> branches;
        std::vector<Operator> raw_endpoints;  // un-normalised operators at the far end

        if (sc.equation == Equation::predictive) {
            const auto& prep = *sc.preparation;
            for (std::size_t i = 0; i < prep.labels.size(); ++i) {
                Branch b;
                b.label = prep.labels[i];
                const double weight = devices::a_priori_probability(prep, prep.labels[i]);
                if (weight <= 1e-14) {
                    report.warnings.push_back("preparation '" + b.label +
                                              "' has zero probability; no trajectory written");
                    raw_endpoints.push_back(Operator::Zero(dim, dim));
                    branches.push_back(std::move(b));
                    continue;
                }
                b.traj = lindblad::evolve(sc.model, Operator(prep.ops[i] / weight), window,
                                          Equation::predictive);
                b.live = true;
                // the flow is linear, so the raw operator is just rescaled back
                raw_endpoints.push_back(Operator(weight * b.traj.states.back()));
                branches.push_back(std::move(b));
            }
        } else {
            std::vector<std::string> labels;
            std::vector<Operator> initial;  // raw measurement-side operators
            if (sc.detection) {
                labels.push_back(tla::detection_name(*sc.detection));
                initial.push_back(tla::detection_operator(*sc.detection));
            } else {
                labels = sc.measurement->labels;
                initial = sc.measurement->ops;
            }
            const bool need_raw_endpoints =
                sc.preparation.has_value() && sc.measurement.has_value();
            for (std::size_t j = 0; j < labels.size(); ++j) {
                Branch b;
                b.label = labels[j];
                const double tr = initial[j].trace().real();
                if (tr <= 1e-14) {
                    report.warnings.push_back("measurement '" + b.label +
                                              "' has zero weight; no trajectory written");
                    raw_endpoints.push_back(Operator::Zero(dim, dim));
                    branches.push_back(std::move(b));
                    continue;
                }
                if (sc.equation == Equation::backward_mdo) {
                    b.traj = lindblad::evolve(sc.model, initial[j], window, Equation::backward_mdo);
                    raw_endpoints.push_back(b.traj.states.back());
                } else {
                    b.traj = lindblad::evolve(sc.model, Operator(initial[j] / tr), window,
                                              Equation::retrodictive_nonlinear);
                    // joint tables need the raw operator; rerun the linear flow when asked
                    raw_endpoints.push_back(
                        need_raw_endpoints
                            ? Operator(lindblad::evolve(sc.model, initial[j], window,
                                                        Equation::backward_mdo)
                                           .states.back())
                            : Operator(Operator::Zero(dim, dim)));
                }
                b.live = true;
                branches.push_back(std::move(b));
            }
        }

        // ----- trajectory files -----
        stage = "trajectory output";
        std::vector<PlotBlock> plots;
        const std::string axis = backward ? "tau" : "time";
        if (sc.write_csv) {
            for (const auto& b : branches) {
                if (!b.live) continue;
                const std::string fname = "trajectory_" + sanitize(b.label) + ".csv";
                write_trajectory_csv(dir / fname, b.traj, bloch);
                report.trajectory_files.push_back(fname);
                PlotBlock block{fname, axis, "trajectory_" + sanitize(b.label) + ".png", {}};
                for (Eigen::Index a = 0; a < dim; ++a) {
                    const int column = static_cast<int>(2 + 2 * a * (dim + 1));
                    block.series.emplace_back(column, "re_" + std::to_string(a) + std::to_string(a));
                }
                plots.push_back(std::move(block));
            }
        }

        // ----- preparation-probability tables -----
        stage = "probability tables";
        if (sc.write_csv && backward && sc.preparation) {
            const auto& prep = *sc.preparation;
            for (const auto& b : branches) {
                if (!b.live) continue;
                std::vector<std::vector<double>> columns(
                    prep.labels.size(), std::vector<double>(b.traj.states.size()));
                for (std::size_t k = 0; k < b.traj.states.size(); ++k)
                    for (std::size_t i = 0; i < prep.labels.size(); ++i)
                        columns[i][k] = probcalc::retrodictive_conditional(prep, prep.labels[i],
                                                                           b.traj.states[k]);
                const std::string fname =
                    "preparation_probabilities_" + sanitize(b.label) + ".csv";
                write_probability_csv(dir / fname, "tau", b.traj.times, prep.labels, columns);
                report.table_files.push_back(fname);
                PlotBlock block{fname, "tau",
                                "preparation_probabilities_" + sanitize(b.label) + ".png", {}};
                for (std::size_t i = 0; i < prep.labels.size(); ++i)
                    block.series.emplace_back(static_cast<int>(2 + i), "P(" + prep.labels[i] + ")");
                plots.push_back(std::move(block));
            }
        }

        // ----- joint outcome table at the far end of the window -----
        if (sc.write_csv && sc.preparation && sc.measurement) {
            stage = "joint table";
            // evolving either side across the window leaves the table unchanged;
            // evolve whichever side the trajectories already cover
            probcalc::OutcomeTable table;
            if (sc.equation == Equation::predictive) {
                const auto evolved = devices::build_device_set(devices::DeviceKind::preparation,
                                                               sc.preparation->labels,
                                                               raw_endpoints);
                table = probcalc::joint_table(evolved, *sc.measurement);
            } else {
                const auto evolved = devices::build_device_set(devices::DeviceKind::measurement,
                                                               sc.measurement->labels,
                                                               raw_endpoints);
                table = probcalc::joint_table(*sc.preparation, evolved);
            }
            write_outcome_table_csv(dir / "joint_table.csv", table);
            report.table_files.push_back("joint_table.csv");
        }

        // ----- invariant checks -----
        stage = "invariant checks";
        double drift = 0.0;
        double floor_value = 0.0;
        for (const auto& b : branches) {
            if (!b.live) continue;
            drift = std::max(drift, b.traj.max_hermiticity_correction);
            for (const auto& m : b.traj.states)
                floor_value = std::min(floor_value, opalg::min_eig_hermitian(m, 1e-9).min_eigenvalue);
        }
        checks.add("hermiticity_drift", drift <= 1e-10, drift);
        checks.add("positivity_floor", floor_value >= -1e-9, floor_value,
                   "least eigenvalue across all snapshots");

        if (sc.equation != Equation::backward_mdo) {
            double worst = 0.0;
            for (const auto& b : branches) {
                if (!b.live) continue;
                for (const auto& m : b.traj.states)
                    worst = std::max(worst, std::abs(m.trace().real() - 1.0));
            }
            checks.add("trace_preservation", worst <= 1e-9, worst);
        }

        if (bloch && backward) {
            double worst = 0.0;
            for (const auto& b : branches) {
                if (!b.live) continue;
                const tla::BlochState b0 = tla::bloch_decompose(b.traj.states.front());
                for (std::size_t k = 0; k < b.traj.states.size(); ++k) {
                    const tla::BlochState ex = tla::analytic_bloch(b0, b.traj.times[k], *sc.two_level);
                    Operator expected = tla::bloch_compose(ex);
                    if (sc.equation == Equation::retrodictive_nonlinear) {
                        if (!(ex.x > 1e-300)) continue;
                        expected /= 2.0 * ex.x;
                    }
                    worst = std::max(worst,
                                     (b.traj.states[k] - expected).cwiseAbs().maxCoeff());
                }
            }
            checks.add("analytic_match", worst <= 1e-6, worst,
                       "closed form for the driven two-level emitter");
        }

        if (sc.preparation && (sc.measurement || sc.detection)) {
            const auto& prep = *sc.preparation;
            devices::DeviceSet meas_set;
            if (sc.measurement) {
                meas_set = *sc.measurement;
            } else {
                const Operator proj = tla::detection_operator(*sc.detection);
                meas_set = devices::build_device_set(
                    devices::DeviceKind::measurement,
                    {tla::detection_name(*sc.detection), "complement"},
                    {proj, Operator(Operator::Identity(dim, dim) - proj)});
            }
            // forward pipeline: preparation states carried to the measurement time
            std::vector<Operator> densities;
            for (std::size_t i = 0; i < prep.labels.size(); ++i) {
                const double weight = devices::a_priori_probability(prep, prep.labels[i]);
                if (weight <= 1e-14) {
                    densities.push_back(Operator::Zero(dim, dim));
                    continue;
                }
                if (sc.equation == Equation::predictive) {
                    densities.push_back(branches[i].traj.states.back());
                } else {
                    densities.push_back(
                        lindblad::evolve(sc.model, Operator(prep.ops[i] / weight),
                                         {0.0, sc.duration, sc.steps, Direction::predictive_forward},
                                         Equation::predictive)
                            .states.back());
                }
            }
            // backward pipeline: measurement operators carried to the preparation time
            double worst = 0.0;
            for (std::size_t j = 0; j < meas_set.labels.size(); ++j) {
                if (meas_set.ops[j].trace().real() <= 1e-14) continue;
                const Operator gamma_early =
                    lindblad::evolve(sc.model, meas_set.ops[j],
                                     {0.0, sc.duration, sc.steps, Direction::retrodictive_backward},
                                     Equation::backward_mdo)
                        .states.back();
                for (std::size_t i = 0; i < prep.labels.size(); ++i) {
                    if (devices::a_priori_probability(prep, prep.labels[i]) <= 1e-14) continue;
                    const double via_backward =
                        probcalc::retrodictive_conditional(prep, prep.labels[i], gamma_early);
                    const double via_inference = probcalc::bayes_retrodiction(
                        prep, meas_set, meas_set.labels[j], prep.labels[i], &densities);
                    worst = std::max(worst, std::abs(via_backward - via_inference));
                }
            }
            checks.add("bayes_consistency", worst <= 1e-6, worst,
                       "backward evolution vs forward inference");
        }

        // ----- plot script -----
        stage = "plot script";
        if (sc.write_plot && !plots.empty()) {
            write_plot_script(dir / "plot.gp", sc.name, plots);
            report.other_files.push_back("plot.gp");
        }

        report.seconds = elapsed_since(t0);
        return report;
    } catch (const std::exception& e) {
        throw std::runtime_error("run '" + scenario.name + "' [" + stage + "]: " + e.what());
    }
}

RunReport sweep(const std::filesystem::path& scenario_file, const std::string& param,
                const std::vector<double>& values, const RunOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    if (values.empty()) throw std::invalid_argument("sweep: no values given");

    std::ifstream in(scenario_file);
    if (!in) throw std::invalid_argument("sweep: cannot read '" + scenario_file.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    const std::string origin = scenario_file.string();

    // resolve the path-expression now so a bad one fails before any run starts
    patch_scenario_field(text, param, values.front(), origin);

    const std::filesystem::path root =
        options.out_dir.empty()
            ? std::filesystem::path("out") / (sanitize(scenario_file.stem().string()) + "_sweep")
            : options.out_dir;
    std::filesystem::create_directories(root);

    struct Entry {
        double value = 0.0;
        std::string pretty;
        std::string dirname;
        RunReport report;
        std::string error;
    };
    std::vector<Entry> entries(values.size());

    const auto run_one = [&](std::size_t k) {
        Entry& e = entries[k];
        e.value = values[k];
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.10g", values[k]);
        e.pretty = buf;
        e.dirname = sanitize(param) + "_" + sanitize(e.pretty);
        try {
            Scenario sc = parse_scenario(patch_scenario_field(text, param, values[k], origin),
                                         origin);
            sc.name += "_" + sanitize(param) + "_" + sanitize(e.pretty);
            RunOptions entry_options;
            entry_options.out_dir = root / e.dirname;
            entry_options.steps_override = options.steps_override;
            e.report = run(sc, entry_options);
        } catch (const std::exception& ex) {
            e.error = ex.what();
        }
    };

    // entries are independent and own their output directories
    std::vector<std::future<void>> futures;
    futures.reserve(values.size());
    for (std::size_t k = 0; k < values.size(); ++k)
        futures.push_back(std::async(std::launch::async, run_one, k));
    for (auto& f : futures) f.get();

    RunReport aggregate;
    aggregate.scenario = "sweep " + param + " over " + scenario_file.stem().string();
    for (const auto& e : entries) {
        const std::string prefix = param + "=" + e.pretty;
        if (!e.error.empty()) {
            aggregate.checks.push_back({prefix, false, 0.0, e.error});
            continue;
        }
        for (const auto& c : e.report.checks)
            aggregate.checks.push_back({prefix + "/" + c.name, c.pass, c.worst, c.note});
        for (const auto& w : e.report.warnings) aggregate.warnings.push_back(prefix + ": " + w);
        for (const auto& f : e.report.trajectory_files)
            aggregate.trajectory_files.push_back(e.dirname + "/" + f);
        for (const auto& f : e.report.table_files)
            aggregate.table_files.push_back(e.dirname + "/" + f);
        for (const auto& f : e.report.other_files)
            aggregate.other_files.push_back(e.dirname + "/" + f);
    }

    std::ofstream idx(root / "index.csv");
    if (!idx)
        throw std::runtime_error("sweep: cannot open '" + (root / "index.csv").string() +
                                 "' for writing");
    idx << "value,directory,status\n";
    for (const auto& e : entries)
        idx << format_double(e.value) << ',' << e.dirname << ','
            << (!e.error.empty() ? "error" : e.report.all_passed() ? "ok" : "check_failed")
            << '\n';
    idx.flush();
    if (!idx)
        throw std::runtime_error("sweep: write to '" + (root / "index.csv").string() + "' failed");
    aggregate.other_files.push_back("index.csv");

    aggregate.seconds = elapsed_since(t0);
    return aggregate;
}

std::string render_report(const RunReport& report) {
    std::ostringstream out;
    out << "scenario: " << report.scenario << '\n';
    const auto file_line = [&](const char* what, const std::vector<std::string>& files) {
        if (files.empty()) return;
        out << "  " << what << ':';
        for (const auto& f : files) out << ' ' << f;
        out << '\n';
    };
    file_line("trajectories", report.trajectory_files);
    file_line("tables", report.table_files);
    file_line("other", report.other_files);
    out << "  checks:\n";
    if (report.checks.empty()) out << "    (none)\n";
    for (const auto& c : report.checks) {
        out << "    [" << (c.pass ? " ok " : "FAIL") << "] " << std::left << std::setw(32)
            << c.name << std::right << "  worst " << std::scientific << std::setprecision(3)
            << c.worst << std::defaultfloat;
        if (!c.note.empty()) out << "  (" << c.note << ')';
        out << '\n';
    }
    for (const auto& w : report.warnings) out << "  warning: " << w << '\n';
    out << "  elapsed: " << std::fixed << std::setprecision(2) << report.seconds << " s\n";
    return out.str();
}

}  // namespace qretro::shell
