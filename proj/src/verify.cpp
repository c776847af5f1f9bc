#include <qretro/verify.hpp>

#include <qretro/opalg.hpp>
#include <qretro/probcalc.hpp>
#include <qretro/random_models.hpp>
#include <qretro/tla.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace qretro::shell {
namespace {

using lindblad::Direction;
using lindblad::Equation;
using lindblad::EvolutionWindow;

double coeff_diff(const tla::BlochState& a, const tla::BlochState& b) {
    return std::max({std::abs(a.u - b.u), std::abs(a.v - b.v), std::abs(a.w - b.w),
                     std::abs(a.x - b.x)});
}

// ----- closed forms vs the matrix integrator -----

void analytic_suite(std::uint64_t seed, std::vector<CheckResult>& out) {
    ModelRng rng(seed);

    double worst = 0.0;
    const auto compare = [&](double v_drive, double g, double tau) {
        const auto p = tla::two_level_params(v_drive, g);
        const auto model = tla::tla_model(p);
        const tla::BlochState b0 = tla::bloch_decompose(rng.psd(2));
        const std::size_t steps = lindblad::recommended_steps(model, tau, 3e-3);
        const auto traj =
            lindblad::evolve(model, tla::bloch_compose(b0),
                             {0.0, tau, steps, Direction::retrodictive_backward},
                             Equation::backward_mdo);
        const Operator exact = tla::bloch_compose(tla::analytic_bloch(b0, tau, p));
        worst = std::max(worst, (traj.states.back() - exact).cwiseAbs().maxCoeff());
    };
    for (int rep = 0; rep < 40; ++rep)
        compare(rng.uniform(0.0, 5.0), rng.uniform(0.1, 5.0), rng.uniform(0.05, 4.0));
    for (double v_drive : {0.4, 0.5, 2.0}) compare(v_drive, 1.0, 3.0);  // every damping regime
    out.push_back({"analytic_vs_integrator", worst <= 1e-8, worst, "43 parameter tuples"});

    // the direct element formulas agree with the full closed-form solution
    double elements = 0.0;
    const auto p = tla::two_level_params(2.0, 1.0);
    for (double tau = 0.0; tau <= 8.0; tau += 0.05) {
        const Operator excited = tla::detection(tla::DetectionEvent::excited, tau, p);
        const auto ex = tla::excited_detection_elements(tau, p);
        const Operator plus = tla::detection(tla::DetectionEvent::plus_superposition, tau, p);
        const auto pl = tla::plus_detection_elements(tau, p.gamma);
        elements = std::max({elements, std::abs(excited(0, 1) - ex.upper_offdiag),
                             std::abs(excited(0, 0).real() - ex.upper_population),
                             std::abs(plus(0, 1) - pl.upper_offdiag),
                             std::abs(plus(0, 0).real() - pl.upper_population)});
    }
    out.push_back({"detection_element_formulas", elements <= 1e-10, elements, ""});

    // continuity across the critical-damping seam
    double seam = 0.0;
    const auto above = tla::two_level_params(0.5 + 1e-8, 1.0);
    const auto below = tla::two_level_params(0.5 - 1e-8, 1.0);
    const tla::BlochState b0{0.2, -0.1, 0.4, 0.6};
    for (double tau = 0.0; tau <= 5.0; tau += 0.01)
        seam = std::max(seam, coeff_diff(tla::analytic_bloch(b0, tau, above),
                                         tla::analytic_bloch(b0, tau, below)));
    out.push_back({"branch_continuity", seam <= 1e-6, seam, ""});
}

// ----- backward evolution vs forward inference -----

void bayes_suite(std::uint64_t seed, std::vector<CheckResult>& out) {
    ModelRng rng(seed);
    double worst = 0.0;
    double zero_delay = 0.0;
    for (int rep = 0; rep < 30; ++rep) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.uniform(0.0, 3.0));
        const auto model = rng.model(d, 1 + static_cast<std::size_t>(rng.uniform(0.0, 2.0)));
        const auto prep =
            rng.device(devices::DeviceKind::preparation, d, static_cast<std::size_t>(d), "p");
        const auto meas = rng.device(devices::DeviceKind::measurement, d, 3, "m");

        // immediately after the measurement the two routes are the same sum
        for (const auto& j : meas.labels)
            for (const auto& i : prep.labels)
                zero_delay = std::max(
                    zero_delay, std::abs(probcalc::retrodictive_conditional(prep, meas, j, i) -
                                         probcalc::bayes_retrodiction(prep, meas, j, i)));

        const double tau = rng.uniform(0.05, 0.5);
        const std::size_t steps = lindblad::recommended_steps(model, tau, 1e-2);
        std::vector<Operator> densities;
        for (const auto& i : prep.labels)
            densities.push_back(
                lindblad::evolve(model, devices::predictive_density(prep, i),
                                 {0.0, tau, steps, Direction::predictive_forward},
                                 Equation::predictive)
                    .states.back());
        for (std::size_t j = 0; j < meas.labels.size(); ++j) {
            const Operator gamma_early =
                lindblad::evolve(model, meas.ops[j],
                                 {0.0, tau, steps, Direction::retrodictive_backward},
                                 Equation::backward_mdo)
                    .states.back();
            for (const auto& i : prep.labels)
                worst = std::max(
                    worst, std::abs(probcalc::retrodictive_conditional(prep, i, gamma_early) -
                                    probcalc::bayes_retrodiction(prep, meas, meas.labels[j], i,
                                                                 &densities)));
        }
    }
    out.push_back({"bayes_vs_backward", worst <= 1e-6, worst, "30 random (model, devices, tau)"});
    out.push_back({"bayes_zero_delay", zero_delay <= 1e-12, zero_delay, ""});
}

// ----- structural invariants on seeded random models -----

void invariants_suite(std::uint64_t seed, std::vector<CheckResult>& out) {
    ModelRng rng(seed);

    double spread = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index d = 2 + rep % 3;
        const auto model = rng.model(d, 2);
        const double horizon = 2.0;
        const std::size_t steps = lindblad::recommended_steps(model, horizon, 1e-3);
        const auto values = lindblad::collapse_invariant(
            model, rng.density(d), rng.psd(d),
            {0.0, horizon, steps, Direction::predictive_forward});
        const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        const double scale = std::max({std::abs(*lo), std::abs(*hi), 1e-300});
        spread = std::max(spread, (*hi - *lo) / scale);
    }
    out.push_back({"collapse_time_invariance", spread <= 1e-7, spread,
                   "relative spread of tr[rho(t) gamma(t)], 20 random models"});

    double floor_value = 0.0;
    double trace_dev = 0.0;
    double drift = 0.0;
    for (int rep = 0; rep < 12; ++rep) {
        const Eigen::Index d = 2 + rep % 3;
        const auto model = rng.model(d, 1 + rep % 2);
        const double horizon = 1.5;
        const std::size_t steps = lindblad::recommended_steps(model, horizon, 3e-3);
        const Operator raw = rng.psd(d);
        const auto forward = lindblad::evolve(
            model, rng.density(d), {0.0, horizon, steps, Direction::predictive_forward},
            Equation::predictive);
        const auto backward = lindblad::evolve(
            model, Operator(raw / raw.trace().real()),
            {0.0, horizon, steps, Direction::retrodictive_backward},
            Equation::retrodictive_nonlinear);
        for (const auto* traj : {&forward, &backward}) {
            drift = std::max(drift, traj->max_hermiticity_correction);
            for (const auto& m : traj->states) {
                floor_value =
                    std::min(floor_value, opalg::min_eig_hermitian(m, 1e-9).min_eigenvalue);
                trace_dev = std::max(trace_dev, std::abs(m.trace().real() - 1.0));
            }
        }
    }
    out.push_back({"positivity_floor", floor_value >= -1e-9, floor_value,
                   "least eigenvalue across 24 normalised trajectories"});
    out.push_back({"trace_preservation", trace_dev <= 1e-9, trace_dev, ""});
    out.push_back({"hermiticity_drift", drift <= 1e-10, drift, ""});

    double identity_move = 0.0;
    for (Eigen::Index d = 2; d <= 4; ++d) {
        const auto model = rng.model(d, 2);
        const auto traj = lindblad::evolve(model, Operator(Operator::Identity(d, d)),
                                           {0.0, 10.0, 2000, Direction::retrodictive_backward},
                                           Equation::backward_mdo);
        for (const auto& m : traj.states)
            identity_move = std::max(
                identity_move, (m - Operator::Identity(d, d)).cwiseAbs().maxCoeff());
    }
    out.push_back({"identity_fixed_point", identity_move <= 1e-12, identity_move, ""});

    double gap = 0.0;
    const auto compare_routes = [&gap](const lindblad::LindbladModel& model, const Operator& rho0,
                                       const EvolutionWindow& window) {
        const auto linear =
            lindblad::evolve(model, rho0, window, Equation::retrodictive_nonlinear);
        lindblad::EvolveOptions direct_options;
        direct_options.direct_nonlinear = true;
        const auto direct = lindblad::evolve(model, rho0, window,
                                             Equation::retrodictive_nonlinear, direct_options);
        for (std::size_t k = 0; k < linear.states.size(); ++k)
            gap = std::max(gap,
                           (linear.states[k] - direct.states[k]).cwiseAbs().maxCoeff());
    };
    compare_routes(tla::tla_model(tla::two_level_params(2.0, 1.0)), tla::excited_projector(),
                   {0.0, 4.0, 4000, Direction::retrodictive_backward});
    const auto model3 = rng.model(3, 2);
    const Operator raw3 = rng.psd(3);
    compare_routes(model3, Operator(raw3 / raw3.trace().real()),
                   {0.0, 1.0, lindblad::recommended_steps(model3, 1.0, 1e-3),
                    Direction::retrodictive_backward});
    out.push_back({"nonlinear_route_agreement", gap <= 1e-6, gap,
                   "direct nonlinear integration vs normalised linear flow"});
}

const char* suite_name(VerifySuite suite) {
    switch (suite) {
        case VerifySuite::analytic: return "analytic";
        case VerifySuite::bayes: return "bayes";
        case VerifySuite::invariants: return "invariants";
        default: return "all";
    }
}

}  // namespace

VerifySuite verify_suite_from(const std::string& name) {
    if (name == "analytic") return VerifySuite::analytic;
    if (name == "bayes") return VerifySuite::bayes;
    if (name == "invariants") return VerifySuite::invariants;
    if (name == "all") return VerifySuite::all;
    throw std::invalid_argument("verify: unknown suite '" + name +
                                "' (analytic, bayes, invariants, all)");
}

RunReport verify(VerifySuite suite, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    RunReport report;
    report.scenario = std::string("verify(") + suite_name(suite) + ") seed " +
                      std::to_string(seed);
    if (suite == VerifySuite::analytic || suite == VerifySuite::all)
        analytic_suite(seed, report.checks);
    if (suite == VerifySuite::bayes || suite == VerifySuite::all)
        bayes_suite(seed, report.checks);
    if (suite == VerifySuite::invariants || suite == VerifySuite::all)
        invariants_suite(seed, report.checks);
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace qretro::shell
