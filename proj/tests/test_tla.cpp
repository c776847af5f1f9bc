// Two-level-atom closed forms: checked against a scalar integration of the
// four backward coefficient equations written independently in this file, and
// against the full matrix integrator.
#include <qretro/devices.hpp>
#include <qretro/lindblad.hpp>
#include <qretro/random_models.hpp>
#include <qretro/tla.hpp>

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "test_helpers.hpp"

using namespace qretro;
using lindblad::Direction;
using lindblad::Equation;
using qretro::testing::check_close;
using qretro::testing::mat2;
using tla::BlochState;
using tla::DetectionEvent;

namespace {

// Independent oracle: classic RK4 on the scalar system
//   u' = -g u,  v' = -g v + V w,  w' = -V v - 2g w,  x' = -2g w
// with no reference to the closed forms under test.
BlochState integrate_coefficients(BlochState b, double v_drive, double g, double tau,
                                  std::size_t steps) {
    struct D {
        double u, v, w, x;
    };
    auto f = [&](const BlochState& s) {
        return D{-g * s.u, -g * s.v + v_drive * s.w, -v_drive * s.v - 2.0 * g * s.w, -2.0 * g * s.w};
    };
    const double h = tau / double(steps);
    for (std::size_t n = 0; n < steps; ++n) {
        const D k1 = f(b);
        const D k2 = f({b.u + 0.5 * h * k1.u, b.v + 0.5 * h * k1.v, b.w + 0.5 * h * k1.w,
                        b.x + 0.5 * h * k1.x});
        const D k3 = f({b.u + 0.5 * h * k2.u, b.v + 0.5 * h * k2.v, b.w + 0.5 * h * k2.w,
                        b.x + 0.5 * h * k2.x});
        const D k4 = f({b.u + h * k3.u, b.v + h * k3.v, b.w + h * k3.w, b.x + h * k3.x});
        b.u += h / 6.0 * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u);
        b.v += h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
        b.w += h / 6.0 * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w);
        b.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    }
    return b;
}

double coeff_diff(const BlochState& a, const BlochState& b) {
    return std::max({std::abs(a.u - b.u), std::abs(a.v - b.v), std::abs(a.w - b.w),
                     std::abs(a.x - b.x)});
}

}  // namespace

TEST_CASE("two_level_params computes the damped oscillation frequency") {
    const auto under = tla::two_level_params(2.0, 1.0);
    CHECK(under.omega.real() == doctest::Approx(std::sqrt(3.75)).epsilon(1e-14));
    CHECK(under.omega.imag() == 0.0);
    const auto over = tla::two_level_params(0.4, 1.0);
    CHECK(over.omega.real() == 0.0);
    CHECK(over.omega.imag() == doctest::Approx(0.3).epsilon(1e-14));
    CHECK_THROWS_AS(tla::two_level_params(-1.0, 1.0), std::invalid_argument);
}

TEST_CASE("the model couples the drive through sigma1 and decays through sigma_minus") {
    const auto model = tla::tla_model(tla::two_level_params(2.0, 4.0));
    check_close(model.hamiltonian, mat2(0, 1, 1, 0), 1e-15);
    REQUIRE(model.jumps.size() == 1);
    check_close(model.jumps[0], mat2(0, 0, 2, 0), 1e-15);
}

TEST_CASE("bloch decomposition round-trips and matches hand values") {
    const BlochState e = tla::bloch_decompose(mat2(1, 0, 0, 0));
    CHECK(e.u == 0.0);
    CHECK(e.v == 0.0);
    CHECK(e.w == 0.5);
    CHECK(e.x == 0.5);
    const BlochState s2 = tla::bloch_decompose(0.5 * (Operator::Identity(2, 2) + tla::sigma2()));
    CHECK(s2.v == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s2.w == 0.0);

    shell::ModelRng rng(71);
    for (int rep = 0; rep < 10; ++rep) {
        const Operator m = rng.psd(2);
        check_close(tla::bloch_compose(tla::bloch_decompose(m)), m, 1e-14);
    }
    CHECK_THROWS_AS(tla::bloch_decompose(mat2(0, 1, 0, 0)), std::invalid_argument);
    CHECK_THROWS_AS(tla::bloch_decompose(Operator::Identity(3, 3)), std::invalid_argument);
}

TEST_CASE("analytic coefficients at tau = 0 return the initial data") {
    const auto p = tla::two_level_params(1.7, 0.9);
    const BlochState b0{0.21, -0.4, 0.33, 0.6};
    const BlochState b = tla::analytic_bloch(b0, 0.0, p);
    CHECK(coeff_diff(b, b0) < 1e-15);
}

TEST_CASE("the u coefficient decays bare-exponentially") {
    const auto p = tla::two_level_params(3.0, 1.0);
    const BlochState b = tla::analytic_bloch({1.0, 0.0, 0.0, 1.0}, std::log(2.0), p);
    CHECK(b.u == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(b.v == 0.0);
    CHECK(b.w == 0.0);
}

TEST_CASE("analytic coefficients match the scalar integrator in all damping regimes") {
    // Underdamped, overdamped, critically damped, and a near-seam case.
    const double cases[][2] = {{2.0, 1.0}, {0.4, 1.0}, {0.5, 1.0}, {0.5 + 1e-9, 1.0}, {4.0, 0.0},
                               {0.0, 1.5}};
    for (const auto& vc : cases) {
        const auto p = tla::two_level_params(vc[0], vc[1]);
        const BlochState b0{0.1, -0.2, 0.4, 0.55};
        for (double tau : {0.3, 1.7, 6.0}) {
            CAPTURE(vc[0]);
            CAPTURE(vc[1]);
            CAPTURE(tau);
            const BlochState exact = tla::analytic_bloch(b0, tau, p);
            const BlochState numeric = integrate_coefficients(b0, vc[0], vc[1], tau, 40000);
            CHECK(coeff_diff(exact, numeric) < 1e-10);
        }
    }
    CHECK_THROWS_AS(tla::analytic_bloch({0, 0, 0.5, 0.5}, 1.0, tla::two_level_params(0.0, 0.0)),
                    std::domain_error);
}

TEST_CASE("analytic coefficients match the matrix integrator for random tuples") {
    shell::ModelRng rng(73);
    for (int rep = 0; rep < 25; ++rep) {
        const double v_drive = rng.uniform(0.0, 5.0);
        const double g = rng.uniform(0.1, 5.0);
        const double tau = rng.uniform(0.05, 6.0);
        const auto p = tla::two_level_params(v_drive, g);
        const auto model = tla::tla_model(p);
        const BlochState b0 = tla::bloch_decompose(rng.psd(2));
        const std::size_t steps = lindblad::recommended_steps(model, tau, 3e-3);
        const auto traj = lindblad::evolve(model, tla::bloch_compose(b0),
                                           {0.0, tau, steps, Direction::retrodictive_backward},
                                           Equation::backward_mdo);
        const BlochState numeric = tla::bloch_decompose(traj.states.back());
        const BlochState exact = tla::analytic_bloch(b0, tau, p);
        CAPTURE(rep);
        CAPTURE(v_drive);
        CAPTURE(g);
        CAPTURE(tau);
        CHECK(coeff_diff(exact, numeric) < 1e-8);
    }
}

TEST_CASE("branch seams are continuous") {
    // Across the damping seam V = gamma/2.
    const double eps = 1e-8;
    for (double tau : {0.0, 0.5, 2.0, 5.0}) {
        const BlochState b0{0.2, 0.4, -0.3, 0.7};
        const BlochState above = tla::analytic_bloch(b0, tau, tla::two_level_params(0.5 + eps, 1.0));
        const BlochState below = tla::analytic_bloch(b0, tau, tla::two_level_params(0.5 - eps, 1.0));
        CAPTURE(tau);
        CHECK(coeff_diff(above, below) < 1e-6);
    }
    // Either side of the small-argument kernel switch, validated against the
    // branch-free scalar integrator rather than against each other (the state
    // itself moves between two distinct times).
    const auto p = tla::two_level_params(0.5 + 1e-7, 1.0);
    const double mag = std::abs(p.omega);
    const double tau_seam = 1e-4 / mag;
    const BlochState b0{0.1, 0.3, 0.2, 0.5};
    for (const double factor : {0.999, 1.001}) {
        const double tau = tau_seam * factor;
        const BlochState exact = tla::analytic_bloch(b0, tau, p);
        const BlochState numeric = integrate_coefficients(b0, p.V, p.gamma, tau, 40000);
        CAPTURE(factor);
        CHECK(coeff_diff(exact, numeric) < 1e-10);
    }
}

TEST_CASE("x slope equals -2 gamma w along the solution") {
    const auto p = tla::two_level_params(2.0, 1.0);
    const BlochState b0{0.15, -0.25, 0.35, 0.8};
    const double h = 1e-5;
    for (double tau : {0.2, 1.1, 3.0}) {
        const double x_plus = tla::analytic_bloch(b0, tau + h, p).x;
        const double x_minus = tla::analytic_bloch(b0, tau - h, p).x;
        const double slope = (x_plus - x_minus) / (2.0 * h);
        const double expected = -2.0 * p.gamma * tla::analytic_bloch(b0, tau, p).w;
        // Relative tolerance with an absolute floor where w crosses zero.
        CHECK(std::abs(slope - expected) <= 1e-6 * std::max(1.0, std::abs(expected)));
    }
}

TEST_CASE("detection events start from the detected projector") {
    check_close(tla::detection(DetectionEvent::excited, 0.0, tla::two_level_params(2.0, 1.0)),
                mat2(1, 0, 0, 0), 1e-15);
    check_close(tla::detection(DetectionEvent::ground, 0.0, tla::two_level_params(2.0, 1.0)),
                mat2(0, 0, 0, 1), 1e-15);
    check_close(tla::detection_operator(DetectionEvent::plus_superposition),
                mat2(0.5, 0.5, 0.5, 0.5), 1e-15);
}

TEST_CASE("excited detection matches the direct matrix-element formulas") {
    const auto p = tla::two_level_params(2.0, 1.0);
    for (double tau : {0.0, 0.4, 1.3, 4.0, 9.0}) {
        const Operator rho = tla::detection(DetectionEvent::excited, tau, p);
        const auto el = tla::excited_detection_elements(tau, p);
        CAPTURE(tau);
        CHECK(std::abs(rho(0, 1) - el.upper_offdiag) < 1e-13);
        CHECK(std::abs(rho(0, 0).real() - el.upper_population) < 1e-13);
        // The retrodicted state is a state.
        CHECK(rho.trace().real() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(opalg::min_eig_hermitian(rho, 1e-12).min_eigenvalue > -1e-12);
    }
}

TEST_CASE("plus detection: coherence decays, populations never move") {
    const auto p = tla::two_level_params(2.0, 1.0);
    for (double tau : {0.0, 0.7, 2.5, 8.0}) {
        const Operator rho = tla::detection(DetectionEvent::plus_superposition, tau, p);
        const auto el = tla::plus_detection_elements(tau, p.gamma);
        CAPTURE(tau);
        CHECK(rho(0, 0).real() == 0.5);  // exactly, by construction
        CHECK(rho(1, 1).real() == 0.5);
        CHECK(std::abs(rho(0, 1) - el.upper_offdiag) < 1e-15);
    }
}

TEST_CASE("sigma2 detection keeps oscillating: v changes sign within one period") {
    const auto p = tla::two_level_params(3.0, 1.0);  // V > 2 gamma
    const double period = 2.0 * std::numbers::pi / p.omega.real();
    double prev = 0.0;
    bool flipped = false;
    for (int k = 1; k <= 400; ++k) {
        const double tau = period * double(k) / 400.0;
        const BlochState b = tla::analytic_bloch(tla::detection_initial(DetectionEvent::sigma2_superposition),
                                                 tau, p);
        if (k > 1 && b.v * prev < 0.0) flipped = true;
        prev = b.v;
    }
    CHECK(flipped);
}

TEST_CASE("long premeasurement times wash out all detection information") {
    const auto p = tla::two_level_params(2.0, 1.0);
    for (auto event : {DetectionEvent::excited, DetectionEvent::ground,
                       DetectionEvent::plus_superposition, DetectionEvent::sigma2_superposition}) {
        const Operator rho = tla::detection(event, 30.0 / p.gamma, p);
        CHECK(qretro::testing::max_diff(rho, 0.5 * Operator::Identity(2, 2)) < 1e-6);
    }
}

TEST_CASE("preparation probabilities for symmetric superposition preparations") {
    const auto p = tla::two_level_params(2.0, 1.0);
    const auto prep = devices::build_device_set(
        devices::DeviceKind::preparation, {"plus", "minus"},
        {mat2(0.5, 0.5, 0.5, 0.5), mat2(0.5, -0.5, -0.5, 0.5)});
    for (double tau : {0.0, 0.5, 2.0, 6.0}) {
        const Operator rho = tla::detection(DetectionEvent::plus_superposition, tau, p);
        const auto probs = tla::preparation_probabilities(rho, prep);
        const double expect_plus = 0.5 * (1.0 + std::exp(-p.gamma * tau));
        CAPTURE(tau);
        REQUIRE(probs.size() == 2);
        CHECK(probs[0].first == "plus");
        CHECK(std::abs(probs[0].second - expect_plus) < 1e-12);
        CHECK(std::abs(probs[1].second - (1.0 - expect_plus)) < 1e-12);
    }
}

TEST_CASE("biased preparation probabilities converge to the device bias") {
    const auto p = tla::two_level_params(2.0, 1.0);
    const Operator rho = tla::detection(DetectionEvent::excited, 30.0 / p.gamma, p);
    for (double bias : {0.1, 0.37, 0.9}) {
        const auto prep = devices::build_device_set(
            devices::DeviceKind::preparation, {"e", "g"},
            {bias * mat2(1, 0, 0, 0), (1.0 - bias) * mat2(0, 0, 0, 1)});
        const auto probs = tla::preparation_probabilities(rho, prep);
        CAPTURE(bias);
        CHECK(std::abs(probs[0].second - bias) < 1e-6);
    }
}

TEST_CASE("detection event names round-trip") {
    for (auto event : {DetectionEvent::excited, DetectionEvent::ground,
                       DetectionEvent::plus_superposition, DetectionEvent::sigma2_superposition})
        CHECK(tla::detection_event_from(tla::detection_name(event)) == event);
    CHECK_THROWS_AS(tla::detection_event_from("banana"), std::invalid_argument);
}
