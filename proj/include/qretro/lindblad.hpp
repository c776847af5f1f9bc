// lindblad.hpp — open-system evolution of density and measurement operators.
//
// Conventions (hbar = 1 throughout):
//   predictive:   d rho / dt = -i[H, rho] + sum_q (2 A_q rho A_q^+ - A_q^+ A_q rho - rho A_q^+ A_q)
//   backward:     d gam / dt = -i[H, gam] - sum_q (2 A_q^+ gam A_q - gam A_q^+ A_q - A_q^+ A_q gam)
// The dissipator carries no 1/2 on the sandwich term; decay rates are absorbed
// into the normalisation of the jump operators (a rate-g decay channel is
// A = sqrt(g) * lowering operator).
//
// Backward trajectories are integrated in the premeasurement time
// tau = t_m - t, i.e. d gam / d tau = -(backward rhs), starting from the
// measurement operator at tau = 0 and running towards earlier laboratory time.
//
// The retrodictive state obeys a nonlinear trace-preserving equation; it is
// the trace-normalised image of the linear backward equation, so the default
// integration route is: evolve the linear equation, normalise each snapshot.
// A direct integrator for the nonlinear form is available through
// EvolveOptions for cross-checks.
#pragma once

#include <qretro/opalg.hpp>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace qretro::lindblad {

// ----- model -----

struct LindbladModel {
    Operator hamiltonian;
    std::vector<Operator> jumps;
};

inline void validate_model(const LindbladModel& model) {
    opalg::require_square(model.hamiltonian, "LindbladModel: hamiltonian");
    opalg::require_finite(model.hamiltonian, "LindbladModel: hamiltonian");
    if (opalg::max_asymmetry(model.hamiltonian) > 1e-12)
        throw std::invalid_argument("LindbladModel: hamiltonian is not Hermitian");
    for (std::size_t q = 0; q < model.jumps.size(); ++q) {
        const std::string ctx = "LindbladModel: jump operator " + std::to_string(q);
        opalg::require_square(model.jumps[q], ctx);
        opalg::require_finite(model.jumps[q], ctx);
        if (model.jumps[q].rows() != model.hamiltonian.rows())
            throw std::invalid_argument(ctx + ": dimension does not match hamiltonian");
    }
}

inline LindbladModel make_model(Operator hamiltonian, std::vector<Operator> jumps) {
    LindbladModel model{std::move(hamiltonian), std::move(jumps)};
    validate_model(model);
    return model;
}

// Step count giving h * max(|H|, sum |A^+A|) <= budget (Frobenius norms);
// budget 1e-2 is adequate for plots, 1e-3 for tight cross-checks.
inline std::size_t recommended_steps(const LindbladModel& model, double duration,
                                     double budget = 1e-2) {
    double rate = model.hamiltonian.norm();
    for (const auto& a : model.jumps) rate += (a.adjoint() * a).norm();
    const double steps = std::ceil(std::abs(duration) * rate / budget);
    return steps < 1.0 ? 1 : static_cast<std::size_t>(steps);
}

// ----- right-hand sides -----

namespace detail {

struct JumpCache {
    std::vector<Operator> a, a_dag, a_dag_a;
    Operator comm_sum;  // sum_q [A_q^+, A_q], drives the nonlinear trace term

    explicit JumpCache(const LindbladModel& model) {
        const Eigen::Index d = model.hamiltonian.rows();
        comm_sum = Operator::Zero(d, d);
        a.reserve(model.jumps.size());
        for (const auto& op : model.jumps) {
            a.push_back(op);
            a_dag.push_back(op.adjoint());
            a_dag_a.push_back(a_dag.back() * op);
            comm_sum += a_dag_a.back() - op * a_dag.back();
        }
    }
};

// out = -i[H, m] + sum_q (2 A m A^+ - A^+A m - m A^+A); t1/t2 are scratch.
inline void predictive_apply(Operator& out, const Operator& h, const JumpCache& jc,
                             const Operator& m, Operator& t1, Operator& t2) {
    t1.noalias() = h * m;
    t2.noalias() = m * h;
    out = Complex(0, -1) * (t1 - t2);
    for (std::size_t q = 0; q < jc.a.size(); ++q) {
        t1.noalias() = jc.a[q] * m;
        t2.noalias() = t1 * jc.a_dag[q];
        out += 2.0 * t2;
        t1.noalias() = jc.a_dag_a[q] * m;
        out -= t1;
        t1.noalias() = m * jc.a_dag_a[q];
        out -= t1;
    }
}

// out = -i[H, m] - sum_q (2 A^+ m A - m A^+A - A^+A m), the forward-time
// equation for a backward-propagating measurement operator.
inline void backward_apply(Operator& out, const Operator& h, const JumpCache& jc,
                           const Operator& m, Operator& t1, Operator& t2) {
    t1.noalias() = h * m;
    t2.noalias() = m * h;
    out = Complex(0, -1) * (t1 - t2);
    for (std::size_t q = 0; q < jc.a.size(); ++q) {
        t1.noalias() = jc.a_dag[q] * m;
        t2.noalias() = t1 * jc.a[q];
        out -= 2.0 * t2;
        t1.noalias() = m * jc.a_dag_a[q];
        out += t1;
        t1.noalias() = jc.a_dag_a[q] * m;
        out += t1;
    }
}

// Nonlinear retrodictive form: backward rhs minus 2 rho tr(rho * comm_sum).
inline void retrodictive_apply(Operator& out, const Operator& h, const JumpCache& jc,
                               const Operator& m, Operator& t1, Operator& t2) {
    backward_apply(out, h, jc, m, t1, t2);
    t1.noalias() = m * jc.comm_sum;
    out -= 2.0 * t1.trace() * m;
}

}  // namespace detail

inline Operator predictive_rhs(const LindbladModel& model, const Operator& rho) {
    validate_model(model);
    opalg::require_same_dim(model.hamiltonian, rho, "predictive_rhs");
    detail::JumpCache jc(model);
    Operator out, t1, t2;
    detail::predictive_apply(out, model.hamiltonian, jc, rho, t1, t2);
    return out;
}

inline Operator backward_mdo_rhs(const LindbladModel& model, const Operator& gamma_op) {
    validate_model(model);
    opalg::require_same_dim(model.hamiltonian, gamma_op, "backward_mdo_rhs");
    detail::JumpCache jc(model);
    Operator out, t1, t2;
    detail::backward_apply(out, model.hamiltonian, jc, gamma_op, t1, t2);
    return out;
}

// Requires a unit-trace state; the equation preserves the trace, and the
// result's trace vanishing is asserted as an internal consistency check.
inline Operator retrodictive_rhs(const LindbladModel& model, const Operator& rho_retr) {
    validate_model(model);
    opalg::require_same_dim(model.hamiltonian, rho_retr, "retrodictive_rhs");
    if (std::abs(rho_retr.trace().real() - 1.0) > 1e-9 || std::abs(rho_retr.trace().imag()) > 1e-9)
        throw std::invalid_argument("retrodictive_rhs: state must have unit trace");
    detail::JumpCache jc(model);
    Operator out, t1, t2;
    detail::retrodictive_apply(out, model.hamiltonian, jc, rho_retr, t1, t2);
    if (std::abs(out.trace()) > 1e-12)
        throw std::logic_error("retrodictive_rhs: trace conservation violated");
    return out;
}

// ----- trajectories -----

enum class Direction { predictive_forward, retrodictive_backward };

struct EvolutionWindow {
    double t_start = 0.0;  // premeasurement tau for backward runs
    double t_end = 0.0;
    std::size_t steps = 0;
    Direction direction = Direction::predictive_forward;
};

struct Trajectory {
    EvolutionWindow window;
    std::vector<double> times;     // grid values (laboratory t, or tau for backward runs)
    std::vector<Operator> states;  // one snapshot per grid point, steps + 1 in total
    bool normalized = false;       // snapshots are unit-trace states
    double max_hermiticity_correction = 0.0;  // largest re-symmetrisation applied
};

enum class Equation { predictive, backward_mdo, retrodictive_nonlinear };

struct EvolveOptions {
    bool direct_nonlinear = false;        // integrate the nonlinear form directly
    std::size_t resymmetrize_every = 100; // damp Hermiticity drift at this cadence
};

namespace detail {

inline void validate_window(const EvolutionWindow& w, const std::string& who) {
    if (w.steps < 1) throw std::invalid_argument(who + ": window needs at least one step");
    if (!(w.t_end > w.t_start))
        throw std::invalid_argument(who + ": window end must exceed start");
}

}  // namespace detail

// Classic fixed-step fourth-order Runge-Kutta over an equally spaced grid.
// Every grid point is stored.  Each step checks for NaN/overflow; every
// `resymmetrize_every` steps the state is replaced by its Hermitian part and
// the correction recorded.  Normalised trajectories get a positivity check on
// every snapshot: an eigenvalue below -1e-7 aborts the run.
inline Trajectory evolve(const LindbladModel& model, const Operator& initial,
                         const EvolutionWindow& window, Equation equation,
                         const EvolveOptions& options = {}) {
    validate_model(model);
    detail::validate_window(window, "evolve");
    opalg::require_same_dim(model.hamiltonian, initial, "evolve: initial operator");
    opalg::require_finite(initial, "evolve: initial operator");
    if (opalg::max_asymmetry(initial) > 1e-12)
        throw std::invalid_argument("evolve: initial operator is not Hermitian");

    const bool backward = equation != Equation::predictive;
    const bool direct_nonlinear =
        equation == Equation::retrodictive_nonlinear && options.direct_nonlinear;
    if (equation == Equation::retrodictive_nonlinear &&
        std::abs(initial.trace().real() - 1.0) > 1e-9)
        throw std::invalid_argument("evolve: retrodictive state must start with unit trace");

    Trajectory traj;
    traj.window = window;
    traj.window.direction =
        backward ? Direction::retrodictive_backward : Direction::predictive_forward;
    traj.normalized = equation == Equation::retrodictive_nonlinear ||
                      (equation == Equation::predictive &&
                       std::abs(initial.trace().real() - 1.0) <= 1e-9 &&
                       std::abs(initial.trace().imag()) <= 1e-9);

    const detail::JumpCache jc(model);
    const Operator& h = model.hamiltonian;
    // d/dt for predictive; d/dtau = -(forward-time rhs) for backward runs.
    auto rhs = [&](Operator& out, const Operator& m, Operator& t1, Operator& t2) {
        if (equation == Equation::predictive) {
            detail::predictive_apply(out, h, jc, m, t1, t2);
        } else if (direct_nonlinear) {
            detail::retrodictive_apply(out, h, jc, m, t1, t2);
            out = -out;
        } else {
            detail::backward_apply(out, h, jc, m, t1, t2);
            out = -out;
        }
    };

    const double dt = (window.t_end - window.t_start) / static_cast<double>(window.steps);
    Operator y = initial;
    Operator k1, k2, k3, k4, stage, t1, t2;

    traj.times.reserve(window.steps + 1);
    traj.states.reserve(window.steps + 1);
    traj.times.push_back(window.t_start);
    traj.states.push_back(y);

    for (std::size_t step = 1; step <= window.steps; ++step) {
        rhs(k1, y, t1, t2);
        stage = y + (0.5 * dt) * k1;
        rhs(k2, stage, t1, t2);
        stage = y + (0.5 * dt) * k2;
        rhs(k3, stage, t1, t2);
        stage = y + dt * k3;
        rhs(k4, stage, t1, t2);
        y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        if (!y.allFinite())
            throw std::runtime_error("evolve: NaN/overflow at step " + std::to_string(step));
        if (options.resymmetrize_every > 0 && step % options.resymmetrize_every == 0) {
            stage = 0.5 * (y + y.adjoint().eval());
            const double correction = opalg::max_abs(y - stage);
            if (correction > traj.max_hermiticity_correction)
                traj.max_hermiticity_correction = correction;
            y = stage;
        }
        traj.times.push_back(window.t_start + static_cast<double>(step) * dt);
        traj.states.push_back(y);
    }

    // Linear route for the retrodictive state: normalise every snapshot.
    if (equation == Equation::retrodictive_nonlinear && !direct_nonlinear) {
        for (std::size_t k = 0; k < traj.states.size(); ++k) {
            const Complex tr = traj.states[k].trace();
            if (std::abs(tr.imag()) > 1e-12 * std::max(1.0, std::abs(tr.real())) ||
                tr.real() <= 1e-14)
                throw std::runtime_error("evolve: cannot normalise snapshot " + std::to_string(k) +
                                         " (trace " + std::to_string(tr.real()) + ")");
            traj.states[k] /= tr.real();
        }
    }

    if (traj.normalized) {
        for (std::size_t k = 0; k < traj.states.size(); ++k) {
            const auto check = opalg::min_eig_hermitian(traj.states[k], 1e-9);
            if (check.min_eigenvalue < -1e-7)
                throw std::runtime_error("evolve: positivity violated at snapshot " +
                                         std::to_string(k) + " (min eigenvalue " +
                                         std::to_string(check.min_eigenvalue) + ")");
        }
    }
    return traj;
}

// ----- closed-system propagation -----

enum class UnitaryDirection { schrodinger_forward, heisenberg_backward };

// exp(-iHt) op exp(+iHt) (forward) or its inverse image (backward), through
// the eigendecomposition of the Hermitian generator.
inline Operator unitary_evolve(const Operator& hamiltonian, const Operator& op, double t,
                               UnitaryDirection direction) {
    opalg::require_square(hamiltonian, "unitary_evolve");
    opalg::require_same_dim(hamiltonian, op, "unitary_evolve");
    if (opalg::max_asymmetry(hamiltonian) > 1e-12)
        throw std::invalid_argument("unitary_evolve: hamiltonian is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Operator> solver(hamiltonian);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("unitary_evolve: eigensolver failed to converge");
    const auto& basis = solver.eigenvectors();
    Eigen::VectorXcd phases(solver.eigenvalues().size());
    for (Eigen::Index k = 0; k < phases.size(); ++k)
        phases(k) = std::exp(Complex(0, -solver.eigenvalues()(k) * t));
    const Operator u = basis * phases.asDiagonal() * basis.adjoint();
    if (direction == UnitaryDirection::schrodinger_forward) return u * op * u.adjoint();
    return u.adjoint() * op * u;
}

// ----- consistency functional -----

// tr[rho(t) gam(t)] on a shared grid, with rho propagated forward from the
// preparation and gam propagated backward from the measurement.  The value is
// independent of t; its spread measures integration error.
inline std::vector<double> collapse_invariant(const LindbladModel& model, const Operator& rho0,
                                              const Operator& gamma_final,
                                              const EvolutionWindow& window) {
    detail::validate_window(window, "collapse_invariant");
    EvolutionWindow forward = window;
    forward.direction = Direction::predictive_forward;
    const Trajectory rho = evolve(model, rho0, forward, Equation::predictive);

    EvolutionWindow backward;
    backward.t_start = 0.0;
    backward.t_end = window.t_end - window.t_start;
    backward.steps = window.steps;
    backward.direction = Direction::retrodictive_backward;
    const Trajectory gam = evolve(model, gamma_final, backward, Equation::backward_mdo);

    std::vector<double> values(window.steps + 1);
    for (std::size_t k = 0; k <= window.steps; ++k) {
        const Complex v = (rho.states[k] * gam.states[window.steps - k]).trace();
        if (std::abs(v.imag()) > 1e-10 * std::max(1.0, std::abs(v.real())))
            throw std::runtime_error("collapse_invariant: non-real overlap at grid point " +
                                     std::to_string(k));
        values[k] = v.real();
    }
    return values;
}

}  // namespace qretro::lindblad
