// tla.hpp — resonantly driven, spontaneously decaying two-level atom: the
// closed-form workhorse the numerical engine is checked against.
//
// Basis convention: index 0 is the excited state |e>, index 1 the ground
// state |g>.  With sigma_plus = |e><g| and sigma_minus = |g><e|,
//   sigma1 = sigma_plus + sigma_minus        (Pauli x)
//   sigma2 = -i(sigma_plus - sigma_minus)    (Pauli y)
//   sigma3 = 2 sigma_plus sigma_minus - 1    (Pauli z)
// The Hamiltonian is (V/2) sigma1 — V is the resonant drive strength — and
// the single decay channel is sqrt(gamma) sigma_minus.
//
// A Hermitian 2x2 operator decomposes as
//   B = u sigma1 + v sigma2 + w sigma3 + x 1,
// so <e|B|g> = u - iv, <e|B|e> = x + w, <g|B|g> = x - w.  Backward evolution
// in premeasurement time tau closes on (u, v, w, x):
//   du/dtau = -gamma u
//   dv/dtau = -gamma v + V w
//   dw/dtau = -V v - 2 gamma w
//   dx/dtau = -2 gamma w
// analytic_bloch evaluates the exact solution of this system.  The damped
// oscillation frequency is omega = sqrt(V^2 - gamma^2/4), which turns
// imaginary in the overdamped regime; every formula is therefore written in
// the kernels c(tau) = cos(omega tau) and s(tau) = sin(omega tau)/omega,
// which stay real and well conditioned across both regimes and the
// critically damped seam between them.
#pragma once

#include <qretro/devices.hpp>
#include <qretro/lindblad.hpp>
#include <qretro/opalg.hpp>
#include <qretro/probcalc.hpp>

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

namespace qretro::tla {

// ----- parameters and basis operators -----

struct TwoLevelParams {
    double V = 0.0;      // resonant drive strength
    double gamma = 0.0;  // spontaneous decay rate
    Complex omega;       // sqrt(V^2 - gamma^2/4); imaginary when overdamped
};

inline TwoLevelParams two_level_params(double V, double gamma) {
    if (!(V >= 0.0) || !(gamma >= 0.0))
        throw std::invalid_argument("two_level_params: V and gamma must be non-negative");
    TwoLevelParams p;
    p.V = V;
    p.gamma = gamma;
    const double disc = V * V - 0.25 * gamma * gamma;
    p.omega = disc >= 0.0 ? Complex(std::sqrt(disc), 0.0) : Complex(0.0, std::sqrt(-disc));
    return p;
}

inline Operator sigma_plus() { return (Operator(2, 2) << 0, 1, 0, 0).finished(); }
inline Operator sigma_minus() { return (Operator(2, 2) << 0, 0, 1, 0).finished(); }
inline Operator sigma1() { return (Operator(2, 2) << 0, 1, 1, 0).finished(); }
inline Operator sigma2() {
    return (Operator(2, 2) << 0, Complex(0, -1), Complex(0, 1), 0).finished();
}
inline Operator sigma3() { return (Operator(2, 2) << 1, 0, 0, -1).finished(); }
inline Operator excited_projector() { return (Operator(2, 2) << 1, 0, 0, 0).finished(); }
inline Operator ground_projector() { return (Operator(2, 2) << 0, 0, 0, 1).finished(); }

inline lindblad::LindbladModel tla_model(const TwoLevelParams& p) {
    return lindblad::make_model(0.5 * p.V * sigma1(), {std::sqrt(p.gamma) * sigma_minus()});
}

// ----- Bloch coefficients -----

struct BlochState {
    double u = 0.0, v = 0.0, w = 0.0, x = 0.0;
};

inline BlochState bloch_decompose(const Operator& m) {
    if (m.rows() != 2 || m.cols() != 2)
        throw std::invalid_argument("bloch_decompose: expected a 2x2 operator");
    if (opalg::max_asymmetry(m) > 1e-12)
        throw std::invalid_argument("bloch_decompose: operator is not Hermitian");
    BlochState b;
    b.u = 0.5 * (m(0, 1) + m(1, 0)).real();
    b.v = 0.5 * (m(1, 0) - m(0, 1)).imag();
    b.w = 0.5 * (m(0, 0) - m(1, 1)).real();
    b.x = 0.5 * (m(0, 0) + m(1, 1)).real();
    return b;
}

inline Operator bloch_compose(const BlochState& b) {
    Operator m(2, 2);
    m(0, 0) = Complex(b.x + b.w, 0);
    m(0, 1) = Complex(b.u, -b.v);
    m(1, 0) = Complex(b.u, b.v);
    m(1, 1) = Complex(b.x - b.w, 0);
    return m;
}

// ----- damped-oscillation kernels -----

struct DampedKernels {
    double c = 1.0;  // cos(omega tau), continued as cosh in the overdamped regime
    double s = 0.0;  // sin(omega tau)/omega, continued as sinh(|omega| tau)/|omega|
};

// Both kernels are entire functions of omega^2, so the trig and hyperbolic
// branches meet smoothly; near the seam (|omega| tau < 1e-4) a short Taylor
// series in (omega tau)^2 avoids the 0/0 in s.
inline DampedKernels damped_kernels(double tau, const TwoLevelParams& p) {
    const double disc = p.V * p.V - 0.25 * p.gamma * p.gamma;  // omega^2, signed
    const double mag = std::sqrt(std::abs(disc));
    DampedKernels k;
    if (mag * tau < 1e-4) {
        const double xi = disc * tau * tau;
        k.c = 1.0 - xi / 2.0 + xi * xi / 24.0 - xi * xi * xi / 720.0;
        k.s = tau * (1.0 - xi / 6.0 + xi * xi / 120.0 - xi * xi * xi / 5040.0);
    } else if (disc > 0.0) {
        k.c = std::cos(mag * tau);
        k.s = std::sin(mag * tau) / mag;
    } else {
        k.c = std::cosh(mag * tau);
        k.s = std::sinh(mag * tau) / mag;
    }
    return k;
}

// ----- closed-form backward evolution -----

// Exact solution of the backward system for arbitrary initial coefficients.
inline BlochState analytic_bloch(const BlochState& b0, double tau, const TwoLevelParams& p) {
    if (tau < 0.0)
        throw std::invalid_argument("analytic_bloch: tau must be non-negative");
    if (p.V == 0.0 && p.gamma == 0.0)
        throw std::domain_error("analytic_bloch: V and gamma cannot both vanish");
    const double g = p.gamma;
    const double V = p.V;
    const auto [c, s] = damped_kernels(tau, p);
    const double decay = std::exp(-g * tau);
    const double damp = std::exp(-1.5 * g * tau);
    const double denom = 2.0 * g * g + V * V;

    BlochState b;
    b.u = b0.u * decay;
    b.v = damp * (b0.v * (c + 0.5 * g * s) + b0.w * V * s);
    b.w = damp * (-b0.v * V * s + b0.w * (c - 0.5 * g * s));
    // x relaxes to a constant plus a damped oscillation; grouped so tau = 0
    // cancels exactly.
    const double drive_term = V * b0.v - g * b0.w;
    const double steady_shift = 2.0 * g * drive_term / denom;
    const double osc = 0.5 * ((g * g + 2.0 * V * V) * b0.w + 3.0 * g * V * b0.v) * s + drive_term * c;
    b.x = b0.x + steady_shift - damp * (2.0 * g * osc / denom);
    return b;
}

// ----- detection events -----

enum class DetectionEvent { excited, ground, plus_superposition, sigma2_superposition };

inline const char* detection_name(DetectionEvent e) {
    switch (e) {
        case DetectionEvent::excited: return "excited";
        case DetectionEvent::ground: return "ground";
        case DetectionEvent::plus_superposition: return "plus_superposition";
        case DetectionEvent::sigma2_superposition: return "sigma2_superposition";
    }
    throw std::invalid_argument("detection_name: unknown event");
}

inline DetectionEvent detection_event_from(const std::string& name) {
    if (name == "excited") return DetectionEvent::excited;
    if (name == "ground") return DetectionEvent::ground;
    if (name == "plus_superposition") return DetectionEvent::plus_superposition;
    if (name == "sigma2_superposition") return DetectionEvent::sigma2_superposition;
    throw std::invalid_argument("detection_event_from: unknown event '" + name + "'");
}

// Coefficients of the detected projector (all have x = 1/2, trace 1).
inline BlochState detection_initial(DetectionEvent e) {
    switch (e) {
        case DetectionEvent::excited: return {0.0, 0.0, 0.5, 0.5};
        case DetectionEvent::ground: return {0.0, 0.0, -0.5, 0.5};
        case DetectionEvent::plus_superposition: return {0.5, 0.0, 0.0, 0.5};
        case DetectionEvent::sigma2_superposition: return {0.0, 0.5, 0.0, 0.5};
    }
    throw std::invalid_argument("detection_initial: unknown event");
}

inline Operator detection_operator(DetectionEvent e) {
    return bloch_compose(detection_initial(e));
}

// Retrodictive state a premeasurement time tau before the detection: the
// backward-evolved projector normalised by its trace 2x(tau).
inline Operator detection(DetectionEvent e, double tau, const TwoLevelParams& p) {
    const BlochState b = analytic_bloch(detection_initial(e), tau, p);
    if (!(b.x > 0.0))
        throw std::runtime_error(std::string("detection('") + detection_name(e) +
                                 "'): backward trace collapsed to zero");
    return bloch_compose(b) / (2.0 * b.x);
}

// ----- direct matrix-element formulas -----

// Matrix elements of the retrodicted state for specific detection events,
// written out directly rather than composed from analytic_bloch.  They share
// only the primitive kernels; the algebra is independent, which makes them a
// second oracle for cross-checks.

struct DetectionElements {
    Complex upper_offdiag = 0.0;      // <e| rho |g>
    double upper_population = 0.0;    // <e| rho |e>
};

// Excited detection: the coherent dip and the population revival.
inline DetectionElements excited_detection_elements(double tau, const TwoLevelParams& p) {
    if (tau < 0.0)
        throw std::invalid_argument("excited_detection_elements: tau must be non-negative");
    if (p.V == 0.0 && p.gamma == 0.0)
        throw std::domain_error("excited_detection_elements: V and gamma cannot both vanish");
    const double g = p.gamma;
    const double V = p.V;
    const double w0 = 0.5;
    const auto [c, s] = damped_kernels(tau, p);
    const double damp = std::exp(-1.5 * g * tau);
    const double denom = 2.0 * g * g + V * V;
    const double x = (w0 / denom) * (V * V - 2.0 * g * damp * (0.5 * (g * g + 2.0 * V * V) * s - g * c));
    if (!(x > 0.0))
        throw std::runtime_error("excited_detection_elements: backward trace collapsed to zero");
    DetectionElements out;
    out.upper_offdiag = Complex(0, -1) * (V * w0 / (2.0 * x)) * damp * s;
    out.upper_population =
        (w0 / (2.0 * x * denom)) *
        (V * V + damp * ((V * V + 4.0 * g * g) * c - 0.5 * g * (5.0 * V * V + 4.0 * g * g) * s));
    return out;
}

// Plus-superposition detection: the coherence decays bare-exponentially and
// the populations never move.
inline DetectionElements plus_detection_elements(double tau, double gamma) {
    if (tau < 0.0)
        throw std::invalid_argument("plus_detection_elements: tau must be non-negative");
    DetectionElements out;
    out.upper_offdiag = Complex(0.5 * std::exp(-gamma * tau), 0.0);
    out.upper_population = 0.5;
    return out;
}

// ----- preparation probabilities -----

// P(i | detected state): the retrodictive conditional of each preparation
// event against the supplied retrodicted state, in device label order.
inline std::vector<std::pair<std::string, double>> preparation_probabilities(
    const Operator& rho_retr, const devices::DeviceSet& prep) {
    std::vector<std::pair<std::string, double>> out;
    out.reserve(prep.labels.size());
    for (const auto& label : prep.labels)
        out.emplace_back(label, probcalc::retrodictive_conditional(prep, label, rho_retr));
    return out;
}

}  // namespace qretro::tla
