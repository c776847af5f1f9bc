// opalg.hpp — dense complex operator algebra: adjoints, commutators, traces,
// Hermiticity / positivity diagnostics shared by every other module.
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>

namespace qretro {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;

namespace opalg {

// ----- validation helpers -----

inline void require_square(const Operator& m, const std::string& who) {
    if (m.rows() == 0 || m.rows() != m.cols())
        throw std::invalid_argument(who + ": operator must be square and non-empty, got " +
                                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

inline void require_finite(const Operator& m, const std::string& who) {
    if (!m.allFinite())
        throw std::invalid_argument(who + ": operator contains NaN or Inf entries");
}

inline void require_same_dim(const Operator& a, const Operator& b, const std::string& who) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(who + ": dimension mismatch, " +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

// ----- elementary operations -----

inline Operator adjoint(const Operator& m) {
    require_square(m, "adjoint");
    return m.adjoint();
}

inline Operator commutator(const Operator& a, const Operator& b) {
    require_square(a, "commutator");
    require_same_dim(a, b, "commutator");
    return a * b - b * a;
}

inline Complex trace(const Operator& m) {
    require_square(m, "trace");
    return m.trace();
}

inline Operator identity(Eigen::Index dim) {
    return Operator::Identity(dim, dim);
}

// Largest absolute entry; the max-norm used for operator comparisons throughout.
inline double max_abs(const Operator& m) {
    return m.cwiseAbs().maxCoeff();
}

// Largest deviation from Hermitian symmetry, max_{ab} |M_ab - conj(M_ba)|.
inline double max_asymmetry(const Operator& m) {
    require_square(m, "max_asymmetry");
    return max_abs(m - m.adjoint().eval());
}

// ----- Hermiticity / positivity diagnostic -----

struct HermitianCheck {
    double max_asymmetry = 0.0;   // max |M_ab - conj(M_ba)|
    double min_eigenvalue = 0.0;  // smallest eigenvalue of the Hermitian part
    bool flagged = false;         // asymmetry exceeded the caller's tolerance
};

// Exact dense eigensolve of the Hermitian part (M + M^dag)/2; the asymmetry is
// reported rather than silently discarded so callers can decide severity.
inline HermitianCheck min_eig_hermitian(const Operator& m, double hermiticity_tol) {
    require_square(m, "min_eig_hermitian");
    require_finite(m, "min_eig_hermitian");
    HermitianCheck out;
    out.max_asymmetry = max_asymmetry(m);
    out.flagged = out.max_asymmetry > hermiticity_tol;
    const Operator herm = 0.5 * (m + m.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<Operator> solver(herm, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("min_eig_hermitian: eigensolver failed to converge");
    out.min_eigenvalue = solver.eigenvalues()(0);
    return out;
}

// ----- identity proportionality -----

// If M = g * identity within tol (max-norm), returns g = trace(M)/dim.
inline std::optional<Complex> identity_proportionality(const Operator& m, double tol) {
    require_square(m, "identity_proportionality");
    require_finite(m, "identity_proportionality");
    const Complex g = m.trace() / static_cast<double>(m.rows());
    const Operator residual = m - g * Operator::Identity(m.rows(), m.cols());
    if (max_abs(residual) > tol) return std::nullopt;
    return g;
}

}  // namespace opalg
}  // namespace qretro
