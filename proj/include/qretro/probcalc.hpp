// probcalc.hpp — joint, marginal and conditional outcome probabilities over a
// preparation device and a measurement device.  Everything here is a ratio of
// operator traces; no dynamics.  Time evolution enters only through operators
// the caller has already evolved.
#pragma once

#include <qretro/devices.hpp>
#include <qretro/opalg.hpp>

#include <string>
#include <vector>

namespace qretro::probcalc {

namespace detail {

// Probabilities are trace ratios of Hermitian non-negative operators, so any
// imaginary part is a bug upstream; assert rather than clamp.
inline double real_probability(Complex value, const std::string& who) {
    if (std::abs(value.imag()) > 1e-12)
        throw std::runtime_error(who + ": probability has imaginary part " +
                                 std::to_string(value.imag()));
    return value.real();
}

inline double checked_denominator(Complex value, const std::string& who, const std::string& what) {
    const double re = value.real();
    if (std::abs(re) <= 1e-14)
        throw std::domain_error(who + ": " + what);
    return re;
}

inline const std::vector<Operator>& pick_ops(const devices::DeviceSet& set,
                                             const std::vector<Operator>* evolved,
                                             const std::string& who) {
    if (!evolved) return set.ops;
    if (evolved->size() != set.ops.size())
        throw std::invalid_argument(who + ": evolved operator count " +
                                    std::to_string(evolved->size()) + " does not match device (" +
                                    std::to_string(set.ops.size()) + ")");
    return *evolved;
}

}  // namespace detail

// ----- joint outcomes -----

struct OutcomeTable {
    std::vector<std::string> prep_labels;
    std::vector<std::string> meas_labels;
    Eigen::MatrixXd joint;          // P(i,j), rows by preparation, cols by outcome
    Eigen::VectorXd prep_marginal;  // P(i)
    Eigen::VectorXd meas_marginal;  // P(j)
};

// P(i,j) = tr(prep_i * meas_j) / tr(prep_total * meas_total).  The marginals
// are computed from their own trace formulas, not by summing the table, so
// tests can cross-check the two routes.
inline OutcomeTable joint_table(const devices::DeviceSet& prep, const devices::DeviceSet& meas) {
    if (prep.dim() != meas.dim())
        throw std::invalid_argument("joint_table: device dimensions differ");
    const Complex denom_c = (prep.total * meas.total).trace();
    const double denom = detail::checked_denominator(
        denom_c, "joint_table", "devices never coincide (tr of total product vanishes)");

    OutcomeTable table;
    table.prep_labels = prep.labels;
    table.meas_labels = meas.labels;
    const auto ni = static_cast<Eigen::Index>(prep.ops.size());
    const auto nj = static_cast<Eigen::Index>(meas.ops.size());
    table.joint.resize(ni, nj);
    table.prep_marginal.resize(ni);
    table.meas_marginal.resize(nj);
    for (Eigen::Index i = 0; i < ni; ++i)
        for (Eigen::Index j = 0; j < nj; ++j)
            table.joint(i, j) = detail::real_probability(
                (prep.ops[static_cast<std::size_t>(i)] * meas.ops[static_cast<std::size_t>(j)]).trace() / denom,
                "joint_table");
    for (Eigen::Index i = 0; i < ni; ++i)
        table.prep_marginal(i) = detail::real_probability(
            (prep.ops[static_cast<std::size_t>(i)] * meas.total).trace() / denom, "joint_table");
    for (Eigen::Index j = 0; j < nj; ++j)
        table.meas_marginal(j) = detail::real_probability(
            (prep.total * meas.ops[static_cast<std::size_t>(j)]).trace() / denom, "joint_table");
    return table;
}

// ----- predictive conditionals -----

// P(j|i): probability of recorded outcome j given preparation event i.  When
// `evolved_meas_ops` is supplied (measurement operators carried back to the
// preparation time), the same ratios are evaluated on the evolved set.
inline double predictive_conditional(const devices::DeviceSet& prep, const std::string& i,
                                     const devices::DeviceSet& meas, const std::string& j,
                                     const std::vector<Operator>* evolved_meas_ops = nullptr) {
    const auto& gamma_ops = detail::pick_ops(meas, evolved_meas_ops, "predictive_conditional");
    const Operator& lam = prep.ops[prep.index_of(i)];
    Operator gamma_total = Operator::Zero(meas.dim(), meas.dim());
    for (const auto& g : gamma_ops) gamma_total += g;
    const double denom = detail::checked_denominator(
        (lam * gamma_total).trace(), "predictive_conditional",
        "preparation '" + i + "' never produces a recorded outcome");
    return detail::real_probability((lam * gamma_ops[meas.index_of(j)]).trace() / denom,
                                    "predictive_conditional");
}

// ----- retrodictive conditionals -----

// P(i|j): probability that preparation event i occurred given that outcome j
// was recorded.  Ratio of tr(prep_i * gamma_j) to tr(prep_total * gamma_j);
// any common rescaling of gamma_j cancels, so callers may pass either the raw
// backward-evolved measurement operator or its normalised retrodictive state.
inline double retrodictive_conditional(const devices::DeviceSet& prep, const std::string& i,
                                       const Operator& gamma_j) {
    if (prep.dim() != gamma_j.rows())
        throw std::invalid_argument("retrodictive_conditional: dimension mismatch");
    const double denom = detail::checked_denominator(
        (prep.total * gamma_j).trace(), "retrodictive_conditional",
        "measurement outcome impossible under this preparation device");
    return detail::real_probability((prep.ops[prep.index_of(i)] * gamma_j).trace() / denom,
                                    "retrodictive_conditional");
}

inline double retrodictive_conditional(const devices::DeviceSet& prep,
                                       const devices::DeviceSet& meas, const std::string& j,
                                       const std::string& i) {
    return retrodictive_conditional(prep, i, meas.ops[meas.index_of(j)]);
}

// ----- inference route -----

// The same P(i|j) obtained by inference instead of backward evolution: prior
// weights are the a priori preparation probabilities, likelihoods are the
// predictive overlaps tr(rho_i * meas_j), and the posterior is their
// normalised product.  Likelihoods enter unnormalised — the per-preparation
// factor tr(rho_i * meas_total) would only cancel for unbiased measurement
// devices, and the unnormalised form is exact for all of them.
//
// With `evolved_prep_densities` (unit-trace states carried forward to the
// measurement time) this runs the complementary pipeline to
// retrodictive_conditional: states evolve forward here, measurement operators
// evolve backward there, and the two must agree.
inline double bayes_retrodiction(const devices::DeviceSet& prep, const devices::DeviceSet& meas,
                                 const std::string& j, const std::string& i,
                                 const std::vector<Operator>* evolved_prep_densities = nullptr) {
    if (prep.dim() != meas.dim())
        throw std::invalid_argument("bayes_retrodiction: device dimensions differ");
    if (evolved_prep_densities && evolved_prep_densities->size() != prep.ops.size())
        throw std::invalid_argument("bayes_retrodiction: evolved density count does not match device");

    const Operator& gamma_j = meas.ops[meas.index_of(j)];
    const std::size_t target = prep.index_of(i);
    double numerator = 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < prep.ops.size(); ++k) {
        const double prior = devices::a_priori_probability(prep, prep.labels[k]);
        if (prior <= 0.0) continue;  // zero-probability events cannot contribute
        const Operator rho = evolved_prep_densities ? (*evolved_prep_densities)[k]
                                                    : Operator(prep.ops[k] / prior);
        const double likelihood =
            detail::real_probability((rho * gamma_j).trace(), "bayes_retrodiction");
        const double weight = prior * likelihood;
        total += weight;
        if (k == target) numerator = weight;
    }
    if (std::abs(total) <= 1e-14)
        throw std::domain_error(
            "bayes_retrodiction: measurement outcome impossible under this preparation device");
    return numerator / total;
}

}  // namespace qretro::probcalc
