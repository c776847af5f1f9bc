// devices.hpp — preparation and measurement device operators: a labelled set of
// non-negative Hermitian operators normalised so the sum has unit trace.  The
// same container describes both device kinds; only the reading differs (each
// preparation operator fixes a premeasurement state and its a priori weight,
// each measurement operator fixes a recorded outcome).
#pragma once

#include <qretro/opalg.hpp>

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qretro::devices {

enum class DeviceKind { preparation, measurement };

struct Tolerances {
    double positivity = 1e-10;   // eigenvalues may dip this far below zero
    double hermiticity = 1e-12;  // max admissible |M_ab - conj(M_ba)|
};

struct DeviceSet {
    DeviceKind kind = DeviceKind::preparation;
    std::vector<std::string> labels;
    std::vector<Operator> ops;    // normalised: trace of the sum is exactly scaled to 1
    Operator total;               // cached sum of ops
    std::vector<std::string> warnings;  // e.g. zero operators (zero-probability events)

    Eigen::Index dim() const { return total.rows(); }

    std::size_t index_of(const std::string& label) const {
        auto it = std::find(labels.begin(), labels.end(), label);
        if (it == labels.end())
            throw std::invalid_argument("DeviceSet: unknown label '" + label + "'");
        return static_cast<std::size_t>(it - labels.begin());
    }
};

// Elements of a probability-operator measure: measurement operators rescaled by
// the common factor of an unbiased device so they sum to the identity.
struct PomSet {
    std::vector<std::string> labels;
    std::vector<Operator> elements;
    double scale = 0.0;  // the factor g removed from each operator
};

namespace detail {
inline const char* kind_name(DeviceKind k) {
    return k == DeviceKind::preparation ? "preparation" : "measurement";
}
}  // namespace detail

// ----- construction -----

// Validates each raw operator (Hermitian and non-negative within tolerance),
// then rescales the whole set by 1/trace(sum).  Zero operators are legal —
// they describe events the device never produces — but are worth flagging.
inline DeviceSet build_device_set(DeviceKind kind,
                                  std::vector<std::string> labels,
                                  std::vector<Operator> raw_ops,
                                  const Tolerances& tol = {}) {
    const std::string who = std::string("build_device_set(") + detail::kind_name(kind) + ")";
    if (raw_ops.empty())
        throw std::invalid_argument(who + ": no operators given");
    if (labels.size() != raw_ops.size())
        throw std::invalid_argument(who + ": " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(raw_ops.size()) + " operators");
    for (std::size_t i = 0; i + 1 < labels.size(); ++i)
        for (std::size_t j = i + 1; j < labels.size(); ++j)
            if (labels[i] == labels[j])
                throw std::invalid_argument(who + ": duplicate label '" + labels[i] + "'");

    DeviceSet set;
    set.kind = kind;
    set.labels = std::move(labels);
    set.ops = std::move(raw_ops);

    const Eigen::Index dim = set.ops.front().rows();
    for (std::size_t i = 0; i < set.ops.size(); ++i) {
        const std::string ctx = who + ", label '" + set.labels[i] + "'";
        opalg::require_square(set.ops[i], ctx);
        opalg::require_finite(set.ops[i], ctx);
        if (set.ops[i].rows() != dim)
            throw std::invalid_argument(ctx + ": dimension " + std::to_string(set.ops[i].rows()) +
                                        " does not match " + std::to_string(dim));
        const auto check = opalg::min_eig_hermitian(set.ops[i], tol.hermiticity);
        if (check.flagged)
            throw std::invalid_argument(ctx + ": not Hermitian (asymmetry " +
                                        std::to_string(check.max_asymmetry) + ")");
        if (check.min_eigenvalue < -tol.positivity)
            throw std::invalid_argument(ctx + ": negative eigenvalue " +
                                        std::to_string(check.min_eigenvalue));
        if (opalg::max_abs(set.ops[i]) == 0.0)
            set.warnings.push_back("label '" + set.labels[i] +
                                   "': zero operator (event has zero probability)");
    }

    Operator total = Operator::Zero(dim, dim);
    for (const auto& op : set.ops) total += op;
    const double total_trace = total.trace().real();
    if (total_trace <= 0.0)
        throw std::invalid_argument(who + ": operator sum has non-positive trace " +
                                    std::to_string(total_trace));

    const double scale = 1.0 / total_trace;
    for (auto& op : set.ops) op *= scale;
    set.total = scale * total;
    return set;
}

// ----- queries -----

// Probability that the device produces event `label`, before any measurement
// information is taken into account: the trace of that event's operator.
inline double a_priori_probability(const DeviceSet& set, const std::string& label) {
    const Complex tr = set.ops[set.index_of(label)].trace();
    if (std::abs(tr.imag()) > 1e-12)
        throw std::runtime_error("a_priori_probability: non-real trace for label '" + label + "'");
    return tr.real();
}

// A device is unbiased when its operator sum is proportional to the identity;
// returns the proportionality factor g when it is.
inline std::optional<double> unbiased_scale(const DeviceSet& set, double tol = 1e-10) {
    const auto g = opalg::identity_proportionality(set.total, tol);
    if (!g) return std::nullopt;
    return g->real();
}

inline bool is_unbiased(const DeviceSet& set, double tol = 1e-10) {
    return unbiased_scale(set, tol).has_value();
}

// Probability-operator measure of an unbiased measurement device: each
// operator divided by the common scale g, so the elements sum to the identity.
inline PomSet pom_elements(const DeviceSet& set, double tol = 1e-10) {
    const auto g = unbiased_scale(set, tol);
    if (!g)
        throw std::domain_error("pom_elements: POM undefined for biased operation");
    PomSet pom;
    pom.labels = set.labels;
    pom.scale = *g;
    pom.elements.reserve(set.ops.size());
    for (const auto& op : set.ops) pom.elements.push_back(op / *g);
    return pom;
}

namespace detail {
inline Operator normalised_density(const Operator& op, const std::string& who) {
    const double tr = op.trace().real();
    if (tr <= 1e-14)
        throw std::domain_error(who + ": operator trace " + std::to_string(tr) +
                                " too small to normalise (zero-probability event)");
    return op / tr;
}
}  // namespace detail

// Unit-trace state assigned to a preparation event: the event operator divided
// by its trace.
inline Operator predictive_density(const DeviceSet& set, const std::string& label) {
    return detail::normalised_density(set.ops[set.index_of(label)],
                                      "predictive_density('" + label + "')");
}

// Unit-trace state assigned retrodictively to a recorded measurement outcome;
// the same normalisation applied to a measurement operator.
inline Operator retrodictive_density(const DeviceSet& set, const std::string& label) {
    return detail::normalised_density(set.ops[set.index_of(label)],
                                      "retrodictive_density('" + label + "')");
}

}  // namespace qretro::devices
