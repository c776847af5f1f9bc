#include <qretro/scenario.hpp>

#include <qretro/opalg.hpp>

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qretro::shell {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& context,
                       const std::string& message) {
    throw std::invalid_argument("load_scenario: " + origin + ": " + context + ": " + message);
}

json parse_document(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        const std::size_t stop = std::min(e.byte > 0 ? e.byte - 1 : 0, text.size());
        for (std::size_t k = 0; k < stop; ++k)
            if (text[k] == '\n') ++line;
        throw std::invalid_argument("load_scenario: " + origin + ": JSON parse error near line " +
                                    std::to_string(line) + ": " + e.what());
    }
}

void check_keys(const json& obj, const std::string& origin, const std::string& context,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items())
        if (std::none_of(allowed.begin(), allowed.end(),
                         [&](const char* k) { return item.key() == k; }))
            fail(origin, context, "unknown key '" + item.key() + "'");
}

double number_field(const json& v, const std::string& origin, const std::string& context) {
    if (!v.is_number()) fail(origin, context, "expected a number");
    return v.get<double>();
}

std::string string_field(const json& v, const std::string& origin, const std::string& context) {
    if (!v.is_string() || v.get<std::string>().empty())
        fail(origin, context, "expected a non-empty string");
    return v.get<std::string>();
}

std::size_t steps_field(const json& v, const std::string& origin, const std::string& context) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
        fail(origin, context, "steps must be a positive integer");
    const auto n = v.get<long long>();
    if (n < 1) fail(origin, context, "steps must be a positive integer");
    return static_cast<std::size_t>(n);
}

Complex complex_entry(const json& v, const std::string& origin, const std::string& context) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    fail(origin, context, "expected a number or a [re, im] pair");
}

// Square, row-major, entries either numbers or [re, im] pairs.
Operator matrix_field(const json& v, const std::string& origin, const std::string& context) {
    if (!v.is_array() || v.empty()) fail(origin, context, "expected a non-empty array of rows");
    const std::size_t n = v.size();
    Operator m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
        const json& row = v[r];
        if (!row.is_array() || row.size() != n)
            fail(origin, context,
                 "row " + std::to_string(r) + " must have " + std::to_string(n) +
                     " entries (matrices are square and row-major)");
        for (std::size_t c = 0; c < n; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = complex_entry(
                row[c], origin, context + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
    return m;
}

devices::DeviceSet device_field(const json& v, devices::DeviceKind kind,
                                const std::string& origin, const std::string& context,
                                Eigen::Index dim) {
    if (!v.is_object()) fail(origin, context, "expected an object");
    check_keys(v, origin, context, {"labels", "operators", "states", "priors"});

    const bool has_ops = v.contains("operators");
    const bool has_states = v.contains("states");
    if (has_ops == has_states)
        fail(origin, context, "give exactly one of operators and states+priors");
    if (has_ops && v.contains("priors"))
        fail(origin, context, "priors only accompany states");

    std::vector<Operator> ops;
    if (has_ops) {
        const json& arr = v["operators"];
        if (!arr.is_array() || arr.empty())
            fail(origin, context + ".operators", "expected a non-empty array of matrices");
        for (std::size_t k = 0; k < arr.size(); ++k)
            ops.push_back(
                matrix_field(arr[k], origin, context + ".operators[" + std::to_string(k) + "]"));
    } else {
        if (!v.contains("priors"))
            fail(origin, context, "states need a matching priors array");
        const json& st = v["states"];
        const json& pr = v["priors"];
        if (!st.is_array() || st.empty())
            fail(origin, context + ".states", "expected a non-empty array of matrices");
        if (!pr.is_array() || pr.size() != st.size())
            fail(origin, context + ".priors",
                 "expected one prior per state (" + std::to_string(st.size()) + " states)");
        double sum = 0.0;
        std::vector<double> priors;
        for (std::size_t k = 0; k < pr.size(); ++k) {
            const double p =
                number_field(pr[k], origin, context + ".priors[" + std::to_string(k) + "]");
            if (p < 0.0)
                fail(origin, context + ".priors[" + std::to_string(k) + "]",
                     "priors cannot be negative");
            priors.push_back(p);
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            fail(origin, context + ".priors",
                 "priors must sum to 1 (got " + std::to_string(sum) + ")");
        for (std::size_t k = 0; k < st.size(); ++k) {
            const std::string where = context + ".states[" + std::to_string(k) + "]";
            const Operator rho = matrix_field(st[k], origin, where);
            const double tr = rho.trace().real();
            if (!(tr > 1e-14)) fail(origin, where, "state has non-positive trace");
            ops.push_back(priors[k] / tr * rho);
        }
    }

    for (std::size_t k = 0; k < ops.size(); ++k)
        if (ops[k].rows() != dim)
            fail(origin, context,
                 "operator " + std::to_string(k) + " has dimension " +
                     std::to_string(ops[k].rows()) + ", the model has dimension " +
                     std::to_string(dim));

    std::vector<std::string> labels;
    if (v.contains("labels")) {
        const json& la = v["labels"];
        if (!la.is_array() || la.size() != ops.size())
            fail(origin, context + ".labels",
                 "expected one label per operator (" + std::to_string(ops.size()) + " operators)");
        for (std::size_t k = 0; k < la.size(); ++k)
            labels.push_back(
                string_field(la[k], origin, context + ".labels[" + std::to_string(k) + "]"));
    } else {
        const char prefix = kind == devices::DeviceKind::preparation ? 'p' : 'm';
        for (std::size_t k = 0; k < ops.size(); ++k)
            labels.push_back(prefix + std::to_string(k));
    }

    try {
        return devices::build_device_set(kind, std::move(labels), std::move(ops));
    } catch (const std::exception& e) {
        fail(origin, context, e.what());
    }
}

const char* equation_name(lindblad::Equation e) {
    switch (e) {
        case lindblad::Equation::predictive: return "predictive";
        case lindblad::Equation::backward_mdo: return "backward_mdo";
        default: return "retrodictive";
    }
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
    const json doc = parse_document(text, origin);
    if (!doc.is_object()) fail(origin, "top level", "expected a JSON object");
    check_keys(doc, origin, "top level",
               {"name", "model", "two_level", "preparation_device", "measurement_device",
                "detection", "evolution", "outputs"});

    Scenario sc;
    sc.name = doc.contains("name") ? string_field(doc["name"], origin, "name")
                                   : std::filesystem::path(origin).stem().string();

    // ----- model -----
    const bool has_model = doc.contains("model");
    const bool has_two_level = doc.contains("two_level");
    if (has_model == has_two_level)
        fail(origin, "top level", "give exactly one of model and two_level");
    if (has_two_level) {
        const json& tl = doc["two_level"];
        if (!tl.is_object()) fail(origin, "two_level", "expected an object");
        check_keys(tl, origin, "two_level", {"V", "gamma"});
        if (!tl.contains("V") || !tl.contains("gamma"))
            fail(origin, "two_level", "needs both V and gamma");
        try {
            sc.two_level = tla::two_level_params(number_field(tl["V"], origin, "two_level.V"),
                                                 number_field(tl["gamma"], origin, "two_level.gamma"));
        } catch (const std::exception& e) {
            fail(origin, "two_level", e.what());
        }
        sc.model = tla::tla_model(*sc.two_level);
    } else {
        const json& mo = doc["model"];
        if (!mo.is_object()) fail(origin, "model", "expected an object");
        check_keys(mo, origin, "model", {"dimension", "hamiltonian", "jump_operators"});
        if (!mo.contains("dimension")) fail(origin, "model", "missing dimension");
        const Eigen::Index dim = static_cast<Eigen::Index>(
            steps_field(mo["dimension"], origin, "model.dimension"));
        if (!mo.contains("hamiltonian")) fail(origin, "model", "missing hamiltonian");
        Operator h = matrix_field(mo["hamiltonian"], origin, "model.hamiltonian");
        if (h.rows() != dim)
            fail(origin, "model.hamiltonian",
                 "matrix has dimension " + std::to_string(h.rows()) + ", dimension says " +
                     std::to_string(dim));
        if (opalg::max_asymmetry(h) > 1e-12)
            fail(origin, "model.hamiltonian", "matrix is not Hermitian");
        std::vector<Operator> jumps;
        if (mo.contains("jump_operators")) {
            const json& ja = mo["jump_operators"];
            if (!ja.is_array()) fail(origin, "model.jump_operators", "expected an array");
            for (std::size_t q = 0; q < ja.size(); ++q) {
                const std::string where = "model.jump_operators[" + std::to_string(q) + "]";
                Operator a = matrix_field(ja[q], origin, where);
                if (a.rows() != dim)
                    fail(origin, where,
                         "matrix has dimension " + std::to_string(a.rows()) +
                             ", the model has dimension " + std::to_string(dim));
                jumps.push_back(std::move(a));
            }
        }
        sc.model = lindblad::make_model(std::move(h), std::move(jumps));
    }
    const Eigen::Index dim = sc.model.hamiltonian.rows();

    // ----- devices -----
    if (doc.contains("preparation_device"))
        sc.preparation = device_field(doc["preparation_device"], devices::DeviceKind::preparation,
                                      origin, "preparation_device", dim);
    if (doc.contains("measurement_device"))
        sc.measurement = device_field(doc["measurement_device"], devices::DeviceKind::measurement,
                                      origin, "measurement_device", dim);

    if (doc.contains("detection")) {
        const std::string event = string_field(doc["detection"], origin, "detection");
        if (!sc.two_level)
            fail(origin, "detection", "detection shorthand requires the two_level model");
        if (sc.measurement)
            fail(origin, "detection", "give either detection or measurement_device, not both");
        try {
            sc.detection = tla::detection_event_from(event);
        } catch (const std::exception& e) {
            fail(origin, "detection", e.what());
        }
    }

    // ----- evolution window -----
    if (!doc.contains("evolution")) fail(origin, "top level", "missing evolution");
    const json& ev = doc["evolution"];
    if (!ev.is_object()) fail(origin, "evolution", "expected an object");
    check_keys(ev, origin, "evolution", {"t_end", "tau_end", "steps", "equation"});
    const bool has_t = ev.contains("t_end");
    const bool has_tau = ev.contains("tau_end");
    if (has_t == has_tau) fail(origin, "evolution", "give exactly one of t_end and tau_end");
    sc.duration = number_field(has_t ? ev["t_end"] : ev["tau_end"], origin,
                               has_t ? "evolution.t_end" : "evolution.tau_end");
    if (!(sc.duration > 0.0))
        fail(origin, "evolution", std::string(has_t ? "t_end" : "tau_end") + " must be positive");
    if (!ev.contains("steps")) fail(origin, "evolution", "missing steps");
    sc.steps = steps_field(ev["steps"], origin, "evolution.steps");

    if (ev.contains("equation")) {
        const std::string eq = string_field(ev["equation"], origin, "evolution.equation");
        if (eq == "predictive")
            sc.equation = lindblad::Equation::predictive;
        else if (eq == "backward_mdo")
            sc.equation = lindblad::Equation::backward_mdo;
        else if (eq == "retrodictive")
            sc.equation = lindblad::Equation::retrodictive_nonlinear;
        else
            fail(origin, "evolution.equation",
                 "unknown equation '" + eq + "' (expected predictive, backward_mdo or retrodictive)");
    } else {
        // t_end names laboratory time, tau_end premeasurement time
        sc.equation = has_t ? lindblad::Equation::predictive
                            : lindblad::Equation::retrodictive_nonlinear;
    }
    if (sc.equation == lindblad::Equation::predictive && !has_t)
        fail(origin, "evolution", "equation 'predictive' runs in laboratory time; give t_end");
    if (sc.equation != lindblad::Equation::predictive && !has_tau)
        fail(origin, "evolution",
             std::string("equation '") + equation_name(sc.equation) +
                 "' runs in premeasurement time; give tau_end");

    // ----- outputs -----
    if (doc.contains("outputs")) {
        const json& ou = doc["outputs"];
        if (!ou.is_object()) fail(origin, "outputs", "expected an object");
        check_keys(ou, origin, "outputs", {"directory", "formats"});
        if (ou.contains("directory"))
            sc.out_directory = string_field(ou["directory"], origin, "outputs.directory");
        if (ou.contains("formats")) {
            const json& fo = ou["formats"];
            if (!fo.is_array() || fo.empty())
                fail(origin, "outputs.formats", "expected a non-empty array");
            sc.write_csv = false;
            sc.write_plot = false;
            for (std::size_t k = 0; k < fo.size(); ++k) {
                const std::string f =
                    string_field(fo[k], origin, "outputs.formats[" + std::to_string(k) + "]");
                if (f == "csv")
                    sc.write_csv = true;
                else if (f == "plot")
                    sc.write_plot = true;
                else
                    fail(origin, "outputs.formats", "unknown format '" + f + "' (csv, plot)");
            }
        }
    }

    // ----- cross-field consistency -----
    if (sc.equation == lindblad::Equation::predictive) {
        if (!sc.preparation)
            fail(origin, "top level", "predictive runs need a preparation_device");
        if (sc.detection)
            fail(origin, "detection",
                 "detection names a measurement outcome; it cannot drive a predictive run");
    } else if (!sc.measurement && !sc.detection) {
        fail(origin, "top level", "backward runs need a measurement_device or a detection event");
    }
    return sc;
}

Scenario load_scenario(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in)
        throw std::invalid_argument("load_scenario: cannot read '" + file.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str(), file.string());
}

// ----- sweep support -----

namespace {

struct PathStep {
    std::string key;
    std::vector<std::size_t> indices;
};

std::vector<PathStep> parse_param_path(const std::string& param) {
    const auto bad = [&]() -> void {
        throw std::invalid_argument("sweep: invalid path expression '" + param + "'");
    };
    std::vector<PathStep> steps;
    std::size_t pos = 0;
    while (pos < param.size()) {
        PathStep step;
        while (pos < param.size() && param[pos] != '.' && param[pos] != '[')
            step.key += param[pos++];
        if (step.key.empty()) bad();
        while (pos < param.size() && param[pos] == '[') {
            ++pos;
            std::size_t idx = 0;
            bool any = false;
            while (pos < param.size() && std::isdigit(static_cast<unsigned char>(param[pos]))) {
                idx = idx * 10 + static_cast<std::size_t>(param[pos] - '0');
                ++pos;
                any = true;
            }
            if (!any || pos >= param.size() || param[pos] != ']') bad();
            ++pos;
            step.indices.push_back(idx);
        }
        steps.push_back(std::move(step));
        if (pos < param.size()) {
            if (param[pos] != '.') bad();
            ++pos;
            if (pos == param.size()) bad();
        }
    }
    if (steps.empty()) bad();
    return steps;
}

json* descend(json* node, const PathStep& step, const std::string& param) {
    if (!node->is_object() || !node->contains(step.key))
        throw std::invalid_argument("sweep: parameter '" + param + "' not found in scenario");
    node = &(*node)[step.key];
    for (std::size_t idx : step.indices) {
        if (!node->is_array() || idx >= node->size())
            throw std::invalid_argument("sweep: parameter '" + param + "' indexes past the end");
        node = &(*node)[idx];
    }
    return node;
}

}  // namespace

std::string patch_scenario_field(const std::string& text, const std::string& param, double value,
                                 const std::string& origin) {
    json doc = parse_document(text, origin);
    if (!doc.is_object())
        throw std::invalid_argument("load_scenario: " + origin + ": top level: expected a JSON object");
    const auto steps = parse_param_path(param);

    json* node = nullptr;
    if (doc.contains(steps.front().key)) {
        node = &doc;
    } else {
        // a bare field is also found one level deep when unique ("V" -> two_level.V)
        std::vector<std::string> hits;
        json* host = nullptr;
        for (auto& item : doc.items())
            if (item.value().is_object() && item.value().contains(steps.front().key)) {
                host = &item.value();
                hits.push_back(item.key());
            }
        if (hits.empty())
            throw std::invalid_argument("sweep: parameter '" + param + "' not found in scenario");
        if (hits.size() > 1)
            throw std::invalid_argument("sweep: parameter '" + param + "' is ambiguous (under '" +
                                        hits[0] + "' and '" + hits[1] + "')");
        node = host;
    }
    for (const auto& step : steps) node = descend(node, step, param);
    if (!node->is_number())
        throw std::invalid_argument("sweep: parameter '" + param +
                                    "' does not address a numeric scalar");
    // keep integers integral when the swept value allows it (steps, dimension)
    if ((node->is_number_integer() || node->is_number_unsigned()) &&
        value == std::floor(value) && std::abs(value) < 9e15)
        *node = static_cast<long long>(value);
    else
        *node = value;
    return doc.dump(2) + "\n";
}

const std::string& schema_text() {
    static const std::string text = R"(Scenario files — strict JSON; any unrecognised key is an error.

Top-level keys
  name                 optional string; defaults to the file stem.
  two_level | model    exactly one of the two.
    two_level          {"V": <number>, "gamma": <number>} — resonantly driven
                       two-level emitter with decay rate gamma.  Basis: index 0
                       is the upper state, index 1 the lower state.
    model              {"dimension": <int>, "hamiltonian": <matrix>,
                       "jump_operators": [<matrix>, ...]} — jump_operators is
                       optional (closed system when absent).  Decay rates ride
                       inside the jump operators: A = sqrt(rate) * a.
  preparation_device   optional device spec (below).  Required for predictive
                       runs; backward runs use it for preparation-probability
                       tables and the inference cross-check.
  measurement_device   optional device spec.  Backward runs need this or
                       "detection".
  detection            optional event name — a measurement-side shorthand for
                       two_level scenarios: "excited", "ground",
                       "plus_superposition" or "sigma2_superposition".
                       Mutually exclusive with measurement_device.
  evolution            required: {"t_end" | "tau_end": <number>,
                       "steps": <int>, "equation": <optional string>}.
                       Equations:
                         predictive    state evolution forward in laboratory
                                       time (needs t_end)
                         backward_mdo  raw measurement operators carried to
                                       earlier times (needs tau_end)
                         retrodictive  unit-trace retrodicted state against
                                       premeasurement time tau (needs tau_end)
                       When equation is absent it is inferred: t_end means
                       predictive, tau_end means retrodictive.
  outputs              optional: {"directory": <string>,
                       "formats": ["csv", "plot"]}.  formats is a non-empty
                       subset of csv/plot (both by default); --out on the
                       command line overrides directory.

Numbers and matrices
  Complex entries are written [re, im]; a bare number is a real entry.
  Matrices are square, row-major arrays of such entries.

Device specs
  Either  {"labels": [...], "operators": [<matrix>, ...]}
  or      {"labels": [...], "states": [<matrix>, ...], "priors": [<number>, ...]}.
  labels is optional (defaults p0, p1, ... or m0, m1, ...).  Operators must be
  Hermitian and non-negative; the whole set is rescaled so the trace of its sum
  is 1.  In the states form each state is normalised to unit trace and weighted
  by its prior; priors must sum to 1.

Example
{
  "name": "plus_detection",
  "two_level": {"V": 2.0, "gamma": 1.0},
  "detection": "plus_superposition",
  "preparation_device": {
    "labels": ["plus", "minus"],
    "states": [
      [[0.5, 0.5], [0.5, 0.5]],
      [[0.5, -0.5], [-0.5, 0.5]]
    ],
    "priors": [0.5, 0.5]
  },
  "evolution": {"tau_end": 5.0, "steps": 5000}
}

Outputs written by `run`
  trajectory_<label>.csv                 one row per grid point: time (or tau),
                                         then re_ab, im_ab for every matrix
                                         entry in row-major order.  two_level
                                         scenarios append u, v, w, x — the
                                         coefficients of sigma1, sigma2, sigma3
                                         and the identity.
  preparation_probabilities_<label>.csv  tau, then one P(<prep label>) column
                                         per preparation event — written when a
                                         backward run has a preparation_device.
  joint_table.csv                        P(preparation, outcome) at the far end
                                         of the window — written when both
                                         devices are present.
  plot.gp                                gnuplot script rendering the CSVs.

Exit codes: 0 success, 1 failed checks or a failed computation, 2 usage or
scenario errors.
)";
    return text;
}

}  // namespace qretro::shell
