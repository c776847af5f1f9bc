// scenario.hpp — scenario files: which model to integrate, from which devices,
// over what window, and where the results go.  Files are strict JSON: unknown
// keys are errors, not warnings.
#pragma once

#include <qretro/devices.hpp>
#include <qretro/lindblad.hpp>
#include <qretro/tla.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

namespace qretro::shell {

struct Scenario {
    std::string name;
    lindblad::LindbladModel model;
    std::optional<tla::TwoLevelParams> two_level;  // set when the shorthand was used
    std::optional<devices::DeviceSet> preparation;
    std::optional<devices::DeviceSet> measurement;
    std::optional<tla::DetectionEvent> detection;  // measurement-side shorthand
    lindblad::Equation equation = lindblad::Equation::predictive;
    double duration = 0.0;  // laboratory time forward, premeasurement time backward
    std::size_t steps = 0;
    std::string out_directory;  // empty: chosen by the caller
    bool write_csv = true;
    bool write_plot = true;
};

// Parses and fully validates a scenario.  Every operator goes through the same
// validation as direct library use; `origin` names the source in error
// messages and supplies the default scenario name (its stem).
Scenario parse_scenario(const std::string& text, const std::string& origin);
Scenario load_scenario(const std::filesystem::path& file);

// Returns `text` with one numeric field replaced.  The path is dot/bracket
// notation ("two_level.V", "preparation_device.priors[0]"); a path whose first
// segment is not a top-level key is also looked up one level deep when that is
// unambiguous ("V" finds two_level.V).  Throws, before anything runs, if the
// path is missing, ambiguous, or does not address a number.
std::string patch_scenario_field(const std::string& text, const std::string& param, double value,
                                 const std::string& origin);

// The scenario file format, as printed by the `schema` CLI verb.
const std::string& schema_text();

}  // namespace qretro::shell
