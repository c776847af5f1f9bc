// output.hpp — CSV and plot-script writers.  All numbers are printed with
// %.17g so identical inputs produce byte-identical files.
#pragma once

#include <qretro/lindblad.hpp>
#include <qretro/probcalc.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace qretro::shell {

std::string format_double(double v);

// One row per grid point: time (or tau for backward runs), then re_ab, im_ab
// for every matrix entry in row-major order.  With `bloch_columns` the
// coefficients u, v, w, x of sigma1, sigma2, sigma3 and the identity are
// appended (two-level scenarios only).
void write_trajectory_csv(const std::filesystem::path& file, const lindblad::Trajectory& traj,
                          bool bloch_columns);

// Grid-valued probability columns: header `axis,P(l0),P(l1),...`, one row per
// grid point.  columns[i][k] is the value of label i at grid point k.
void write_probability_csv(const std::filesystem::path& file, const std::string& axis,
                           const std::vector<double>& grid, const std::vector<std::string>& labels,
                           const std::vector<std::vector<double>>& columns);

// Joint outcome probabilities: header row of measurement labels, one row per
// preparation label.
void write_outcome_table_csv(const std::filesystem::path& file,
                             const probcalc::OutcomeTable& table);

struct PlotBlock {
    std::string csv;     // data file, relative to the script
    std::string axis;    // x-axis label
    std::string output;  // image file the block renders
    std::vector<std::pair<int, std::string>> series;  // 1-based column, legend
};

void write_plot_script(const std::filesystem::path& file, const std::string& title,
                       const std::vector<PlotBlock>& blocks);

}  // namespace qretro::shell
