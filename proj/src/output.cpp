#include <qretro/output.hpp>

#include <qretro/tla.hpp>

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace qretro::shell {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_output(const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out)
        throw std::runtime_error("output: cannot open '" + file.string() + "' for writing");
    return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& file) {
    out.flush();
    if (!out) throw std::runtime_error("output: write to '" + file.string() + "' failed");
}

}  // namespace

void write_trajectory_csv(const std::filesystem::path& file, const lindblad::Trajectory& traj,
                          bool bloch_columns) {
    if (traj.states.empty())
        throw std::invalid_argument("write_trajectory_csv: empty trajectory");
    auto out = open_output(file);
    const Eigen::Index dim = traj.states.front().rows();
    const bool backward = traj.window.direction == lindblad::Direction::retrodictive_backward;

    out << (backward ? "tau" : "time");
    for (Eigen::Index a = 0; a < dim; ++a)
        for (Eigen::Index b = 0; b < dim; ++b)
            out << ",re_" << a << b << ",im_" << a << b;
    if (bloch_columns) out << ",u,v,w,x";
    out << '\n';

    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        out << format_double(traj.times[k]);
        const Operator& m = traj.states[k];
        for (Eigen::Index a = 0; a < dim; ++a)
            for (Eigen::Index b = 0; b < dim; ++b)
                out << ',' << format_double(m(a, b).real()) << ','
                    << format_double(m(a, b).imag());
        if (bloch_columns) {
            const tla::BlochState bl = tla::bloch_decompose(m);
            out << ',' << format_double(bl.u) << ',' << format_double(bl.v) << ','
                << format_double(bl.w) << ',' << format_double(bl.x);
        }
        out << '\n';
    }
    finish_output(out, file);
}

void write_probability_csv(const std::filesystem::path& file, const std::string& axis,
                           const std::vector<double>& grid, const std::vector<std::string>& labels,
                           const std::vector<std::vector<double>>& columns) {
    if (labels.size() != columns.size())
        throw std::invalid_argument("write_probability_csv: one column per label required");
    auto out = open_output(file);
    out << axis;
    for (const auto& label : labels) out << ",P(" << label << ')';
    out << '\n';
    for (std::size_t k = 0; k < grid.size(); ++k) {
        out << format_double(grid[k]);
        for (const auto& column : columns) {
            if (column.size() != grid.size())
                throw std::invalid_argument("write_probability_csv: column/grid size mismatch");
            out << ',' << format_double(column[k]);
        }
        out << '\n';
    }
    finish_output(out, file);
}

void write_outcome_table_csv(const std::filesystem::path& file,
                             const probcalc::OutcomeTable& table) {
    auto out = open_output(file);
    out << "preparation";
    for (const auto& label : table.meas_labels) out << ',' << label;
    out << '\n';
    for (Eigen::Index i = 0; i < table.joint.rows(); ++i) {
        out << table.prep_labels[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < table.joint.cols(); ++j)
            out << ',' << format_double(table.joint(i, j));
        out << '\n';
    }
    finish_output(out, file);
}

void write_plot_script(const std::filesystem::path& file, const std::string& title,
                       const std::vector<PlotBlock>& blocks) {
    auto out = open_output(file);
    out << "# gnuplot script written alongside the CSV outputs\n"
        << "# render with:  gnuplot " << file.filename().string() << "\n"
        << "set datafile separator ','\n"
        << "set terminal pngcairo size 960,640\n"
        << "set grid\n"
        << "set key outside\n";
    for (const auto& block : blocks) {
        out << "\nset xlabel '" << block.axis << "'\n"
            << "set title '" << title << ": " << block.csv << "'\n"
            << "set output '" << block.output << "'\n"
            << "plot";
        bool first = true;
        for (const auto& [column, legend] : block.series) {
            out << (first ? " " : ", \\\n     ") << '\'' << block.csv << "' using 1:" << column
                << " with lines title '" << legend << '\'';
            first = false;
        }
        out << '\n';
    }
    finish_output(out, file);
}

}  // namespace qretro::shell
