#pragma once

#include "impasse/simulator.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace impasse {

/// Fixed trajectory column order:
///   t, V_1..V_n, theta_1..theta_n, sigma_1..sigma_m, sigma_min_y1, rhs_eq16,
///   i_vs, sigma_min_jalg, min_mod_eig, hit
std::vector<std::string> csv_header(const Trajectory& traj, const NetworkCase& c);

void emit_csv(const Trajectory& traj, const NetworkCase& c, const std::filesystem::path& path);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;
    double value(std::size_t row, const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

void emit_summary(const Trajectory& traj, const std::filesystem::path& path);

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct PlotSpec {
    std::string title;
    std::string x_label = "t [s]";
    std::string y_label;
    std::vector<PlotSeries> series;
    std::optional<double> reference_line;
};

/// Self-contained SVG line chart.
std::string render_svg(const PlotSpec& spec);
void emit_plot(const PlotSpec& spec, const std::filesystem::path& path);

/// V at `bus`, I_vs and min-modulus eigenvalue of Jalg for one or more runs.
void emit_standard_plots(const std::vector<const Trajectory*>& runs, const NetworkCase& c, int bus,
                         const std::filesystem::path& dir);

}  // namespace impasse
