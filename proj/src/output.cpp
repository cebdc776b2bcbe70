#include "impasse/output.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace impasse {

namespace {

std::string num(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return buf.data();
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::Input, "cannot write " + path.string());
    }
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cell += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            cells.push_back(cell);
            cell.clear();
        } else {
            cell += ch;
        }
    }
    cells.push_back(cell);
    return cells;
}

}  // namespace

std::vector<std::string> csv_header(const Trajectory& traj, const NetworkCase& c) {
    std::vector<std::string> h{"t"};
    for (const auto& b : c.buses) {
        h.push_back("V_" + std::to_string(b.id));
    }
    for (const auto& b : c.buses) {
        h.push_back("theta_" + std::to_string(b.id));
    }
    for (int k = 0; k < traj.layout.motors; ++k) {
        h.push_back("sigma_" + std::to_string(c.buses[c.motors[k].bus].id));
    }
    for (const char* name : {"sigma_min_y1", "rhs_eq16", "i_vs", "sigma_min_jalg", "min_mod_eig", "hit"}) {
        h.push_back(name);
    }
    return h;
}

void emit_csv(const Trajectory& traj, const NetworkCase& c, const std::filesystem::path& path) {
    if (traj.samples.empty()) {
        throw Error(ErrorKind::Input, "emit_csv: trajectory is empty");
    }
    auto out = open_out(path);
    const auto header = csv_header(traj, c);
    for (std::size_t k = 0; k < header.size(); ++k) {
        out << (k ? "," : "") << header[k];
    }
    out << "\r\n";
    const int n = traj.layout.n;
    for (const auto& s : traj.samples) {
        out << num(s.state.t);
        for (int i = 0; i < n; ++i) {
            out << ',' << num(s.state.y[n + i]);
        }
        for (int i = 0; i < n; ++i) {
            out << ',' << num(s.state.y[i]);
        }
        for (int k = 0; k < traj.layout.motors; ++k) {
            out << ',' << num(s.state.x[traj.layout.motor_offset(k)]);
        }
        const auto& r = s.report;
        out << ',' << num(r.sigma_min_y1) << ',' << num(r.rhs_eq16) << ',' << num(r.i_vs) << ','
            << num(r.sigma_min_jalg) << ',' << num(r.min_mod_eig_jalg) << ',' << (r.hit ? "true" : "false")
            << "\r\n";
    }
    if (!out) {
        throw Error(ErrorKind::Input, "write failed: " + path.string());
    }
}

int CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

double CsvTable::value(std::size_t row, const std::string& name) const {
    const int col = column(name);
    if (col < 0 || row >= rows.size()) {
        throw Error(ErrorKind::Input, "CsvTable: no cell (" + std::to_string(row) + ", " + name + ")");
    }
    const std::string& cell = rows[row][col];
    if (cell == "true") {
        return 1.0;
    }
    if (cell == "false") {
        return 0.0;
    }
    return std::strtod(cell.c_str(), nullptr);
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Input, "cannot open " + path.string());
    }
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (first) {
            table.header = split_csv_line(line);
            first = false;
        } else {
            table.rows.push_back(split_csv_line(line));
        }
    }
    return table;
}

void emit_summary(const Trajectory& traj, const std::filesystem::path& path) {
    auto opt = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    nlohmann::json doc;
    doc["scenario"] = traj.scenario;
    doc["termination"] = to_string(traj.termination);
    doc["t_hit"] = opt(traj.t_hit);
    doc["ivs_first_below"] = opt(traj.ivs_first_below);
    doc["ivs_crossing"] = opt(traj.ivs_crossing);
    doc["shed_time"] = opt(traj.shed_time);
    doc["samples"] = traj.samples.size();
    doc["t_end"] = traj.samples.empty() ? nlohmann::json(nullptr) : nlohmann::json(traj.samples.back().state.t);
    doc["state_layout"] = traj.layout.manifest();
    doc["log"] = traj.log;
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

// --- SVG ---------------------------------------------------------------------

namespace {

constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&':
                out += "&amp;";
                break;
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '"':
                out += "&quot;";
                break;
            default:
                out += ch;
        }
    }
    return out;
}

std::string short_num(double v) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.4g", v);
    return buf.data();
}

// Rounded tick spacing covering [lo, hi] with about `target` intervals.
double tick_step(double lo, double hi, int target) {
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (m * mag >= raw) {
            return m * mag;
        }
    }
    return 10.0 * mag;
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    std::size_t finite_points = 0;
    for (const auto& s : spec.series) {
        for (const auto& [x, y] : s.points) {
            if (std::isfinite(x) && std::isfinite(y)) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                ++finite_points;
            }
        }
    }
    if (finite_points < 2) {
        throw Error(ErrorKind::Input, "render_svg: need at least two finite points");
    }
    if (spec.reference_line) {
        y0 = std::min(y0, *spec.reference_line);
        y1 = std::max(y1, *spec.reference_line);
    }
    if (x1 == x0) {
        x1 = x0 + 1.0;
    }
    if (y1 == y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    constexpr double W = 800, H = 480, L = 80, R = 20, T = 40, B = 60;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
       << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(spec.title)
       << "</text>\n";

    // Grid and ticks.
    const double xs = tick_step(x0, x1, 8), ys = tick_step(y0, y1, 6);
    for (double x = std::ceil(x0 / xs) * xs; x <= x1 + 1e-12 * std::abs(x1); x += xs) {
        os << "<line x1=\"" << px(x) << "\" y1=\"" << T << "\" x2=\"" << px(x) << "\" y2=\"" << H - B
           << "\" stroke=\"#e0e0e0\"/>\n";
        os << "<text x=\"" << px(x) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << short_num(x)
           << "</text>\n";
    }
    for (double y = std::ceil(y0 / ys) * ys; y <= y1 + 1e-12 * std::abs(y1); y += ys) {
        os << "<line x1=\"" << L << "\" y1=\"" << py(y) << "\" x2=\"" << W - R << "\" y2=\"" << py(y)
           << "\" stroke=\"#e0e0e0\"/>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << short_num(y)
           << "</text>\n";
    }
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
       << escape_xml(spec.x_label) << "</text>\n";
    os << "<text transform=\"translate(20," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape_xml(spec.y_label) << "</text>\n";

    if (spec.reference_line) {
        os << "<line x1=\"" << L << "\" y1=\"" << py(*spec.reference_line) << "\" x2=\"" << W - R << "\" y2=\""
           << py(*spec.reference_line) << "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n";
    }

    for (std::size_t k = 0; k < spec.series.size(); ++k) {
        const auto& s = spec.series[k];
        const char* color = kPalette[k % kPalette.size()];
        // Non-finite values break the line into separate segments.
        std::ostringstream path;
        bool pen_down = false;
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) {
                pen_down = false;
                continue;
            }
            path << (pen_down ? " L" : " M") << px(x) << ' ' << py(y);
            pen_down = true;
        }
        os << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
        const double ly = T + 16 + 18 * static_cast<double>(k);
        os << "<line x1=\"" << W - R - 150 << "\" y1=\"" << ly << "\" x2=\"" << W - R - 125 << "\" y2=\"" << ly
           << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << W - R - 118 << "\" y=\"" << ly + 4 << "\">" << escape_xml(s.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void emit_plot(const PlotSpec& spec, const std::filesystem::path& path) {
    const std::string svg = render_svg(spec);
    auto out = open_out(path);
    out << svg;
}

void emit_standard_plots(const std::vector<const Trajectory*>& runs, const NetworkCase& c, int bus,
                         const std::filesystem::path& dir) {
    if (bus < 0 || bus >= c.bus_count()) {
        throw Error(ErrorKind::Input, "emit_standard_plots: bus out of range");
    }
    const std::string id = std::to_string(c.buses[bus].id);
    PlotSpec volt{"Voltage at bus " + id, "t [s]", "V_" + id + " [p.u.]", {}, std::nullopt};
    PlotSpec ivs{"Voltage stability index I_vs", "t [s]", "I_vs", {}, 1.0};
    PlotSpec eig{"Minimum-modulus eigenvalue of Jalg", "t [s]", "|lambda|_min", {}, std::nullopt};
    for (const Trajectory* t : runs) {
        PlotSeries v{t->scenario, {}}, i{t->scenario, {}}, e{t->scenario, {}};
        const int n = t->layout.n;
        for (const auto& s : t->samples) {
            v.points.emplace_back(s.state.t, s.state.y[n + bus]);
            i.points.emplace_back(s.state.t, s.report.i_vs);
            e.points.emplace_back(s.state.t, s.report.min_mod_eig_jalg);
        }
        volt.series.push_back(std::move(v));
        ivs.series.push_back(std::move(i));
        eig.series.push_back(std::move(e));
    }
    emit_plot(volt, dir / ("voltage_bus" + id + ".svg"));
    emit_plot(ivs, dir / "ivs.svg");
    emit_plot(eig, dir / "min_mod_eig.svg");
}

}  // namespace impasse
