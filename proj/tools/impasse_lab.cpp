// impasse-lab command line front end. Talks to the simulator only through the
// C interface.
#include "impasse_lab.h"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CaseDeleter {
    void operator()(il_case* c) const { il_case_free(c); }
};
struct TrajectoryDeleter {
    void operator()(il_trajectory* t) const { il_trajectory_free(t); }
};
using CasePtr = std::unique_ptr<il_case, CaseDeleter>;
using TrajectoryPtr = std::unique_ptr<il_trajectory, TrajectoryDeleter>;

// Thrown to unwind with a C API status.
struct Failure {
    il_status status;
};

void check(il_status s, const std::string& what) {
    if (s != IL_OK) {
        std::cerr << "impasse-lab: " << what << ": " << il_last_error() << '\n';
        throw Failure{s};
    }
}

int worker_count() {
    int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("IMPASSE_LAB_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) {
            n = std::min(n, cap);
        }
    }
    return n;
}

CasePtr load_case(const std::string& path, bool lenient) {
    il_case* raw = nullptr;
    check(il_case_load(path.c_str(), lenient ? 0 : 1, &raw), "loading " + path);
    CasePtr c(raw);
    il_case_info info{};
    check(il_case_get_info(c.get(), &info), "case info");
    for (int k = 0; k < info.warnings; ++k) {
        std::cerr << "warning: " << il_case_warning(c.get(), k) << '\n';
    }
    return c;
}

std::string fmt(double v) {
    if (std::isnan(v)) {
        return "-";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

struct Common {
    std::string case_path;
    bool lenient = false;
};

struct SimulateArgs {
    std::vector<std::string> scenarios;
    std::string out;
    double dt = 0.005;
    double dt_fine = 0.001;
    double horizon = 12.0;
    double arming_delay = 0.0;
    int shed_bus = 0;
    double shed_threshold = 1.0;
    bool plots = false;
    int plot_bus = 0;
    bool theorem2 = false;
    bool sensitivity = false;
};

void write_theorem2(const il_case* c, std::ostream& os) {
    il_theorem2 v{};
    check(il_theorem2_check(c, &v), "theorem 2 check");
    os << "applicable: " << (v.applicable ? "yes" : "no") << '\n';
    for (int k = 0; k < 4; ++k) {
        os << "condition " << k + 1 << ": " << (v.conditions[k] ? "holds" : "fails") << '\n';
    }
    os << "wcdd: " << (v.wcdd ? "yes" : "no") << '\n';
    os << "immune: " << (v.immune ? "true" : "false") << '\n';
    if (v.notes[0] != '\0') {
        os << v.notes;
    }
}

void write_sensitivity(const il_case* c, const char* scenario, std::ostream& os) {
    il_case_info info{};
    check(il_case_get_info(c, &info), "case info");
    std::vector<il_sensitivity_row> rows(info.buses);
    check(il_sensitivity(c, scenario, rows.data()), "sensitivity");
    os << "bus,value,finite_difference,degenerate,approximation_ok,lambda_min\n";
    for (const auto& r : rows) {
        char line[256];
        std::snprintf(line, sizeof line, "%d,%.10g,%.10g,%s,%s,%.10g\n", r.bus, r.value, r.fd_value,
                      r.degenerate ? "true" : "false", r.approximation_ok ? "true" : "false", r.lambda_min);
        os << line;
    }
}

int run_simulate(const Common& common, SimulateArgs a) {
    auto c = load_case(common.case_path, common.lenient);
    if (a.scenarios.size() == 1 && a.scenarios[0] == "all") {
        il_case_info info{};
        check(il_case_get_info(c.get(), &info), "case info");
        a.scenarios.clear();
        for (int k = 0; k < info.scenarios; ++k) {
            a.scenarios.emplace_back(il_case_scenario_name(c.get(), k));
        }
    }
    il_sim_options o;
    il_sim_options_default(&o);
    o.dt = a.dt;
    o.dt_fine = a.dt_fine;
    o.horizon = a.horizon;
    o.arming_delay = a.arming_delay;
    o.shed_motor_bus = a.shed_bus;
    o.shed_threshold = a.shed_threshold;

    std::vector<const char*> names;
    for (const auto& s : a.scenarios) {
        names.push_back(s.c_str());
    }
    std::vector<il_trajectory*> raw(names.size(), nullptr);
    check(il_simulate_batch(c.get(), names.data(), static_cast<int>(names.size()), &o, worker_count(), raw.data()),
          "simulation");
    std::vector<TrajectoryPtr> runs;
    for (auto* t : raw) {
        runs.emplace_back(t);
    }

    const fs::path out(a.out);
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const fs::path dir = runs.size() == 1 ? out : out / a.scenarios[k];
        check(il_trajectory_write_csv(runs[k].get(), c.get(), (dir / "trajectory.csv").c_str()), "writing CSV");
        check(il_trajectory_write_summary(runs[k].get(), (dir / "summary.json").c_str()), "writing summary");
        il_summary s{};
        check(il_trajectory_get_summary(runs[k].get(), &s), "summary");
        std::cout << a.scenarios[k] << ": " << il_termination_name(s.termination) << "  t_hit=" << fmt(s.t_hit)
                  << "  ivs_first_below=" << fmt(s.ivs_first_below) << "  ivs_crossing=" << fmt(s.ivs_crossing)
                  << "  shed=" << fmt(s.shed_time) << "  t_end=" << fmt(s.t_end) << '\n';
    }
    if (a.plots) {
        std::vector<const il_trajectory*> list;
        for (const auto& r : runs) {
            list.push_back(r.get());
        }
        check(il_write_plots(c.get(), list.data(), static_cast<int>(list.size()), a.plot_bus, out.c_str()),
              "writing plots");
    }
    if (a.theorem2) {
        fs::create_directories(out);
        std::ofstream f(out / "theorem2.txt");
        write_theorem2(c.get(), f);
    }
    if (a.sensitivity) {
        fs::create_directories(out);
        std::ofstream f(out / "sensitivity.csv");
        write_sensitivity(c.get(), runs.size() == 1 ? a.scenarios[0].c_str() : nullptr, f);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Power-system DAE simulator with impasse-surface analysis"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--case", common.case_path, "Case file (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_flag("--lenient", common.lenient, "Warn about unknown keys instead of rejecting them");
    };

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Integrate one or more scenarios");
    add_common(simulate);
    simulate->add_option("--scenario", sim.scenarios, "Scenario name(s), or 'all'")->required();
    simulate->add_option("--out", sim.out, "Output directory")->required();
    simulate->add_option("--dt", sim.dt, "Step size [s]")->check(CLI::PositiveNumber);
    simulate->add_option("--dt-fine", sim.dt_fine, "Step size around faults [s]")->check(CLI::PositiveNumber);
    simulate->add_option("--horizon", sim.horizon, "Simulated time [s]")->check(CLI::PositiveNumber);
    simulate->add_option("--arming-delay", sim.arming_delay, "Delay after clearing before the I_vs trigger arms");
    simulate->add_option("--shed-motor-bus", sim.shed_bus, "Shed the motor at this bus when I_vs drops through 1");
    simulate->add_option("--shed-threshold", sim.shed_threshold, "I_vs threshold for shedding");
    simulate->add_flag("--plots", sim.plots, "Write SVG plots");
    simulate->add_option("--plot-bus", sim.plot_bus, "Bus for the voltage plot (default: weakest bus)");
    simulate->add_flag("--theorem2", sim.theorem2, "Write the Theorem-2 verdict");
    simulate->add_flag("--sensitivity", sim.sensitivity, "Write the shunt sensitivity table");

    auto* theorem2 = app.add_subcommand("check-theorem2", "Check the structural immunity conditions");
    add_common(theorem2);

    std::string sens_scenario;
    std::string sens_out;
    auto* sensitivity = app.add_subcommand("sensitivity", "Shunt sensitivity of sigma_min(Y1) at equilibrium");
    add_common(sensitivity);
    sensitivity->add_option("--scenario", sens_scenario, "Use the pre-disturbance network of this scenario");
    sensitivity->add_option("--out", sens_out, "Write the table to this CSV file");

    int samples = 50;
    unsigned long long seed = 1;
    auto* lemma1 = app.add_subcommand("lemma1-verify", "Check the Jalg / Y' singularity equivalence");
    add_common(lemma1);
    lemma1->add_option("--samples", samples, "Random states")->check(CLI::PositiveNumber);
    lemma1->add_option("--seed", seed, "RNG seed");

    std::string scan_scenario;
    std::string scan_out;
    int scan_bus = 8;
    double b0_min = -0.3, b0_max = 0.3;
    int points = 7;
    double scan_dt = 0.005, scan_horizon = 12.0;
    auto* scan = app.add_subcommand("scan", "Collapse time against shunt susceptance");
    add_common(scan);
    scan->add_option("--scenario", scan_scenario, "Scenario")->required();
    scan->add_option("--bus", scan_bus, "Shunt bus id");
    scan->add_option("--b0-min", b0_min, "Lowest susceptance [p.u.]");
    scan->add_option("--b0-max", b0_max, "Highest susceptance [p.u.]");
    scan->add_option("--points", points, "Number of values")->check(CLI::PositiveNumber);
    scan->add_option("--dt", scan_dt, "Step size [s]")->check(CLI::PositiveNumber);
    scan->add_option("--horizon", scan_horizon, "Simulated time [s]")->check(CLI::PositiveNumber);
    scan->add_option("--out", scan_out, "Write the curve to this CSV file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : IL_ERR_INPUT;
    }

    try {
        if (*simulate) {
            return run_simulate(common, sim);
        }
        if (*theorem2) {
            auto c = load_case(common.case_path, common.lenient);
            write_theorem2(c.get(), std::cout);
            return 0;
        }
        if (*sensitivity) {
            auto c = load_case(common.case_path, common.lenient);
            const char* sc = sens_scenario.empty() ? nullptr : sens_scenario.c_str();
            if (sens_out.empty()) {
                write_sensitivity(c.get(), sc, std::cout);
            } else {
                std::ofstream f(sens_out);
                write_sensitivity(c.get(), sc, f);
            }
            return 0;
        }
        if (*lemma1) {
            auto c = load_case(common.case_path, common.lenient);
            il_lemma1_summary s{};
            check(il_lemma1_verify(c.get(), samples, seed, &s), "lemma1-verify");
            std::printf("samples: %d\n", s.samples);
            for (int k = 0; k < 4; ++k) {
                std::printf("chain residual %d: %.3e\n", k + 1, s.max_chain_residual[k]);
            }
            std::printf("max |det ratio - 1|: %.3e\n", s.max_det_ratio_error);
            std::printf("min sigma_min(Jalg): %.3e\n", s.min_sigma_jalg);
            return 0;
        }
        if (*scan) {
            auto c = load_case(common.case_path, common.lenient);
            il_sim_options o;
            il_sim_options_default(&o);
            o.dt = scan_dt;
            o.horizon = scan_horizon;
            std::vector<double> b0(points), t_hit(points);
            check(il_scan(c.get(), scan_scenario.c_str(), scan_bus, b0_min, b0_max, points, &o, worker_count(),
                          b0.data(), t_hit.data()),
                  "scan");
            std::ofstream file;
            if (!scan_out.empty()) {
                file.open(scan_out);
            }
            std::ostream& os = scan_out.empty() ? std::cout : file;
            os << "b0,t_hit\n";
            for (int k = 0; k < points; ++k) {
                char line[96];
                std::snprintf(line, sizeof line, "%.6g,%s\n", b0[k],
                              std::isnan(t_hit[k]) ? "stable" : fmt(t_hit[k]).c_str());
                os << line;
            }
            return 0;
        }
    } catch (const Failure& f) {
        return f.status;
    } catch (const std::exception& e) {
        std::cerr << "impasse-lab: " << e.what() << '\n';
        return IL_ERR_INPUT;
    }
    return 0;
}
