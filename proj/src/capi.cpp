#include "impasse_lab.h"

#include "impasse/analysis.hpp"
#include "impasse/casefile.hpp"
#include "impasse/output.hpp"
#include "impasse/simulator.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>

using namespace impasse;

struct il_case {
    CaseBundle bundle;
};

struct il_trajectory {
    Trajectory traj;
};

namespace {

thread_local std::string g_last_error;

il_status status_of(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Numerical:
        case ErrorKind::Assumption2:
        case ErrorKind::Domain:
            return IL_ERR_NUMERICAL;
        default:
            return IL_ERR_INPUT;
    }
}

template <typename F>
il_status guarded(F&& body) {
    try {
        g_last_error.clear();
        body();
        return IL_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        g_last_error = e.what();
        return IL_ERR_INPUT;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return IL_ERR_NUMERICAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return IL_ERR_NUMERICAL;
    }
}

void require(const void* p, const char* what) {
    if (p == nullptr) {
        throw Error(ErrorKind::Input, std::string(what) + " must not be null");
    }
}

int bus_index(const NetworkCase& c, int id) {
    const int idx = c.index_of(id);
    if (idx < 0) {
        throw Error(ErrorKind::Input, "unknown bus id " + std::to_string(id));
    }
    return idx;
}

SimOptions to_options(const il_sim_options& o) {
    SimOptions s;
    s.horizon = o.horizon;
    s.dt = o.dt;
    s.dt_fine = std::min(o.dt_fine, o.dt);
    s.fine_window = o.fine_window;
    s.arming_delay = o.arming_delay;
    s.require_recovery = o.require_recovery != 0;
    s.refine_impasse = o.refine_impasse != 0;
    return s;
}

Scenario configured(const il_case* c, const char* name, const il_sim_options& o) {
    Scenario s;
    if (name != nullptr && *name != '\0') {
        const Scenario* found = c->bundle.find_scenario(name);
        if (found == nullptr) {
            throw Error(ErrorKind::Input, std::string("unknown scenario '") + name + "'");
        }
        s = *found;
    } else {
        s.name = "base";
    }
    const NetworkCase& net = *c->bundle.network;
    if (o.extra_shunt_bus != 0) {
        Event e;
        e.kind = EventKind::InstallShunt;
        e.t = 0.0;
        e.bus = bus_index(net, o.extra_shunt_bus);
        e.value = o.extra_shunt_b0;
        s.events.insert(s.events.begin(), e);
    }
    if (o.shed_motor_bus != 0) {
        s = with_ivs_shedding(s, bus_index(net, o.shed_motor_bus), o.shed_threshold);
    }
    return s;
}

il_termination termination_of(Termination t) {
    switch (t) {
        case Termination::ImpasseHit:
            return IL_IMPASSE_HIT;
        case Termination::Assumption2Violation:
            return IL_ASSUMPTION2_VIOLATION;
        default:
            return IL_HORIZON_REACHED;
    }
}

}  // namespace

extern "C" {

const char* il_last_error(void) { return g_last_error.c_str(); }

const char* il_version(void) { return "1.0.0"; }

il_status il_case_load(const char* path, int strict, il_case** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = nullptr;
        auto c = std::make_unique<il_case>();
        c->bundle = parse_case(path, strict != 0);
        *out = c.release();
    });
}

void il_case_free(il_case* c) { delete c; }

il_status il_case_get_info(const il_case* c, il_case_info* out) {
    return guarded([&] {
        require(c, "case");
        require(out, "out");
        const NetworkCase& n = *c->bundle.network;
        out->buses = n.bus_count();
        out->generators = n.generator_count();
        out->motors = static_cast<int>(n.motors.size());
        out->static_loads = static_cast<int>(n.static_loads.size());
        out->scenarios = static_cast<int>(c->bundle.scenarios.size());
        out->warnings = static_cast<int>(c->bundle.warnings.size());
    });
}

const char* il_case_scenario_name(const il_case* c, int index) {
    if (c == nullptr || index < 0 || index >= static_cast<int>(c->bundle.scenarios.size())) {
        return nullptr;
    }
    return c->bundle.scenarios[index].name.c_str();
}

const char* il_case_warning(const il_case* c, int index) {
    if (c == nullptr || index < 0 || index >= static_cast<int>(c->bundle.warnings.size())) {
        return nullptr;
    }
    return c->bundle.warnings[index].c_str();
}

void il_sim_options_default(il_sim_options* o) {
    if (o == nullptr) {
        return;
    }
    const SimOptions d;
    o->horizon = d.horizon;
    o->dt = d.dt;
    o->dt_fine = d.dt_fine;
    o->fine_window = d.fine_window;
    o->arming_delay = d.arming_delay;
    o->require_recovery = d.require_recovery ? 1 : 0;
    o->refine_impasse = d.refine_impasse ? 1 : 0;
    o->shed_motor_bus = 0;
    o->shed_threshold = 1.0;
    o->extra_shunt_bus = 0;
    o->extra_shunt_b0 = 0.0;
}

il_status il_simulate(const il_case* c, const char* scenario, const il_sim_options* options, il_trajectory** out) {
    return il_simulate_batch(c, &scenario, 1, options, 1, out);
}

il_status il_simulate_batch(const il_case* c, const char* const* scenarios, int count, const il_sim_options* options,
                            int threads, il_trajectory** out) {
    return guarded([&] {
        require(c, "case");
        require(scenarios, "scenarios");
        require(out, "out");
        if (count <= 0) {
            throw Error(ErrorKind::Input, "scenario count must be positive");
        }
        il_sim_options o;
        il_sim_options_default(&o);
        if (options != nullptr) {
            o = *options;
        }
        std::vector<Scenario> list;
        for (int k = 0; k < count; ++k) {
            out[k] = nullptr;
            list.push_back(configured(c, scenarios[k], o));
        }
        auto runs = run_batch(c->bundle.network, list, to_options(o), threads);
        for (int k = 0; k < count; ++k) {
            out[k] = new il_trajectory{std::move(runs[k])};
        }
    });
}

void il_trajectory_free(il_trajectory* t) { delete t; }

il_status il_trajectory_get_summary(const il_trajectory* t, il_summary* out) {
    return guarded([&] {
        require(t, "trajectory");
        require(out, "out");
        const Trajectory& tr = t->traj;
        out->termination = termination_of(tr.termination);
        out->t_hit = tr.t_hit;
        out->ivs_first_below = tr.ivs_first_below;
        out->ivs_crossing = tr.ivs_crossing;
        out->shed_time = tr.shed_time;
        out->samples = tr.samples.size();
        out->t_end = tr.samples.empty() ? std::numeric_limits<double>::quiet_NaN() : tr.samples.back().state.t;
    });
}

il_status il_trajectory_get_sample(const il_trajectory* t, size_t index, il_sample* out) {
    return guarded([&] {
        require(t, "trajectory");
        require(out, "out");
        if (index >= t->traj.samples.size()) {
            throw Error(ErrorKind::Input, "sample index out of range");
        }
        const Sample& s = t->traj.samples[index];
        out->t = s.state.t;
        out->sigma_min_y1 = s.report.sigma_min_y1;
        out->rhs = s.report.rhs_eq16;
        out->i_vs = s.report.i_vs;
        out->sigma_min_jalg = s.report.sigma_min_jalg;
        out->sigma_max_jalg = s.report.sigma_max_jalg;
        out->min_mod_eig = s.report.min_mod_eig_jalg;
        out->hit = s.report.hit ? 1 : 0;
    });
}

il_status il_trajectory_write_csv(const il_trajectory* t, const il_case* c, const char* path) {
    return guarded([&] {
        require(t, "trajectory");
        require(c, "case");
        require(path, "path");
        emit_csv(t->traj, *c->bundle.network, path);
    });
}

il_status il_trajectory_write_summary(const il_trajectory* t, const char* path) {
    return guarded([&] {
        require(t, "trajectory");
        require(path, "path");
        emit_summary(t->traj, path);
    });
}

il_status il_write_plots(const il_case* c, const il_trajectory* const* runs, int count, int bus,
                         const char* directory) {
    return guarded([&] {
        require(c, "case");
        require(runs, "runs");
        require(directory, "directory");
        std::vector<const Trajectory*> list;
        for (int k = 0; k < count; ++k) {
            require(runs[k], "trajectory");
            list.push_back(&runs[k]->traj);
        }
        const NetworkCase& net = *c->bundle.network;
        int idx = 0;
        if (bus == 0) {
            // Weakest bus: lowest voltage at the end of the first run.
            const Trajectory& first = *list.at(0);
            const int n = first.layout.n;
            first.samples.back().state.y.tail(n).minCoeff(&idx);
        } else {
            idx = bus_index(net, bus);
        }
        emit_standard_plots(list, net, idx, directory);
    });
}

const char* il_termination_name(il_termination t) {
    switch (t) {
        case IL_IMPASSE_HIT:
            return to_string(Termination::ImpasseHit);
        case IL_ASSUMPTION2_VIOLATION:
            return to_string(Termination::Assumption2Violation);
        default:
            return to_string(Termination::HorizonReached);
    }
}

il_status il_theorem2_check(const il_case* c, il_theorem2* out) {
    return guarded([&] {
        require(c, "case");
        require(out, "out");
        const auto v = theorem2_check(*c->bundle.network);
        out->applicable = v.applicable;
        for (int k = 0; k < 4; ++k) {
            out->conditions[k] = v.conditions[k];
        }
        out->wcdd = v.wcdd;
        out->immune = v.immune;
        std::string notes;
        for (const auto& n : v.notes) {
            notes += n + "\n";
        }
        std::strncpy(out->notes, notes.c_str(), sizeof(out->notes) - 1);
        out->notes[sizeof(out->notes) - 1] = '\0';
    });
}

il_status il_sensitivity(const il_case* c, const char* scenario, il_sensitivity_row* rows) {
    return guarded([&] {
        require(c, "case");
        require(rows, "rows");
        il_sim_options o;
        il_sim_options_default(&o);
        const auto prepared = prepare_scenario(c->bundle.network, configured(c, scenario, o));
        const DaeSystem& sys = *prepared.system;
        const auto snap = equivalent_snapshot(prepared.initial.x, prepared.initial.y, sys);
        const ComplexMatrix y1 = build_y1(sys.admittances(), snap);
        for (int i = 0; i < sys.layout().n; ++i) {
            const auto r = shunt_sensitivity(y1, i);
            rows[i].bus = sys.network().buses[i].id;
            rows[i].value = r.value;
            rows[i].fd_value = sigma_min_shunt_fd(y1, i);
            rows[i].degenerate = r.degenerate;
            rows[i].approximation_ok = r.approximation_ok;
            rows[i].lambda_min = r.lambda_min;
        }
    });
}

il_status il_lemma1_verify(const il_case* c, int samples, unsigned long long seed, il_lemma1_summary* out) {
    return guarded([&] {
        require(c, "case");
        require(out, "out");
        if (samples <= 0) {
            throw Error(ErrorKind::Input, "sample count must be positive");
        }
        std::mt19937_64 rng(seed);
        *out = il_lemma1_summary{};
        out->min_sigma_jalg = std::numeric_limits<double>::infinity();
        for (int k = 0; k < samples; ++k) {
            const auto s = random_manifold_state(*c->bundle.network, rng);
            DeviceInputs inputs;
            inputs.generators.resize(s.network->generator_count());
            const DaeSystem sys(s.network, {}, inputs);
            const auto rep = lemma1_oracle(s.x, s.y, sys);
            for (int r = 0; r < 4; ++r) {
                out->max_chain_residual[r] = std::max(out->max_chain_residual[r], rep.chain_residuals[r]);
            }
            out->max_det_ratio_error = std::max(out->max_det_ratio_error, std::abs(rep.det_ratio - 1.0));
            out->min_sigma_jalg = std::min(out->min_sigma_jalg, rep.sigma_min_jalg);
            ++out->samples;
        }
    });
}

il_status il_scan(const il_case* c, const char* scenario, int bus, double b0_min, double b0_max, int points,
                  const il_sim_options* options, int threads, double* b0_out, double* t_hit_out) {
    return guarded([&] {
        require(c, "case");
        require(b0_out, "b0_out");
        require(t_hit_out, "t_hit_out");
        if (points < 1) {
            throw Error(ErrorKind::Input, "scan needs at least one point");
        }
        il_sim_options o;
        il_sim_options_default(&o);
        if (options != nullptr) {
            o = *options;
        }
        std::vector<Scenario> list;
        for (int k = 0; k < points; ++k) {
            const double b0 = points == 1 ? b0_min : b0_min + (b0_max - b0_min) * k / (points - 1);
            il_sim_options ok = o;
            ok.extra_shunt_bus = bus;
            ok.extra_shunt_b0 = b0;
            list.push_back(configured(c, scenario, ok));
            b0_out[k] = b0;
        }
        const auto runs = run_batch(c->bundle.network, list, to_options(o), threads);
        for (int k = 0; k < points; ++k) {
            t_hit_out[k] = runs[k].t_hit;
        }
    });
}

}  // extern "C"
