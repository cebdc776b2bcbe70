#include "impasse/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <optional>
#include <sstream>
#include <thread>

namespace impasse {

const char* to_string(Termination t) {
    switch (t) {
        case Termination::HorizonReached:
            return "horizon_reached";
        case Termination::ImpasseHit:
            return "impasse_hit";
        case Termination::Assumption2Violation:
            return "assumption2_violation";
    }
    return "unknown";
}

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::ApplyFault:
            return "apply_fault";
        case EventKind::ClearFault:
            return "clear_fault";
        case EventKind::InstallShunt:
            return "install_shunt";
        case EventKind::ShedMotor:
            return "shed_motor";
        case EventKind::ShedStatic:
            return "shed_static";
    }
    return "unknown";
}

namespace {

constexpr double kTimeEps = 1e-9;

double safe_sigma_min(const RealVector& x, const RealVector& y, const DaeSystem& sys) {
    try {
        return sigma_min(algebraic_jacobian(x, y, sys));
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

// Residual of the trapezoidal step system in z = [x+; y+].
struct StepSystem {
    const DaeSystem& sys;
    const RealVector& x0;
    RealVector f0;
    double h;

    int nx() const { return sys.layout().nx(); }

    RealVector operator()(const RealVector& z) const {
        const int nx_ = nx();
        const RealVector x = z.head(nx_);
        const RealVector y = z.tail(z.size() - nx_);
        RealVector r(z.size());
        r.head(nx_) = x - x0 - 0.5 * h * (f0 + sys.f(x, y));
        r.tail(z.size() - nx_) = residuals(x, y, sys);
        return r;
    }

    RealMatrix jacobian(const RealVector& z) const {
        const int nx_ = nx();
        const int ny = static_cast<int>(z.size()) - nx_;
        const RealVector x = z.head(nx_);
        const RealVector y = z.tail(ny);
        RealMatrix jac(z.size(), z.size());
        // f and g depend on x only through device states; difference them together.
        for (int col = 0; col < nx_; ++col) {
            const double d = 1e-7 * std::max(1.0, std::abs(x[col]));
            RealVector xp = x, xm = x;
            xp[col] += d;
            xm[col] -= d;
            jac.col(col).head(nx_) = -0.25 * h * (sys.f(xp, y) - sys.f(xm, y)) / d;
            jac(col, col) += 1.0;
            jac.col(col).tail(ny) = (residuals(xp, y, sys) - residuals(xm, y, sys)) / (2.0 * d);
        }
        for (int col = 0; col < ny; ++col) {
            const double d = 1e-7 * std::max(1.0, std::abs(y[col]));
            RealVector yp = y, ym = y;
            yp[col] += d;
            ym[col] -= d;
            jac.col(nx_ + col).head(nx_) = -0.25 * h * (sys.f(x, yp) - sys.f(x, ym)) / d;
        }
        jac.bottomRightCorner(ny, ny) = algebraic_jacobian(x, y, sys);
        return jac;
    }
};

}  // namespace

SystemState step(const SystemState& state, double dt, const DaeSystem& sys, const SimOptions& options) {
    const int nx = sys.layout().nx();
    StepSystem F{sys, state.x, sys.f(state.x, state.y), dt};

    RealVector z(nx + state.y.size());
    z << state.x + dt * F.f0, state.y;
    RealVector last = z;
    double norm = std::numeric_limits<double>::infinity();
    try {
        RealVector r = F(z);
        norm = r.lpNorm<Eigen::Infinity>();
        Eigen::PartialPivLU<RealMatrix> lu(F.jacobian(z));
        for (int it = 0; it < options.step_max_iter; ++it) {
            if (norm <= options.step_tolerance) {
                SystemState out;
                out.x = z.head(nx);
                out.y = z.tail(state.y.size());
                out.t = state.t + dt;
                return out;
            }
            const RealVector dz = lu.solve(-r);
            if (!dz.allFinite()) {
                break;
            }
            last = z;
            z += dz;
            const RealVector r_new = F(z);
            const double norm_new = r_new.lpNorm<Eigen::Infinity>();
            if (!std::isfinite(norm_new)) {
                break;
            }
            if (norm_new > 0.25 * norm) {
                lu.compute(F.jacobian(z));
            }
            r = r_new;
            norm = norm_new;
        }
        if (norm <= options.step_tolerance) {
            SystemState out;
            out.x = z.head(nx);
            out.y = z.tail(state.y.size());
            out.t = state.t + dt;
            return out;
        }
    } catch (const NewtonFailure&) {
        throw;
    } catch (const Error& e) {
        // An iterate left the model's domain (V <= 0 or slip <= 0).
        const RealVector y_last = last.tail(state.y.size());
        throw NewtonFailure("step at t = " + std::to_string(state.t + dt) + ": " + e.what(), y_last,
                            safe_sigma_min(last.head(nx), y_last, sys));
    }
    const RealVector y_last = last.tail(state.y.size());
    throw NewtonFailure("step: Newton did not converge at t = " + std::to_string(state.t + dt) + " (residual " +
                            std::to_string(norm) + ")",
                        y_last, safe_sigma_min(last.head(nx), y_last, sys));
}

// --- impasse refinement ------------------------------------------------------

namespace {

// Fold point of g(x_a + s d, y) = 0 in s (Moore-Spence extended system).
std::optional<SystemState> locate_fold(const SystemState& start, const DaeSystem& sys) {
    const int ny = static_cast<int>(start.y.size());
    const RealVector d = sys.f(start.x, start.y);
    const RealMatrix j0 = algebraic_jacobian(start.x, start.y, sys);
    Eigen::JacobiSVD<RealMatrix> svd(j0, Eigen::ComputeFullV);
    const RealVector ell = svd.matrixV().col(ny - 1);

    auto extended = [&](const RealVector& w) {
        const RealVector y = w.head(ny);
        const RealVector v = w.segment(ny, ny);
        const double s = w[2 * ny];
        const RealVector x = start.x + s * d;
        RealVector r(2 * ny + 1);
        r.head(ny) = residuals(x, y, sys);
        r.segment(ny, ny) = algebraic_jacobian(x, y, sys) * v;
        r[2 * ny] = ell.dot(v) - 1.0;
        return r;
    };

    RealVector w(2 * ny + 1);
    w << start.y, ell, 0.0;
    try {
        RealVector r = extended(w);
        for (int it = 0; it < 40; ++it) {
            const double jscale = std::max(1.0, j0.cwiseAbs().maxCoeff());
            if (r.head(ny).lpNorm<Eigen::Infinity>() <= 1e-11 &&
                r.tail(ny + 1).lpNorm<Eigen::Infinity>() <= 1e-10 * jscale) {
                SystemState out;
                out.x = start.x + w[2 * ny] * d;
                out.y = w.head(ny);
                out.t = start.t + w[2 * ny];
                return out;
            }
            RealMatrix jac(2 * ny + 1, 2 * ny + 1);
            for (int col = 0; col < 2 * ny + 1; ++col) {
                const double h = 1e-7 * std::max(1.0, std::abs(w[col]));
                RealVector wp = w, wm = w;
                wp[col] += h;
                wm[col] -= h;
                jac.col(col) = (extended(wp) - extended(wm)) / (2.0 * h);
            }
            const RealVector dw = jac.fullPivLu().solve(-r);
            if (!dw.allFinite()) {
                return std::nullopt;
            }
            w += dw;
            r = extended(w);
            if (!r.allFinite()) {
                return std::nullopt;
            }
        }
    } catch (const Error&) {
    }
    return std::nullopt;
}

}  // namespace

ImpasseHit detect_impasse(const ImpasseBracket& bracket, const DaeSystem& sys, const SimOptions& options) {
    const double width = bracket.dt_fail;
    std::string failure;
    auto try_step = [&](double h) -> std::optional<SystemState> {
        try {
            return step(bracket.last_good, h, sys, options);
        } catch (const NewtonFailure& f) {
            failure = f.what();
            return std::nullopt;
        }
    };
    if (try_step(width)) {
        throw Error(ErrorKind::Numerical, "detect_impasse: the step from t = " + std::to_string(bracket.last_good.t) +
                                              " over " + std::to_string(width) + " s converges; no crossing");
    }
    double lo = 0.0, hi = width;
    SystemState good = bracket.last_good;
    while (hi - lo > width / 64.0) {
        const double mid = 0.5 * (lo + hi);
        if (auto s = try_step(mid)) {
            lo = mid;
            good = *s;
        } else {
            hi = mid;
        }
    }

    ImpasseHit hit;
    hit.state = good;
    if (options.refine_impasse) {
        if (auto fold = locate_fold(good, sys)) {
            // Accept only a fold inside the bracket. Newton stops converging
            // slightly before the fold, so allow one bisection cell past hi.
            if (fold->t >= good.t - kTimeEps && fold->t <= bracket.last_good.t + hi + width / 64.0) {
                hit.state = *fold;
            }
        }
    }
    hit.t_hit = hit.state.t;
    hit.report = impasse_report(hit.state.x, hit.state.y, sys, hit.t_hit);
    hit.on_surface = hit.report.hit;
    hit.theorem1_holds = hit.report.i_vs <= 1.0;
    // Without a fold nearby the failure is not an impasse (e.g. a device left
    // its domain); report it rather than calling it a collapse.
    if (!hit.on_surface && hit.report.sigma_min_jalg > 1e-3 * hit.report.sigma_max_jalg) {
        throw Error(ErrorKind::Numerical,
                    "step failure near t = " + std::to_string(hit.t_hit) + " is not an impasse (sigma_min(Jalg) = " +
                        std::to_string(hit.report.sigma_min_jalg) + "): " + failure);
    }
    return hit;
}

// --- scenarios ----------------------------------------------------------------

PreparedScenario prepare_scenario(std::shared_ptr<const NetworkCase> network, const Scenario& scenario) {
    const int n = network->bus_count();
    ComplexVector shunts = ComplexVector::Zero(n);
    for (const auto& e : scenario.events) {
        if (e.kind == EventKind::InstallShunt && e.trigger == TriggerKind::AtTime && e.t <= 0.0) {
            if (e.bus < 0 || e.bus >= n) {
                throw Error(ErrorKind::Input, "scenario " + scenario.name + ": shunt bus out of range");
            }
            shunts[e.bus] += Complex(0.0, e.value);
        }
    }
    Equilibrium eq = initialize_equilibrium(network, shunts);
    PreparedScenario out;
    out.system = std::make_unique<DaeSystem>(network, shunts, eq.inputs);
    out.initial = eq.state;
    return out;
}

namespace {

class EventApplier {
public:
    explicit EventApplier(DaeSystem& sys) : sys_(sys) {}

    // Shunt changes are ramped in and y is tracked along the ramp, so the
    // post-event solution is the branch connected to the pre-event one.
    void ramp_shunt(int bus, Complex y, SystemState& state) {
        double done = 0.0, frac = 0.125;
        while (done < 1.0 - 1e-12) {
            const double take = std::min(frac, 1.0 - done);
            sys_.add_shunt(bus, take * y);
            try {
                state.y = solve_algebraic(state.x, state.y, sys_).y;
                done += take;
                frac = std::min(0.25, 2.0 * take);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Numerical && e.kind() != ErrorKind::Assumption2) {
                    throw;
                }
                sys_.add_shunt(bus, -take * y);
                frac = 0.5 * take;
                if (frac < 1e-4) {
                    throw NewtonFailure("event: algebraic solution lost while ramping a shunt at bus index " +
                                            std::to_string(bus),
                                        state.y, safe_sigma_min(state.x, state.y, sys_));
                }
            }
        }
    }

    std::string apply(const Event& e, SystemState& state) {
        const auto& c = sys_.network();
        const int n = c.bus_count();
        if (e.kind != EventKind::ClearFault && (e.bus < 0 || e.bus >= n)) {
            throw Error(ErrorKind::Input, std::string(to_string(e.kind)) + ": bus index out of range");
        }
        std::ostringstream msg;
        msg << to_string(e.kind);
        switch (e.kind) {
            case EventKind::ApplyFault: {
                if (fault_) {
                    throw Error(ErrorKind::Input, "apply_fault: a fault is already active");
                }
                if (!(e.value > 0.0)) {
                    throw Error(ErrorKind::Input, "apply_fault: fault reactance must be positive");
                }
                const Complex y = 1.0 / Complex(0.0, e.value);
                ramp_shunt(e.bus, y, state);
                fault_ = std::pair{e.bus, y};
                msg << " bus " << c.buses[e.bus].id << " x_f " << e.value;
                break;
            }
            case EventKind::ClearFault:
                if (!fault_) {
                    throw Error(ErrorKind::Input, "clear_fault: no active fault");
                }
                ramp_shunt(fault_->first, -fault_->second, state);
                msg << " bus " << c.buses[fault_->first].id;
                fault_.reset();
                break;
            case EventKind::InstallShunt:
                ramp_shunt(e.bus, Complex(0.0, e.value), state);
                msg << " bus " << c.buses[e.bus].id << " b0 " << e.value;
                break;
            case EventKind::ShedMotor: {
                bool found = false;
                for (int k = 0; k < sys_.layout().motors; ++k) {
                    if (c.motors[k].bus == e.bus && sys_.motor_online(k)) {
                        sys_.shed_motor(k);
                        found = true;
                    }
                }
                if (!found) {
                    throw Error(ErrorKind::Input, "shed_motor: no online motor at bus " +
                                                      std::to_string(c.buses[e.bus].id));
                }
                msg << " bus " << c.buses[e.bus].id;
                break;
            }
            case EventKind::ShedStatic: {
                if (!(e.value > 0.0 && e.value <= 1.0)) {
                    throw Error(ErrorKind::Input, "shed_static: fraction must be in (0, 1]");
                }
                bool found = false;
                for (std::size_t k = 0; k < c.static_loads.size(); ++k) {
                    if (c.static_loads[k].bus == e.bus) {
                        sys_.scale_static_load(static_cast<int>(k), 1.0 - e.value);
                        found = true;
                    }
                }
                if (!found) {
                    throw Error(ErrorKind::Input, "shed_static: no static load at bus " +
                                                      std::to_string(c.buses[e.bus].id));
                }
                msg << " bus " << c.buses[e.bus].id << " fraction " << e.value;
                break;
            }
        }
        return msg.str();
    }

    bool fault_active() const { return fault_.has_value(); }

private:
    DaeSystem& sys_;
    std::optional<std::pair<int, Complex>> fault_;
};

std::string fmt_time(double t) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << t;
    return os.str();
}

}  // namespace

Trajectory run_scenario(std::shared_ptr<const NetworkCase> network, const Scenario& scenario,
                        const SimOptions& options) {
    if (!(options.horizon > 0.0) || !(options.dt > 0.0) || !(options.dt_fine > 0.0)) {
        throw Error(ErrorKind::Input, "run_scenario: horizon and step sizes must be positive");
    }
    auto prepared = prepare_scenario(network, scenario);
    DaeSystem& sys = *prepared.system;
    EventApplier applier(sys);

    std::vector<Event> timed;
    std::vector<Event> triggered;
    for (const auto& e : scenario.events) {
        if (e.trigger == TriggerKind::WhenIvsCrosses) {
            triggered.push_back(e);
        } else if (e.t > 0.0) {
            if (e.t > options.horizon) {
                continue;
            }
            timed.push_back(e);
        } else if (e.kind != EventKind::InstallShunt) {
            throw Error(ErrorKind::Input, "scenario " + scenario.name + ": only shunts may be installed at t <= 0");
        }
    }
    std::stable_sort(timed.begin(), timed.end(), [](const Event& a, const Event& b) { return a.t < b.t; });

    // Fine stepping from the first fault to fine_window after the last clear.
    double fine_from = std::numeric_limits<double>::infinity();
    double last_clear = -std::numeric_limits<double>::infinity();
    for (const auto& e : timed) {
        if (e.kind == EventKind::ApplyFault) {
            fine_from = std::min(fine_from, e.t);
        }
        if (e.kind == EventKind::ClearFault) {
            last_clear = std::max(last_clear, e.t);
        }
    }
    const double fine_until = std::isfinite(last_clear) ? last_clear + options.fine_window : fine_from;
    const double arm_time = (std::isfinite(last_clear) ? last_clear : 0.0) + options.arming_delay;

    Trajectory traj;
    traj.scenario = scenario.name;
    traj.layout = sys.layout();

    SystemState state = prepared.initial;
    auto record = [&](const SystemState& s) {
        Sample sample{s, impasse_report(s.x, s.y, sys, s.t)};
        if (!traj.samples.empty() && s.t <= traj.samples.back().state.t + kTimeEps) {
            traj.samples.back() = sample;
        } else {
            traj.samples.push_back(sample);
        }
        return traj.samples.back().report;
    };
    record(state);

    std::size_t next_timed = 0;
    bool recovered = !options.require_recovery;
    std::vector<bool> fired(triggered.size(), false);
    double prev_ivs = traj.samples.back().report.i_vs;

    auto finish_impasse = [&](const ImpasseHit& hit) {
        traj.termination = Termination::ImpasseHit;
        traj.t_hit = hit.t_hit;
        Sample s{hit.state, hit.report};
        if (s.state.t <= traj.samples.back().state.t + kTimeEps) {
            traj.samples.back() = s;
        } else {
            traj.samples.push_back(s);
        }
        traj.log.push_back(fmt_time(hit.t_hit) + " impasse hit (sigma_min(Jalg) = " +
                           std::to_string(hit.report.sigma_min_jalg) + ", i_vs = " + std::to_string(hit.report.i_vs) +
                           (hit.on_surface ? "" : ", fold not located") + ")");
    };

    auto lost_solution = [&](double t) {
        ImpasseHit hit;
        hit.t_hit = t;
        hit.state = state;
        try {
            hit.report = impasse_report(state.x, state.y, sys, t);
        } catch (const Error&) {
            hit.report = traj.samples.back().report;
            hit.report.t = t;
        }
        finish_impasse(hit);
        traj.log.push_back("no algebraic solution after the event at t = " + fmt_time(t));
    };

    auto resolve_after_event = [&](double t) -> bool {
        try {
            state.y = solve_algebraic(state.x, state.y, sys).y;
            return true;
        } catch (const NewtonFailure&) {
            lost_solution(t);
            return false;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Assumption2) {
                throw;
            }
            traj.termination = Termination::Assumption2Violation;
            traj.log.push_back(fmt_time(t) + " " + e.what());
            return false;
        }
    };

    auto apply_event = [&](const Event& e) -> bool {
        try {
            traj.log.push_back(fmt_time(state.t) + " " + applier.apply(e, state) +
                               (e.trigger == TriggerKind::WhenIvsCrosses ? " (i_vs trigger)" : ""));
            return true;
        } catch (const NewtonFailure&) {
            lost_solution(state.t);
            return false;
        }
    };

    while (state.t < options.horizon - kTimeEps) {
        const bool fine = state.t >= fine_from - kTimeEps && state.t < fine_until - kTimeEps;
        double h = std::min(fine ? options.dt_fine : options.dt, options.horizon - state.t);
        if (next_timed < timed.size()) {
            const double to_event = timed[next_timed].t - state.t;
            if (to_event < h + kTimeEps) {
                h = to_event;
            }
        }

        // Step, halving twice on Newton failure before calling it an impasse.
        std::optional<SystemState> next;
        double tried = h;
        for (int attempt = 0; attempt < 3 && !next; ++attempt) {
            try {
                next = step(state, tried, sys, options);
            } catch (const NewtonFailure&) {
                if (attempt < 2) {
                    tried *= 0.5;
                }
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Assumption2) {
                    throw;
                }
                traj.termination = Termination::Assumption2Violation;
                traj.log.push_back(fmt_time(state.t) + " " + e.what());
                return traj;
            }
        }
        if (!next) {
            finish_impasse(detect_impasse({state, tried}, sys, options));
            return traj;
        }
        state = *next;
        if (next_timed < timed.size() && std::abs(state.t - timed[next_timed].t) < kTimeEps) {
            state.t = timed[next_timed].t;
        }

        // Time-triggered events at this instant.
        bool applied = false;
        while (next_timed < timed.size() && timed[next_timed].t <= state.t + kTimeEps) {
            if (!apply_event(timed[next_timed])) {
                return traj;
            }
            ++next_timed;
            applied = true;
        }
        if (applied && !resolve_after_event(state.t)) {
            return traj;
        }

        ImpasseReport rep = record(state);
        if (rep.hit) {
            ImpasseHit hit;
            hit.t_hit = state.t;
            hit.state = state;
            hit.report = rep;
            hit.on_surface = true;
            hit.theorem1_holds = rep.i_vs <= 1.0;
            finish_impasse(hit);
            return traj;
        }

        // I_vs bookkeeping and triggered events.
        const double ivs = rep.i_vs;
        if (std::isnan(traj.ivs_first_below) && ivs < 1.0) {
            traj.ivs_first_below = state.t;
        }
        const bool armed_window = !applier.fault_active() && state.t >= arm_time - kTimeEps;
        if (armed_window && !recovered && ivs > 1.0) {
            recovered = true;
        }
        const bool armed = armed_window && recovered;
        if (armed && std::isnan(traj.ivs_crossing) && prev_ivs >= 1.0 && ivs < 1.0) {
            const double prev_t = traj.samples[traj.samples.size() - 2].state.t;
            const double frac = (prev_ivs - 1.0) / (prev_ivs - ivs);
            traj.ivs_crossing = std::isfinite(frac) ? prev_t + frac * (state.t - prev_t) : state.t;
        }
        bool shed = false;
        for (std::size_t k = 0; k < triggered.size(); ++k) {
            const Event& e = triggered[k];
            if (fired[k] || !armed) {
                continue;
            }
            const bool down = e.direction == CrossDirection::Down && prev_ivs >= e.threshold && ivs < e.threshold;
            const bool up = e.direction == CrossDirection::Up && prev_ivs <= e.threshold && ivs > e.threshold;
            if (down || up) {
                fired[k] = true;
                if (!apply_event(e)) {
                    return traj;
                }
                if (e.kind == EventKind::ShedMotor && std::isnan(traj.shed_time)) {
                    traj.shed_time = state.t;
                }
                shed = true;
            }
        }
        if (shed) {
            if (!resolve_after_event(state.t)) {
                return traj;
            }
            rep = record(state);
        }
        prev_ivs = rep.i_vs;
    }
    traj.termination = Termination::HorizonReached;
    return traj;
}

Scenario with_ivs_shedding(const Scenario& scenario, int motor_bus, double threshold) {
    Scenario s = scenario;
    s.name = scenario.name + "+shed";
    Event shed;
    shed.kind = EventKind::ShedMotor;
    shed.trigger = TriggerKind::WhenIvsCrosses;
    shed.bus = motor_bus;
    shed.threshold = threshold;
    shed.direction = CrossDirection::Down;
    s.events.push_back(shed);
    return s;
}

Trajectory ivs_triggered_shedding(std::shared_ptr<const NetworkCase> network, const Scenario& scenario,
                                  int motor_bus, double threshold, const SimOptions& options) {
    return run_scenario(std::move(network), with_ivs_shedding(scenario, motor_bus, threshold), options);
}

std::vector<Trajectory> run_batch(std::shared_ptr<const NetworkCase> network, const std::vector<Scenario>& scenarios,
                                  const SimOptions& options, int threads) {
    std::vector<Trajectory> out(scenarios.size());
    std::vector<std::exception_ptr> errors(scenarios.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < scenarios.size(); k = next++) {
            try {
                out[k] = run_scenario(network, scenarios[k], options);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const auto count = static_cast<std::size_t>(std::clamp<int>(threads, 1, std::max<int>(1, scenarios.size())));
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < count; ++k) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return out;
}

}  // namespace impasse
