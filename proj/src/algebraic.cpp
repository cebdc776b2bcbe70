#include "impasse/algebraic.hpp"

#include "impasse/analysis.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace impasse {

std::vector<std::string> StateLayout::manifest() const {
    std::vector<std::string> out;
    for (int k = 0; k < generators; ++k) {
        out.push_back("gen" + std::to_string(k + 1) + " -> [" + std::to_string(gen_offset(k)) + "," +
                      std::to_string(gen_offset(k) + 6) + ") delta omega ed1 eq1 ed2 eq2");
    }
    for (int k = 0; k < motors; ++k) {
        out.push_back("motor" + std::to_string(k + 1) + " -> [" + std::to_string(motor_offset(k)) + "," +
                      std::to_string(motor_offset(k) + 3) + ") sigma ed1 eq1");
    }
    return out;
}

AlgebraicState SystemState::algebraic() const {
    const auto n = y.size() / 2;
    return {y.head(n), y.tail(n)};
}

GeneratorState gen_state_at(const RealVector& x, const StateLayout& layout, int k) {
    const int o = layout.gen_offset(k);
    return {x[o], x[o + 1], x[o + 2], x[o + 3], x[o + 4], x[o + 5]};
}

void set_gen_state(RealVector& x, const StateLayout& layout, int k, const GeneratorState& s) {
    const int o = layout.gen_offset(k);
    x[o] = s.delta;
    x[o + 1] = s.omega;
    x[o + 2] = s.ed1;
    x[o + 3] = s.eq1;
    x[o + 4] = s.ed2;
    x[o + 5] = s.eq2;
}

MotorState motor_state_at(const RealVector& x, const StateLayout& layout, int k) {
    const int o = layout.motor_offset(k);
    return {x[o], x[o + 1], x[o + 2]};
}

void set_motor_state(RealVector& x, const StateLayout& layout, int k, const MotorState& s) {
    const int o = layout.motor_offset(k);
    x[o] = s.sigma;
    x[o + 1] = s.ed1;
    x[o + 2] = s.eq1;
}

// --- DaeSystem -------------------------------------------------------------

DaeSystem::DaeSystem(std::shared_ptr<const NetworkCase> network, ComplexVector extra_shunts, DeviceInputs inputs)
    : case_(std::move(network)), extra_shunts_(std::move(extra_shunts)), inputs_(std::move(inputs)) {
    layout_.n = case_->bus_count();
    layout_.generators = case_->generator_count();
    layout_.motors = static_cast<int>(case_->motors.size());
    if (extra_shunts_.size() == 0) {
        extra_shunts_ = ComplexVector::Zero(layout_.n);
    }
    if (extra_shunts_.size() != layout_.n) {
        throw Error(ErrorKind::Input, "DaeSystem: extra shunt vector has the wrong length");
    }
    motor_online_.assign(layout_.motors, true);
    static_scale_.assign(case_->static_loads.size(), 1.0);
    rebuild();
}

void DaeSystem::rebuild() {
    ComplexMatrix ybus = build_ybus(*case_);
    ybus.diagonal() += extra_shunts_;
    adm_ = build_augmented(*case_, ybus);
}

void DaeSystem::add_shunt(int bus, Complex y) {
    if (bus < 0 || bus >= layout_.n) {
        throw Error(ErrorKind::Network, "add_shunt: bus index out of range");
    }
    extra_shunts_[bus] += y;
    rebuild();
}

double DaeSystem::static_p0(int k) const { return case_->static_loads[k].p0 * static_scale_[k]; }
double DaeSystem::static_q0(int k) const { return case_->static_loads[k].q0 * static_scale_[k]; }

void DaeSystem::internal_buses(const RealVector& x, RealVector& theta_g, RealVector& v_g) const {
    const int g = layout_.generators;
    theta_g.resize(g);
    v_g.resize(g);
    for (int k = 0; k < g; ++k) {
        const auto e = gen_internal_voltage(gen_state_at(x, layout_, k), case_->generators[k]);
        theta_g[k] = e.angle;
        v_g[k] = e.magnitude;
    }
}

RealVector DaeSystem::f(const RealVector& x, const RealVector& y) const {
    const int n = layout_.n;
    RealVector dx(layout_.nx());
    const double wb = case_->omega_base();
    for (int k = 0; k < layout_.generators; ++k) {
        const auto& p = case_->generators[k];
        const int i = p.terminal_bus;
        const auto d = gen_derivatives(gen_state_at(x, layout_, k), y[i], y[n + i], p, inputs_.generators[k], wb);
        for (int s = 0; s < 6; ++s) {
            dx[layout_.gen_offset(k) + s] = d[s];
        }
    }
    for (int k = 0; k < layout_.motors; ++k) {
        const int o = layout_.motor_offset(k);
        if (!motor_online_[k]) {
            dx.segment(o, 3).setZero();
            continue;
        }
        const auto& p = case_->motors[k];
        const auto d = motor_derivatives(motor_state_at(x, layout_, k), y[p.bus], y[n + p.bus], p, wb);
        for (int s = 0; s < 3; ++s) {
            dx[o + s] = d[s];
        }
    }
    return dx;
}

// --- residuals and Jacobian -----------------------------------------------

namespace {

struct BusLoads {
    RealVector p0, q0, alpha, beta;  // static, zero where absent
    RealVector g_mot, b_mot;         // motor equivalent admittance
};

BusLoads bus_loads(const RealVector& x, const DaeSystem& sys) {
    const int n = sys.layout().n;
    const auto& c = sys.network();
    BusLoads l{RealVector::Zero(n), RealVector::Zero(n), RealVector::Zero(n), RealVector::Zero(n),
               RealVector::Zero(n), RealVector::Zero(n)};
    for (std::size_t k = 0; k < c.static_loads.size(); ++k) {
        const auto& s = c.static_loads[k];
        l.p0[s.bus] = sys.static_p0(static_cast<int>(k));
        l.q0[s.bus] = sys.static_q0(static_cast<int>(k));
        l.alpha[s.bus] = s.alpha;
        l.beta[s.bus] = s.beta;
    }
    for (int k = 0; k < sys.layout().motors; ++k) {
        if (!sys.motor_online(k)) {
            continue;
        }
        const auto& m = c.motors[k];
        const Complex y = motor_equiv_admittance(motor_state_at(x, sys.layout(), k).sigma, m);
        l.g_mot[m.bus] = y.real();
        l.b_mot[m.bus] = y.imag();
    }
    return l;
}

void check_voltages(const RealVector& y, int n, const char* where) {
    for (int i = 0; i < n; ++i) {
        if (!(y[n + i] > 0.0)) {
            throw Error(ErrorKind::Assumption2, std::string(where) + ": V at bus " + std::to_string(i + 1) +
                                                    " is " + std::to_string(y[n + i]));
        }
    }
}

struct FullBuses {
    RealVector theta;
    RealVector v;
};

FullBuses full_buses(const RealVector& x, const RealVector& y, const DaeSystem& sys) {
    const int n = sys.layout().n;
    const int g = sys.layout().generators;
    FullBuses b{RealVector(n + g), RealVector(n + g)};
    b.theta.head(n) = y.head(n);
    b.v.head(n) = y.tail(n);
    RealVector tg, vg;
    sys.internal_buses(x, tg, vg);
    b.theta.tail(g) = tg;
    b.v.tail(g) = vg;
    return b;
}

}  // namespace

RealVector residuals(const RealVector& x, const RealVector& y, const DaeSystem& sys) {
    const int n = sys.layout().n;
    check_voltages(y, n, "residuals");
    const auto& ya = sys.admittances().y_aug;
    const int total = static_cast<int>(ya.rows());
    const auto b = full_buses(x, y, sys);
    const auto loads = bus_loads(x, sys);

    RealVector r(2 * n);
    for (int i = 0; i < n; ++i) {
        const double vi = b.v[i];
        double p = vi * vi * ya(i, i).real();
        double q = -vi * vi * ya(i, i).imag();
        for (int j = 0; j < total; ++j) {
            if (j == i || ya(i, j) == Complex(0.0, 0.0)) {
                continue;
            }
            const double gij = ya(i, j).real(), bij = ya(i, j).imag();
            const double tij = b.theta[i] - b.theta[j];
            const double c = std::cos(tij), s = std::sin(tij);
            const double vv = vi * b.v[j];
            p += vv * (gij * c + bij * s);
            q -= vv * (bij * c - gij * s);
        }
        p += loads.p0[i] * std::pow(vi, loads.alpha[i]) + loads.g_mot[i] * vi * vi;
        q += loads.q0[i] * std::pow(vi, loads.beta[i]) - loads.b_mot[i] * vi * vi;
        r[i] = p;
        r[n + i] = q;
    }
    return r;
}

RealMatrix algebraic_jacobian(const RealVector& x, const RealVector& y, const DaeSystem& sys) {
    const int n = sys.layout().n;
    check_voltages(y, n, "algebraic_jacobian");
    const auto& ya = sys.admittances().y_aug;
    const int total = static_cast<int>(ya.rows());
    const auto b = full_buses(x, y, sys);
    const auto loads = bus_loads(x, sys);

    RealMatrix jac = RealMatrix::Zero(2 * n, 2 * n);
    auto pt = jac.topLeftCorner(n, n);
    auto pv = jac.topRightCorner(n, n);
    auto qt = jac.bottomLeftCorner(n, n);
    auto qv = jac.bottomRightCorner(n, n);

    for (int i = 0; i < n; ++i) {
        const double vi = b.v[i];
        double pt_ii = 0.0, pv_ii = 0.0, qt_ii = 0.0, qv_ii = 0.0;
        for (int j = 0; j < total; ++j) {
            if (j == i || ya(i, j) == Complex(0.0, 0.0)) {
                continue;
            }
            const double gij = ya(i, j).real(), bij = ya(i, j).imag();
            const double tij = b.theta[i] - b.theta[j];
            const double c = std::cos(tij), s = std::sin(tij);
            const double vj = b.v[j];
            const double in_phase = gij * c + bij * s;    // |Y| sin(theta_ij - phi_ij)
            const double quadrature = bij * c - gij * s;  // |Y| cos(theta_ij - phi_ij)
            pt_ii += vi * vj * quadrature;
            pv_ii += vj * in_phase;
            qt_ii += vi * vj * in_phase;
            qv_ii -= vj * quadrature;
            if (j < n) {
                pt(i, j) = -vi * vj * quadrature;
                pv(i, j) = vi * in_phase;
                qt(i, j) = -vi * vj * in_phase;
                qv(i, j) = -vi * quadrature;
            }
        }
        const double alpha = loads.alpha[i], beta = loads.beta[i];
        pt(i, i) = pt_ii;
        pv(i, i) = pv_ii + 2.0 * vi * (ya(i, i).real() + loads.g_mot[i]) +
                   alpha * loads.p0[i] * std::pow(vi, alpha - 1.0);
        qt(i, i) = qt_ii;
        qv(i, i) = qv_ii - 2.0 * vi * (ya(i, i).imag() + loads.b_mot[i]) +
                   beta * loads.q0[i] * std::pow(vi, beta - 1.0);
    }
    return jac;
}

// --- Newton ----------------------------------------------------------------

NewtonResult solve_algebraic(const RealVector& x, const RealVector& y_guess, const DaeSystem& sys,
                             const NewtonOptions& options) {
    const int n = sys.layout().n;
    NewtonResult result;
    result.y = y_guess;
    auto below_floor = [&](const RealVector& y) { return (y.tail(n).array() <= options.v_floor).any(); };
    if (below_floor(result.y)) {
        throw Error(ErrorKind::Assumption2, "solve_algebraic: initial guess violates the voltage floor");
    }

    RealVector r = residuals(x, result.y, sys);
    double norm = r.lpNorm<Eigen::Infinity>();
    result.residual_history.push_back(norm);
    RealMatrix jac;
    for (int it = 0; it < options.max_iter; ++it) {
        if (norm <= options.tolerance) {
            return result;
        }
        jac = algebraic_jacobian(x, result.y, sys);
        const RealVector dy = jac.partialPivLu().solve(-r);
        if (!dy.allFinite()) {
            break;
        }
        RealVector candidate = result.y + dy;
        if (below_floor(candidate)) {
            candidate = result.y + 0.5 * dy;
            if (below_floor(candidate)) {
                throw Error(ErrorKind::Assumption2,
                            "solve_algebraic: Newton iterate dropped below the voltage floor");
            }
        }
        RealVector r_new = residuals(x, candidate, sys);
        double norm_new = r_new.lpNorm<Eigen::Infinity>();
        if (norm_new > norm) {
            RealVector half = result.y + 0.5 * dy;
            if (!below_floor(half)) {
                RealVector r_half = residuals(x, half, sys);
                const double norm_half = r_half.lpNorm<Eigen::Infinity>();
                if (norm_half < norm_new) {
                    candidate = std::move(half);
                    r_new = std::move(r_half);
                    norm_new = norm_half;
                }
            }
        }
        result.y = std::move(candidate);
        r = std::move(r_new);
        norm = norm_new;
        result.iterations = it + 1;
        result.residual_history.push_back(norm);
    }
    if (norm <= options.tolerance) {
        return result;
    }
    if (jac.size() == 0) {
        jac = algebraic_jacobian(x, result.y, sys);
    }
    throw NewtonFailure("solve_algebraic: no convergence (residual " + std::to_string(norm) + ")", result.y,
                        sigma_min(jac));
}

// --- initialization --------------------------------------------------------

namespace {

struct PowerFlowLayout {
    int n = 0;
    int slack = -1;
    std::vector<int> theta_index;  // bus -> unknown slot or -1
    std::vector<int> v_index;
    std::vector<int> sigma_index;  // motor -> slot
    std::vector<int> p_rows;       // buses with an active balance row
    std::vector<int> q_rows;
    int size = 0;
};

struct PowerFlowProblem {
    const NetworkCase& c;
    ComplexMatrix ybus;
    PowerFlowLayout lay;
    std::vector<double> p_gen;  // scheduled injection (PV buses)
    RealVector v_fixed;

    void unpack(const RealVector& z, RealVector& theta, RealVector& v, RealVector& sigma) const {
        for (int i = 0; i < lay.n; ++i) {
            theta[i] = lay.theta_index[i] >= 0 ? z[lay.theta_index[i]] : 0.0;
            v[i] = lay.v_index[i] >= 0 ? z[lay.v_index[i]] : v_fixed[i];
        }
        for (std::size_t k = 0; k < c.motors.size(); ++k) {
            sigma[k] = z[lay.sigma_index[k]];
        }
    }

    // Complex power leaving each bus into the network plus local load.
    ComplexVector bus_balance(const RealVector& theta, const RealVector& v, const RealVector& sigma) const {
        ComplexVector u(lay.n);
        for (int i = 0; i < lay.n; ++i) {
            u[i] = std::polar(v[i], theta[i]);
        }
        ComplexVector s = u.cwiseProduct((ybus * u).conjugate());
        for (const auto& l : c.static_loads) {
            const auto [p, q] = static_load_power(v[l.bus], l);
            s[l.bus] += Complex(p, q);
        }
        for (std::size_t k = 0; k < c.motors.size(); ++k) {
            const auto& m = c.motors[k];
            const auto [p, q] = motor_power(sigma[k], v[m.bus], m);
            s[m.bus] += Complex(p, q);
        }
        return s;
    }

    RealVector residual(const RealVector& z) const {
        RealVector theta(lay.n), v(lay.n), sigma(c.motors.size());
        unpack(z, theta, v, sigma);
        if ((v.array() <= 0.0).any() || (sigma.array() <= 0.0).any()) {
            return RealVector::Constant(lay.size, std::numeric_limits<double>::quiet_NaN());
        }
        const ComplexVector s = bus_balance(theta, v, sigma);
        RealVector r(lay.size);
        int row = 0;
        for (int i : lay.p_rows) {
            r[row++] = s[i].real() - p_gen[i];
        }
        for (int i : lay.q_rows) {
            r[row++] = s[i].imag();
        }
        for (std::size_t k = 0; k < c.motors.size(); ++k) {
            const auto& m = c.motors[k];
            r[row++] = motor_steady_torque(sigma[k], v[m.bus], m) - m.load_torque(sigma[k]);
        }
        return r;
    }
};

}  // namespace

Equilibrium initialize_equilibrium(std::shared_ptr<const NetworkCase> network, const ComplexVector& extra_shunts) {
    const NetworkCase& c = *network;
    const int n = c.bus_count();
    ComplexVector shunts = extra_shunts.size() ? extra_shunts : ComplexVector::Zero(n);

    PowerFlowProblem pf{c, build_ybus(c), {}, std::vector<double>(n, 0.0), RealVector::Ones(n)};
    pf.ybus.diagonal() += shunts;
    auto& lay = pf.lay;
    lay.n = n;
    lay.theta_index.assign(n, -1);
    lay.v_index.assign(n, -1);
    std::vector<int> gen_at(n, -1);
    for (int k = 0; k < c.generator_count(); ++k) {
        gen_at[c.generators[k].terminal_bus] = k;
        if (c.generators[k].slack) {
            lay.slack = c.generators[k].terminal_bus;
        }
    }
    if (lay.slack < 0) {
        throw Error(ErrorKind::Input, "initialize_equilibrium: the case needs a slack generator");
    }
    for (int i = 0; i < n; ++i) {
        if (i != lay.slack) {
            lay.theta_index[i] = lay.size++;
            lay.p_rows.push_back(i);
        }
    }
    for (int i = 0; i < n; ++i) {
        if (gen_at[i] < 0) {
            lay.v_index[i] = lay.size++;
            lay.q_rows.push_back(i);
        } else {
            pf.v_fixed[i] = c.generators[gen_at[i]].v_set;
            pf.p_gen[i] = c.generators[gen_at[i]].p_set;
        }
    }
    for (std::size_t k = 0; k < c.motors.size(); ++k) {
        lay.sigma_index.push_back(lay.size++);
    }

    RealVector z = RealVector::Zero(lay.size);
    for (int i = 0; i < n; ++i) {
        if (lay.v_index[i] >= 0) {
            z[lay.v_index[i]] = 1.0;
        }
    }
    for (std::size_t k = 0; k < c.motors.size(); ++k) {
        double sigma0 = 0.01;
        try {
            sigma0 = motor_equilibrium_slip(1.0, c.motors[k]);
        } catch (const Error&) {
        }
        z[lay.sigma_index[k]] = sigma0;
    }

    int iterations = 0;
    RealVector r = pf.residual(z);
    for (; iterations < 50 && r.lpNorm<Eigen::Infinity>() > 1e-12; ++iterations) {
        RealMatrix jac(lay.size, lay.size);
        for (int col = 0; col < lay.size; ++col) {
            const double h = 1e-7 * std::max(1.0, std::abs(z[col]));
            RealVector zp = z, zm = z;
            zp[col] += h;
            zm[col] -= h;
            jac.col(col) = (pf.residual(zp) - pf.residual(zm)) / (2.0 * h);
        }
        RealVector dz = jac.fullPivLu().solve(-r);
        if (!dz.allFinite() || !r.allFinite()) {
            throw Error(ErrorKind::Numerical, "initialize_equilibrium: power flow diverged");
        }
        // Backtrack to keep slips and voltages positive and the residual decreasing.
        double scale = 1.0;
        for (int it = 0; it < 30; ++it) {
            const RealVector rt = pf.residual(z + scale * dz);
            if (rt.allFinite() && rt.lpNorm<Eigen::Infinity>() < r.lpNorm<Eigen::Infinity>()) {
                break;
            }
            scale *= 0.5;
        }
        z += scale * dz;
        r = pf.residual(z);
    }
    if (!(r.lpNorm<Eigen::Infinity>() <= 1e-10)) {
        throw Error(ErrorKind::Numerical, "initialize_equilibrium: power flow did not converge");
    }

    RealVector theta(n), v(n), sigma(c.motors.size());
    pf.unpack(z, theta, v, sigma);
    for (std::size_t k = 0; k < c.motors.size(); ++k) {
        if (!(sigma[k] > 0.0 && sigma[k] < 1.0)) {
            throw Error(ErrorKind::Numerical, "initialize_equilibrium: motor " + std::to_string(k + 1) +
                                                  " equilibrium slip outside (0, 1)");
        }
    }
    const ComplexVector balance = pf.bus_balance(theta, v, sigma);

    Equilibrium eq;
    StateLayout layout{n, c.generator_count(), static_cast<int>(c.motors.size())};
    eq.state.x = RealVector::Zero(layout.nx());
    eq.state.y.resize(2 * n);
    eq.state.y.head(n) = theta;
    eq.state.y.tail(n) = v;
    eq.state.t = 0.0;
    eq.inputs.generators.resize(c.generator_count());
    for (int k = 0; k < c.generator_count(); ++k) {
        const int i = c.generators[k].terminal_bus;
        auto [gs, in] = gen_initialize(theta[i], v[i], balance[i], c.generators[k]);
        set_gen_state(eq.state.x, layout, k, gs);
        eq.inputs.generators[k] = in;
    }
    for (std::size_t k = 0; k < c.motors.size(); ++k) {
        const auto& m = c.motors[k];
        set_motor_state(eq.state.x, layout, static_cast<int>(k), motor_steady_state(sigma[k], theta[m.bus], v[m.bus], m));
    }

    DaeSystem sys(network, shunts, eq.inputs);
    eq.state.y = solve_algebraic(eq.state.x, eq.state.y, sys).y;
    eq.power_flow_iterations = iterations;
    return eq;
}

std::string dump_matrix(const RealMatrix& m) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            os << (j ? " " : "") << m(i, j);
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace impasse
