#include "impasse/devices.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace impasse {

namespace {

void require_positive(double value, const std::string& what, const std::string& name) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw Error(ErrorKind::Input, name + ": " + what + " must be positive");
    }
}

void require_voltage(double v, const char* where) {
    if (!(v > 0.0)) {
        throw Error(ErrorKind::Assumption2,
                    std::string(where) + ": bus voltage " + std::to_string(v) + " is not positive");
    }
}

// Rotation between the machine d-q frame and the network frame.
Complex to_network(Complex dq, double delta) { return dq * std::polar(1.0, delta - std::numbers::pi / 2); }
Complex to_machine(Complex net, double delta) { return net * std::polar(1.0, std::numbers::pi / 2 - delta); }

double gamma_d(const GeneratorParams& p) { return p.Td02 * p.xd2 * (p.xd - p.xd1) / (p.Td01 * p.xd1); }
double gamma_q(const GeneratorParams& p) { return p.Tq02 * p.xq2 * (p.xq - p.xq1) / (p.Tq01 * p.xq1); }

}  // namespace

void validate_generator(const GeneratorParams& p, const std::string& name) {
    if (p.xd2 != p.xq2) {
        throw Error(ErrorKind::Assumption1, name + ": subtransient reactances differ (xd2 = " + std::to_string(p.xd2) +
                                                ", xq2 = " + std::to_string(p.xq2) + ")");
    }
    if (!(p.ra >= 0.0)) {
        throw Error(ErrorKind::Input, name + ": ra must be non-negative");
    }
    for (auto [value, what] : {std::pair{p.xd, "xd"}, {p.xd1, "xd1"}, {p.xd2, "xd2"}, {p.xq, "xq"}, {p.xq1, "xq1"},
                               {p.Td01, "Td01"}, {p.Td02, "Td02"}, {p.Tq01, "Tq01"}, {p.Tq02, "Tq02"}, {p.M, "M"}}) {
        require_positive(value, what, name);
    }
    if (!(p.D >= 0.0)) {
        throw Error(ErrorKind::Input, name + ": D must be non-negative");
    }
}

void validate_motor(const MotorParams& p, const std::string& name) {
    if (!(p.rs >= 0.0)) {
        throw Error(ErrorKind::Input, name + ": rs must be non-negative");
    }
    for (auto [value, what] : {std::pair{p.xs, "xs"}, {p.xr, "xr"}, {p.xm, "xm"}, {p.rr, "rr"}, {p.Hm, "Hm"}}) {
        require_positive(value, what, name);
    }
}

InternalVoltage gen_internal_voltage(const GeneratorState& s, const GeneratorParams&) {
    const Complex e = to_network(Complex(s.ed2, s.eq2), s.delta);
    return {std::abs(e), std::arg(e)};
}

Complex gen_stator_current(const GeneratorState& s, double theta, double v, const GeneratorParams& p) {
    const auto e = gen_internal_voltage(s, p);
    return (std::polar(e.magnitude, e.angle) - std::polar(v, theta)) * p.stator_admittance();
}

GeneratorDerivatives gen_derivatives(const GeneratorState& s, double theta, double v, const GeneratorParams& p,
                                     const GeneratorInputs& in, double omega_base) {
    require_voltage(v, "gen_derivatives");
    const Complex v_dq = to_machine(std::polar(v, theta), s.delta);
    const Complex i_dq = (Complex(s.ed2, s.eq2) - v_dq) / Complex(p.ra, p.xd2);
    const double vd = v_dq.real(), vq = v_dq.imag();
    const double id = i_dq.real(), iq = i_dq.imag();
    const double pe = (vq + p.ra * iq) * iq + (vd + p.ra * id) * id;
    const double gd = gamma_d(p), gq = gamma_q(p);

    GeneratorDerivatives d{};
    d[0] = omega_base * (s.omega - 1.0);
    d[1] = (in.pm - pe - p.D * (s.omega - 1.0)) / p.M;
    d[2] = (-s.ed1 + (p.xq - p.xq1 - gq) * iq) / p.Tq01;
    d[3] = (-s.eq1 - (p.xd - p.xd1 - gd) * id + in.vf) / p.Td01;
    d[4] = (-s.ed2 + s.ed1 + (p.xq1 - p.xq2 + gq) * iq) / p.Tq02;
    d[5] = (-s.eq2 + s.eq1 - (p.xd1 - p.xd2 + gd) * id) / p.Td02;
    return d;
}

std::pair<GeneratorState, GeneratorInputs> gen_initialize(double theta, double v, Complex s_injected,
                                                          const GeneratorParams& p) {
    require_voltage(v, "gen_initialize");
    const Complex vt = std::polar(v, theta);
    const Complex current = std::conj(s_injected / vt);
    const double delta = std::arg(vt + Complex(p.ra, p.xq) * current);

    const Complex i_dq = to_machine(current, delta);
    const Complex v_dq = to_machine(vt, delta);
    const Complex e2 = v_dq + Complex(p.ra, p.xd2) * i_dq;
    const double id = i_dq.real(), iq = i_dq.imag();
    const double gd = gamma_d(p), gq = gamma_q(p);

    GeneratorState s;
    s.delta = delta;
    s.omega = 1.0;
    s.ed2 = e2.real();
    s.eq2 = e2.imag();
    s.ed1 = (p.xq - p.xq1 - gq) * iq;
    s.eq1 = s.eq2 + (p.xd1 - p.xd2 + gd) * id;

    GeneratorInputs in;
    in.vf = s.eq1 + (p.xd - p.xd1 - gd) * id;
    in.pm = (v_dq.imag() + p.ra * iq) * iq + (v_dq.real() + p.ra * id) * id;
    return {s, in};
}

Complex motor_equiv_admittance(double sigma, const MotorParams& p) {
    if (!(sigma > 0.0)) {
        throw Error(ErrorKind::Domain, "motor_equiv_admittance: slip must be positive, got " + std::to_string(sigma));
    }
    const Complex rotor(p.rr / sigma, p.xr);
    const Complex magnetizing(0.0, p.xm);
    const Complex parallel = magnetizing * rotor / (rotor + magnetizing);
    return 1.0 / (Complex(p.rs, p.xs) + parallel);
}

std::pair<double, double> motor_power(double sigma, double v, const MotorParams& p) {
    const Complex y = motor_equiv_admittance(sigma, p);
    return {y.real() * v * v, -y.imag() * v * v};
}

Complex motor_current(const MotorState& s, double theta, double v, const MotorParams& p) {
    return (std::polar(v, theta) - Complex(s.ed1, s.eq1)) / Complex(p.rs, p.transient_reactance());
}

double motor_electrical_torque(const MotorState& s, double theta, double v, const MotorParams& p) {
    const Complex i = motor_current(s, theta, v, p);
    return (Complex(s.ed1, s.eq1) * std::conj(i)).real();
}

MotorDerivatives motor_derivatives(const MotorState& s, double theta, double v, const MotorParams& p,
                                   double omega_base) {
    require_voltage(v, "motor_derivatives");
    const Complex e(s.ed1, s.eq1);
    const Complex i = motor_current(s, theta, v, p);
    const double x0 = p.open_circuit_reactance();
    const double x1 = p.transient_reactance();
    const double t0 = (p.xr + p.xm) / (omega_base * p.rr);
    const double te = (e * std::conj(i)).real();
    const Complex de = -kJ * omega_base * s.sigma * e - (e - kJ * (x0 - x1) * i) / t0;

    MotorDerivatives d{};
    d[0] = (p.load_torque(s.sigma) - te) / (2.0 * p.Hm);
    d[1] = de.real();
    d[2] = de.imag();
    return d;
}

MotorState motor_steady_state(double sigma, double theta, double v, const MotorParams& p) {
    const Complex vt = std::polar(v, theta);
    const Complex i = motor_equiv_admittance(sigma, p) * vt;
    const Complex e = vt - Complex(p.rs, p.transient_reactance()) * i;
    return {sigma, e.real(), e.imag()};
}

double motor_steady_torque(double sigma, double v, const MotorParams& p) {
    const MotorState s = motor_steady_state(sigma, 0.0, v, p);
    return motor_electrical_torque(s, 0.0, v, p);
}

double motor_equilibrium_slip(double v, const MotorParams& p) {
    auto mismatch = [&](double sigma) { return motor_steady_torque(sigma, v, p) - p.load_torque(sigma); };
    // Log-spaced scan for the first sign change, then bisection.
    constexpr int kScan = 400;
    double lo = 1e-7;
    double f_lo = mismatch(lo);
    for (int k = 1; k <= kScan; ++k) {
        const double hi = std::pow(10.0, -7.0 + 7.0 * k / kScan);
        const double f_hi = mismatch(hi);
        if ((f_lo < 0.0) != (f_hi < 0.0) || f_hi == 0.0) {
            double a = lo, b = hi, fa = f_lo;
            for (int it = 0; it < 200 && b - a > 1e-15 * b; ++it) {
                const double m = 0.5 * (a + b);
                const double fm = mismatch(m);
                if ((fm < 0.0) == (fa < 0.0)) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            return 0.5 * (a + b);
        }
        lo = hi;
        f_lo = f_hi;
    }
    throw Error(ErrorKind::Numerical, "motor_equilibrium_slip: no torque balance in (0, 1) at V = " + std::to_string(v));
}

std::pair<double, double> static_load_power(double v, const StaticLoad& load) {
    require_voltage(v, "static_load_power");
    return {load.p0 * std::pow(v, load.alpha), load.q0 * std::pow(v, load.beta)};
}

std::pair<double, double> static_load_equiv(double p, double q, double v) {
    require_voltage(v, "static_load_equiv");
    return {p / (v * v), -q / (v * v)};
}

}  // namespace impasse
