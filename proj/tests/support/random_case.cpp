#include "random_case.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace impasse::testing {

std::shared_ptr<NetworkCase> random_case(const RandomCaseOptions& o, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    auto c = std::make_shared<NetworkCase>();
    c->name = "random";
    const int n = o.buses;
    for (int i = 0; i < n; ++i) {
        c->buses.push_back({i + 1, "b" + std::to_string(i + 1), BusKind::LoadOnly, {0.0, 0.0}});
    }
    auto add_line = [&](int a, int b) {
        const double r = o.lossless ? 0.0 : uniform(0.002, 0.04);
        const double x = uniform(0.05, 0.3);
        c->lines.push_back({a, b, 1.0 / Complex(r, x)});
        if (!o.lossless) {
            const double half = 0.5 * uniform(0.0, 0.2);
            c->buses[a].shunt += Complex(0.0, half);
            c->buses[b].shunt += Complex(0.0, half);
        }
    };
    for (int i = 1; i < n; ++i) {
        add_line(std::uniform_int_distribution<int>(0, i - 1)(rng), i);
    }
    for (int k = 0; k < n / 2; ++k) {
        const int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
        const int b = std::uniform_int_distribution<int>(0, n - 1)(rng);
        if (a != b) {
            add_line(a, b);
        }
    }
    for (int k = 0; k < o.generators; ++k) {
        GeneratorParams g;
        g.terminal_bus = k;
        g.ra = o.lossless ? 0.0 : uniform(0.0, 0.005);
        g.xd = uniform(0.8, 1.6);
        g.xq = uniform(0.6, g.xd);
        g.xd1 = uniform(0.15, 0.3);
        g.xq1 = uniform(0.3, 0.5);
        g.xd2 = g.xq2 = uniform(0.08, 0.14);
        g.Td01 = uniform(4.0, 8.0);
        g.Tq01 = uniform(0.4, 1.0);
        g.M = uniform(4.0, 20.0);
        g.slack = k == 0;
        g.p_set = uniform(0.2, 0.8);
        g.v_set = uniform(1.0, 1.05);
        c->generators.push_back(g);
    }
    for (int k = 0; k < o.motors && o.generators + k < n; ++k) {
        MotorParams m;
        m.bus = o.generators + k;
        m.rs = uniform(0.01, 0.03);
        m.xs = uniform(0.08, 0.2);
        m.rr = uniform(0.02, 0.06);
        m.xr = uniform(0.08, 0.2);
        m.xm = uniform(2.0, 4.0);
        m.Hm = uniform(0.3, 1.0);
        m.c = uniform(0.1, 0.3);
        c->motors.push_back(m);
    }
    for (int i = o.generators; i < n; ++i) {
        StaticLoad l;
        l.bus = i;
        if (o.lossless) {
            l.q0 = uniform(0.0, 0.4);
            l.beta = uniform(1.0, 2.0);
        } else {
            l.p0 = uniform(0.1, 0.5);
            l.q0 = uniform(0.0, 0.2);
            l.alpha = uniform(0.0, 2.0);
            l.beta = uniform(0.0, 2.0);
        }
        c->static_loads.push_back(l);
    }
    validate_case(*c);
    return c;
}

void random_state(const DaeSystem& sys, std::mt19937_64& rng, RealVector& x, RealVector& y, double v_lo,
                  double v_hi) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    const auto& layout = sys.layout();
    x = RealVector::Zero(layout.nx());
    for (int k = 0; k < layout.generators; ++k) {
        GeneratorState g;
        g.delta = uniform(-std::numbers::pi, std::numbers::pi);
        g.omega = uniform(0.98, 1.02);
        g.ed1 = uniform(-0.5, 0.5);
        g.eq1 = uniform(0.5, 1.2);
        g.ed2 = uniform(-0.5, 0.5);
        g.eq2 = uniform(0.5, 1.2);
        set_gen_state(x, layout, k, g);
    }
    for (int k = 0; k < layout.motors; ++k) {
        set_motor_state(x, layout, k, {uniform(0.01, 0.5), uniform(-1.0, 1.0), uniform(-1.0, 1.0)});
    }
    y.resize(layout.ny());
    for (int i = 0; i < layout.n; ++i) {
        y[i] = uniform(-std::numbers::pi, std::numbers::pi);
        y[layout.n + i] = uniform(v_lo, v_hi);
    }
}

DaeSystem bare_system(std::shared_ptr<const NetworkCase> c) {
    DeviceInputs inputs;
    inputs.generators.resize(c->generators.size());
    return DaeSystem(c, ComplexVector::Zero(c->bus_count()), inputs);
}

RealMatrix fd_jacobian(const RealVector& x, const RealVector& y, const DaeSystem& sys, double h) {
    const auto m = y.size();
    RealMatrix j(m, m);
    for (Eigen::Index k = 0; k < m; ++k) {
        RealVector yp = y, ym = y;
        yp[k] += h;
        ym[k] -= h;
        j.col(k) = (residuals(x, yp, sys) - residuals(x, ym, sys)) / (2.0 * h);
    }
    return j;
}

double relative_error(const RealMatrix& a, const RealMatrix& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

std::shared_ptr<NetworkCase> SingularPath::at(double s) const {
    auto c = std::make_shared<NetworkCase>(*base);
    auto& l = c->static_loads[load];
    const double v = y[c->bus_count() + l.bus];
    const double e = start + s * (end - start);
    if (reactive) {
        l.q0 *= std::pow(v, l.beta - e);
        l.beta = e;
    } else {
        l.p0 *= std::pow(v, l.alpha - e);
        l.alpha = e;
    }
    return c;
}

SingularPath singular_path(const ManifoldSample& sample) {
    SingularPath best;
    best.base = sample.network;
    best.x = sample.x;
    best.y = sample.y;
    double best_step = std::numeric_limits<double>::infinity();
    auto det_at = [&](const SingularPath& p, double s) {
        return algebraic_jacobian(p.x, p.y, bare_system(p.at(s))).determinant();
    };
    for (std::size_t k = 0; k < sample.network->static_loads.size(); ++k) {
        for (bool reactive : {false, true}) {
            SingularPath p = best;
            p.load = static_cast<int>(k);
            p.reactive = reactive;
            const auto& l = sample.network->static_loads[k];
            p.start = reactive ? l.beta : l.alpha;
            p.end = p.start + 1.0;
            const double d0 = det_at(p, 0.0), d1 = det_at(p, 1.0);
            if (d1 == d0) {
                continue;
            }
            const double step = d0 / (d0 - d1);
            if (std::abs(step) < best_step) {
                best_step = std::abs(step);
                p.end = p.start + step;
                best = p;
            }
        }
    }
    if (!std::isfinite(best_step)) {
        throw Error(ErrorKind::NotApplicable, "singular_path: no exponent moves the Jacobian determinant");
    }
    return best;
}

}  // namespace impasse::testing
