#include "impasse/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>

namespace impasse {

double sigma_min(const ComplexMatrix& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    return svd.singularValues().minCoeff();
}

double sigma_min(const RealMatrix& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<RealMatrix> svd(m);
    return svd.singularValues().minCoeff();
}

EquivalentLoadSnapshot equivalent_snapshot(const RealVector& x, const RealVector& y, const DaeSystem& sys) {
    const int n = sys.layout().n;
    const auto& c = sys.network();
    EquivalentLoadSnapshot s;
    s.y_mot = ComplexVector::Zero(n);
    s.g_stat = RealVector::Zero(n);
    s.b_stat = RealVector::Zero(n);
    s.alpha = RealVector::Zero(n);
    s.beta = RealVector::Zero(n);
    s.theta = y.head(n);
    s.v = y.tail(n);
    for (int i = 0; i < n; ++i) {
        if (!(s.v[i] > 0.0)) {
            throw Error(ErrorKind::Assumption2, "equivalent_snapshot: V at bus " + std::to_string(i + 1) +
                                                    " is not positive");
        }
    }
    for (std::size_t k = 0; k < c.static_loads.size(); ++k) {
        const auto& l = c.static_loads[k];
        StaticLoad scaled = l;
        scaled.p0 = sys.static_p0(static_cast<int>(k));
        scaled.q0 = sys.static_q0(static_cast<int>(k));
        const auto [p, q] = static_load_power(s.v[l.bus], scaled);
        const auto [g, b] = static_load_equiv(p, q, s.v[l.bus]);
        s.g_stat[l.bus] = g;
        s.b_stat[l.bus] = b;
        s.alpha[l.bus] = l.alpha;
        s.beta[l.bus] = l.beta;
    }
    for (int k = 0; k < sys.layout().motors; ++k) {
        if (sys.motor_online(k)) {
            const auto& m = c.motors[k];
            s.y_mot[m.bus] = motor_equiv_admittance(motor_state_at(x, sys.layout(), k).sigma, m);
        }
    }
    return s;
}

ComplexMatrix build_y1(const AdmittanceSet& adm, const EquivalentLoadSnapshot& snap) {
    ComplexMatrix y1 = adm.y_bus + adm.y_gen;
    for (Eigen::Index i = 0; i < y1.rows(); ++i) {
        y1(i, i) += snap.y_mot[i] + Complex(0.5 * snap.alpha[i] * snap.g_stat[i], 0.5 * snap.beta[i] * snap.b_stat[i]);
    }
    return y1;
}

ComplexVector build_y2(const EquivalentLoadSnapshot& snap) {
    const auto n = snap.g_stat.size();
    ComplexVector y2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y2[i] = Complex((1.0 - 0.5 * snap.alpha[i]) * snap.g_stat[i], (1.0 - 0.5 * snap.beta[i]) * snap.b_stat[i]);
    }
    return y2;
}

ComplexMatrix build_yprime(const ComplexMatrix& y1, const ComplexVector& y2, const RealVector& theta) {
    const auto n = y1.rows();
    ComplexVector y2t(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y2t[i] = y2[i] * std::polar(1.0, 2.0 * theta[i]);
    }
    ComplexMatrix yp = ComplexMatrix::Zero(2 * n, 2 * n);
    yp.topLeftCorner(n, n) = y1.conjugate();
    yp.topRightCorner(n, n).diagonal() = y2t.conjugate();
    yp.bottomLeftCorner(n, n).diagonal() = y2t;
    yp.bottomRightCorner(n, n) = y1;
    return yp;
}

Theorem1Result theorem1_check(const ComplexMatrix& y1, const EquivalentLoadSnapshot& snap) {
    Theorem1Result r;
    r.sigma_min_y1 = sigma_min(y1);
    r.rhs = build_y2(snap).cwiseAbs().maxCoeff();
    if (r.rhs > 0.0) {
        r.i_vs = r.sigma_min_y1 / r.rhs;
        r.satisfied = r.sigma_min_y1 <= r.rhs;
    } else {
        r.i_vs = std::numeric_limits<double>::infinity();
        r.satisfied = false;
    }
    return r;
}

// --- Lemma 1 -----------------------------------------------------------------

namespace {

RealMatrix row_interleave(int n) {
    // E_r: order {1..n, 1'..n'} -> {1, 1', 2, 2', ...}
    RealMatrix er = RealMatrix::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        er(2 * i, i) = 1.0;
        er(2 * i + 1, n + i) = 1.0;
    }
    return er;
}

}  // namespace

Lemma1Report lemma1_oracle(const RealVector& x, const RealVector& y, const DaeSystem& sys) {
    const int n = sys.layout().n;
    const RealMatrix jalg = algebraic_jacobian(x, y, sys);
    const auto snap = equivalent_snapshot(x, y, sys);
    const auto& adm = sys.admittances();
    const ComplexMatrix y1 = build_y1(adm, snap);
    const ComplexVector y2 = build_y2(snap);
    const ComplexMatrix yp = build_yprime(y1, y2, snap.theta);
    const RealVector& v = snap.v;
    const RealVector& th = snap.theta;
    const ComplexMatrix ynet = adm.y_bus + adm.y_gen;

    // J' assembled entry-wise from the admittance quantities.
    RealMatrix e(n, n), f(n, n), m(n, n), nn(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) {
                const double vi2 = v[i] * v[i];
                const double gm = snap.y_mot[i].real(), bm = snap.y_mot[i].imag();
                const double gs = snap.g_stat[i], bs = snap.b_stat[i];
                e(i, i) = -vi2 * (ynet(i, i).imag() + bm + bs);
                f(i, i) = vi2 * (ynet(i, i).real() + gm + (snap.alpha[i] - 1.0) * gs);
                m(i, i) = -vi2 * (ynet(i, i).real() + gm + gs);
                nn(i, i) = -vi2 * (ynet(i, i).imag() + bm + (snap.beta[i] - 1.0) * bs);
                continue;
            }
            const double gij = ynet(i, j).real(), bij = ynet(i, j).imag();
            const double tij = th[i] - th[j];
            const double vv = v[i] * v[j];
            const double quadrature = bij * std::cos(tij) - gij * std::sin(tij);
            const double in_phase = gij * std::cos(tij) + bij * std::sin(tij);
            e(i, j) = -vv * quadrature;
            f(i, j) = vv * in_phase;
            m(i, j) = -vv * in_phase;
            nn(i, j) = -vv * quadrature;
        }
    }
    RealMatrix jp(2 * n, 2 * n);
    jp << e, f, m, nn;

    RealMatrix scale = RealMatrix::Identity(2 * n, 2 * n);
    scale.bottomRightCorner(n, n).diagonal() = v;
    const RealMatrix jp_from_jalg = jalg * scale;

    const RealMatrix er = row_interleave(n);
    const RealMatrix jpp = er * jp * er.transpose();
    RealMatrix jpp_blocks(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            jpp_blocks(2 * i, 2 * j) = e(i, j);
            jpp_blocks(2 * i, 2 * j + 1) = f(i, j);
            jpp_blocks(2 * i + 1, 2 * j) = m(i, j);
            jpp_blocks(2 * i + 1, 2 * j + 1) = nn(i, j);
        }
    }

    ComplexMatrix u(2, 2);
    const double r2 = std::numbers::sqrt2 / 2.0;
    u << r2, r2, -kJ * r2, kJ * r2;
    ComplexMatrix iu = ComplexMatrix::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        iu.block(2 * i, 2 * i, 2, 2) = u;
    }
    const ComplexMatrix iu_inv = iu.inverse();

    ComplexMatrix k = ComplexMatrix::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double vv = v[i] * v[j];
            if (i == j) {
                k(2 * i, 2 * i) = kJ * (-std::conj(y1(i, i)) * vv);
                k(2 * i, 2 * i + 1) = kJ * (-std::conj(y2[i]) * vv);
                k(2 * i + 1, 2 * i) = kJ * (y2[i] * vv);
                k(2 * i + 1, 2 * i + 1) = kJ * (y1(i, i) * vv);
            } else {
                const double tij = th[i] - th[j];
                k(2 * i, 2 * j) = kJ * (-std::conj(y1(i, j)) * vv * std::polar(1.0, tij));
                k(2 * i + 1, 2 * j + 1) = kJ * (y1(i, j) * vv * std::polar(1.0, -tij));
            }
        }
    }

    ComplexVector vc(n);
    for (int i = 0; i < n; ++i) {
        vc[i] = std::polar(v[i], th[i]);
    }
    ComplexVector left(2 * n), right(2 * n), sign(2 * n);
    left << vc, vc.conjugate();
    right << vc.conjugate(), vc;
    sign << -ComplexVector::Ones(n), ComplexVector::Ones(n);
    const ComplexMatrix k_from_yp = kJ * (sign.cwiseProduct(left)).asDiagonal() * yp * right.asDiagonal();
    const ComplexMatrix er_c = er.cast<Complex>();
    const ComplexMatrix k_reordered = er_c.transpose() * k * er_c;

    Lemma1Report rep;
    const double jnorm = std::max(1.0, jalg.cwiseAbs().maxCoeff());
    rep.chain_residuals[0] = (jp - jp_from_jalg).cwiseAbs().maxCoeff() / jnorm;
    rep.chain_residuals[1] = (jpp_blocks - jpp).cwiseAbs().maxCoeff() / jnorm;
    rep.chain_residuals[2] = (jpp.cast<Complex>() - iu * k * iu_inv).cwiseAbs().maxCoeff() / jnorm;
    rep.chain_residuals[3] = (k_reordered - k_from_yp).cwiseAbs().maxCoeff() / jnorm;

    rep.sigma_min_jalg = sigma_min(jalg);
    rep.sigma_min_yprime = sigma_min(yp);
    const double det_j = std::abs(jalg.partialPivLu().determinant());
    const double det_y = std::abs(yp.partialPivLu().determinant());
    const double vprod = v.array().pow(3.0).prod();
    rep.det_ratio = det_j / (det_y * vprod);
    return rep;
}

// --- Theorem 2 -------------------------------------------------------------

bool is_wcdd(const ComplexMatrix& a, double tol) {
    const auto n = a.rows();
    std::vector<bool> strict(n, false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double diag = std::abs(a(i, i));
        double off = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) {
                off += std::abs(a(i, j));
            }
        }
        const double slack = tol * std::max(1.0, diag);
        if (diag < off - slack) {
            return false;
        }
        strict[i] = diag > off + slack;
    }
    // Rows that can reach a strictly dominant row along nonzero entries.
    std::vector<bool> reach = strict;
    bool changed = true;
    while (changed) {
        changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (reach[i]) {
                continue;
            }
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j != i && reach[j] && a(i, j) != Complex(0.0, 0.0)) {
                    reach[i] = true;
                    changed = true;
                    break;
                }
            }
        }
    }
    return std::all_of(reach.begin(), reach.end(), [](bool r) { return r; });
}

Theorem2Verdict theorem2_check(const NetworkCase& c) {
    Theorem2Verdict v;
    v.applicable = c.motors.empty();
    if (!v.applicable) {
        v.notes.push_back("not applicable: induction motors present (theorem covers purely static loads)");
    }
    const int n = c.bus_count();
    const ComplexMatrix ybus = build_ybus(c);
    const double scale = std::max(1.0, ybus.cwiseAbs().maxCoeff());
    const double tol = 1e-12 * scale;

    v.conditions[0] = true;
    for (std::size_t k = 0; k < c.generators.size(); ++k) {
        const Complex yg = c.generators[k].stator_admittance();
        if (!(yg.real() >= 0.0 && yg.imag() < 0.0)) {
            v.conditions[0] = false;
            v.notes.push_back("condition 1 fails at generator " + std::to_string(k + 1));
        }
    }

    v.conditions[1] = true;
    for (int i = 0; i < n; ++i) {
        double off_sum = 0.0;
        for (int j = 0; j < n; ++j) {
            const Complex yij = ybus(i, j);
            if (std::abs(yij.real()) > tol) {
                v.conditions[1] = false;
                v.notes.push_back("condition 2 fails: G(" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                  ") != 0");
            }
            if (j != i) {
                if (yij.imag() < -tol) {
                    v.conditions[1] = false;
                    v.notes.push_back("condition 2 fails: B(" + std::to_string(i + 1) + "," +
                                      std::to_string(j + 1) + ") < 0");
                }
                off_sum += yij.imag();
            }
        }
        if (std::abs(ybus(i, i).imag() + off_sum) > tol) {
            v.conditions[1] = false;
            v.notes.push_back("condition 2 fails: bus " + std::to_string(i + 1) + " has a shunt susceptance");
        }
    }

    v.conditions[2] = true;
    v.conditions[3] = true;
    for (const auto& l : c.static_loads) {
        const auto id = std::to_string(c.buses[l.bus].id);
        if (!(l.p0 == 0.0 || l.alpha == 2.0)) {
            v.conditions[2] = false;
            v.notes.push_back("condition 3 fails at bus " + id + ": P0 = " + std::to_string(l.p0) +
                              ", alpha = " + std::to_string(l.alpha));
        }
        if (!(l.q0 >= 0.0 && l.beta >= 1.0)) {
            v.conditions[3] = false;
            v.notes.push_back("condition 4 fails at bus " + id + ": Q0 = " + std::to_string(l.q0) +
                              ", beta = " + std::to_string(l.beta));
        }
    }

    // Chain condition: every load-only bus reaches a generator terminal along
    // lines (rows of Y' for terminals are the strictly dominant ones).
    std::vector<bool> reach(n, false);
    std::deque<int> queue;
    for (const auto& g : c.generators) {
        if (!reach[g.terminal_bus]) {
            reach[g.terminal_bus] = true;
            queue.push_back(g.terminal_bus);
        }
    }
    while (!queue.empty()) {
        const int i = queue.front();
        queue.pop_front();
        for (int j = 0; j < n; ++j) {
            if (!reach[j] && ybus(i, j) != Complex(0.0, 0.0)) {
                reach[j] = true;
                queue.push_back(j);
            }
        }
    }
    const bool chained = std::all_of(reach.begin(), reach.end(), [](bool r) { return r; });
    if (!chained) {
        v.notes.push_back("chain condition fails: some buses cannot reach a generator terminal");
    }
    const bool rows = v.conditions[0] && v.conditions[1] && v.conditions[2] && v.conditions[3];
    v.wcdd = rows && chained;
    v.immune = v.applicable && v.wcdd;
    return v;
}

// --- sensitivity ------------------------------------------------------------

SensitivityResult shunt_sensitivity(const ComplexMatrix& y1, int bus, const SensitivityOptions& options) {
    if (bus < 0 || bus >= y1.rows()) {
        throw Error(ErrorKind::Network, "shunt_sensitivity: bus index out of range");
    }
    const RealMatrix b1 = -y1.imag();
    Eigen::SelfAdjointEigenSolver<RealMatrix> eig(0.5 * (b1 + b1.transpose()));
    const RealVector& lambda = eig.eigenvalues();
    if (!(lambda[0] > 0.0)) {
        throw Error(ErrorKind::NotApplicable, "shunt_sensitivity: B1 = -Im(Y1) is not positive definite");
    }
    SensitivityResult r;
    r.lambda_min = lambda[0];
    const double ui = eig.eigenvectors()(bus, 0);
    r.value = -ui * ui;
    r.degenerate = lambda.size() > 1 && lambda[1] - lambda[0] < options.degeneracy_tol;
    r.approximation_ok = y1.real().norm() <= options.approx_ratio * y1.imag().norm();
    return r;
}

double sigma_min_shunt_fd(const ComplexMatrix& y1, int bus, double h) {
    if (bus < 0 || bus >= y1.rows()) {
        throw Error(ErrorKind::Network, "sigma_min_shunt_fd: bus index out of range");
    }
    ComplexMatrix plus = y1, minus = y1;
    plus(bus, bus) += Complex(0.0, h);
    minus(bus, bus) -= Complex(0.0, h);
    return (sigma_min(plus) - sigma_min(minus)) / (2.0 * h);
}

ManifoldSample random_manifold_state(const NetworkCase& c, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    const int n = c.bus_count();

    ManifoldSample out;
    out.network = std::make_shared<NetworkCase>(c);
    NetworkCase& net = *out.network;
    std::vector<int> load_at(n, -1);
    for (std::size_t k = 0; k < net.static_loads.size(); ++k) {
        load_at[net.static_loads[k].bus] = static_cast<int>(k);
    }
    for (int i = 0; i < n; ++i) {
        if (load_at[i] < 0) {
            load_at[i] = static_cast<int>(net.static_loads.size());
            net.static_loads.push_back({i, 0.0, 0.0, uniform(0.0, 2.0), uniform(0.0, 2.0)});
        }
    }
    for (auto& l : net.static_loads) {
        l.p0 = 0.0;
        l.q0 = 0.0;
    }

    const StateLayout layout{n, net.generator_count(), static_cast<int>(net.motors.size())};
    out.x = RealVector::Zero(layout.nx());
    for (int k = 0; k < layout.generators; ++k) {
        GeneratorState g;
        g.delta = uniform(-std::numbers::pi, std::numbers::pi);
        g.omega = 1.0;
        g.ed1 = uniform(-1.0, 1.0);
        g.eq1 = uniform(-1.0, 1.0);
        const Complex e = std::polar(uniform(0.8, 1.3), uniform(-std::numbers::pi, std::numbers::pi));
        g.ed2 = e.real();
        g.eq2 = e.imag();
        set_gen_state(out.x, layout, k, g);
    }
    for (int k = 0; k < layout.motors; ++k) {
        set_motor_state(out.x, layout, k, {uniform(0.005, 0.3), uniform(-1.0, 1.0), uniform(-1.0, 1.0)});
    }
    out.y.resize(2 * n);
    for (int i = 0; i < n; ++i) {
        out.y[i] = uniform(-std::numbers::pi, std::numbers::pi);
        out.y[n + i] = uniform(0.6, 1.4);
    }

    DeviceInputs inputs;
    inputs.generators.resize(layout.generators);
    const DaeSystem unloaded(out.network, {}, inputs);
    const RealVector r = residuals(out.x, out.y, unloaded);
    for (int i = 0; i < n; ++i) {
        auto& l = net.static_loads[load_at[i]];
        l.p0 = -r[i] / std::pow(out.y[n + i], l.alpha);
        l.q0 = -r[n + i] / std::pow(out.y[n + i], l.beta);
    }
    return out;
}

double min_modulus_eig(const RealMatrix& j_alg) {
    Eigen::EigenSolver<RealMatrix> es(j_alg, false);
    return es.eigenvalues().cwiseAbs().minCoeff();
}

ImpasseReport impasse_report(const RealVector& x, const RealVector& y, const DaeSystem& sys, double t) {
    ImpasseReport r;
    r.t = t;
    const auto snap = equivalent_snapshot(x, y, sys);
    const auto t1 = theorem1_check(build_y1(sys.admittances(), snap), snap);
    r.sigma_min_y1 = t1.sigma_min_y1;
    r.rhs_eq16 = t1.rhs;
    r.i_vs = t1.i_vs;
    const RealMatrix jalg = algebraic_jacobian(x, y, sys);
    Eigen::JacobiSVD<RealMatrix> svd(jalg);
    r.sigma_min_jalg = svd.singularValues().minCoeff();
    r.sigma_max_jalg = svd.singularValues().maxCoeff();
    r.min_mod_eig_jalg = min_modulus_eig(jalg);
    r.hit = r.sigma_min_jalg <= kSingularTolerance * r.sigma_max_jalg;
    return r;
}

}  // namespace impasse
