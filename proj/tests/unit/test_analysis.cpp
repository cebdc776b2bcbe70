#include "common.hpp"

#include "impasse/analysis.hpp"
#include "random_case.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <numbers>

using namespace impasse;
using namespace impasse::testing;

namespace {

double max_abs(const ComplexMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

std::shared_ptr<NetworkCase> lossless_case(std::mt19937_64& rng, int buses = 4) {
    auto c = random_case({buses, 1, 0, true}, rng);
    for (auto& l : c->static_loads) {
        l.p0 = 0.3;
        l.alpha = 2.0;
        l.beta = 1.0;
    }
    return c;
}

}  // namespace

TEST_CASE("equivalent load snapshot", "[analysis]") {
    std::mt19937_64 rng(1);
    auto c = random_case({4, 1, 0, false}, rng);
    RealVector x, y;
    {
        auto empty = std::make_shared<NetworkCase>(*c);
        empty->static_loads.clear();
        const auto sys = bare_system(empty);
        random_state(sys, rng, x, y);
        const auto s = equivalent_snapshot(x, y, sys);
        CHECK(s.g_stat.isZero());
        CHECK(s.b_stat.isZero());
        CHECK(s.y_mot.isZero());
    }
    const auto sys = bare_system(c);
    random_state(sys, rng, x, y);
    y.tail(c->bus_count()).setOnes();
    const auto s = equivalent_snapshot(x, y, sys);
    for (const auto& l : c->static_loads) {
        CHECK(s.g_stat[l.bus] == Catch::Approx(l.p0).epsilon(1e-15));
        CHECK(s.b_stat[l.bus] == Catch::Approx(-l.q0).epsilon(1e-15));
    }
}

TEST_CASE("Y1, Y2 and Y'", "[analysis]") {
    std::mt19937_64 rng(4);
    auto c = random_case({5, 2, 0, false}, rng);
    auto sys = bare_system(c);
    RealVector x, y;
    random_state(sys, rng, x, y);
    const auto& adm = sys.admittances();
    const ComplexMatrix ynet = adm.y_bus + adm.y_gen;

    SECTION("constant power loads") {
        auto cp = std::make_shared<NetworkCase>(*c);
        for (auto& l : cp->static_loads) {
            l.alpha = l.beta = 0.0;
        }
        const auto s2 = bare_system(cp);
        const auto snap = equivalent_snapshot(x, y, s2);
        CHECK(max_abs(build_y1(adm, snap) - ynet) == 0.0);
        const ComplexVector y2 = build_y2(snap);
        for (const auto& l : cp->static_loads) {
            CHECK(std::abs(y2[l.bus] - Complex(snap.g_stat[l.bus], snap.b_stat[l.bus])) < 1e-15);
        }
    }
    SECTION("impedance loads") {
        auto z = std::make_shared<NetworkCase>(*c);
        for (auto& l : z->static_loads) {
            l.alpha = l.beta = 2.0;
        }
        const auto s2 = bare_system(z);
        const auto snap = equivalent_snapshot(x, y, s2);
        ComplexMatrix expected = ynet;
        for (const auto& l : z->static_loads) {
            expected(l.bus, l.bus) += Complex(snap.g_stat[l.bus], snap.b_stat[l.bus]);
        }
        CHECK(max_abs(build_y1(adm, snap) - expected) < 1e-14);
        CHECK(build_y2(snap).isZero());
        const ComplexMatrix yp = build_yprime(build_y1(adm, snap), build_y2(snap), snap.theta);
        CHECK(std::abs(sigma_min(yp) - sigma_min(build_y1(adm, snap))) < 1e-12);
    }
    SECTION("term-by-term Y1 and rhs") {
        const auto snap = equivalent_snapshot(x, y, sys);
        const ComplexMatrix y1 = build_y1(adm, snap);
        const ComplexVector y2 = build_y2(snap);
        double rhs = 0.0;
        for (int i = 0; i < c->bus_count(); ++i) {
            Complex d = ynet(i, i);
            for (const auto& l : c->static_loads) {
                if (l.bus == i) {
                    const double v = y[c->bus_count() + i];
                    const double g = l.p0 * std::pow(v, l.alpha - 2.0);
                    const double b = -l.q0 * std::pow(v, l.beta - 2.0);
                    d += Complex(0.5 * l.alpha * g, 0.5 * l.beta * b);
                    rhs = std::max(rhs, std::abs(Complex((1 - 0.5 * l.alpha) * g, (1 - 0.5 * l.beta) * b)));
                }
            }
            CHECK(std::abs(y1(i, i) - d) < 1e-12);
        }
        CHECK(theorem1_check(y1, snap).rhs == Catch::Approx(rhs).epsilon(1e-14));
        CHECK(y2.cwiseAbs().maxCoeff() == Catch::Approx(rhs).epsilon(1e-14));
    }
    SECTION("zero angles leave Y2 unrotated") {
        auto snap = equivalent_snapshot(x, y, sys);
        const ComplexMatrix y1 = build_y1(adm, snap);
        const ComplexVector y2 = build_y2(snap);
        const ComplexMatrix yp = build_yprime(y1, y2, RealVector::Zero(c->bus_count()));
        const int n = c->bus_count();
        CHECK(std::abs(ComplexVector(yp.bottomLeftCorner(n, n).diagonal() - y2).norm()) == 0.0);
        CHECK(max_abs(yp.bottomRightCorner(n, n) - y1) == 0.0);
    }
}

TEST_CASE("Theorem 1 inequality", "[analysis]") {
    EquivalentLoadSnapshot empty;
    empty.g_stat = empty.b_stat = empty.alpha = empty.beta = RealVector::Zero(2);
    const auto none = theorem1_check(ComplexMatrix::Identity(2, 2), empty);
    CHECK(none.rhs == 0.0);
    CHECK(std::isinf(none.i_vs));
    CHECK_FALSE(none.satisfied);

    EquivalentLoadSnapshot one;
    one.g_stat = RealVector::Constant(1, 2.0);
    one.b_stat = one.alpha = one.beta = RealVector::Zero(1);
    const auto r = theorem1_check(ComplexMatrix::Identity(1, 1), one);
    CHECK(r.sigma_min_y1 == Catch::Approx(1.0));
    CHECK(r.rhs == Catch::Approx(2.0));
    CHECK(r.satisfied);

    const auto& bundle = ieee9();
    const auto eq = initialize_equilibrium(bundle.network, {});
    const DaeSystem sys(bundle.network, {}, eq.inputs);
    const auto snap = equivalent_snapshot(eq.state.x, eq.state.y, sys);
    const auto healthy = theorem1_check(build_y1(sys.admittances(), snap), snap);
    CHECK(healthy.i_vs > 1.0);
    CHECK_FALSE(healthy.satisfied);
}

TEST_CASE("Lemma 1 chain on random 3-bus states", "[analysis]") {
    std::mt19937_64 rng(17);
    const auto c = random_case({3, 1, 1, false}, rng);
    // Brute-force exponent: |det J| / (|det Y'| prod V^k) is constant 1 only for k = 3.
    std::array<double, 6> worst{};
    for (int k = 0; k < 50; ++k) {
        const auto s = random_manifold_state(*c, rng);
        const auto sys = bare_system(s.network);
        REQUIRE(residuals(s.x, s.y, sys).lpNorm<Eigen::Infinity>() <= 1e-10);
        const auto rep = lemma1_oracle(s.x, s.y, sys);
        for (double r : rep.chain_residuals) {
            CHECK(r <= 1e-10);
        }
        CHECK(std::abs(rep.det_ratio - 1.0) <= 1e-8);

        const RealMatrix j = algebraic_jacobian(s.x, s.y, sys);
        const auto snap = equivalent_snapshot(s.x, s.y, sys);
        const ComplexMatrix yp = build_yprime(build_y1(sys.admittances(), snap), build_y2(snap), snap.theta);
        const double ratio = std::abs(j.determinant()) / std::abs(yp.determinant());
        const double prod_v = snap.v.prod();
        for (int e = 0; e < 6; ++e) {
            worst[e] = std::max(worst[e], std::abs(ratio / std::pow(prod_v, e) - 1.0));
        }
    }
    for (int e = 0; e < 6; ++e) {
        INFO("exponent " << e);
        CHECK((worst[e] <= 1e-8) == (e == 3));
    }
}

TEST_CASE("Lemma 1 at unit voltage and zero angle", "[analysis]") {
    std::mt19937_64 rng(8);
    auto c = random_case({4, 1, 0, false}, rng);
    RealVector x, y;
    auto sys0 = bare_system(c);
    random_state(sys0, rng, x, y);
    y.head(c->bus_count()).setZero();
    y.tail(c->bus_count()).setOnes();
    // Close the balance at this point with the static loads.
    auto closed = std::make_shared<NetworkCase>(*c);
    closed->static_loads.clear();
    const RealVector r = residuals(x, y, bare_system(closed));
    for (int i = 0; i < c->bus_count(); ++i) {
        closed->static_loads.push_back({i, -r[i], -r[c->bus_count() + i], 1.0, 1.5});
    }
    const auto sys = bare_system(closed);
    const auto rep = lemma1_oracle(x, y, sys);
    for (double res : rep.chain_residuals) {
        CHECK(res <= 1e-10);
    }
    CHECK(std::abs(rep.det_ratio - 1.0) <= 1e-8);
}

TEST_CASE("Jalg and Y' vanish together", "[analysis]") {
    std::mt19937_64 rng(9);
    const auto c = random_case({4, 1, 1, false}, rng);
    const auto s = random_manifold_state(*c, rng);
    const auto path = singular_path(s);
    for (double t : {0.0, 0.5, 0.9, 0.99, 1.0}) {
        const auto sys = bare_system(path.at(t));
        const auto rep = lemma1_oracle(path.x, path.y, sys);
        if (t == 1.0) {
            CHECK(rep.sigma_min_jalg <= 1e-6);
            CHECK(rep.sigma_min_yprime <= 1e-6);
        } else {
            CHECK(rep.sigma_min_jalg > 1e-6);
            CHECK(rep.sigma_min_yprime > 1e-6);
        }
    }
}

TEST_CASE("Theorem 2 verdicts", "[analysis]") {
    std::mt19937_64 rng(10);
    const auto c = lossless_case(rng);
    const auto v = theorem2_check(*c);
    CHECK(v.applicable);
    CHECK(v.conditions == std::array<bool, 4>{true, true, true, true});
    CHECK(v.wcdd);
    CHECK(v.immune);

    const auto sys = bare_system(c);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double smallest = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 500; ++k) {
        RealVector x, y;
        random_state(sys, rng, x, y, 0.05, 2.0);
        for (int i = 0; i < c->bus_count(); ++i) {
            y[i] = std::numbers::pi * (2.0 * u(rng) - 1.0);
        }
        const auto snap = equivalent_snapshot(x, y, sys);
        const ComplexMatrix yp = build_yprime(build_y1(sys.admittances(), snap), build_y2(snap), snap.theta);
        smallest = std::min(smallest, sigma_min(yp));
    }
    CHECK(smallest > 0.0);

    auto negative = std::make_shared<NetworkCase>(*c);
    negative->static_loads[0].p0 = -0.4;
    CHECK(theorem2_check(*negative).conditions[2]);

    const auto nine = theorem2_check(*ieee9().network);
    CHECK_FALSE(nine.applicable);
    CHECK_FALSE(nine.immune);
    CHECK_FALSE(nine.conditions[2]);
    bool cites_bus5 = false;
    for (const auto& note : nine.notes) {
        cites_bus5 = cites_bus5 || note.find("condition 3 fails at bus 5") != std::string::npos;
    }
    CHECK(cites_bus5);
}

TEST_CASE("weakly chained diagonal dominance", "[analysis]") {
    ComplexMatrix strict(2, 2);
    strict << 3.0, -1.0, -1.0, 3.0;
    CHECK(is_wcdd(strict));

    // Row 1 strict, rows 2 and 3 weak but chained to it.
    ComplexMatrix chain(3, 3);
    chain << 2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0;
    CHECK(is_wcdd(chain));

    // Weak rows only: singular Laplacian.
    ComplexMatrix laplacian(2, 2);
    laplacian << 1.0, -1.0, -1.0, 1.0;
    CHECK_FALSE(is_wcdd(laplacian));

    // Strict row not reachable from the weak block.
    ComplexMatrix split(3, 3);
    split << 2.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0, -1.0, 1.0;
    CHECK_FALSE(is_wcdd(split));
}

TEST_CASE("shunt sensitivity", "[analysis]") {
    const ComplexMatrix single = ComplexMatrix::Constant(1, 1, Complex(0.0, -4.0));
    CHECK(shunt_sensitivity(single, 0).value == Catch::Approx(-1.0));

    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 5;
        RealMatrix a = RealMatrix::NullaryExpr(n, n, [&] { return u(rng); });
        const RealMatrix b1 = a * a.transpose() + 0.1 * RealMatrix::Identity(n, n);
        const ComplexMatrix y1 = Complex(0.0, -1.0) * b1.cast<Complex>();
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto r = shunt_sensitivity(y1, i);
            CHECK(r.value <= 0.0);
            total += r.value;
            if (!r.degenerate) {
                // Lossless Y1: the approximation is exact.
                CHECK(std::abs(r.value - sigma_min_shunt_fd(y1, i)) <= 1e-6);
            }
        }
        CHECK(total == Catch::Approx(-1.0));
    }

    const ComplexMatrix indefinite = ComplexMatrix::Constant(1, 1, Complex(0.0, 1.0));
    try {
        shunt_sensitivity(indefinite, 0);
        FAIL("expected NotApplicable");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotApplicable);
    }
}

TEST_CASE("minimum-modulus eigenvalue", "[analysis]") {
    CHECK(min_modulus_eig(RealMatrix::Identity(6, 6)) == Catch::Approx(1.0));
    RealMatrix s(2, 2);
    s << 1.0, 2.0, 2.0, 4.0;
    CHECK(min_modulus_eig(s) <= 1e-10);
}
