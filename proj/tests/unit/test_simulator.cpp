#include "common.hpp"

#include "impasse/output.hpp"
#include "impasse/simulator.hpp"
#include "random_case.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

using namespace impasse;
using namespace impasse::testing;

namespace {

const Scenario& scenario(const std::string& name) {
    const Scenario* s = ieee9().find_scenario(name);
    REQUIRE(s != nullptr);
    return *s;
}

/// Two classical machines (all reactances equal, so the fluxes are constant)
/// on a lossless line, no loads, no damping.
std::shared_ptr<NetworkCase> classical_pair() {
    auto c = std::make_shared<NetworkCase>();
    c->buses = {{1, "a", BusKind::LoadOnly, {}}, {2, "b", BusKind::LoadOnly, {}}};
    c->lines = {{0, 1, Complex(0.0, -1.0 / 0.3)}};
    for (int k = 0; k < 2; ++k) {
        GeneratorParams g;
        g.terminal_bus = k;
        g.ra = 0.0;
        g.xd = g.xd1 = g.xd2 = g.xq = g.xq1 = g.xq2 = 0.25;
        g.M = 8.0 + 4.0 * k;
        g.D = 0.0;
        g.slack = k == 0;
        g.p_set = k == 0 ? 0.0 : 0.5;
        g.v_set = 1.0;
        c->generators.push_back(g);
    }
    validate_case(*c);
    return c;
}

}  // namespace

TEST_CASE("trapezoidal step keeps an equilibrium", "[simulator]") {
    const auto prepared = prepare_scenario(ieee9().network, scenario("s1"));
    for (double dt : {0.001, 0.01, 0.1}) {
        const auto next = step(prepared.initial, dt, *prepared.system);
        CHECK((next.x - prepared.initial.x).lpNorm<Eigen::Infinity>() <= 1e-10);
        CHECK((next.y - prepared.initial.y).lpNorm<Eigen::Infinity>() <= 1e-10);
        CHECK(next.t == Catch::Approx(dt));
    }
}

TEST_CASE("second-order convergence on a smooth segment", "[simulator]") {
    const auto prepared = prepare_scenario(ieee9().network, scenario("s2"));
    const DaeSystem& sys = *prepared.system;
    SystemState start = prepared.initial;
    start.x[sys.layout().gen_offset(1)] += 0.05;
    start.y = solve_algebraic(start.x, start.y, sys).y;

    auto integrate = [&](double h, double span) {
        SystemState s = start;
        const int steps = static_cast<int>(std::lround(span / h));
        for (int k = 0; k < steps; ++k) {
            s = step(s, h, sys);
        }
        RealVector z(s.x.size() + s.y.size());
        z << s.x, s.y;
        return z;
    };
    const double span = 0.4;
    const RealVector z1 = integrate(0.02, span);
    const RealVector z2 = integrate(0.01, span);
    const RealVector z4 = integrate(0.005, span);
    const double ratio = (z1 - z2).norm() / (z2 - z4).norm();
    INFO("error ratio " << ratio);
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
}

TEST_CASE("lossless classical swing conserves its amplitude", "[simulator]") {
    const auto c = classical_pair();
    const auto eq = initialize_equilibrium(c, {});
    const DaeSystem sys(c, {}, eq.inputs);
    SystemState s = eq.state;
    const double delta0 = s.x[6] - s.x[0];
    s.x[6] += 0.1;
    s.y = solve_algebraic(s.x, s.y, sys).y;

    const double dt = 0.005;
    double first = 0.0, last = 0.0;
    for (int k = 0; k < 2000; ++k) {
        s = step(s, dt, sys);
        const double dev = std::abs(s.x[6] - s.x[0] - delta0);
        if (s.t <= 2.0) {
            first = std::max(first, dev);
        } else if (s.t >= 8.0) {
            last = std::max(last, dev);
        }
    }
    REQUIRE(first > 0.05);
    CHECK(std::abs(last - first) <= 0.005 * first);
}

TEST_CASE("events split the steps exactly", "[simulator]") {
    SimOptions o;
    o.horizon = 1.3;
    const auto traj = run_scenario(ieee9().network, scenario("s2"), o);
    auto has_time = [&](double t) {
        return std::any_of(traj.samples.begin(), traj.samples.end(),
                           [&](const Sample& s) { return std::abs(s.state.t - t) <= 1e-12; });
    };
    CHECK(has_time(1.0));
    CHECK(has_time(1.1));
    CHECK(traj.samples.back().state.t == Catch::Approx(1.3));
}

TEST_CASE("case-study scenarios", "[simulator][ieee9]") {
    const auto net = ieee9().network;
    const auto s1 = run_scenario(net, scenario("s1"));
    const auto s2 = run_scenario(net, scenario("s2"));
    const auto s3 = run_scenario(net, scenario("s3"));

    CHECK(s2.termination == Termination::HorizonReached);
    CHECK(std::isnan(s2.t_hit));
    for (const auto& line : s2.log) {
        CHECK(line.find("impasse") == std::string::npos);
    }

    for (const Trajectory* t : {&s1, &s3}) {
        INFO(t->scenario);
        REQUIRE(t->termination == Termination::ImpasseHit);
        CHECK(t->samples.back().report.hit);
        CHECK(t->samples.back().report.i_vs <= 1.0);
        CHECK(t->ivs_crossing < t->t_hit);
    }
    CHECK(s3.t_hit < s1.t_hit);

    const auto csv = std::filesystem::temp_directory_path() / "impasse_s1.csv";
    emit_csv(s1, *net, csv);
    const auto table = read_csv(csv);
    CHECK(table.rows.back()[table.column("hit")] == "true");
    std::filesystem::remove(csv);
}

TEST_CASE("impasse time is stable under step refinement", "[simulator][ieee9]") {
    const auto net = ieee9().network;
    SimOptions coarse;
    const auto a = run_scenario(net, scenario("s3"), coarse);
    SimOptions fine = coarse;
    fine.dt /= 10.0;
    fine.dt_fine /= 10.0;
    const auto b = run_scenario(net, scenario("s3"), fine);
    REQUIRE(a.termination == Termination::ImpasseHit);
    REQUIRE(b.termination == Termination::ImpasseHit);
    CHECK(std::abs(a.t_hit - b.t_hit) <= coarse.dt);
}

TEST_CASE("I_vs triggered motor shedding", "[simulator][ieee9]") {
    const auto net = ieee9().network;
    const int bus8 = net->index_of(8);
    for (const char* name : {"s1", "s3"}) {
        INFO(name);
        const auto t = ivs_triggered_shedding(net, scenario(name), bus8);
        CHECK(t.termination == Termination::HorizonReached);
        CHECK(std::isfinite(t.shed_time));
        CHECK(t.shed_time > 1.1);
    }
}

TEST_CASE("batch runs keep input order", "[simulator]") {
    const auto& b = ieee9();
    SimOptions o;
    o.horizon = 1.5;
    const auto runs = run_batch(b.network, b.scenarios, o, 2);
    REQUIRE(runs.size() == b.scenarios.size());
    for (std::size_t k = 0; k < runs.size(); ++k) {
        CHECK(runs[k].scenario == b.scenarios[k].name);
        const auto single = run_scenario(b.network, b.scenarios[k], o);
        CHECK(single.samples.size() == runs[k].samples.size());
        CHECK((single.samples.back().state.y - runs[k].samples.back().state.y).norm() == 0.0);
    }
}
