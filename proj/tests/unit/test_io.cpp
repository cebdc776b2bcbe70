#include "common.hpp"

#include "impasse/casefile.hpp"
#include "impasse/output.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>

using namespace impasse;
using namespace impasse::testing;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
    std::ifstream in(path);
    return json::parse(in);
}

std::filesystem::path temp_file(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("shipped 9-bus case", "[io]") {
    const auto& b = ieee9();
    const auto& c = *b.network;
    CHECK(c.bus_count() == 9);
    CHECK(c.generator_count() == 3);
    DeviceInputs in;
    in.generators.resize(3);
    CHECK(DaeSystem(b.network, {}, in).admittances().y_aug.rows() == 12);
    REQUIRE(c.motors.size() == 2);
    CHECK(c.buses[c.motors[0].bus].id == 6);
    CHECK(c.buses[c.motors[1].bus].id == 8);
    REQUIRE(c.static_loads.size() == 3);
    std::vector<int> load_ids;
    for (const auto& l : c.static_loads) {
        load_ids.push_back(c.buses[l.bus].id);
    }
    CHECK(load_ids == std::vector<int>{5, 6, 8});
    const auto& bus5 = c.static_loads[0];
    CHECK(bus5.alpha == 0.1);
    CHECK(bus5.beta == 0.6);
    CHECK(b.scenarios.size() == 3);
    CHECK(!c.provenance.empty());
    CHECK(b.warnings.empty());
}

TEST_CASE("schema violations", "[io]") {
    const json base = load_json(data_path("ieee9.json"));

    SECTION("Assumption 1") {
        json doc = base;
        doc["generators"][2]["xq2"] = 0.5;
        try {
            parse_case_json(doc);
            FAIL("accepted");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Assumption1);
            CHECK(std::string(e.what()).find("generator 3") != std::string::npos);
        }
    }
    SECTION("unknown key") {
        json doc = base;
        doc["motors"][1]["slip0"] = 0.02;
        try {
            parse_case_json(doc, true);
            FAIL("accepted");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Input);
            CHECK(std::string(e.what()).find("/motors/1/slip0") != std::string::npos);
        }
        const auto lenient = parse_case_json(doc, false);
        REQUIRE(lenient.warnings.size() == 1);
        CHECK(lenient.warnings[0].find("/motors/1/slip0") != std::string::npos);
    }
    SECTION("bad references") {
        json doc = base;
        doc["lines"][0]["to"] = 42;
        CHECK_THROWS_AS(parse_case_json(doc), Error);
        doc = base;
        doc["static_loads"][0].erase("p0");
        CHECK_THROWS_AS(parse_case_json(doc), Error);
        doc = base;
        doc["motors"][0]["rr"] = 0.0;
        CHECK_THROWS_AS(parse_case_json(doc), Error);
    }
}

TEST_CASE("case round trip", "[io]") {
    const auto& b = ieee9();
    const auto again = parse_case_json(case_to_json(*b.network, b.scenarios));
    const auto& c1 = *b.network;
    const auto& c2 = *again.network;
    CHECK((build_ybus(c1) - build_ybus(c2)).cwiseAbs().maxCoeff() <= 1e-14);
    REQUIRE(c2.generators.size() == c1.generators.size());
    for (std::size_t k = 0; k < c1.generators.size(); ++k) {
        CHECK(c2.generators[k].xd1 == Catch::Approx(c1.generators[k].xd1).epsilon(1e-15));
        CHECK(c2.generators[k].M == Catch::Approx(c1.generators[k].M).epsilon(1e-15));
        CHECK(c2.generators[k].p_set == Catch::Approx(c1.generators[k].p_set).epsilon(1e-15));
    }
    for (std::size_t k = 0; k < c1.motors.size(); ++k) {
        CHECK(c2.motors[k].rr == Catch::Approx(c1.motors[k].rr).epsilon(1e-15));
        CHECK(c2.motors[k].a == Catch::Approx(c1.motors[k].a).epsilon(1e-15));
        CHECK(c2.motors[k].Hm == Catch::Approx(c1.motors[k].Hm).epsilon(1e-15));
    }
    REQUIRE(again.scenarios.size() == b.scenarios.size());
    for (std::size_t k = 0; k < b.scenarios.size(); ++k) {
        CHECK(again.scenarios[k].events.size() == b.scenarios[k].events.size());
    }
}

TEST_CASE("CSV round trip", "[io]") {
    const auto& b = ieee9();
    SimOptions o;
    o.horizon = 1.2;
    const auto traj = run_scenario(b.network, b.scenarios[0], o);
    const auto path = temp_file("impasse_roundtrip.csv");
    emit_csv(traj, *b.network, path);
    const auto table = read_csv(path);
    CHECK(table.header == csv_header(traj, *b.network));
    REQUIRE(table.rows.size() == traj.samples.size());
    const int n = b.network->bus_count();
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& s = traj.samples[r];
        CHECK(table.value(r, "t") == s.state.t);
        CHECK(table.value(r, "V_8") == s.state.y[n + 7]);
        CHECK(table.value(r, "theta_5") == s.state.y[4]);
        CHECK(table.value(r, "sigma_min_jalg") == s.report.sigma_min_jalg);
        CHECK(table.value(r, "i_vs") == s.report.i_vs);
    }
    CHECK(slurp(path).find("\r\n") != std::string::npos);
    std::filesystem::remove(path);

    Trajectory empty;
    CHECK_THROWS_AS(emit_csv(empty, *b.network, temp_file("impasse_empty.csv")), Error);
}

TEST_CASE("summary document", "[io]") {
    Trajectory t;
    t.scenario = "demo";
    Sample s;
    s.state.t = 2.5;
    t.samples.push_back(s);
    const auto path = temp_file("impasse_summary.json");
    emit_summary(t, path);
    const json doc = load_json(path.string());
    CHECK(doc["scenario"] == "demo");
    CHECK(doc["termination"] == "horizon_reached");
    CHECK(doc["t_hit"].is_null());
    CHECK(doc["t_end"] == 2.5);
    std::filesystem::remove(path);
}

TEST_CASE("SVG charts", "[io]") {
    PlotSpec spec;
    spec.title = "I_vs";
    spec.y_label = "I_vs";
    spec.reference_line = 1.0;
    PlotSeries series{"run", {}};
    for (int k = 0; k <= 50; ++k) {
        series.points.emplace_back(0.1 * k, 0.5 + 0.02 * k);
    }
    spec.series.push_back(series);
    const std::string svg = render_svg(spec);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("stroke-dasharray") != std::string::npos);

    // The path of a monotone series is monotone in screen coordinates (y
    // grows downward).
    const std::regex path_re(R"re(<path d="([^"]*)")re");
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, path_re));
    const std::string d = m[1].str();
    const std::regex cmd(R"re(([ML])(-?[0-9.eE+-]+) (-?[0-9.eE+-]+))re");
    double last_x = -1.0, last_y = std::numeric_limits<double>::infinity();
    int count = 0;
    for (auto it = std::sregex_iterator(d.begin(), d.end(), cmd); it != std::sregex_iterator(); ++it) {
        const double x = std::stod((*it)[2].str());
        const double y = std::stod((*it)[3].str());
        CHECK(((*it)[1].str() == "M") == (count == 0));
        CHECK(x > last_x);
        CHECK(y <= last_y);
        last_x = x;
        last_y = y;
        ++count;
    }
    CHECK(count == 51);

    PlotSpec degenerate;
    degenerate.series.push_back({"one", {{0.0, 1.0}}});
    CHECK_THROWS_AS(render_svg(degenerate), Error);
}
