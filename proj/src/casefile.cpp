#include "impasse/casefile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace impasse {

using nlohmann::json;

const Scenario* CaseBundle::find_scenario(const std::string& name) const {
    for (const auto& s : scenarios) {
        if (s.name == name) {
            return &s;
        }
    }
    return nullptr;
}

namespace {

class Reader {
public:
    Reader(bool strict, std::vector<std::string>& warnings) : strict_(strict), warnings_(warnings) {}

    [[noreturn]] void fail(const std::string& ptr, const std::string& what) const {
        throw Error(ErrorKind::Input, (ptr.empty() ? "/" : ptr) + ": " + what);
    }

    const json& object(const json& j, const std::string& ptr, std::initializer_list<const char*> allowed) {
        if (!j.is_object()) {
            fail(ptr, "expected an object");
        }
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [key, value] : j.items()) {
            if (!ok.count(key)) {
                if (strict_) {
                    fail(ptr + "/" + key, "unknown key");
                }
                warnings_.push_back(ptr + "/" + key + ": unknown key ignored");
            }
        }
        return j;
    }

    const json& array(const json& parent, const std::string& key, const std::string& ptr, bool required = true) {
        static const json empty = json::array();
        if (!parent.contains(key)) {
            if (required) {
                fail(ptr + "/" + key, "missing required array");
            }
            return empty;
        }
        const json& j = parent.at(key);
        if (!j.is_array()) {
            fail(ptr + "/" + key, "expected an array");
        }
        return j;
    }

    double number(const json& parent, const std::string& key, const std::string& ptr) {
        if (!parent.contains(key)) {
            fail(ptr + "/" + key, "missing required number");
        }
        return as_number(parent.at(key), ptr + "/" + key);
    }

    double number(const json& parent, const std::string& key, const std::string& ptr, double fallback) {
        return parent.contains(key) ? as_number(parent.at(key), ptr + "/" + key) : fallback;
    }

    double as_number(const json& j, const std::string& ptr) {
        if (!j.is_number()) {
            fail(ptr, "expected a number");
        }
        const double v = j.get<double>();
        if (!std::isfinite(v)) {
            fail(ptr, "must be finite");
        }
        return v;
    }

    int integer(const json& parent, const std::string& key, const std::string& ptr) {
        if (!parent.contains(key) || !parent.at(key).is_number_integer()) {
            fail(ptr + "/" + key, "expected an integer");
        }
        return parent.at(key).get<int>();
    }

    std::string string(const json& parent, const std::string& key, const std::string& ptr,
                       const std::string& fallback = {}) {
        if (!parent.contains(key)) {
            return fallback;
        }
        if (!parent.at(key).is_string()) {
            fail(ptr + "/" + key, "expected a string");
        }
        return parent.at(key).get<std::string>();
    }

    bool boolean(const json& parent, const std::string& key, const std::string& ptr, bool fallback) {
        if (!parent.contains(key)) {
            return fallback;
        }
        if (!parent.at(key).is_boolean()) {
            fail(ptr + "/" + key, "expected a boolean");
        }
        return parent.at(key).get<bool>();
    }

private:
    bool strict_;
    std::vector<std::string>& warnings_;
};

int bus_index(Reader& rd, const NetworkCase& c, const json& parent, const std::string& key, const std::string& ptr) {
    const int id = rd.integer(parent, key, ptr);
    const int idx = c.index_of(id);
    if (idx < 0) {
        rd.fail(ptr + "/" + key, "unknown bus id " + std::to_string(id));
    }
    return idx;
}

Event parse_event(Reader& rd, const NetworkCase& c, const json& j, const std::string& ptr) {
    rd.object(j, ptr, {"kind", "t", "bus", "x_f", "b0", "fraction", "trigger"});
    Event e;
    const std::string kind = rd.string(j, "kind", ptr);
    if (kind == "apply_fault") {
        e.kind = EventKind::ApplyFault;
        e.bus = bus_index(rd, c, j, "bus", ptr);
        e.value = rd.number(j, "x_f", ptr);
        if (!(e.value > 0.0)) {
            rd.fail(ptr + "/x_f", "fault reactance must be positive");
        }
    } else if (kind == "clear_fault") {
        e.kind = EventKind::ClearFault;
    } else if (kind == "install_shunt") {
        e.kind = EventKind::InstallShunt;
        e.bus = bus_index(rd, c, j, "bus", ptr);
        e.value = rd.number(j, "b0", ptr);
    } else if (kind == "shed_motor") {
        e.kind = EventKind::ShedMotor;
        e.bus = bus_index(rd, c, j, "bus", ptr);
    } else if (kind == "shed_static") {
        e.kind = EventKind::ShedStatic;
        e.bus = bus_index(rd, c, j, "bus", ptr);
        e.value = rd.number(j, "fraction", ptr);
        if (!(e.value > 0.0 && e.value <= 1.0)) {
            rd.fail(ptr + "/fraction", "must lie in (0, 1]");
        }
    } else {
        rd.fail(ptr + "/kind", "unknown event kind '" + kind + "'");
    }
    if (j.contains("trigger")) {
        const std::string tp = ptr + "/trigger";
        const json& t = rd.object(j.at("trigger"), tp, {"ivs_crosses", "direction"});
        e.trigger = TriggerKind::WhenIvsCrosses;
        e.threshold = rd.number(t, "ivs_crosses", tp);
        const std::string dir = rd.string(t, "direction", tp, "down");
        if (dir == "down") {
            e.direction = CrossDirection::Down;
        } else if (dir == "up") {
            e.direction = CrossDirection::Up;
        } else {
            rd.fail(tp + "/direction", "expected 'down' or 'up'");
        }
        if (j.contains("t")) {
            rd.fail(ptr + "/t", "an I_vs-triggered event has no fixed time");
        }
    } else {
        e.t = rd.number(j, "t", ptr);
    }
    return e;
}

}  // namespace

CaseBundle parse_case_json(const json& doc, bool strict) {
    CaseBundle bundle;
    Reader rd(strict, bundle.warnings);
    rd.object(doc, "", {"name", "provenance", "system", "buses", "lines", "shunts", "generators", "motors",
                        "static_loads", "scenarios"});
    auto c = std::make_shared<NetworkCase>();
    c->name = rd.string(doc, "name", "", "case");

    if (doc.contains("provenance")) {
        const json& p = rd.array(doc, "provenance", "");
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (!p[k].is_string()) {
                rd.fail("/provenance/" + std::to_string(k), "expected a string");
            }
            c->provenance.push_back(p[k].get<std::string>());
        }
    }
    if (doc.contains("system")) {
        const json& s = rd.object(doc.at("system"), "/system", {"base_mva", "base_freq"});
        c->base_mva = rd.number(s, "base_mva", "/system", 100.0);
        c->base_freq = rd.number(s, "base_freq", "/system", 60.0);
        if (!(c->base_mva > 0.0) || !(c->base_freq > 0.0)) {
            rd.fail("/system", "base_mva and base_freq must be positive");
        }
    }

    const json& buses = rd.array(doc, "buses", "");
    for (std::size_t k = 0; k < buses.size(); ++k) {
        const std::string ptr = "/buses/" + std::to_string(k);
        rd.object(buses[k], ptr, {"id", "name"});
        Bus b;
        b.id = rd.integer(buses[k], "id", ptr);
        b.name = rd.string(buses[k], "name", ptr, "Bus " + std::to_string(b.id));
        c->buses.push_back(b);
    }
    // Bus ids must be 1..n; reorder so that index = id - 1.
    std::sort(c->buses.begin(), c->buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
    for (std::size_t k = 0; k < c->buses.size(); ++k) {
        if (c->buses[k].id != static_cast<int>(k) + 1) {
            rd.fail("/buses", "bus ids must be exactly 1..n without duplicates");
        }
    }

    const json& lines = rd.array(doc, "lines", "");
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const std::string ptr = "/lines/" + std::to_string(k);
        const json& l = rd.object(lines[k], ptr, {"from", "to", "r", "x", "b", "y"});
        Line line;
        line.from = bus_index(rd, *c, l, "from", ptr);
        line.to = bus_index(rd, *c, l, "to", ptr);
        if (l.contains("y")) {
            const json& y = l.at("y");
            if (!y.is_array() || y.size() != 2) {
                rd.fail(ptr + "/y", "expected [re, im]");
            }
            line.y = Complex(rd.as_number(y[0], ptr + "/y/0"), rd.as_number(y[1], ptr + "/y/1"));
            if (l.contains("r") || l.contains("x")) {
                rd.fail(ptr, "give either y or r/x, not both");
            }
        } else {
            const Complex z(rd.number(l, "r", ptr, 0.0), rd.number(l, "x", ptr));
            if (z == Complex(0.0, 0.0)) {
                rd.fail(ptr, "zero series impedance");
            }
            line.y = 1.0 / z;
        }
        const double charging = rd.number(l, "b", ptr, 0.0);
        c->buses[line.from].shunt += Complex(0.0, 0.5 * charging);
        c->buses[line.to].shunt += Complex(0.0, 0.5 * charging);
        c->lines.push_back(line);
    }

    const json& shunts = rd.array(doc, "shunts", "", false);
    for (std::size_t k = 0; k < shunts.size(); ++k) {
        const std::string ptr = "/shunts/" + std::to_string(k);
        const json& s = rd.object(shunts[k], ptr, {"bus", "g", "b"});
        const int i = bus_index(rd, *c, s, "bus", ptr);
        c->buses[i].shunt += Complex(rd.number(s, "g", ptr, 0.0), rd.number(s, "b", ptr, 0.0));
    }

    const json& gens = rd.array(doc, "generators", "", false);
    for (std::size_t k = 0; k < gens.size(); ++k) {
        const std::string ptr = "/generators/" + std::to_string(k);
        const json& g = rd.object(gens[k], ptr,
                                  {"bus", "slack", "p", "v", "ra", "xd", "xd1", "xd2", "Td01", "Td02", "xq", "xq1",
                                   "xq2", "Tq01", "Tq02", "H", "D", "mva_base"});
        GeneratorParams p;
        p.terminal_bus = bus_index(rd, *c, g, "bus", ptr);
        p.slack = rd.boolean(g, "slack", ptr, false);
        p.p_set = rd.number(g, "p", ptr, 0.0);
        p.v_set = rd.number(g, "v", ptr, 1.0);
        const double zs = c->base_mva / rd.number(g, "mva_base", ptr, c->base_mva);
        p.ra = zs * rd.number(g, "ra", ptr, 0.0);
        p.xd = zs * rd.number(g, "xd", ptr);
        p.xd1 = zs * rd.number(g, "xd1", ptr);
        p.xd2 = zs * rd.number(g, "xd2", ptr);
        p.xq = zs * rd.number(g, "xq", ptr);
        p.xq1 = zs * rd.number(g, "xq1", ptr);
        p.xq2 = zs * rd.number(g, "xq2", ptr);
        p.Td01 = rd.number(g, "Td01", ptr);
        p.Td02 = rd.number(g, "Td02", ptr);
        p.Tq01 = rd.number(g, "Tq01", ptr);
        p.Tq02 = rd.number(g, "Tq02", ptr);
        p.M = 2.0 * rd.number(g, "H", ptr) / zs;
        p.D = rd.number(g, "D", ptr, 0.0) / zs;
        c->generators.push_back(p);
    }

    const json& motors = rd.array(doc, "motors", "", false);
    for (std::size_t k = 0; k < motors.size(); ++k) {
        const std::string ptr = "/motors/" + std::to_string(k);
        const json& m = rd.object(motors[k], ptr,
                                  {"bus", "rs", "xs", "rr", "xr", "xm", "Hm", "a", "b", "c", "mva_base"});
        MotorParams p;
        p.bus = bus_index(rd, *c, m, "bus", ptr);
        const double zs = c->base_mva / rd.number(m, "mva_base", ptr, c->base_mva);
        p.rs = zs * rd.number(m, "rs", ptr, 0.0);
        p.xs = zs * rd.number(m, "xs", ptr);
        p.rr = zs * rd.number(m, "rr", ptr);
        p.xr = zs * rd.number(m, "xr", ptr);
        p.xm = zs * rd.number(m, "xm", ptr);
        p.Hm = rd.number(m, "Hm", ptr) / zs;
        p.a = rd.number(m, "a", ptr, 0.0) / zs;
        p.b = rd.number(m, "b", ptr, 0.0) / zs;
        p.c = rd.number(m, "c", ptr, 0.0) / zs;
        c->motors.push_back(p);
    }

    const json& loads = rd.array(doc, "static_loads", "", false);
    for (std::size_t k = 0; k < loads.size(); ++k) {
        const std::string ptr = "/static_loads/" + std::to_string(k);
        const json& l = rd.object(loads[k], ptr, {"bus", "p0", "q0", "alpha", "beta"});
        StaticLoad s;
        s.bus = bus_index(rd, *c, l, "bus", ptr);
        s.p0 = rd.number(l, "p0", ptr);
        s.q0 = rd.number(l, "q0", ptr);
        s.alpha = rd.number(l, "alpha", ptr);
        s.beta = rd.number(l, "beta", ptr);
        c->static_loads.push_back(s);
    }

    validate_case(*c);

    const json& scenarios = rd.array(doc, "scenarios", "", false);
    std::set<std::string> names;
    for (std::size_t k = 0; k < scenarios.size(); ++k) {
        const std::string ptr = "/scenarios/" + std::to_string(k);
        const json& s = rd.object(scenarios[k], ptr, {"name", "description", "events"});
        Scenario sc;
        sc.name = rd.string(s, "name", ptr);
        if (sc.name.empty()) {
            rd.fail(ptr + "/name", "scenario needs a name");
        }
        if (!names.insert(sc.name).second) {
            rd.fail(ptr + "/name", "duplicate scenario name '" + sc.name + "'");
        }
        sc.description = rd.string(s, "description", ptr);
        const json& events = rd.array(s, "events", ptr, false);
        for (std::size_t e = 0; e < events.size(); ++e) {
            sc.events.push_back(parse_event(rd, *c, events[e], ptr + "/events/" + std::to_string(e)));
        }
        bundle.scenarios.push_back(std::move(sc));
    }
    bundle.network = std::move(c);
    return bundle;
}

CaseBundle parse_case(const std::filesystem::path& path, bool strict) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Input, "cannot open case file " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Input, path.string() + ": invalid JSON: " + e.what());
    }
    return parse_case_json(doc, strict);
}

json case_to_json(const NetworkCase& c, const std::vector<Scenario>& scenarios) {
    json doc;
    doc["name"] = c.name;
    doc["provenance"] = c.provenance;
    doc["system"] = {{"base_mva", c.base_mva}, {"base_freq", c.base_freq}};
    auto id = [&](int idx) { return c.buses[idx].id; };

    doc["buses"] = json::array();
    doc["shunts"] = json::array();
    for (const auto& b : c.buses) {
        doc["buses"].push_back({{"id", b.id}, {"name", b.name}});
        if (b.shunt != Complex(0.0, 0.0)) {
            doc["shunts"].push_back({{"bus", b.id}, {"g", b.shunt.real()}, {"b", b.shunt.imag()}});
        }
    }
    doc["lines"] = json::array();
    for (const auto& l : c.lines) {
        doc["lines"].push_back({{"from", id(l.from)}, {"to", id(l.to)}, {"y", {l.y.real(), l.y.imag()}}});
    }
    doc["generators"] = json::array();
    for (const auto& g : c.generators) {
        doc["generators"].push_back({{"bus", id(g.terminal_bus)}, {"slack", g.slack}, {"p", g.p_set},
                                     {"v", g.v_set}, {"ra", g.ra}, {"xd", g.xd}, {"xd1", g.xd1}, {"xd2", g.xd2},
                                     {"Td01", g.Td01}, {"Td02", g.Td02}, {"xq", g.xq}, {"xq1", g.xq1},
                                     {"xq2", g.xq2}, {"Tq01", g.Tq01}, {"Tq02", g.Tq02}, {"H", 0.5 * g.M},
                                     {"D", g.D}});
    }
    doc["motors"] = json::array();
    for (const auto& m : c.motors) {
        doc["motors"].push_back({{"bus", id(m.bus)}, {"rs", m.rs}, {"xs", m.xs}, {"rr", m.rr}, {"xr", m.xr},
                                 {"xm", m.xm}, {"Hm", m.Hm}, {"a", m.a}, {"b", m.b}, {"c", m.c}});
    }
    doc["static_loads"] = json::array();
    for (const auto& s : c.static_loads) {
        doc["static_loads"].push_back(
            {{"bus", id(s.bus)}, {"p0", s.p0}, {"q0", s.q0}, {"alpha", s.alpha}, {"beta", s.beta}});
    }
    doc["scenarios"] = json::array();
    for (const auto& sc : scenarios) {
        json events = json::array();
        for (const auto& e : sc.events) {
            json ev{{"kind", to_string(e.kind)}};
            switch (e.kind) {
                case EventKind::ApplyFault:
                    ev["bus"] = id(e.bus);
                    ev["x_f"] = e.value;
                    break;
                case EventKind::ClearFault:
                    break;
                case EventKind::InstallShunt:
                    ev["bus"] = id(e.bus);
                    ev["b0"] = e.value;
                    break;
                case EventKind::ShedMotor:
                    ev["bus"] = id(e.bus);
                    break;
                case EventKind::ShedStatic:
                    ev["bus"] = id(e.bus);
                    ev["fraction"] = e.value;
                    break;
            }
            if (e.trigger == TriggerKind::WhenIvsCrosses) {
                ev["trigger"] = {{"ivs_crosses", e.threshold},
                                 {"direction", e.direction == CrossDirection::Down ? "down" : "up"}};
            } else {
                ev["t"] = e.t;
            }
            events.push_back(ev);
        }
        doc["scenarios"].push_back({{"name", sc.name}, {"description", sc.description}, {"events", events}});
    }
    return doc;
}

}  // namespace impasse
