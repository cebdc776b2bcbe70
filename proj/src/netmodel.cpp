#include "impasse/netmodel.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

namespace impasse {

double NetworkCase::omega_base() const { return 2.0 * std::numbers::pi * base_freq; }

int NetworkCase::index_of(int bus_id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == bus_id) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

namespace {

class DisjointSet {
public:
    explicit DisjointSet(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    int find(int i) {
        while (parent_[i] != i) {
            parent_[i] = parent_[parent_[i]];
            i = parent_[i];
        }
        return i;
    }

    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) {
            parent_[std::max(a, b)] = std::min(a, b);
        }
    }

private:
    std::vector<int> parent_;
};

std::string describe_components(const NetworkCase& c, const Connectivity& conn) {
    std::ostringstream os;
    os << "network is disconnected into " << conn.components.size() << " components:";
    for (const auto& comp : conn.components) {
        os << " {";
        for (std::size_t k = 0; k < comp.size(); ++k) {
            os << (k ? "," : "") << c.buses[comp[k]].id;
        }
        os << "}";
    }
    return os.str();
}

}  // namespace

Connectivity connectivity_check(const NetworkCase& c) {
    const int n = c.bus_count();
    DisjointSet sets(n);
    for (const auto& line : c.lines) {
        sets.unite(line.from, line.to);
    }
    Connectivity result;
    std::vector<int> slot(n, -1);
    for (int i = 0; i < n; ++i) {
        const int root = sets.find(i);
        if (slot[root] < 0) {
            slot[root] = static_cast<int>(result.components.size());
            result.components.emplace_back();
        }
        result.components[slot[root]].push_back(i);
    }
    result.connected = result.components.size() == 1;
    return result;
}

ComplexMatrix build_ybus(const NetworkCase& c) {
    const auto conn = connectivity_check(c);
    if (!conn.connected) {
        throw Error(ErrorKind::Network, describe_components(c, conn));
    }
    const int n = c.bus_count();
    ComplexMatrix y = ComplexMatrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        y(i, i) = c.buses[i].shunt;
    }
    for (const auto& line : c.lines) {
        y(line.from, line.from) += line.y;
        y(line.to, line.to) += line.y;
        y(line.from, line.to) -= line.y;
        y(line.to, line.from) -= line.y;
    }
    return y;
}

AdmittanceSet build_augmented(const NetworkCase& c, const ComplexMatrix& ybus) {
    const int n = c.bus_count();
    const int g = c.generator_count();
    if (ybus.rows() != n || ybus.cols() != n) {
        throw Error(ErrorKind::Input, "build_augmented: Y_bus dimension does not match the case");
    }
    AdmittanceSet adm;
    adm.y_bus = ybus;
    adm.y_gen = ComplexMatrix::Zero(n, n);
    adm.y_lg = ComplexMatrix::Zero(n, g);
    adm.y_gg = ComplexMatrix::Zero(g, g);
    for (int k = 0; k < g; ++k) {
        const auto& gen = c.generators[k];
        const int i = gen.terminal_bus;
        if (i < 0 || i >= n || c.buses[i].kind != BusKind::GeneratorTerminal) {
            throw Error(ErrorKind::Network, "generator " + std::to_string(k + 1) +
                                                " is attached to a bus that is not a generator terminal");
        }
        const Complex ygs = gen.stator_admittance();
        adm.y_gg(k, k) = ygs;
        adm.y_gen(i, i) += ygs;
        adm.y_lg(i, k) = -ygs;
    }
    adm.y_aug = ComplexMatrix::Zero(n + g, n + g);
    adm.y_aug.topLeftCorner(n, n) = adm.y_bus + adm.y_gen;
    adm.y_aug.topRightCorner(n, g) = adm.y_lg;
    adm.y_aug.bottomLeftCorner(g, n) = adm.y_lg.transpose();
    adm.y_aug.bottomRightCorner(g, g) = adm.y_gg;
    return adm;
}

ComplexMatrix apply_shunt(const ComplexMatrix& ybus, int bus, double b0) {
    if (bus < 0 || bus >= ybus.rows()) {
        throw Error(ErrorKind::Network, "apply_shunt: bus index " + std::to_string(bus) + " out of range");
    }
    ComplexMatrix out = ybus;
    out(bus, bus) += Complex(0.0, b0);
    return out;
}

double phase_shift(const ComplexMatrix& y_aug, int i, int j) {
    const Complex y = y_aug(i, j);
    if (y == Complex(0.0, 0.0)) {
        return 0.0;
    }
    if (y.imag() == 0.0) {
        // -atan(+-inf)
        return y.real() > 0.0 ? -std::numbers::pi / 2 : std::numbers::pi / 2;
    }
    return -std::atan(y.real() / y.imag());
}

void validate_case(NetworkCase& c) {
    const int n = c.bus_count();
    if (n == 0) {
        throw Error(ErrorKind::Input, "case has no buses");
    }
    std::set<int> ids;
    for (const auto& bus : c.buses) {
        ids.insert(bus.id);
    }
    if (static_cast<int>(ids.size()) != n || *ids.begin() != 1 || *ids.rbegin() != n) {
        throw Error(ErrorKind::Input, "bus ids must be exactly 1..n");
    }
    for (auto& bus : c.buses) {
        bus.kind = BusKind::LoadOnly;
    }
    for (std::size_t k = 0; k < c.lines.size(); ++k) {
        const auto& line = c.lines[k];
        if (line.from < 0 || line.from >= n || line.to < 0 || line.to >= n) {
            throw Error(ErrorKind::Input, "line " + std::to_string(k + 1) + " references an unknown bus");
        }
        if (line.from == line.to) {
            throw Error(ErrorKind::Input, "line " + std::to_string(k + 1) + " is a self loop");
        }
        if (line.y == Complex(0.0, 0.0)) {
            throw Error(ErrorKind::Input, "line " + std::to_string(k + 1) + " has zero admittance");
        }
    }
    std::set<int> gen_buses;
    int slack_count = 0;
    for (std::size_t k = 0; k < c.generators.size(); ++k) {
        const auto& gen = c.generators[k];
        const std::string name = "generator " + std::to_string(k + 1);
        if (gen.terminal_bus < 0 || gen.terminal_bus >= n) {
            throw Error(ErrorKind::Input, name + " references an unknown bus");
        }
        if (!gen_buses.insert(gen.terminal_bus).second) {
            throw Error(ErrorKind::Input, name + " shares its terminal bus with another generator");
        }
        validate_generator(gen, name);
        c.buses[gen.terminal_bus].kind = BusKind::GeneratorTerminal;
        slack_count += gen.slack ? 1 : 0;
    }
    if (!c.generators.empty() && slack_count != 1) {
        throw Error(ErrorKind::Input, "exactly one generator must be the slack");
    }
    std::set<int> motor_buses;
    for (std::size_t k = 0; k < c.motors.size(); ++k) {
        const auto& m = c.motors[k];
        const std::string name = "motor " + std::to_string(k + 1);
        if (m.bus < 0 || m.bus >= n) {
            throw Error(ErrorKind::Input, name + " references an unknown bus");
        }
        if (!motor_buses.insert(m.bus).second) {
            throw Error(ErrorKind::Input, name + ": at most one motor per bus");
        }
        validate_motor(m, name);
    }
    std::set<int> load_buses;
    for (std::size_t k = 0; k < c.static_loads.size(); ++k) {
        const auto& l = c.static_loads[k];
        const std::string name = "static load " + std::to_string(k + 1);
        if (l.bus < 0 || l.bus >= n) {
            throw Error(ErrorKind::Input, name + " references an unknown bus");
        }
        if (!load_buses.insert(l.bus).second) {
            throw Error(ErrorKind::Input, name + ": at most one static load per bus");
        }
        if (!std::isfinite(l.alpha) || !std::isfinite(l.beta) || !std::isfinite(l.p0) || !std::isfinite(l.q0)) {
            throw Error(ErrorKind::Input, name + " has non-finite parameters");
        }
    }
    const auto conn = connectivity_check(c);
    if (!conn.connected) {
        throw Error(ErrorKind::Network, describe_components(c, conn));
    }
}

}  // namespace impasse
