#pragma once

#include "impasse/devices.hpp"
#include "impasse/types.hpp"

#include <string>
#include <vector>

namespace impasse {

enum class BusKind { GeneratorTerminal, LoadOnly };

struct Bus {
    int id = 0;  // 1-based, as written in the case file
    std::string name;
    BusKind kind = BusKind::LoadOnly;
    Complex shunt{0.0, 0.0};  // y_i0, includes absorbed line charging
};

struct Line {
    int from = 0;  // 0-based bus indices
    int to = 0;
    Complex y{0.0, 0.0};  // series admittance
};

/// Static network plus device data. Generator-internal buses are implicit:
/// generator k owns internal bus n + k.
struct NetworkCase {
    std::string name;
    double base_mva = 100.0;
    double base_freq = 60.0;
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<GeneratorParams> generators;
    std::vector<MotorParams> motors;
    std::vector<StaticLoad> static_loads;
    std::vector<std::string> provenance;

    int bus_count() const { return static_cast<int>(buses.size()); }
    int generator_count() const { return static_cast<int>(generators.size()); }
    double omega_base() const;
    /// 0-based index of a case-file bus id, or -1.
    int index_of(int bus_id) const;
};

struct AdmittanceSet {
    ComplexMatrix y_bus;  // n x n
    ComplexMatrix y_gen;  // n x n diagonal
    ComplexMatrix y_lg;   // n x g
    ComplexMatrix y_gg;   // g x g diagonal
    ComplexMatrix y_aug;  // (n+g) x (n+g)
};

struct Connectivity {
    bool connected = false;
    std::vector<std::vector<int>> components;  // 0-based bus indices
};

/// Union-find over the undirected line graph.
Connectivity connectivity_check(const NetworkCase& c);

/// Bus admittance matrix among the network buses. Throws Error(Network) if
/// the line graph is disconnected.
ComplexMatrix build_ybus(const NetworkCase& c);

AdmittanceSet build_augmented(const NetworkCase& c, const ComplexMatrix& ybus);

/// Copy of ybus with j*b0 added at (bus, bus).
ComplexMatrix apply_shunt(const ComplexMatrix& ybus, int bus, double b0);

/// phi_ij = -atan(G_ij / B_ij), 0 when the entry vanishes.
double phase_shift(const ComplexMatrix& y_aug, int i, int j);

/// Checks the structural invariants of a case (bus numbering, device
/// placement, Assumption 1). Throws Error.
void validate_case(NetworkCase& c);

}  // namespace impasse
