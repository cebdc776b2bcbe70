#pragma once

#include "impasse/devices.hpp"
#include "impasse/netmodel.hpp"
#include "impasse/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace impasse {

/// Fixed block layout of the state vector x: generators first (6 states
/// each, in case order), then motors (3 states each).
struct StateLayout {
    int n = 0;  // network buses
    int generators = 0;
    int motors = 0;

    int nx() const { return 6 * generators + 3 * motors; }
    int ny() const { return 2 * n; }
    int gen_offset(int k) const { return 6 * k; }
    int motor_offset(int k) const { return 6 * generators + 3 * k; }

    /// "gen1 -> [0,6)" style lines, one per device.
    std::vector<std::string> manifest() const;
};

struct AlgebraicState {
    RealVector theta;
    RealVector v;
};

/// y is stored as [theta_1..theta_n, V_1..V_n].
struct SystemState {
    RealVector x;
    RealVector y;
    double t = 0.0;

    AlgebraicState algebraic() const;
};

struct DeviceInputs {
    std::vector<GeneratorInputs> generators;
};

/// Everything needed to evaluate f and g for one network configuration. The
/// case is shared and immutable; modifications (faults, shunts, shedding) live
/// here so a scenario never mutates the case.
class DaeSystem {
public:
    DaeSystem(std::shared_ptr<const NetworkCase> network, ComplexVector extra_shunts, DeviceInputs inputs);

    const NetworkCase& network() const { return *case_; }
    std::shared_ptr<const NetworkCase> network_ptr() const { return case_; }
    const StateLayout& layout() const { return layout_; }
    const AdmittanceSet& admittances() const { return adm_; }
    const DeviceInputs& inputs() const { return inputs_; }
    void set_inputs(DeviceInputs inputs) { inputs_ = std::move(inputs); }

    const ComplexVector& extra_shunts() const { return extra_shunts_; }
    /// Adds a shunt admittance on top of the case network and rebuilds Y.
    void add_shunt(int bus, Complex y);

    bool motor_online(int k) const { return motor_online_[k]; }
    void shed_motor(int k) { motor_online_[k] = false; }
    double static_scale(int k) const { return static_scale_[k]; }
    void scale_static_load(int k, double factor) { static_scale_[k] *= factor; }

    /// Effective rated powers of static load k after shedding.
    double static_p0(int k) const;
    double static_q0(int k) const;

    /// Internal-bus phasors (E_k, eta_k) recomputed from x.
    void internal_buses(const RealVector& x, RealVector& theta_g, RealVector& v_g) const;

    RealVector f(const RealVector& x, const RealVector& y) const;

private:
    void rebuild();

    std::shared_ptr<const NetworkCase> case_;
    StateLayout layout_;
    ComplexVector extra_shunts_;
    AdmittanceSet adm_;
    DeviceInputs inputs_;
    std::vector<bool> motor_online_;
    std::vector<double> static_scale_;
};

GeneratorState gen_state_at(const RealVector& x, const StateLayout& layout, int k);
void set_gen_state(RealVector& x, const StateLayout& layout, int k, const GeneratorState& s);
MotorState motor_state_at(const RealVector& x, const StateLayout& layout, int k);
void set_motor_state(RealVector& x, const StateLayout& layout, int k, const MotorState& s);

/// Power balance residuals [g_p; g_q] at every network bus.
RealVector residuals(const RealVector& x, const RealVector& y, const DaeSystem& sys);

/// Analytic dg/dy, 2n x 2n, blocks [[dgp/dtheta, dgp/dV], [dgq/dtheta, dgq/dV]].
RealMatrix algebraic_jacobian(const RealVector& x, const RealVector& y, const DaeSystem& sys);

struct NewtonOptions {
    double tolerance = 1e-10;
    int max_iter = 50;
    double v_floor = 1e-4;
};

struct NewtonResult {
    RealVector y;
    int iterations = 0;
    std::vector<double> residual_history;
};

/// Newton on g(x, .) = 0 from y_guess with the analytic Jacobian. One halving
/// line search on residual increase. Throws NewtonFailure or Error(Assumption2).
NewtonResult solve_algebraic(const RealVector& x, const RealVector& y_guess, const DaeSystem& sys,
                             const NewtonOptions& options = {});

struct Equilibrium {
    SystemState state;
    DeviceInputs inputs;
    int power_flow_iterations = 0;
};

/// Power flow over the network buses (generators as PV/slack, motors with
/// their torque balance), then back-initialization of machine states.
/// extra_shunts are applied to the network before solving.
Equilibrium initialize_equilibrium(std::shared_ptr<const NetworkCase> network, const ComplexVector& extra_shunts);

/// Rows of a matrix as "r c value" text for offline comparison.
std::string dump_matrix(const RealMatrix& m);

}  // namespace impasse
