#pragma once

#include "impasse/algebraic.hpp"
#include "impasse/analysis.hpp"

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace impasse {

enum class EventKind { ApplyFault, ClearFault, InstallShunt, ShedMotor, ShedStatic };
enum class TriggerKind { AtTime, WhenIvsCrosses };
enum class CrossDirection { Down, Up };

/// A timed (or I_vs-triggered) modification of the network. Bus indices are
/// 0-based. InstallShunt events at t <= 0 are part of the pre-disturbance
/// network and enter the equilibrium computation.
struct Event {
    EventKind kind = EventKind::ApplyFault;
    TriggerKind trigger = TriggerKind::AtTime;
    double t = 0.0;
    int bus = 0;
    double value = 0.0;  // fault reactance, shunt susceptance, or shed fraction
    double threshold = 1.0;
    CrossDirection direction = CrossDirection::Down;
};

struct Scenario {
    std::string name;
    std::string description;
    std::vector<Event> events;
};

enum class Termination { HorizonReached, ImpasseHit, Assumption2Violation };

const char* to_string(Termination t);
const char* to_string(EventKind k);

struct Sample {
    SystemState state;
    ImpasseReport report;
};

struct Trajectory {
    std::string scenario;
    StateLayout layout;
    std::vector<Sample> samples;
    Termination termination = Termination::HorizonReached;
    double t_hit = std::numeric_limits<double>::quiet_NaN();
    /// First time I_vs < 1 anywhere on the run.
    double ivs_first_below = std::numeric_limits<double>::quiet_NaN();
    /// Armed downward crossing of I_vs through 1 (after fault clearing and
    /// post-clear recovery above 1).
    double ivs_crossing = std::numeric_limits<double>::quiet_NaN();
    double shed_time = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> log;
};

struct SimOptions {
    double horizon = 12.0;
    double dt = 0.005;               // coarse step
    double dt_fine = 0.001;          // fault-on and first fine_window after clearing
    double fine_window = 0.5;
    double step_tolerance = 1e-10;
    int step_max_iter = 20;
    double arming_delay = 0.0;       // extra delay after clearing before an I_vs trigger may fire
    bool require_recovery = true;    // I_vs must exceed the threshold once post-clear before arming
    bool refine_impasse = true;
};

/// One implicit-trapezoidal step of the coupled DAE. Throws NewtonFailure.
SystemState step(const SystemState& state, double dt, const DaeSystem& sys, const SimOptions& options = {});

struct ImpasseBracket {
    SystemState last_good;
    double dt_fail = 0.0;  // step length that failed from last_good
};

struct ImpasseHit {
    double t_hit = 0.0;
    SystemState state;  // point on (or at the last solvable point before) the impasse surface
    ImpasseReport report;
    bool on_surface = false;  // fold point located, sigma_min(Jalg) below tolerance
    bool theorem1_holds = false;
};

/// Refines the time of an impasse hit inside a failed step. Throws
/// Error(Numerical) when the bracket holds no crossing.
ImpasseHit detect_impasse(const ImpasseBracket& bracket, const DaeSystem& sys, const SimOptions& options = {});

/// Pre-disturbance system for a scenario: network with the t <= 0 shunts and
/// its equilibrium.
struct PreparedScenario {
    std::unique_ptr<DaeSystem> system;
    SystemState initial;
};
PreparedScenario prepare_scenario(std::shared_ptr<const NetworkCase> network, const Scenario& scenario);

Trajectory run_scenario(std::shared_ptr<const NetworkCase> network, const Scenario& scenario,
                        const SimOptions& options = {});

/// Copy of `scenario` with a shed-motor event armed on the I_vs crossing.
Scenario with_ivs_shedding(const Scenario& scenario, int motor_bus, double threshold = 1.0);

/// Runs scenarios concurrently (at most `threads` workers) over one shared
/// case. Results keep the input order.
std::vector<Trajectory> run_batch(std::shared_ptr<const NetworkCase> network, const std::vector<Scenario>& scenarios,
                                  const SimOptions& options, int threads);

/// Same scenario with the motor at `motor_bus` shed when I_vs drops through
/// `threshold`.
Trajectory ivs_triggered_shedding(std::shared_ptr<const NetworkCase> network, const Scenario& scenario,
                                  int motor_bus, double threshold = 1.0, const SimOptions& options = {});

}  // namespace impasse
