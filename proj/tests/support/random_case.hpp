#pragma once

#include "impasse/algebraic.hpp"
#include "impasse/analysis.hpp"
#include "impasse/netmodel.hpp"

#include <memory>
#include <random>

namespace impasse::testing {

struct RandomCaseOptions {
    int buses = 5;
    int generators = 2;
    int motors = 1;
    bool lossless = false;  // r = 0, no charging, ra = 0, reactive-only loads
};

/// Connected random network: spanning tree plus a few chords, generators on
/// the first buses, motors and static loads on the rest. Validated.
std::shared_ptr<NetworkCase> random_case(const RandomCaseOptions& options, std::mt19937_64& rng);

/// Random (x, y) with V in [v_lo, v_hi]; not on the constraint manifold.
void random_state(const DaeSystem& sys, std::mt19937_64& rng, RealVector& x, RealVector& y, double v_lo = 0.6,
                  double v_hi = 1.4);

/// Zero extra shunts and default generator inputs.
DaeSystem bare_system(std::shared_ptr<const NetworkCase> c);

/// Central finite difference of residuals with respect to y.
RealMatrix fd_jacobian(const RealVector& x, const RealVector& y, const DaeSystem& sys, double h = 1e-6);

/// Relative error max|A - B| / max(1, max|B|).
double relative_error(const RealMatrix& a, const RealMatrix& b);

/// Continuation from a manifold state toward a constructed singular point.
/// One load exponent at one bus moves from `start` to `end` while its rated
/// power is rescaled so the state stays on g = 0. The determinant of Jalg is
/// affine in that exponent, so `end` is its root.
struct SingularPath {
    std::shared_ptr<const NetworkCase> base;
    RealVector x;
    RealVector y;
    int load = 0;
    bool reactive = false;
    double start = 0.0;
    double end = 0.0;

    /// Network at path parameter s in [0, 1].
    std::shared_ptr<NetworkCase> at(double s) const;
};

/// Picks the bus and exponent whose root is closest to the current value.
SingularPath singular_path(const ManifoldSample& sample);

}  // namespace impasse::testing
