#pragma once

#include "impasse/algebraic.hpp"
#include "impasse/types.hpp"

#include <array>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace impasse {

/// Equivalent load admittances at one (x, y) snapshot, stored as diagonals.
struct EquivalentLoadSnapshot {
    ComplexVector y_mot;
    RealVector g_stat;
    RealVector b_stat;
    RealVector alpha;
    RealVector beta;
    RealVector theta;
    RealVector v;
};

struct ImpasseReport {
    double t = 0.0;
    double sigma_min_y1 = 0.0;
    double rhs_eq16 = 0.0;
    double i_vs = std::numeric_limits<double>::infinity();
    double sigma_min_jalg = 0.0;
    double sigma_max_jalg = 0.0;
    double min_mod_eig_jalg = 0.0;
    bool hit = false;
};

struct Theorem1Result {
    double sigma_min_y1 = 0.0;
    double rhs = 0.0;
    double i_vs = std::numeric_limits<double>::infinity();
    bool satisfied = false;
};

struct Lemma1Report {
    double sigma_min_jalg = 0.0;
    double sigma_min_yprime = 0.0;
    double det_ratio = 0.0;
    /// [0] J' - Jalg diag(I, V)
    /// [1] J'' - E_r J' E_r^-1
    /// [2] J'' - (I (x) U) K (I (x) U)^-1
    /// [3] E_r^-1 K E_r - j diag(-I, I) diag(Vc, conj Vc) Y' diag(conj Vc, Vc)
    std::array<double, 4> chain_residuals{};
};

struct Theorem2Verdict {
    bool applicable = true;  // false when any motor is present
    std::array<bool, 4> conditions{};
    bool wcdd = false;
    bool immune = false;
    std::vector<std::string> notes;
};

struct SensitivityResult {
    double value = 0.0;
    bool degenerate = false;      // lambda_2 - lambda_min below tolerance
    bool approximation_ok = true;  // ||Re Y1|| <= approx_ratio ||Im Y1||
    double lambda_min = 0.0;
};

inline constexpr double kSingularTolerance = 1e-6;  // relative to sigma_max(Jalg)

EquivalentLoadSnapshot equivalent_snapshot(const RealVector& x, const RealVector& y, const DaeSystem& sys);

ComplexMatrix build_y1(const AdmittanceSet& adm, const EquivalentLoadSnapshot& snap);
/// Diagonal of Y2 = (I - alpha/2) G_stat + j (I - beta/2) B_stat.
ComplexVector build_y2(const EquivalentLoadSnapshot& snap);
ComplexMatrix build_yprime(const ComplexMatrix& y1, const ComplexVector& y2, const RealVector& theta);

Theorem1Result theorem1_check(const ComplexMatrix& y1, const EquivalentLoadSnapshot& snap);

/// Executable form of the singularity equivalence between Jalg and Y'. Only
/// meaningful where g(x, y) = 0.
Lemma1Report lemma1_oracle(const RealVector& x, const RealVector& y, const DaeSystem& sys);

Theorem2Verdict theorem2_check(const NetworkCase& c);

/// Weakly chained diagonal dominance of a square matrix.
bool is_wcdd(const ComplexMatrix& a, double tol = 1e-12);

struct SensitivityOptions {
    double approx_ratio = 0.2;
    double degeneracy_tol = 1e-8;
};

/// d sigma_min(Y1) / d b_i0 under the Y1 ~ -j B1 approximation. Throws
/// Error(NotApplicable) if B1 = -Im(Y1) is not positive definite.
SensitivityResult shunt_sensitivity(const ComplexMatrix& y1, int bus, const SensitivityOptions& options = {});

/// Central difference of sigma_min(Y1) with respect to a shunt susceptance
/// added at `bus`, loads held fixed.
double sigma_min_shunt_fd(const ComplexMatrix& y1, int bus, double h = 1e-6);

/// A random operating point of a case on the constraint manifold g = 0. Every
/// bus receives a static load; rated powers are chosen so that the power
/// balance closes exactly at (x, y).
struct ManifoldSample {
    std::shared_ptr<NetworkCase> network;
    RealVector x;
    RealVector y;
};
ManifoldSample random_manifold_state(const NetworkCase& c, std::mt19937_64& rng);

double min_modulus_eig(const RealMatrix& j_alg);

double sigma_min(const ComplexMatrix& m);
double sigma_min(const RealMatrix& m);

ImpasseReport impasse_report(const RealVector& x, const RealVector& y, const DaeSystem& sys, double t);

}  // namespace impasse
