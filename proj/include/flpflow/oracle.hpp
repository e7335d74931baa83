#pragma once

#include <string>
#include <vector>

#include "flpflow/barriers.hpp"
#include "flpflow/core.hpp"
#include "flpflow/flow.hpp"

namespace flpflow {

struct OracleResult {
    std::vector<int> best_assign;  // empty when nothing is capacity-feasible
    double best_cost = 0.0;        // +inf when nothing is capacity-feasible
    MatrixXd best_locations;       // per-cluster weighted centroids
    long long feasible_count = 0;
    long long enumerated_count = 0;
};

/// Largest M^N brute_force_flp accepts.
inline constexpr double kOracleLimit = 1e7;

/// Exhaustive search over all M^N hard assignments. An assignment survives if
/// L_j <= sum_{i: a(i)=j} p_i c_ij <= C_j for every j; each survivor is scored
/// with its facilities at the per-cluster weighted centroids. Ties keep the
/// lexicographically first assignment. Throws TooLarge.
OracleResult brute_force_flp(const Instance& instance);

struct GradientPair {
    MatrixXd assoc;      // N x M
    MatrixXd locations;  // M x d
};

/// Central differences of the shifted free energy in every coordinate.
/// Throws StepTooLarge if some association +- h leaves (0, 1).
GradientPair finite_diff_gradient(const Instance& instance, const State& state, double beta, double h);

struct Breach {
    int step = 0;
    std::string kind;  // "phi", "psi_c", "psi_l" or "xi"
    double value = 0.0;
};

/// Worst value of each barrier over a trace and where it occurred (-1 for an
/// empty trace), plus every step that breaches a tolerance.
struct FeasibilityAudit {
    double max_abs_phi = 0.0;
    int max_abs_phi_step = -1;
    double min_psi_c = 0.0;
    int min_psi_c_step = -1;
    double min_psi_l = 0.0;
    int min_psi_l_step = -1;
    double min_xi = 0.0;
    int min_xi_step = -1;
    std::vector<Breach> breaches;

    bool ok() const { return breaches.empty(); }
};

FeasibilityAudit audit_feasibility(const Instance& instance, const FlowTrace& trace, const FeasibilityTol& tol = {});

}  // namespace flpflow
