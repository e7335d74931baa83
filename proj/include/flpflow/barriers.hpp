#pragma once

#include "flpflow/core.hpp"
#include "flpflow/energy.hpp"

namespace flpflow {

/// Constraint functions of the relaxed problem at one state:
///   phi_i   = sum_j p_{j|i} - 1                 (equality)
///   psi_c_j = C_j - u_j,  psi_l_j = u_j - L_j    (capacity barriers)
///   xi_ij   = p_{j|i} (1 - p_{j|i})              (box barrier)
/// with u_j = sum_i p_i p_{j|i} c_ij.
struct BarrierEval {
    VectorXd phi;
    VectorXd psi_c;
    VectorXd psi_l;
    MatrixXd xi;
    VectorXd utilization;

    double max_abs_phi() const { return phi.size() ? phi.cwiseAbs().maxCoeff() : 0.0; }
    double min_psi_c() const { return psi_c.size() ? psi_c.minCoeff() : 0.0; }
    double min_psi_l() const { return psi_l.size() ? psi_l.minCoeff() : 0.0; }
    double min_xi() const { return xi.size() ? xi.minCoeff() : 0.0; }
};

/// Feasibility tolerances used along flow trajectories.
struct FeasibilityTol {
    double phi = 1e-6;
    double psi = 1e-6;
    double xi = 1e-12;
};

/// The control QPs keep xi above this level rather than above zero. A decay
/// xi_dot = -alpha xi would reach the 1e-12 tolerance in finite time whenever
/// the optimum of an entry lies below it, and entries resting just above zero
/// make explicit Euler very stiff. Entries held here count as active in
/// kkt_residual, whose activity tolerance is larger.
inline constexpr double kXiFloor = 1e-8;

BarrierEval eval_barriers(const Instance& instance, const State& state);

/// True iff |phi| <= tol.phi, psi >= -tol.psi and xi >= tol.xi.
bool is_feasible(const BarrierEval& barriers, const FeasibilityTol& tol = {});

/// Time derivatives of every constraint function and of F~ as linear
/// functionals of the stacked control (v_ij for all i,j; u_j for all j).
///
///   phi_dot_i   =  sum_j v_ij
///   psi_c_dot_j = -sum_i p_i c_ij v_ij
///   psi_l_dot_j = +sum_i p_i c_ij v_ij
///   xi_dot_ij   = (1 - 2 p_{j|i}) v_ij
///   F~_dot      = sum_ij dF~/dp_{j|i} v_ij + sum_j <grad_{y_j} F~, u_j>
struct DerivativeRows {
    MatrixXd capacity;        // p_i c_ij, N x M
    MatrixXd xi;              // 1 - 2 p_{j|i}, N x M
    MatrixXd clf_assoc;       // N x M
    MatrixXd clf_locations;   // M x d

    struct Rates {
        VectorXd phi;
        VectorXd psi_c;
        VectorXd psi_l;
        MatrixXd xi;
        double clf = 0.0;
    };

    /// Apply every row to a control given as an assoc-rate block (N x M) and
    /// a location-rate block (M x d).
    Rates apply(const MatrixXd& assoc_rate, const MatrixXd& location_rate) const;
};

DerivativeRows derivative_rows(const Instance& instance, const State& state, const EnergyEval& energy);

}  // namespace flpflow
