#pragma once

#include <Eigen/Sparse>

#include <iosfwd>
#include <optional>

#include "flpflow/barriers.hpp"
#include "flpflow/core.hpp"
#include "flpflow/energy.hpp"

namespace flpflow {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Index map for the stacked control vector (v_ij row-major, then u_j, then
/// optionally the CLF slack delta).
struct ControlLayout {
    int n = 0;
    int m = 0;
    int d = 0;

    static ControlLayout of(const Instance& instance) {
        return {instance.num_points(), instance.num_facilities(), instance.dim()};
    }

    int assoc(int i, int j) const { return i * m + j; }
    int location(int j, int k) const { return n * m + j * d + k; }
    int delta() const { return n * m + m * d; }
    /// v and u entries, without delta.
    int num_controls() const { return n * m + m * d; }

    MatrixXd assoc_block(const VectorXd& w) const;
    MatrixXd location_block(const VectorXd& w) const;
    VectorXd stack(const MatrixXd& assoc_rate, const MatrixXd& location_rate) const;
};

/// minimize 1/2 w'Hw + c'w  subject to  E w = e,  G w <= g.
///
/// H is diagonal (`diag_hessian`) unless `dense_hessian` is set, in which case
/// the dense matrix is used and `diag_hessian` is ignored.
struct QpProblem {
    int num_vars = 0;
    VectorXd diag_hessian;
    std::optional<MatrixXd> dense_hessian;
    VectorXd linear_cost;
    SparseRows eq_matrix;
    VectorXd eq_rhs;
    SparseRows ineq_matrix;
    VectorXd ineq_rhs;

    /// Throws ShapeError on inconsistent dimensions or a non-positive diagonal.
    void check() const;
    VectorXd hessian_times(const VectorXd& w) const;
    double objective(const VectorXd& w) const;
};

enum class QpStatus { Solved, MaxIters, Infeasible };

const char* to_string(QpStatus status);

struct QpSolution {
    VectorXd primal;
    VectorXd dual_eq;
    VectorXd dual_ineq;  // >= 0
    double objective = 0.0;
    QpStatus status = QpStatus::MaxIters;
    int iterations = 0;
    double solve_time_seconds = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    bool polished = false;
};

struct QpSettings {
    double eps_abs = 1e-8;
    double eps_rel = 1e-6;
    double eps_infeasible = 1e-7;
    int max_iter = 10000;
    double rho = 0.1;
    double sigma = 1e-6;
    double relaxation = 1.6;
    int scaling_iters = 10;
    bool adaptive_rho = true;
    int adaptive_rho_interval = 25;
    bool polish = true;
    int check_interval = 5;

    /// Absolute and relative tolerance `tol`.
    static QpSettings with_tol(double tol) {
        QpSettings s;
        s.eps_abs = tol;
        s.eps_rel = tol;
        return s;
    }
};

/// ADMM (operator splitting) solver with Ruiz equilibration, adaptive step
/// parameter, warm starting and an active-set polishing step.
QpSolution solve_qp(const QpProblem& problem, const QpSolution* warm_start, const QpSettings& settings);

inline QpSolution solve_qp(const QpProblem& problem, const QpSolution* warm_start, double tol) {
    return solve_qp(problem, warm_start, QpSettings::with_tol(tol));
}

/// Largest violation of E w = e and G w <= g.
double constraint_violation(const QpProblem& problem, const VectorXd& w);

/// Plain-text dump: header line, then H, c, E|e and G|g as dense rows.
void dump_qp(const QpProblem& problem, std::ostream& os);

// ---------------------------------------------------------------------------
// Builders

/// Row bookkeeping for the control QP: equality rows are the N phi rows,
/// inequality rows are [CLF, psi_c (M), psi_l (M), xi (kept entries)].
struct CbfQpRows {
    std::vector<int> xi_entries;  // flat index i*M + j of every kept xi row
};

/// Control QP over w = (v, u, delta): minimize sum v^2 + sum |u|^2 + q1 delta^2
/// subject to the CLF decrease condition and the phi/psi/xi barrier conditions.
QpProblem build_cbf_qp(const Instance& instance, const State& state, const EnergyEval& energy,
                       const BarrierEval& barriers, const DerivativeRows& rows, const FlowConfig& config,
                       CbfQpRows* row_info = nullptr);

/// Safe-gradient-flow multiplier QP over (u, v): u in R^k (k = 2M + NM
/// inequality constraints ordered psi_c, psi_l, xi; u <= 0) and v in R^N
/// (phi rows). Hessian is the dense Gram matrix 2 G G', G = [Jh; Jg].
QpProblem build_sgf_qp(const Instance& instance, const State& state, const EnergyEval& energy,
                       const BarrierEval& barriers, const DerivativeRows& rows, double alpha);

/// Closed-loop safe-gradient-flow field -grad f - Jh' u - Jg' v as a stacked
/// control (NM + Md entries).
VectorXd sgf_field(const Instance& instance, const State& state, const EnergyEval& energy,
                   const VectorXd& multipliers);

/// Trivial feasible point of the control QP: v = 0, u = 0, delta = mu F~.
VectorXd cbf_trivial_point(const Instance& instance, const EnergyEval& energy, const FlowConfig& config);

}  // namespace flpflow
