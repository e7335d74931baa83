#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "flpflow/errors.hpp"

namespace flpflow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct QpProblem;

enum class DistanceKind { SquaredEuclidean };

/// A capacitated facility location problem.
///
/// Demand points are the rows of `points` (N x d). The consumption matrix is
/// N x M and the bounds are per facility.
struct Instance {
    MatrixXd points;
    VectorXd weights;
    int facility_count = 0;
    MatrixXd consumption;
    VectorXd lower_bounds;
    VectorXd upper_bounds;
    DistanceKind distance_kind = DistanceKind::SquaredEuclidean;

    int num_points() const { return static_cast<int>(points.rows()); }
    int dim() const { return static_cast<int>(points.cols()); }
    int num_facilities() const { return facility_count; }

    /// d(x_i, y) for the configured distance kind.
    double distance(int i, const Eigen::Ref<const VectorXd>& y) const {
        return (points.row(i).transpose() - y).squaredNorm();
    }

    /// N x M matrix of d(x_i, y_j).
    MatrixXd distance_matrix(const MatrixXd& locations) const;

    /// Sum_i p_i x_i.
    VectorXd weighted_mean() const;
};

/// Fractional associations (N x M, rows on the simplex) plus facility
/// locations (M x d).
struct State {
    MatrixXd assoc;
    MatrixXd locations;
};

struct HardAssignment {
    std::vector<int> assign;
    double cost = 0.0;
    VectorXd utilization;
    /// Facilities whose utilization ended below L_j after rounding.
    std::vector<int> lower_violations;
};

struct FlowConfig {
    double mu = 1.0;
    double q1 = 10.0;
    double q2 = 10.0;
    double alpha_psi_c = 1.0;
    double alpha_psi_l = 1.0;
    double alpha_xi = 1.0;
    double dt_init = 1e-3;
    double dt_min = 1e-9;
    double dt_max = 10.0;
    double stat_tol_u = 1e-4;
    double stat_tol_kkt = 5e-5;
    int max_flow_steps = 50000;
    /// Wall-clock budget per flow in seconds; 0 means none.
    double max_flow_seconds = 0.0;
    /// Absolute and relative tolerance of the embedded QP solver.
    double qp_tol = 1e-8;
    /// Drop provably inactive xi rows from the control QP.
    bool prune_inactive_xi = false;
    /// Gain used by the safe-gradient-flow baseline.
    double sgf_alpha = 1.0;
    /// Called with every control QP the CBF flow builds and its trivial
    /// feasible point. Not serialized.
    std::function<void(const QpProblem&, const VectorXd&)> inspect_qp;

    void validate() const;
};

struct AnnealConfig {
    double beta0 = 1e-3;
    double growth = 1.6;
    double beta_max = 1e2;
    double perturb_scale = 0.1;
    FlowConfig flow;
    std::uint64_t rng_seed = 0;

    void validate() const;
    /// beta_k = growth^k * beta0 for k = 0..K, K the first index reaching beta_max.
    std::vector<double> schedule() const;
};

struct BetaRecord {
    double beta = 0.0;
    double free_energy = 0.0;
    double distortion = 0.0;
    double entropy = 0.0;
    VectorXd utilization;
    double kkt_residual = 0.0;
    int flow_steps = 0;
    double wall_time_seconds = 0.0;
};

struct SolveReport {
    std::string method;
    std::vector<BetaRecord> per_beta;
    State final_state;
    HardAssignment hardened;
    double total_wall_time_seconds = 0.0;
};

/// Throws WeightSumError, BoundOrderError, CapacityInfeasible or ShapeError.
void validate_instance(const Instance& instance);

/// Cost and utilization of a hard assignment at the given locations.
HardAssignment evaluate_hard(const Instance& instance, const MatrixXd& locations,
                             const std::vector<int>& assign);

/// Uniform associations p_{j|i} = 1/M.
MatrixXd uniform_assoc(const Instance& instance);

}  // namespace flpflow
