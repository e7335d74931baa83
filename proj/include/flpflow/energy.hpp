#pragma once

#include "flpflow/core.hpp"

namespace flpflow {

/// Relaxed distortion, entropy and the shifted free energy
///
///   F~ = log(M)/beta + sum_ij p_i p_{j|i} (d(x_i, y_j) + log(p_{j|i})/beta)
///      = log(M)/beta + D - H/beta,
///
/// together with its gradients with respect to the associations and the
/// facility locations.
struct EnergyEval {
    double distortion = 0.0;
    double entropy = 0.0;
    double free_energy_shifted = 0.0;
    MatrixXd grad_assoc;      // N x M
    MatrixXd grad_locations;  // M x d
};

/// Throws DomainError if any association lies outside the open interval (0, 1).
EnergyEval eval_energy(const Instance& instance, const State& state, double beta);

/// Shifted free energy only, summed term by term (no gradients).
double free_energy_direct(const Instance& instance, const State& state, double beta);

/// Distortion/entropy/free energy for associations on the closed interval
/// [0, 1], using 0 log 0 = 0. Used for reporting hard-ish fixed points of the
/// unconstrained baseline, never inside the flow.
EnergyEval eval_energy_closed(const Instance& instance, const State& state, double beta);

/// Softmax of -beta * d(x_i, y_j) across j, computed with max subtraction.
MatrixXd gibbs_assoc(const Instance& instance, const MatrixXd& locations, double beta);

/// y_j = sum_i p_i p_{j|i} x_i / sum_i p_i p_{j|i}. Throws ZeroMassColumn.
MatrixXd weighted_centroids(const Instance& instance, const MatrixXd& assoc);

}  // namespace flpflow
