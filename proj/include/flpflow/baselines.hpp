#pragma once

#include "flpflow/anneal.hpp"
#include "flpflow/core.hpp"

namespace flpflow {

/// Fixed-point sweeps of the unconstrained problem at one beta: alternate
/// Gibbs associations and weighted centroids until the largest association
/// change is <= tol or max_sweeps have run (near a phase transition the
/// iteration can be very slow). Throws NonConvergence on non-finite values.
State da_fixed_point(const Instance& instance, const MatrixXd& locations, double beta, double tol = 1e-10,
                     int max_sweeps = 10000);

/// Deterministic annealing without capacity bounds over config's schedule,
/// with the same location jitter between stages as anneal(). Bounds in the
/// instance are ignored; hardening is the plain argmax.
SolveReport da_unconstrained(const Instance& instance, const AnnealConfig& config);

/// The annealing loop of anneal() driven by the safe gradient flow.
SolveReport sgf_solve(const Instance& instance, const AnnealConfig& config, const StageObserver& observer = {});

}  // namespace flpflow
