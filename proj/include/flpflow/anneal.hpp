#pragma once

#include <functional>
#include <random>

#include "flpflow/core.hpp"
#include "flpflow/flow.hpp"

namespace flpflow {

/// Called after every annealing stage with the stage's beta, its flow trace
/// and the terminal state (before the inter-stage jitter).
using StageObserver = std::function<void(double beta, const FlowTrace& trace, const State& state)>;

/// Location jitter never exceeds 1% of the bounding-box diagonal of the demand
/// points, so the perturb_scale / beta growth at small beta cannot throw
/// facilities off the data.
double jitter_cap(const Instance& instance);

/// Uniform associations, repaired by proportional column rescaling until every
/// utilization sits inside [L_j, C_j] (with a margin when one is attainable),
/// and locations at the weighted mean plus Gaussian jitter of `perturb_scale`.
/// Throws RepairFailed.
State initialize_feasible(const Instance& instance, std::mt19937_64& rng, double perturb_scale = 0.1);
State initialize_feasible(const Instance& instance, std::uint64_t rng_seed, double perturb_scale = 0.1);

/// Facilities on M distinct demand points drawn at random. The associations
/// move from initialize_feasible's toward the Gibbs distribution for `beta`
/// (entries lifted to at least kStartFloor) as far as the capacity bounds
/// allow. Throws RepairFailed.
inline constexpr double kStartFloor = 1e-7;
State random_start(const Instance& instance, std::mt19937_64& rng, double beta);

/// Annealing over beta_k = growth^k beta0 with the control flow as the inner
/// solver. Between stages the locations get Gaussian jitter of scale
/// perturb_scale / beta_k (capped) and the associations a small relative
/// jitter that keeps every row sum and utilization fixed. Flow errors are
/// rethrown with the failing beta in the message.
SolveReport anneal(const Instance& instance, const AnnealConfig& config, const StageObserver& observer = {});

/// Same loop with a chosen inner flow (used by the SGF baseline).
SolveReport anneal_with(const Instance& instance, const AnnealConfig& config, FlowMethod method,
                        const StageObserver& observer = {});

/// One flow at a fixed beta from random_start.
SolveReport solve_at_beta(const Instance& instance, const AnnealConfig& config, double beta, FlowMethod method,
                          const StageObserver& observer = {});

/// Greedy rounding by descending confidence that never exceeds any C_j.
/// Throws NoFeasibleFacility.
HardAssignment harden(const Instance& instance, const State& state);

}  // namespace flpflow
