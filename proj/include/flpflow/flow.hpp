#pragma once

#include <iosfwd>
#include <vector>

#include "flpflow/barriers.hpp"
#include "flpflow/core.hpp"
#include "flpflow/qp.hpp"

namespace flpflow {

enum class FlowMethod { Cbf, Sgf };
enum class Termination { Stationary, MaxSteps };

const char* to_string(FlowMethod method);
const char* to_string(Termination t);

/// One visited state. `dt` is the step that produced it (0 for the start).
struct FlowStep {
    double t = 0.0;
    double dt = 0.0;
    double free_energy_shifted = 0.0;
    double control_norm = 0.0;
    double delta = 0.0;
    double min_psi_c = 0.0;
    double min_psi_l = 0.0;
    double min_xi = 0.0;
    double max_abs_phi = 0.0;
};

struct FlowTrace {
    std::vector<FlowStep> steps;
    Termination terminated_by = Termination::MaxSteps;
    double kkt_residual = 0.0;
    int qp_solves = 0;
    int rejected_steps = 0;
    double qp_seconds = 0.0;
};

/// Raised when the step or time budget runs out or step halving cannot find an
/// admissible step. Carries the trace and the last accepted state.
class NonConvergence : public FlpError {
public:
    NonConvergence(const std::string& what, FlowTrace trace, State state)
        : FlpError(what), trace(std::move(trace)), state(std::move(state)) {}
    FlowTrace trace;
    State state;
};

struct FlowResult {
    State state;
    FlowTrace trace;
};

/// Integrate z' = u*(z) at fixed beta from a feasible start until
/// |control| <= stat_tol_u, kkt_residual <= stat_tol_kkt and every facility
/// within stat_tol_kkt of its weighted centroid.
///
/// Throws InfeasibleStart, NonConvergence, QpFailure (control QP infeasible).
FlowResult flow_to_stationary(const Instance& instance, const State& state0, double beta,
                              const FlowConfig& config, FlowMethod method = FlowMethod::Cbf);

/// Explicit Euler: assoc += dt * v, locations += dt * u. `control` is a
/// stacked (v, u) vector; a trailing delta entry is ignored.
State step(const State& state, const VectorXd& control, double dt);

/// Stationarity residual of the relaxed problem at `state` with least-squares
/// multipliers over the active constraints, plus the complementary-slackness
/// violation.
double kkt_residual(const Instance& instance, const State& state, double beta);

/// Activity threshold used by kkt_residual.
inline constexpr double kActivityTol = 1e-7;

/// CSV with a header row and one row per visited state.
void write_trace_csv(const FlowTrace& trace, std::ostream& os);

}  // namespace flpflow
