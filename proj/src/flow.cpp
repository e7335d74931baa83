#include "flpflow/flow.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "flpflow/energy.hpp"

namespace flpflow {

const char* to_string(FlowMethod method) { return method == FlowMethod::Cbf ? "cbf" : "sgf"; }

const char* to_string(Termination t) { return t == Termination::Stationary ? "stationary" : "max_steps"; }

State step(const State& state, const VectorXd& control, double dt) {
    const int n = static_cast<int>(state.assoc.rows());
    const int m = static_cast<int>(state.assoc.cols());
    const int d = static_cast<int>(state.locations.cols());
    if (control.size() < n * m + m * d) throw ShapeError("control vector too short for state");
    State out = state;
    if (dt == 0.0) return out;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.assoc(i, j) += dt * control(i * m + j);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < d; ++k) out.locations(j, k) += dt * control(n * m + j * d + k);
    return out;
}

double kkt_residual(const Instance& instance, const State& state, double beta) {
    const EnergyEval e = eval_energy(instance, state, beta);
    const BarrierEval b = eval_barriers(instance, state);
    const int n = instance.num_points();
    const int m = instance.num_facilities();
    const MatrixXd& p = state.assoc;
    const MatrixXd& g = e.grad_assoc;
    const MatrixXd a = instance.weights.asDiagonal() * instance.consumption;

    // sign of the admissible capacity multiplier theta_j: +1 upper bound
    // active, -1 lower bound active, 2 both (C_j = L_j), 0 inactive
    std::vector<int> cap(m, 0);
    for (int j = 0; j < m; ++j) {
        const bool up = b.psi_c(j) <= kActivityTol;
        const bool lo = b.psi_l(j) <= kActivityTol;
        cap[j] = up && lo ? 2 : up ? 1 : lo ? -1 : 0;
    }
    // xi-active entries; the largest entry of a row is always free, which
    // pins lambda_i
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> xi_act(n, m);
    for (int i = 0; i < n; ++i) {
        Eigen::Index top = 0;
        p.row(i).maxCoeff(&top);
        for (int j = 0; j < m; ++j) xi_act(i, j) = j != top && b.xi(i, j) <= kActivityTol;
    }

    VectorXd theta = VectorXd::Zero(m);
    VectorXd lambda = VectorXd::Zero(n);
    MatrixXd r(n, m);
    for (int guard = 0; guard <= n * m + m + 1; ++guard) {
        std::vector<int> act;
        for (int j = 0; j < m; ++j)
            if (cap[j] != 0) act.push_back(j);
        const int k = static_cast<int>(act.size());

        // residual over free entries after eliminating lambda: r = rhs + B theta
        std::vector<std::pair<int, int>> free;
        VectorXd count = VectorXd::Zero(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                if (!xi_act(i, j)) {
                    free.emplace_back(i, j);
                    count(i) += 1.0;
                }
        VectorXd gbar = VectorXd::Zero(n);
        MatrixXd abar = MatrixXd::Zero(n, k);
        for (const auto& [i, j] : free) {
            gbar(i) += g(i, j) / count(i);
            for (int c = 0; c < k; ++c)
                if (act[c] == j) abar(i, c) += a(i, j) / count(i);
        }
        theta.setZero();
        if (k > 0) {
            MatrixXd bm(free.size(), k);
            VectorXd rhs(free.size());
            for (std::size_t f = 0; f < free.size(); ++f) {
                const auto [i, j] = free[f];
                rhs(f) = g(i, j) - gbar(i);
                for (int c = 0; c < k; ++c) bm(f, c) = (act[c] == j ? a(i, j) : 0.0) - abar(i, c);
            }
            const VectorXd sol = bm.colPivHouseholderQr().solve(-rhs);
            bool dropped = false;
            for (int c = 0; c < k; ++c) {
                const int j = act[c];
                if ((cap[j] == 1 && sol(c) < 0.0) || (cap[j] == -1 && sol(c) > 0.0)) {
                    cap[j] = 0;
                    dropped = true;
                }
                theta(j) = sol(c);
            }
            if (dropped) continue;
        }
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j = 0; j < m; ++j)
                if (!xi_act(i, j)) acc += g(i, j) + theta(j) * a(i, j);
            lambda(i) = -acc / count(i);
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) r(i, j) = g(i, j) + lambda(i) + theta(j) * a(i, j);

        // xi multipliers r / (1 - 2p) must be nonnegative
        bool moved = false;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                if (xi_act(i, j) && r(i, j) / (1.0 - 2.0 * p(i, j)) < 0.0) {
                    xi_act(i, j) = false;
                    moved = true;
                }
        if (!moved) break;
    }

    double stat = e.grad_locations.squaredNorm();
    double slack = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            if (xi_act(i, j)) {
                const double mu_xi = r(i, j) / (1.0 - 2.0 * p(i, j));
                slack += std::pow(mu_xi * b.xi(i, j), 2);
            } else {
                stat += r(i, j) * r(i, j);
            }
        }
    }
    for (int j = 0; j < m; ++j) {
        if (cap[j] == 0) continue;
        slack += std::pow(std::max(theta(j), 0.0) * b.psi_c(j), 2);
        slack += std::pow(std::max(-theta(j), 0.0) * b.psi_l(j), 2);
    }
    return std::sqrt(stat) + std::sqrt(slack);
}

namespace {

struct Control {
    VectorXd rate;  // stacked (v, u)
    double delta = 0.0;
    double predicted_rate = 0.0;  // d/dt F~ along the control
    bool inexact = false;
};

FlowStep record(double t, double dt, const EnergyEval& e, const BarrierEval& b, const Control& c) {
    FlowStep s;
    s.t = t;
    s.dt = dt;
    s.free_energy_shifted = e.free_energy_shifted;
    s.control_norm = c.rate.norm();
    s.delta = c.delta;
    s.min_psi_c = b.min_psi_c();
    s.min_psi_l = b.min_psi_l();
    s.min_xi = b.min_xi();
    s.max_abs_phi = b.max_abs_phi();
    return s;
}

double clamp_sum(const VectorXd& v, const VectorXd& lo, const VectorXd& hi, double tau) {
    return (v.array() - tau).max(lo.array()).min(hi.array()).sum();
}

// Exact projection of each association row onto sum_j v_ij = target_i and the
// xi rows (1 - 2p) v >= -gain (xi - floor). The QP meets these only to its
// residual tolerance, which is coarse next to xi margins near the floor and
// lets phi drift over long runs. Rows whose bounds admit no solution are left
// as they are. The projection is v - tau clipped to the bounds.
void project_assoc_rows(MatrixXd& v, const State& state, const BarrierEval& b, double gain,
                        const VectorXd& target) {
    const double inf = std::numeric_limits<double>::infinity();
    const int m = static_cast<int>(v.cols());
    VectorXd lo(m);
    VectorXd hi(m);
    for (int i = 0; i < v.rows(); ++i) {
        for (int j = 0; j < m; ++j) {
            const double c = 1.0 - 2.0 * state.assoc(i, j);
            const double room = gain * (b.xi(i, j) - kXiFloor);
            lo(j) = c > 0.0 ? -room / c : -inf;
            hi(j) = c < 0.0 ? -room / c : inf;
        }
        const VectorXd row = v.row(i).transpose();
        const double goal = target(i);
        if (lo.sum() > goal || hi.sum() < goal) continue;

        double a = -1.0;
        double z = 1.0;
        for (int k = 0; k < 200 && clamp_sum(row, lo, hi, a) < goal; ++k) a *= 2.0;
        for (int k = 0; k < 200 && clamp_sum(row, lo, hi, z) > goal; ++k) z *= 2.0;
        for (int k = 0; k < 100; ++k) {
            const double mid = 0.5 * (a + z);
            (clamp_sum(row, lo, hi, mid) >= goal ? a : z) = mid;
        }
        // the bracket fixes which entries sit on a bound; solve for tau exactly
        double tau = 0.5 * (a + z);
        double fixed = 0.0;
        double free_sum = 0.0;
        int free_count = 0;
        for (int j = 0; j < m; ++j) {
            const double x = row(j) - tau;
            if (x <= lo(j)) {
                fixed += lo(j);
            } else if (x >= hi(j)) {
                fixed += hi(j);
            } else {
                free_sum += row(j);
                ++free_count;
            }
        }
        if (free_count > 0) {
            const double exact = (free_sum + fixed - goal) / free_count;
            if (exact >= a && exact <= z) tau = exact;
        }
        v.row(i) = (row.array() - tau).max(lo.array()).min(hi.array()).transpose();
    }
}

// Sufficient decrease along the predicted rate, with room for rounding in F~.
// At small beta F~ is a difference of two terms near log(M)/beta, so the
// rounding level follows those terms rather than F~ itself.
// SGF is not a descent method while its correction is active and may rise by
// at most twice what its rate predicts.
double allowed_change(const Control& c, double dt, const EnergyEval& e, double beta, FlowMethod method) {
    const double scale = std::max({1.0, std::abs(e.free_energy_shifted), e.distortion + e.entropy / beta});
    const double rounding = 1e-13 * scale;
    if (c.predicted_rate < 0.0) return 0.1 * dt * c.predicted_rate + rounding;
    if (method == FlowMethod::Sgf) return 2.0 * dt * c.predicted_rate + rounding;
    return rounding;
}

// A bound barrier is linear in the associations, so an Euler step can only
// overshoot zero when alpha dt > 1. Once across, the barrier row pulls back
// against the CLF row and the flow stalls, so such steps are shortened.
bool overshoots(const VectorXd& before, const VectorXd& after) {
    constexpr double slack = 1e-9;
    for (Eigen::Index j = 0; j < after.size(); ++j)
        if (after(j) < std::min(0.0, before(j)) - slack) return true;
    return false;
}

}  // namespace

FlowResult flow_to_stationary(const Instance& instance, const State& state0, double beta,
                              const FlowConfig& config, FlowMethod method) {
    config.validate();
    if (!(beta > 0.0)) throw DomainError("beta must be positive");
    const FeasibilityTol tol;
    BarrierEval barriers = eval_barriers(instance, state0);
    if (!is_feasible(barriers, tol)) {
        std::ostringstream os;
        os << "initial state infeasible: max|phi|=" << barriers.max_abs_phi() << " min psi_c=" << barriers.min_psi_c()
           << " min psi_l=" << barriers.min_psi_l() << " min xi=" << barriers.min_xi();
        throw InfeasibleStart(os.str());
    }

    const ControlLayout lay = ControlLayout::of(instance);
    const QpSettings qp_cfg = QpSettings::with_tol(config.qp_tol);
    State state = state0;
    EnergyEval energy = eval_energy(instance, state, beta);
    FlowTrace trace;
    std::optional<QpSolution> warm;
    double t = 0.0;
    double dt = config.dt_init;
    double last_dt = 0.0;

    auto compute_control = [&]() {
        const DerivativeRows rows = derivative_rows(instance, state, energy);
        Control c;
        QpSolution sol;
        if (method == FlowMethod::Cbf) {
            const QpProblem qp = build_cbf_qp(instance, state, energy, barriers, rows, config);
            if (config.inspect_qp) config.inspect_qp(qp, cbf_trivial_point(instance, energy, config));
            sol = solve_qp(qp, warm ? &*warm : nullptr, qp_cfg);
            c.rate = sol.primal.head(lay.num_controls());
            c.delta = sol.primal(lay.delta());
        } else {
            const QpProblem qp = build_sgf_qp(instance, state, energy, barriers, rows, config.sgf_alpha);
            sol = solve_qp(qp, warm ? &*warm : nullptr, qp_cfg);
            c.rate = sgf_field(instance, state, energy, sol.primal);
        }
        ++trace.qp_solves;
        trace.qp_seconds += sol.solve_time_seconds;
        if (sol.status == QpStatus::Infeasible) {
            std::ostringstream os;
            os << to_string(method) << " control QP infeasible at t=" << t;
            throw QpFailure(os.str());
        }
        c.inexact = sol.status == QpStatus::MaxIters;
        {
            MatrixXd v = lay.assoc_block(c.rate);
            const bool cbf = method == FlowMethod::Cbf;
            const VectorXd target = cbf ? VectorXd::Zero(v.rows()) : VectorXd(-config.sgf_alpha * barriers.phi);
            project_assoc_rows(v, state, barriers, cbf ? config.alpha_xi : config.sgf_alpha, target);
            c.rate = lay.stack(v, lay.location_block(c.rate));
        }
        c.predicted_rate = rows.apply(lay.assoc_block(c.rate), lay.location_block(c.rate)).clf;
        warm = std::move(sol);
        return c;
    };

    const auto started = std::chrono::steady_clock::now();
    VectorXd prev_rate;
    bool roomy = false;
    for (int k = 0;; ++k) {
        const Control control = compute_control();
        trace.steps.push_back(record(t, last_dt, energy, barriers, control));

        // Step size for the next move. Near a stationary point the decrease
        // of F~ per step falls below its rounding level, so the change of the
        // control across the last step is what exposes an unstable dt. Jumps
        // at the QP solver's accuracy carry no information.
        if (k > 0) {
            const double noise = 100.0 * config.qp_tol;
            const double jump = std::max(0.0, (control.rate - prev_rate).norm() - noise);
            const double scale = prev_rate.norm();
            if (jump > scale) {
                dt = 0.5 * last_dt;
            } else if (roomy && jump <= 0.5 * scale) {
                dt = 1.25 * last_dt;
            } else {
                dt = last_dt;
            }
            dt = std::clamp(dt, config.dt_min, config.dt_max);
        }
        prev_rate = control.rate;

        if (control.rate.norm() <= config.stat_tol_u) {
            const double res = kkt_residual(instance, state, beta);
            const double offset = (state.locations - weighted_centroids(instance, state.assoc)).rowwise().norm().maxCoeff();
            if (res <= config.stat_tol_kkt && offset <= config.stat_tol_kkt) {
                trace.kkt_residual = res;
                trace.terminated_by = Termination::Stationary;
                return {std::move(state), std::move(trace)};
            }
        }
        const bool out_of_time = config.max_flow_seconds > 0.0 &&
                                 std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() >=
                                     config.max_flow_seconds;
        if (k >= config.max_flow_steps || out_of_time) {
            trace.kkt_residual = kkt_residual(instance, state, beta);
            trace.terminated_by = Termination::MaxSteps;
            std::ostringstream os;
            os << to_string(method) << " flow at beta=" << beta << " hit the ";
            if (out_of_time)
                os << "time budget (" << config.max_flow_seconds << " s)";
            else
                os << "step budget (" << config.max_flow_steps << ")";
            os << ", |control|=" << control.rate.norm() << " kkt=" << trace.kkt_residual;
            throw NonConvergence(os.str(), std::move(trace), std::move(state));
        }

        const double f0 = energy.free_energy_shifted;
        double trial_dt = control.inexact ? 0.5 * dt : dt;
        bool accepted = false;
        State trial;
        EnergyEval trial_energy;
        BarrierEval trial_barriers;
        for (int halving = 0; halving <= 40; ++halving, trial_dt *= 0.5) {
            trial = step(state, control.rate, trial_dt);
            trial_barriers = eval_barriers(instance, trial);
            if (!is_feasible(trial_barriers, tol) ||
                (method == FlowMethod::Cbf && (overshoots(barriers.psi_c, trial_barriers.psi_c) ||
                                               overshoots(barriers.psi_l, trial_barriers.psi_l)))) {
                ++trace.rejected_steps;
                continue;
            }
            trial_energy = eval_energy(instance, trial, beta);
            if (trial_energy.free_energy_shifted > f0 + allowed_change(control, trial_dt, energy, beta, method)) {
                ++trace.rejected_steps;
                continue;
            }
            accepted = true;
            roomy = trial_barriers.max_abs_phi() <= 0.1 * tol.phi && trial_barriers.min_psi_c() >= -0.1 * tol.psi &&
                    trial_barriers.min_psi_l() >= -0.1 * tol.psi && trial_barriers.min_xi() >= 10.0 * tol.xi;
            break;
        }
        if (!accepted) {
            trace.kkt_residual = kkt_residual(instance, state, beta);
            std::ostringstream os;
            os << to_string(method) << " flow at beta=" << beta << " found no admissible step after 40 halvings at t="
               << t;
            throw NonConvergence(os.str(), std::move(trace), std::move(state));
        }
        state = std::move(trial);
        energy = std::move(trial_energy);
        barriers = std::move(trial_barriers);
        t += trial_dt;
        last_dt = trial_dt;
        roomy = roomy && !control.inexact;
    }
}

void write_trace_csv(const FlowTrace& trace, std::ostream& os) {
    os.precision(17);
    os << "step,t,dt,free_energy_shifted,control_norm,delta,min_psi_c,min_psi_l,min_xi,max_abs_phi\n";
    for (std::size_t k = 0; k < trace.steps.size(); ++k) {
        const FlowStep& s = trace.steps[k];
        os << k << ',' << s.t << ',' << s.dt << ',' << s.free_energy_shifted << ',' << s.control_norm << ','
           << s.delta << ',' << s.min_psi_c << ',' << s.min_psi_l << ',' << s.min_xi << ',' << s.max_abs_phi << '\n';
    }
}

}  // namespace flpflow
