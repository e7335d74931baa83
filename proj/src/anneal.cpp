#include "flpflow/anneal.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "flpflow/barriers.hpp"
#include "flpflow/energy.hpp"

namespace flpflow {

namespace {

constexpr double kAssocJitter = 1e-2;

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Largest amount by which some utilization leaves [lo, hi].
double band_violation(const VectorXd& u, const VectorXd& lo, const VectorXd& hi) {
    double worst = 0.0;
    for (int j = 0; j < u.size(); ++j) worst = std::max({worst, lo(j) - u(j), u(j) - hi(j)});
    return worst;
}

void jitter_locations(MatrixXd& locations, std::mt19937_64& rng, double scale) {
    if (scale <= 0.0) return;
    std::normal_distribution<double> nd(0.0, scale);
    for (int j = 0; j < locations.rows(); ++j)
        for (int k = 0; k < locations.cols(); ++k) locations(j, k) += nd(rng);
}

// Relative association jitter: p_ij (1 - p_ij) z_ij projected onto the
// directions that keep every row sum and every utilization fixed, then shrunk
// so no entry moves by more than half its distance to 0 or 1. Moving the
// locations alone does not break the symmetry of coincident facilities: the
// association gradient carries the weight p_i, so the flow pulls the
// locations back to their common centroid long before the associations react.
void jitter_assoc(const Instance& instance, MatrixXd& assoc, std::mt19937_64& rng, double scale) {
    if (scale <= 0.0) return;
    const int n = static_cast<int>(assoc.rows());
    const int m = static_cast<int>(assoc.cols());
    if (m < 2) return;
    std::normal_distribution<double> nd(0.0, 1.0);
    MatrixXd eta(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) eta(i, j) = assoc(i, j) * (1.0 - assoc(i, j)) * nd(rng);

    // delta = eta - a 1' - W diag(b) with W_ij = p_i c_ij; a from the row
    // sums, b from the column sums (least squares, the system is singular
    // when the column constraints are dependent on the row ones)
    const MatrixXd w = instance.weights.asDiagonal() * instance.consumption;
    const VectorXd erow = eta.rowwise().sum();
    MatrixXd sys(m, m);
    VectorXd rhs(m);
    for (int j = 0; j < m; ++j) {
        rhs(j) = w.col(j).dot(eta.col(j)) - w.col(j).dot(erow) / m;
        for (int k = 0; k < m; ++k) sys(j, k) = -w.col(j).cwiseProduct(w.col(k)).sum() / m;
        sys(j, j) += w.col(j).squaredNorm();
    }
    const VectorXd b = sys.completeOrthogonalDecomposition().solve(rhs);
    const VectorXd a = (erow - w * b) / m;
    MatrixXd delta = eta;
    delta.colwise() -= a;
    delta -= w * b.asDiagonal();

    double s = scale;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            const double room = delta(i, j) < 0.0 ? assoc(i, j) : 1.0 - assoc(i, j);
            if (delta(i, j) != 0.0) s = std::min(s, 0.5 * room / std::abs(delta(i, j)));
        }
    assoc += s * delta;
}

BetaRecord stage_record(const Instance& instance, const State& state, double beta) {
    const EnergyEval e = eval_energy(instance, state, beta);
    BetaRecord r;
    r.beta = beta;
    r.free_energy = e.free_energy_shifted;
    r.distortion = e.distortion;
    r.entropy = e.entropy;
    r.utilization = eval_barriers(instance, state).utilization;
    return r;
}

FlowResult run_stage(const Instance& instance, const State& start, double beta, const FlowConfig& cfg,
                     FlowMethod method) {
    try {
        return flow_to_stationary(instance, start, beta, cfg, method);
    } catch (NonConvergence& e) {
        std::ostringstream os;
        os << "annealing stage beta=" << beta << ": " << e.what();
        throw NonConvergence(os.str(), std::move(e.trace), std::move(e.state));
    }
}

}  // namespace

double jitter_cap(const Instance& instance) {
    const VectorXd span = instance.points.colwise().maxCoeff() - instance.points.colwise().minCoeff();
    return 1e-2 * std::max(span.norm(), 1e-12);
}

namespace {

// Proportional column rescaling plus row renormalization until every
// utilization sits inside [L_j, C_j].
MatrixXd repair_assoc(const Instance& instance, MatrixXd assoc) {
    const int m = instance.num_facilities();
    State state;
    state.assoc = std::move(assoc);
    const MatrixXd a = instance.weights.asDiagonal() * instance.consumption;
    const VectorXd& lo = instance.lower_bounds;
    const VectorXd& hi = instance.upper_bounds;

    double margin = std::min(1e-3, 0.25 * (hi - lo).minCoeff());
    double best = std::numeric_limits<double>::infinity();
    int stalled = 0;
    bool done = false;
    for (int sweep = 0; sweep < 10000; ++sweep) {
        const VectorXd u = (a.cwiseProduct(state.assoc)).colwise().sum().transpose();
        const VectorXd lo_m = lo.array() + margin;
        const VectorXd hi_m = hi.array() - margin;
        const double viol = band_violation(u, lo_m, hi_m);
        if (viol <= (margin > 0.0 ? 0.0 : 1e-13)) {
            done = true;
            break;
        }
        // A band that cannot be reached (e.g. total demand equal to total
        // capacity) shows up as a stall; shrink the margin and retry.
        if (viol < 0.99 * best) {
            best = viol;
            stalled = 0;
        } else if (++stalled >= 50) {
            margin = margin > 1e-12 ? 0.5 * margin : 0.0;
            best = std::numeric_limits<double>::infinity();
            stalled = 0;
        }
        for (int j = 0; j < m; ++j) {
            if (u(j) <= 0.0) continue;
            const double target = std::clamp(u(j), lo_m(j), std::max(lo_m(j), hi_m(j)));
            state.assoc.col(j) *= target / u(j);
        }
        for (int i = 0; i < state.assoc.rows(); ++i) state.assoc.row(i) /= state.assoc.row(i).sum();
    }
    if (!done) throw RepairFailed("could not bring utilizations inside the capacity bounds in 10000 sweeps");
    if ((state.assoc.array() <= 0.0).any() || (state.assoc.array() >= 1.0).any()) {
        if (m > 1) throw RepairFailed("repair pushed an association to the boundary");
    }
    return std::move(state.assoc);
}

}  // namespace

State initialize_feasible(const Instance& instance, std::mt19937_64& rng, double perturb_scale) {
    validate_instance(instance);
    State state;
    state.assoc = repair_assoc(instance, uniform_assoc(instance));
    const VectorXd mean = instance.weighted_mean();
    state.locations = mean.transpose().replicate(instance.num_facilities(), 1);
    jitter_locations(state.locations, rng, std::min(perturb_scale, jitter_cap(instance)));
    return state;
}

State initialize_feasible(const Instance& instance, std::uint64_t rng_seed, double perturb_scale) {
    std::mt19937_64 rng(rng_seed);
    return initialize_feasible(instance, rng, perturb_scale);
}

State random_start(const Instance& instance, std::mt19937_64& rng, double beta) {
    validate_instance(instance);
    if (!(beta > 0.0)) throw DomainError("beta must be positive");
    const int m = instance.num_facilities();
    std::vector<int> idx(instance.num_points());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    State state;
    state.locations.resize(m, instance.dim());
    for (int j = 0; j < m; ++j) state.locations.row(j) = instance.points.row(idx[j]);
    MatrixXd gibbs = gibbs_assoc(instance, state.locations, beta).cwiseMax(kStartFloor);
    for (int i = 0; i < gibbs.rows(); ++i) gibbs.row(i) /= gibbs.row(i).sum();

    // Utilization is linear along the segment from the repaired uniform start
    // to the Gibbs associations; go as far as the bounds allow.
    const MatrixXd base = repair_assoc(instance, uniform_assoc(instance));
    const MatrixXd a = instance.weights.asDiagonal() * instance.consumption;
    const VectorXd u0 = a.cwiseProduct(base).colwise().sum().transpose();
    const VectorXd u1 = a.cwiseProduct(gibbs).colwise().sum().transpose();
    double lambda = 1.0;
    for (int j = 0; j < m; ++j) {
        const double du = u1(j) - u0(j);
        if (du > 0.0) lambda = std::min(lambda, 0.9 * (instance.upper_bounds(j) - u0(j)) / du);
        if (du < 0.0) lambda = std::min(lambda, 0.9 * (instance.lower_bounds(j) - u0(j)) / du);
    }
    lambda = std::max(lambda, 0.0);
    state.assoc = (1.0 - lambda) * base + lambda * gibbs;
    return state;
}

SolveReport anneal_with(const Instance& instance, const AnnealConfig& config, FlowMethod method,
                        const StageObserver& observer) {
    config.validate();
    validate_instance(instance);
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(config.rng_seed);
    State state = initialize_feasible(instance, rng, config.perturb_scale);
    const std::vector<double> betas = config.schedule();

    SolveReport report;
    report.method = to_string(method);
    for (std::size_t k = 0; k < betas.size(); ++k) {
        const double beta = betas[k];
        const auto stage_start = std::chrono::steady_clock::now();
        FlowResult res = run_stage(instance, state, beta, config.flow, method);
        BetaRecord rec = stage_record(instance, res.state, beta);
        rec.kkt_residual = res.trace.kkt_residual;
        rec.flow_steps = static_cast<int>(res.trace.steps.size()) - 1;
        rec.wall_time_seconds = seconds_since(stage_start);
        report.per_beta.push_back(std::move(rec));
        if (observer) observer(beta, res.trace, res.state);
        state = std::move(res.state);
        if (k + 1 < betas.size()) {
            jitter_locations(state.locations, rng, std::min(config.perturb_scale / beta, jitter_cap(instance)));
            jitter_assoc(instance, state.assoc, rng, kAssocJitter);
        }
    }
    report.final_state = state;
    report.hardened = harden(instance, state);
    report.total_wall_time_seconds = seconds_since(start);
    return report;
}

SolveReport anneal(const Instance& instance, const AnnealConfig& config, const StageObserver& observer) {
    return anneal_with(instance, config, FlowMethod::Cbf, observer);
}

SolveReport solve_at_beta(const Instance& instance, const AnnealConfig& config, double beta, FlowMethod method,
                          const StageObserver& observer) {
    config.validate();
    validate_instance(instance);
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(config.rng_seed);
    const State state0 = random_start(instance, rng, beta);
    FlowResult res = run_stage(instance, state0, beta, config.flow, method);
    SolveReport report;
    report.method = to_string(method);
    BetaRecord rec = stage_record(instance, res.state, beta);
    rec.kkt_residual = res.trace.kkt_residual;
    rec.flow_steps = static_cast<int>(res.trace.steps.size()) - 1;
    rec.wall_time_seconds = seconds_since(start);
    report.per_beta.push_back(std::move(rec));
    if (observer) observer(beta, res.trace, res.state);
    report.final_state = std::move(res.state);
    report.hardened = harden(instance, report.final_state);
    report.total_wall_time_seconds = seconds_since(start);
    return report;
}

HardAssignment harden(const Instance& instance, const State& state) {
    const int n = instance.num_points();
    const int m = instance.num_facilities();
    if (state.assoc.rows() != n || state.assoc.cols() != m) throw ShapeError("assoc must be N x M");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    VectorXd top(n);
    for (int i = 0; i < n; ++i) top(i) = state.assoc.row(i).maxCoeff();
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return top(a) > top(b); });

    VectorXd used = VectorXd::Zero(m);
    std::vector<int> assign(n, -1);
    std::vector<int> cols(m);
    for (const int i : order) {
        std::iota(cols.begin(), cols.end(), 0);
        std::stable_sort(cols.begin(), cols.end(),
                         [&](int a, int b) { return state.assoc(i, a) > state.assoc(i, b); });
        for (const int j : cols) {
            const double load = instance.weights(i) * instance.consumption(i, j);
            if (used(j) + load <= instance.upper_bounds(j) + 1e-12) {
                assign[i] = j;
                used(j) += load;
                break;
            }
        }
        if (assign[i] < 0) {
            std::ostringstream os;
            os << "demand point " << i << " fits under no facility's remaining capacity";
            throw NoFeasibleFacility(os.str());
        }
    }
    return evaluate_hard(instance, state.locations, assign);
}

}  // namespace flpflow
