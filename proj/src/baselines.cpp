#include "flpflow/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "flpflow/energy.hpp"

namespace flpflow {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Weighted centroids; a facility that lost all its mass to underflow keeps
// its previous location.
MatrixXd centroids_or_keep(const Instance& instance, const MatrixXd& assoc, const MatrixXd& previous) {
    const MatrixXd mass = assoc.transpose() * instance.weights.asDiagonal();
    const VectorXd col_mass = mass.rowwise().sum();
    MatrixXd out = previous;
    const MatrixXd sums = mass * instance.points;
    for (int j = 0; j < out.rows(); ++j)
        if (col_mass(j) > 1e-300) out.row(j) = sums.row(j) / col_mass(j);
    return out;
}

void jitter(MatrixXd& locations, std::mt19937_64& rng, double scale) {
    if (scale <= 0.0) return;
    std::normal_distribution<double> nd(0.0, scale);
    for (int j = 0; j < locations.rows(); ++j)
        for (int k = 0; k < locations.cols(); ++k) locations(j, k) += nd(rng);
}

std::vector<int> argmax_rows(const MatrixXd& assoc) {
    std::vector<int> out(assoc.rows());
    for (int i = 0; i < assoc.rows(); ++i) {
        Eigen::Index j = 0;
        assoc.row(i).maxCoeff(&j);
        out[i] = static_cast<int>(j);
    }
    return out;
}

}  // namespace

State da_fixed_point(const Instance& instance, const MatrixXd& locations, double beta, double tol, int max_sweeps) {
    if (!(beta > 0.0)) throw DomainError("beta must be positive");
    State s;
    s.locations = locations;
    s.assoc = gibbs_assoc(instance, s.locations, beta);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        s.locations = centroids_or_keep(instance, s.assoc, s.locations);
        MatrixXd next = gibbs_assoc(instance, s.locations, beta);
        const double change = (next - s.assoc).cwiseAbs().maxCoeff();
        s.assoc = std::move(next);
        if (!std::isfinite(change)) {
            std::ostringstream os;
            os << "deterministic annealing fixed point at beta=" << beta << " produced non-finite associations";
            throw NonConvergence(os.str(), FlowTrace{}, s);
        }
        if (change <= tol) break;
    }
    s.locations = centroids_or_keep(instance, s.assoc, s.locations);
    return s;
}

SolveReport da_unconstrained(const Instance& instance, const AnnealConfig& config) {
    config.validate();
    validate_instance(instance);
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(config.rng_seed);
    const double cap = jitter_cap(instance);

    MatrixXd locations = instance.weighted_mean().transpose().replicate(instance.num_facilities(), 1);
    jitter(locations, rng, std::min(config.perturb_scale, cap));

    SolveReport report;
    report.method = "da";
    State state;
    const std::vector<double> betas = config.schedule();
    for (std::size_t k = 0; k < betas.size(); ++k) {
        const double beta = betas[k];
        const auto stage_start = std::chrono::steady_clock::now();
        state = da_fixed_point(instance, locations, beta);
        const EnergyEval e = eval_energy_closed(instance, state, beta);
        BetaRecord rec;
        rec.beta = beta;
        rec.free_energy = e.free_energy_shifted;
        rec.distortion = e.distortion;
        rec.entropy = e.entropy;
        rec.utilization = (state.assoc.transpose() * instance.weights.asDiagonal() * instance.consumption)
                              .diagonal();
        // stationarity of the unconstrained problem is the centroid condition
        rec.kkt_residual = e.grad_locations.norm();
        rec.wall_time_seconds = seconds_since(stage_start);
        report.per_beta.push_back(std::move(rec));
        locations = state.locations;
        if (k + 1 < betas.size()) jitter(locations, rng, std::min(config.perturb_scale / beta, cap));
    }
    report.final_state = state;
    report.hardened = evaluate_hard(instance, state.locations, argmax_rows(state.assoc));
    report.total_wall_time_seconds = seconds_since(start);
    return report;
}

SolveReport sgf_solve(const Instance& instance, const AnnealConfig& config, const StageObserver& observer) {
    return anneal_with(instance, config, FlowMethod::Sgf, observer);
}

}  // namespace flpflow
