#include "flpflow/oracle.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "flpflow/energy.hpp"

namespace flpflow {

OracleResult brute_force_flp(const Instance& instance) {
    validate_instance(instance);
    const int n = instance.num_points();
    const int m = instance.num_facilities();
    const int d = instance.dim();
    if (std::pow(static_cast<double>(m), n) > kOracleLimit) {
        std::ostringstream os;
        os << "brute force over " << m << "^" << n << " assignments exceeds the limit of " << kOracleLimit;
        throw TooLarge(os.str());
    }

    OracleResult best;
    best.best_cost = std::numeric_limits<double>::infinity();
    std::vector<int> a(n, 0);
    VectorXd load(m);
    VectorXd mass(m);
    MatrixXd sums(m, d);
    MatrixXd centers(m, d);
    const VectorXd mean = instance.weighted_mean();
    // odometer with the last index fastest, i.e. lexicographic order
    for (;;) {
        ++best.enumerated_count;
        load.setZero();
        for (int i = 0; i < n; ++i) load(a[i]) += instance.weights(i) * instance.consumption(i, a[i]);
        bool feasible = true;
        for (int j = 0; j < m && feasible; ++j)
            feasible = load(j) >= instance.lower_bounds(j) - 1e-12 && load(j) <= instance.upper_bounds(j) + 1e-12;
        if (feasible) {
            ++best.feasible_count;
            mass.setZero();
            sums.setZero();
            for (int i = 0; i < n; ++i) {
                mass(a[i]) += instance.weights(i);
                sums.row(a[i]) += instance.weights(i) * instance.points.row(i);
            }
            for (int j = 0; j < m; ++j)
                centers.row(j) = mass(j) > 0.0 ? VectorXd(sums.row(j).transpose() / mass(j)) : mean;
            double cost = 0.0;
            for (int i = 0; i < n; ++i) cost += instance.weights(i) * instance.distance(i, centers.row(a[i]).transpose());
            if (cost < best.best_cost) {
                best.best_cost = cost;
                best.best_assign = a;
                best.best_locations = centers;
            }
        }
        int pos = n - 1;
        while (pos >= 0 && a[pos] == m - 1) a[pos--] = 0;
        if (pos < 0) break;
        ++a[pos];
    }
    return best;
}

GradientPair finite_diff_gradient(const Instance& instance, const State& state, double beta, double h) {
    if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
    const int n = static_cast<int>(state.assoc.rows());
    const int m = static_cast<int>(state.assoc.cols());
    if ((state.assoc.array() - h <= 0.0).any() || (state.assoc.array() + h >= 1.0).any()) {
        std::ostringstream os;
        os << "step " << h << " pushes an association outside (0, 1)";
        throw StepTooLarge(os.str());
    }
    auto f = [&](const State& s) { return eval_energy(instance, s, beta).free_energy_shifted; };

    GradientPair g;
    g.assoc.resize(n, m);
    g.locations.resize(state.locations.rows(), state.locations.cols());
    State probe = state;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const double v = state.assoc(i, j);
            probe.assoc(i, j) = v + h;
            const double up = f(probe);
            probe.assoc(i, j) = v - h;
            const double down = f(probe);
            probe.assoc(i, j) = v;
            g.assoc(i, j) = (up - down) / (2.0 * h);
        }
    }
    for (int j = 0; j < g.locations.rows(); ++j) {
        for (int k = 0; k < g.locations.cols(); ++k) {
            const double v = state.locations(j, k);
            probe.locations(j, k) = v + h;
            const double up = f(probe);
            probe.locations(j, k) = v - h;
            const double down = f(probe);
            probe.locations(j, k) = v;
            g.locations(j, k) = (up - down) / (2.0 * h);
        }
    }
    return g;
}

FeasibilityAudit audit_feasibility(const Instance&, const FlowTrace& trace, const FeasibilityTol& tol) {
    FeasibilityAudit out;
    for (std::size_t k = 0; k < trace.steps.size(); ++k) {
        const FlowStep& s = trace.steps[k];
        const int step = static_cast<int>(k);
        if (out.max_abs_phi_step < 0 || s.max_abs_phi > out.max_abs_phi) {
            out.max_abs_phi = s.max_abs_phi;
            out.max_abs_phi_step = step;
        }
        if (out.min_psi_c_step < 0 || s.min_psi_c < out.min_psi_c) {
            out.min_psi_c = s.min_psi_c;
            out.min_psi_c_step = step;
        }
        if (out.min_psi_l_step < 0 || s.min_psi_l < out.min_psi_l) {
            out.min_psi_l = s.min_psi_l;
            out.min_psi_l_step = step;
        }
        if (out.min_xi_step < 0 || s.min_xi < out.min_xi) {
            out.min_xi = s.min_xi;
            out.min_xi_step = step;
        }
        if (s.max_abs_phi > tol.phi) out.breaches.push_back({step, "phi", s.max_abs_phi});
        if (s.min_psi_c < -tol.psi) out.breaches.push_back({step, "psi_c", s.min_psi_c});
        if (s.min_psi_l < -tol.psi) out.breaches.push_back({step, "psi_l", s.min_psi_l});
        if (s.min_xi < tol.xi) out.breaches.push_back({step, "xi", s.min_xi});
    }
    return out;
}

}  // namespace flpflow
