#include "flpflow/barriers.hpp"

namespace flpflow {

BarrierEval eval_barriers(const Instance& instance, const State& state) {
    if (state.assoc.rows() != instance.num_points() ||
        state.assoc.cols() != instance.num_facilities())
        throw ShapeError("assoc must be N x M");
    const MatrixXd& p = state.assoc;
    BarrierEval out;
    out.phi = p.rowwise().sum().array() - 1.0;
    out.utilization = (instance.weights.asDiagonal() * p.cwiseProduct(instance.consumption))
                          .colwise()
                          .sum()
                          .transpose();
    out.psi_c = instance.upper_bounds - out.utilization;
    out.psi_l = out.utilization - instance.lower_bounds;
    out.xi = p.array() * (1.0 - p.array());
    return out;
}

bool is_feasible(const BarrierEval& b, const FeasibilityTol& tol) {
    return b.max_abs_phi() <= tol.phi && b.min_psi_c() >= -tol.psi && b.min_psi_l() >= -tol.psi &&
           b.min_xi() >= tol.xi;
}

DerivativeRows derivative_rows(const Instance& instance, const State& state, const EnergyEval& energy) {
    DerivativeRows rows;
    rows.capacity = instance.weights.asDiagonal() * instance.consumption;
    rows.xi = 1.0 - 2.0 * state.assoc.array();
    rows.clf_assoc = energy.grad_assoc;
    rows.clf_locations = energy.grad_locations;
    return rows;
}

DerivativeRows::Rates DerivativeRows::apply(const MatrixXd& assoc_rate, const MatrixXd& location_rate) const {
    Rates r;
    r.phi = assoc_rate.rowwise().sum();
    const VectorXd flow_into = capacity.cwiseProduct(assoc_rate).colwise().sum().transpose();
    r.psi_c = -flow_into;
    r.psi_l = flow_into;
    r.xi = xi.cwiseProduct(assoc_rate);
    r.clf = clf_assoc.cwiseProduct(assoc_rate).sum() + clf_locations.cwiseProduct(location_rate).sum();
    return r;
}

}  // namespace flpflow
