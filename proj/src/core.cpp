#include "flpflow/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace flpflow {

MatrixXd Instance::distance_matrix(const MatrixXd& locations) const {
    const int n = num_points();
    const int m = static_cast<int>(locations.rows());
    MatrixXd d(n, m);
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < n; ++i) {
            d(i, j) = (points.row(i) - locations.row(j)).squaredNorm();
        }
    }
    return d;
}

VectorXd Instance::weighted_mean() const {
    return points.transpose() * weights;
}

void FlowConfig::validate() const {
    if (!(mu > 0 && q1 > 0 && q2 > 0 && alpha_psi_c > 0 && alpha_psi_l > 0 && alpha_xi > 0))
        throw ConfigError("flow gains must be positive");
    if (!(dt_min > 0 && dt_min <= dt_init && dt_init <= dt_max))
        throw ConfigError("flow step sizes must satisfy 0 < dt_min <= dt_init <= dt_max");
    if (!(stat_tol_u > 0 && stat_tol_kkt > 0 && qp_tol > 0))
        throw ConfigError("stationarity and QP tolerances must be positive");
    if (max_flow_steps <= 0) throw ConfigError("max_flow_steps must be positive");
    if (!(max_flow_seconds >= 0)) throw ConfigError("max_flow_seconds must be nonnegative");
    if (!(sgf_alpha > 0)) throw ConfigError("sgf_alpha must be positive");
}

void AnnealConfig::validate() const {
    if (!(beta0 > 0)) throw ConfigError("beta0 must be positive");
    if (!(growth > 1)) throw ConfigError("growth must exceed 1");
    if (!(beta_max >= beta0)) throw ConfigError("beta_max must be >= beta0");
    if (!(perturb_scale >= 0)) throw ConfigError("perturb_scale must be nonnegative");
    flow.validate();
}

std::vector<double> AnnealConfig::schedule() const {
    validate();
    // The small slack keeps e.g. 1e-3 * 10^5 from spilling into an extra stage.
    const double ratio = std::log(beta_max / beta0) / std::log(growth);
    const int last = std::max(0, static_cast<int>(std::ceil(ratio - 1e-9)));
    std::vector<double> betas;
    betas.reserve(last + 1);
    for (int k = 0; k <= last; ++k) betas.push_back(beta0 * std::pow(growth, k));
    return betas;
}

void validate_instance(const Instance& instance) {
    const int n = instance.num_points();
    const int m = instance.num_facilities();
    if (instance.dim() < 1) throw ShapeError("dimension must be positive");
    if (m < 1 || n < m) {
        std::ostringstream os;
        os << "need N >= M >= 1, got N=" << n << " M=" << m;
        throw ShapeError(os.str());
    }
    if (instance.weights.size() != n) throw ShapeError("weights must have N entries");
    if (instance.consumption.rows() != n || instance.consumption.cols() != m)
        throw ShapeError("consumption must be N x M");
    if (instance.lower_bounds.size() != m || instance.upper_bounds.size() != m)
        throw ShapeError("capacity bounds must have M entries");
    if (!instance.points.allFinite()) throw ShapeError("demand points must be finite");

    if ((instance.weights.array() <= 0).any())
        throw WeightSumError("weights must be strictly positive");
    const double wsum = instance.weights.sum();
    if (std::abs(wsum - 1.0) > 1e-12) {
        std::ostringstream os;
        os.precision(17);
        os << "weights sum to " << wsum << ", expected 1";
        throw WeightSumError(os.str());
    }
    if ((instance.consumption.array() < 0).any())
        throw ShapeError("consumption entries must be nonnegative");
    if ((instance.lower_bounds.array() < 0).any())
        throw BoundOrderError("lower bounds must be nonnegative");
    if ((instance.upper_bounds.array() <= 0).any())
        throw BoundOrderError("upper bounds must be positive");
    for (int j = 0; j < m; ++j) {
        if (instance.lower_bounds(j) > instance.upper_bounds(j)) {
            std::ostringstream os;
            os << "facility " << j << ": lower bound " << instance.lower_bounds(j)
               << " exceeds upper bound " << instance.upper_bounds(j);
            throw BoundOrderError(os.str());
        }
    }

    const VectorXd min_use = instance.consumption.rowwise().minCoeff();
    const VectorXd max_use = instance.consumption.rowwise().maxCoeff();
    const double least_demand = instance.weights.dot(min_use);
    const double most_demand = instance.weights.dot(max_use);
    if (instance.upper_bounds.sum() < least_demand) {
        std::ostringstream os;
        os << "total capacity " << instance.upper_bounds.sum()
           << " is below the least achievable demand " << least_demand;
        throw CapacityInfeasible(os.str());
    }
    if (instance.lower_bounds.sum() > most_demand) {
        std::ostringstream os;
        os << "total minimum utilization " << instance.lower_bounds.sum()
           << " exceeds the largest achievable demand " << most_demand;
        throw CapacityInfeasible(os.str());
    }
}

HardAssignment evaluate_hard(const Instance& instance, const MatrixXd& locations,
                             const std::vector<int>& assign) {
    const int n = instance.num_points();
    const int m = instance.num_facilities();
    if (static_cast<int>(assign.size()) != n)
        throw IndexOutOfRange("assignment must have one entry per demand point");
    if (locations.rows() != m || locations.cols() != instance.dim())
        throw ShapeError("locations must be M x d");

    HardAssignment out;
    out.assign = assign;
    out.utilization = VectorXd::Zero(m);
    for (int i = 0; i < n; ++i) {
        const int j = assign[i];
        if (j < 0 || j >= m) {
            std::ostringstream os;
            os << "demand point " << i << " assigned to facility " << j << " outside [0, " << m << ")";
            throw IndexOutOfRange(os.str());
        }
        out.cost += instance.weights(i) * instance.distance(i, locations.row(j).transpose());
        out.utilization(j) += instance.weights(i) * instance.consumption(i, j);
    }
    for (int j = 0; j < m; ++j) {
        if (out.utilization(j) < instance.lower_bounds(j) - 1e-12) out.lower_violations.push_back(j);
    }
    return out;
}

MatrixXd uniform_assoc(const Instance& instance) {
    const int m = instance.num_facilities();
    return MatrixXd::Constant(instance.num_points(), m, 1.0 / m);
}

}  // namespace flpflow
