#include "flpflow/energy.hpp"

#include <cmath>
#include <sstream>

namespace flpflow {

namespace {

void check_shapes(const Instance& instance, const State& state) {
    if (state.assoc.rows() != instance.num_points() ||
        state.assoc.cols() != instance.num_facilities())
        throw ShapeError("assoc must be N x M");
    if (state.locations.rows() != instance.num_facilities() ||
        state.locations.cols() != instance.dim())
        throw ShapeError("locations must be M x d");
}

void check_beta(double beta) {
    if (!(beta > 0) || !std::isfinite(beta)) throw DomainError("beta must be positive and finite");
}

}  // namespace

EnergyEval eval_energy(const Instance& instance, const State& state, double beta) {
    check_shapes(instance, state);
    check_beta(beta);
    const int n = instance.num_points();
    const int m = instance.num_facilities();
    const MatrixXd& p = state.assoc;

    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < n; ++i) {
            const double v = p(i, j);
            if (!(v > 0.0 && v < 1.0)) {
                std::ostringstream os;
                os.precision(17);
                os << "association p(" << i << "," << j << ") = " << v << " outside (0,1)";
                throw DomainError(os.str());
            }
        }
    }

    const MatrixXd dist = instance.distance_matrix(state.locations);
    EnergyEval out;
    out.grad_assoc.resize(n, m);
    // Fixed loop order keeps the sums reproducible.
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < n; ++i) {
            const double w = instance.weights(i);
            const double lp = std::log(p(i, j));
            out.distortion += w * p(i, j) * dist(i, j);
            out.entropy -= w * p(i, j) * lp;
            out.grad_assoc(i, j) = w * (dist(i, j) + (lp + 1.0) / beta);
        }
    }
    out.free_energy_shifted = std::log(static_cast<double>(m)) / beta + out.distortion - out.entropy / beta;

    // grad_{y_j} = 2 sum_i p_i p_{j|i} (y_j - x_i)
    const MatrixXd mass = p.transpose() * instance.weights.asDiagonal();  // M x N
    const VectorXd col_mass = mass.rowwise().sum();
    out.grad_locations = 2.0 * (col_mass.asDiagonal() * state.locations - mass * instance.points);
    return out;
}

double free_energy_direct(const Instance& instance, const State& state, double beta) {
    check_shapes(instance, state);
    check_beta(beta);
    const int n = instance.num_points();
    const int m = instance.num_facilities();
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
        const VectorXd y = state.locations.row(j).transpose();
        for (int i = 0; i < n; ++i) {
            const double v = state.assoc(i, j);
            if (!(v > 0.0 && v < 1.0)) throw DomainError("association outside (0,1)");
            acc += instance.weights(i) * v * (instance.distance(i, y) + std::log(v) / beta);
        }
    }
    return std::log(static_cast<double>(m)) / beta + acc;
}

EnergyEval eval_energy_closed(const Instance& instance, const State& state, double beta) {
    check_shapes(instance, state);
    check_beta(beta);
    const int n = instance.num_points();
    const int m = instance.num_facilities();
    const MatrixXd& p = state.assoc;
    const MatrixXd dist = instance.distance_matrix(state.locations);
    EnergyEval out;
    // d/dp of p log p is unbounded at p = 0; those gradient entries stay zero.
    out.grad_assoc = MatrixXd::Zero(n, m);
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < n; ++i) {
            const double v = p(i, j);
            if (v < 0.0 || v > 1.0) throw DomainError("association outside [0,1]");
            const double w = instance.weights(i);
            out.distortion += w * v * dist(i, j);
            if (v > 0.0) {
                out.entropy -= w * v * std::log(v);
                out.grad_assoc(i, j) = w * (dist(i, j) + (std::log(v) + 1.0) / beta);
            }
        }
    }
    out.free_energy_shifted = std::log(static_cast<double>(m)) / beta + out.distortion - out.entropy / beta;
    const MatrixXd mass = p.transpose() * instance.weights.asDiagonal();
    const VectorXd col_mass = mass.rowwise().sum();
    out.grad_locations = 2.0 * (col_mass.asDiagonal() * state.locations - mass * instance.points);
    return out;
}

MatrixXd gibbs_assoc(const Instance& instance, const MatrixXd& locations, double beta) {
    check_beta(beta);
    if (locations.cols() != instance.dim()) throw ShapeError("locations must be M x d");
    const MatrixXd dist = instance.distance_matrix(locations);
    const int n = static_cast<int>(dist.rows());
    const int m = static_cast<int>(dist.cols());
    MatrixXd out(n, m);
    for (int i = 0; i < n; ++i) {
        // exp(-beta d) is largest at the smallest distance
        const double dmin = dist.row(i).minCoeff();
        double z = 0.0;
        for (int j = 0; j < m; ++j) {
            out(i, j) = std::exp(-beta * (dist(i, j) - dmin));
            z += out(i, j);
        }
        out.row(i) /= z;
    }
    return out;
}

MatrixXd weighted_centroids(const Instance& instance, const MatrixXd& assoc) {
    if (assoc.rows() != instance.num_points()) throw ShapeError("assoc must have N rows");
    const MatrixXd mass = assoc.transpose() * instance.weights.asDiagonal();  // M x N
    const VectorXd col_mass = mass.rowwise().sum();
    for (int j = 0; j < col_mass.size(); ++j) {
        if (!(col_mass(j) > 0.0)) {
            std::ostringstream os;
            os << "facility " << j << " has zero association mass";
            throw ZeroMassColumn(os.str());
        }
    }
    return col_mass.cwiseInverse().asDiagonal() * (mass * instance.points);
}

}  // namespace flpflow
