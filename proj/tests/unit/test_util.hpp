#pragma once

#include <random>

#include "flpflow/core.hpp"

namespace flpflow::test {

/// Corners of the unit square, uniform weights, M = 2, c = 1.
inline Instance unit_square(double lower, double upper) {
    Instance inst;
    inst.points.resize(4, 2);
    inst.points << 0, 0, 1, 0, 0, 1, 1, 1;
    inst.weights = VectorXd::Constant(4, 0.25);
    inst.facility_count = 2;
    inst.consumption = MatrixXd::Ones(4, 2);
    inst.lower_bounds = VectorXd::Constant(2, lower);
    inst.upper_bounds = VectorXd::Constant(2, upper);
    return inst;
}

/// Uniform points in [0,1]^d, random positive weights, c in [0.5, 1.5].
inline Instance random_instance(std::mt19937_64& rng, int n, int m, int d, double lower, double upper) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Instance inst;
    inst.points.resize(n, d);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) inst.points(i, k) = u01(rng);
    inst.weights.resize(n);
    for (int i = 0; i < n; ++i) inst.weights(i) = 0.5 + u01(rng);
    inst.weights /= inst.weights.sum();
    inst.facility_count = m;
    inst.consumption.resize(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) inst.consumption(i, j) = 0.5 + u01(rng);
    inst.lower_bounds = VectorXd::Constant(m, lower);
    inst.upper_bounds = VectorXd::Constant(m, upper);
    return inst;
}

/// Random interior associations (softmax of Gaussians) and random locations.
inline State random_state(std::mt19937_64& rng, const Instance& inst) {
    std::normal_distribution<double> nd;
    const int n = inst.num_points();
    const int m = inst.num_facilities();
    State st;
    st.assoc.resize(n, m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) st.assoc(i, j) = std::exp(nd(rng));
        st.assoc.row(i) /= st.assoc.row(i).sum();
    }
    st.locations.resize(m, inst.dim());
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < inst.dim(); ++k) st.locations(j, k) = 0.5 + 0.3 * nd(rng);
    return st;
}

}  // namespace flpflow::test
