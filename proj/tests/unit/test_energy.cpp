#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "flpflow/energy.hpp"
#include "test_util.hpp"

using namespace flpflow;

namespace {

Instance two_points() {
    Instance inst;
    inst.points.resize(2, 2);
    inst.points << 0, 0, 1, 0;
    inst.weights = VectorXd::Constant(2, 0.5);
    inst.facility_count = 2;
    inst.consumption = MatrixXd::Ones(2, 2);
    inst.lower_bounds = VectorXd::Zero(2);
    inst.upper_bounds = VectorXd::Ones(2);
    return inst;
}

// Central differences of the term-by-term free energy, kept here so the
// gradient check does not lean on the library's own finite differences.
void check_gradients(const Instance& inst, const State& st, double beta) {
    const EnergyEval e = eval_energy(inst, st, beta);
    const double h = 1e-6;
    MatrixXd ga(st.assoc.rows(), st.assoc.cols());
    for (int i = 0; i < st.assoc.rows(); ++i) {
        for (int j = 0; j < st.assoc.cols(); ++j) {
            State a = st, b = st;
            a.assoc(i, j) += h;
            b.assoc(i, j) -= h;
            ga(i, j) = (free_energy_direct(inst, a, beta) - free_energy_direct(inst, b, beta)) / (2 * h);
        }
    }
    MatrixXd gy(st.locations.rows(), st.locations.cols());
    for (int j = 0; j < st.locations.rows(); ++j) {
        for (int k = 0; k < st.locations.cols(); ++k) {
            State a = st, b = st;
            a.locations(j, k) += h;
            b.locations(j, k) -= h;
            gy(j, k) = (free_energy_direct(inst, a, beta) - free_energy_direct(inst, b, beta)) / (2 * h);
        }
    }
    CHECK((e.grad_assoc - ga).norm() <= 1e-5 * std::max(1e-12, ga.norm()));
    CHECK((e.grad_locations - gy).norm() <= 1e-5 * std::max(1e-12, gy.norm()));
}

}  // namespace

TEST_CASE("uniform associations cancel the beta terms") {
    const Instance inst = two_points();
    State st;
    st.assoc = uniform_assoc(inst);
    st.locations.resize(2, 2);
    st.locations << 0.5, 0, 0.5, 0;
    for (double beta : {1e-3, 1.0, 100.0}) {
        const EnergyEval e = eval_energy(inst, st, beta);
        CHECK(e.distortion == doctest::Approx(0.25).epsilon(1e-14));
        CHECK(e.entropy == doctest::Approx(std::log(2.0)).epsilon(1e-14));
        CHECK(e.free_energy_shifted == doctest::Approx(0.25).epsilon(1e-10));
    }
}

TEST_CASE("free energy agrees with the term-by-term sum") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const Instance inst = test::random_instance(rng, 15, 4, 2, 0.0, 1.0);
        const State st = test::random_state(rng, inst);
        for (double beta : {1e-3, 1.0, 100.0}) {
            const EnergyEval e = eval_energy(inst, st, beta);
            const double direct = free_energy_direct(inst, st, beta);
            CHECK(std::abs(e.free_energy_shifted - direct) <= 1e-10 * std::max(1.0, std::abs(direct)));
            CHECK(e.free_energy_shifted >= 0.0);
            CHECK(e.entropy >= 0.0);
            CHECK(e.entropy <= std::log(4.0) + 1e-12);
            CHECK(e.free_energy_shifted ==
                  doctest::Approx(std::log(4.0) / beta + e.distortion - e.entropy / beta).epsilon(1e-10));
        }
    }
}

TEST_CASE("analytic gradients match central differences") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        const Instance inst = test::random_instance(rng, 10, 3, 2, 0.0, 1.0);
        const State st = test::random_state(rng, inst);
        for (double beta : {1e-3, 1.0, 100.0}) check_gradients(inst, st, beta);
    }
}

TEST_CASE("location gradient vanishes at the weighted centroids") {
    std::mt19937_64 rng(8);
    const Instance inst = test::random_instance(rng, 12, 3, 2, 0.0, 1.0);
    State st = test::random_state(rng, inst);
    st.locations = weighted_centroids(inst, st.assoc);
    CHECK(eval_energy(inst, st, 1.0).grad_locations.norm() < 1e-14);
    st.locations(1, 0) += 0.1;
    CHECK(eval_energy(inst, st, 1.0).grad_locations.row(1).norm() > 1e-3);
}

TEST_CASE("energy is invariant under facility relabeling") {
    std::mt19937_64 rng(9);
    const Instance inst = test::random_instance(rng, 8, 3, 2, 0.0, 1.0);
    const State st = test::random_state(rng, inst);
    const std::vector<int> perm{2, 0, 1};
    Instance inst2 = inst;
    State st2 = st;
    for (int j = 0; j < 3; ++j) {
        st2.assoc.col(perm[j]) = st.assoc.col(j);
        st2.locations.row(perm[j]) = st.locations.row(j);
        inst2.consumption.col(perm[j]) = inst.consumption.col(j);
    }
    const EnergyEval a = eval_energy(inst, st, 2.0);
    const EnergyEval b = eval_energy(inst2, st2, 2.0);
    CHECK(b.free_energy_shifted == doctest::Approx(a.free_energy_shifted).epsilon(1e-13));
    for (int j = 0; j < 3; ++j) {
        CHECK((b.grad_assoc.col(perm[j]) - a.grad_assoc.col(j)).norm() < 1e-13);
        CHECK((b.grad_locations.row(perm[j]) - a.grad_locations.row(j)).norm() < 1e-13);
    }
}

TEST_CASE("associations on the boundary are rejected") {
    const Instance inst = two_points();
    State st;
    st.assoc = uniform_assoc(inst);
    st.assoc.row(0) << 1.0, 0.0;
    st.locations = MatrixXd::Zero(2, 2);
    CHECK_THROWS_AS(eval_energy(inst, st, 1.0), DomainError);
    CHECK_NOTHROW(eval_energy_closed(inst, st, 1.0));
}

TEST_CASE("gibbs rows") {
    Instance inst;
    inst.points = MatrixXd::Zero(1, 1);
    inst.weights = VectorXd::Ones(1);
    inst.facility_count = 2;
    inst.consumption = MatrixXd::Ones(1, 2);
    inst.lower_bounds = VectorXd::Zero(2);
    inst.upper_bounds = VectorXd::Ones(2);

    MatrixXd y(2, 1);
    y << 0.0, std::sqrt(std::log(3.0));
    const MatrixXd p = gibbs_assoc(inst, y, 1.0);
    CHECK(p(0, 0) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(p(0, 1) == doctest::Approx(0.25).epsilon(1e-14));

    y << -1.0, 1.0;
    const MatrixXd q = gibbs_assoc(inst, y, 1.0);
    CHECK(q(0, 0) == doctest::Approx(0.5));
    CHECK(q(0, 1) == doctest::Approx(0.5));

    y << 0.1, 0.2;
    const MatrixXd r = gibbs_assoc(inst, y, 1e6);
    CHECK(r(0, 1) < 1e-12);
    CHECK(r(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("gibbs rows sum to one without overflow") {
    std::mt19937_64 rng(4);
    const Instance inst = test::random_instance(rng, 30, 5, 3, 0.0, 1.0);
    const MatrixXd y = 50.0 * MatrixXd::Random(5, 3);
    for (double beta : {1e-3, 1.0, 1e4, 1e8}) {
        const MatrixXd p = gibbs_assoc(inst, y, beta);
        CHECK(p.allFinite());
        CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("weighted centroids") {
    const Instance inst = test::unit_square(0.25, 0.5);
    const MatrixXd uni = weighted_centroids(inst, uniform_assoc(inst));
    for (int j = 0; j < 2; ++j) {
        CHECK(uni(j, 0) == doctest::Approx(0.5));
        CHECK(uni(j, 1) == doctest::Approx(0.5));
    }
    MatrixXd hard(4, 2);
    hard << 1, 0, 1, 0, 0, 1, 0, 1;
    const MatrixXd y = weighted_centroids(inst, hard);
    CHECK(y(0, 0) == doctest::Approx(0.5));
    CHECK(y(0, 1) == doctest::Approx(0.0));
    CHECK(y(1, 0) == doctest::Approx(0.5));
    CHECK(y(1, 1) == doctest::Approx(1.0));

    MatrixXd empty(4, 2);
    empty << 1, 0, 1, 0, 1, 0, 1, 0;
    CHECK_THROWS_AS(weighted_centroids(inst, empty), ZeroMassColumn);
}
