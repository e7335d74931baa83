#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "flpflow/anneal.hpp"
#include "flpflow/energy.hpp"
#include "flpflow/oracle.hpp"
#include "test_util.hpp"

using namespace flpflow;

namespace {

// Recursive enumeration scored by grid-free centroids, written independently
// of the library's odometer.
double reference_optimum(const Instance& inst) {
    const int n = inst.num_points();
    const int m = inst.num_facilities();
    std::vector<int> a(n);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(int)> rec = [&](int i) {
        if (i == n) {
            VectorXd load = VectorXd::Zero(m);
            for (int k = 0; k < n; ++k) load(a[k]) += inst.weights(k) * inst.consumption(k, a[k]);
            for (int j = 0; j < m; ++j)
                if (load(j) < inst.lower_bounds(j) - 1e-12 || load(j) > inst.upper_bounds(j) + 1e-12) return;
            double cost = 0.0;
            for (int j = 0; j < m; ++j) {
                double w = 0.0;
                VectorXd c = VectorXd::Zero(inst.dim());
                for (int k = 0; k < n; ++k)
                    if (a[k] == j) {
                        w += inst.weights(k);
                        c += inst.weights(k) * inst.points.row(k).transpose();
                    }
                if (w == 0.0) continue;
                c /= w;
                for (int k = 0; k < n; ++k)
                    if (a[k] == j) cost += inst.weights(k) * (inst.points.row(k).transpose() - c).squaredNorm();
            }
            best = std::min(best, cost);
            return;
        }
        for (int j = 0; j < m; ++j) {
            a[i] = j;
            rec(i + 1);
        }
    };
    rec(0);
    return best;
}

}  // namespace

TEST_CASE("unit square enumeration") {
    const OracleResult r = brute_force_flp(test::unit_square(0.25, 0.5));
    CHECK(r.best_cost == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(r.feasible_count == 6);
    CHECK(r.enumerated_count == 16);
    // lexicographically first balanced split
    CHECK(r.best_assign == std::vector<int>{0, 0, 1, 1});
    CHECK(r.best_locations(0, 0) == doctest::Approx(0.5));
    CHECK(r.best_locations(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("a single point needs no travel") {
    Instance inst;
    inst.points.resize(1, 2);
    inst.points << 0.2, 0.7;
    inst.weights = VectorXd::Ones(1);
    inst.facility_count = 1;
    inst.consumption = MatrixXd::Ones(1, 1);
    inst.lower_bounds = VectorXd::Zero(1);
    inst.upper_bounds = VectorXd::Constant(1, 10.0);
    const OracleResult r = brute_force_flp(inst);
    CHECK(r.best_cost == 0.0);
    CHECK(r.enumerated_count == 1);
}

TEST_CASE("coincident points cost nothing under any assignment") {
    Instance inst;
    inst.points = MatrixXd::Constant(5, 2, -1.5);
    inst.weights = VectorXd::Constant(5, 0.2);
    inst.facility_count = 3;
    inst.consumption = MatrixXd::Ones(5, 3);
    inst.lower_bounds = VectorXd::Zero(3);
    inst.upper_bounds = VectorXd::Ones(3);
    const OracleResult r = brute_force_flp(inst);
    CHECK(r.best_cost <= 1e-28);
    CHECK(r.feasible_count == 243);
}

TEST_CASE("oracle matches an independent enumeration") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 15; ++trial) {
        const int m = 2 + trial % 2;
        Instance inst = test::random_instance(rng, 7, m, 2, 0.0, 1.0);
        inst.lower_bounds = VectorXd::Constant(m, 0.6 / m);
        inst.upper_bounds = VectorXd::Constant(m, 1.5 / m);
        const OracleResult r = brute_force_flp(inst);
        const double ref = reference_optimum(inst);
        if (std::isinf(ref)) {
            CHECK(std::isinf(r.best_cost));
            CHECK(r.best_assign.empty());
        } else {
            CHECK(r.best_cost == doctest::Approx(ref).epsilon(1e-12));
            const HardAssignment h = evaluate_hard(inst, r.best_locations, r.best_assign);
            CHECK(h.cost == doctest::Approx(r.best_cost).epsilon(1e-12));
        }
    }
}

TEST_CASE("centroids beat every grid location") {
    std::mt19937_64 rng(22);
    Instance inst = test::random_instance(rng, 5, 2, 2, 0.0, 1.0);
    const OracleResult r = brute_force_flp(inst);
    // per-cluster nested grid search over [0,1]^2
    for (int j = 0; j < 2; ++j) {
        double grid_best = std::numeric_limits<double>::infinity();
        for (int gx = 0; gx <= 200; ++gx)
            for (int gy = 0; gy <= 200; ++gy) {
                Eigen::Vector2d y(gx / 200.0, gy / 200.0);
                double c = 0.0;
                for (int i = 0; i < 5; ++i)
                    if (r.best_assign[i] == j) c += inst.weights(i) * inst.distance(i, y);
                grid_best = std::min(grid_best, c);
            }
        double at_centroid = 0.0;
        for (int i = 0; i < 5; ++i)
            if (r.best_assign[i] == j) at_centroid += inst.weights(i) * inst.distance(i, r.best_locations.row(j).transpose());
        CHECK(at_centroid <= grid_best + 1e-15);
    }
}

TEST_CASE("unbounded optimum lower-bounds hardened solutions") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const Instance inst = test::random_instance(rng, 8, 2, 2, 0.0, 10.0);
        const double opt = brute_force_flp(inst).best_cost;
        AnnealConfig cfg;
        cfg.rng_seed = trial;
        cfg.beta_max = 10.0;
        CHECK(anneal(inst, cfg).hardened.cost >= opt - 1e-12);
    }
}

TEST_CASE("enumeration is guarded") {
    std::mt19937_64 rng(24);
    const Instance inst = test::random_instance(rng, 24, 2, 2, 0.0, 1.0);
    CHECK_THROWS_AS(brute_force_flp(inst), TooLarge);
}

TEST_CASE("finite differences") {
    std::mt19937_64 rng(25);
    const Instance inst = test::random_instance(rng, 10, 3, 2, 0.0, 1.0);
    const State st = test::random_state(rng, inst);
    const EnergyEval e = eval_energy(inst, st, 1.0);
    const GradientPair g = finite_diff_gradient(inst, st, 1.0, 1e-6);
    CHECK((g.assoc - e.grad_assoc).norm() <= 1e-5 * e.grad_assoc.norm());
    // F~ is quadratic in the locations
    CHECK((g.locations - e.grad_locations).norm() <= 1e-8 * e.grad_locations.norm());

    State flat;
    flat.assoc = uniform_assoc(inst);
    flat.locations = MatrixXd::Constant(3, 2, 0.4);
    const GradientPair s = finite_diff_gradient(inst, flat, 2.0, 1e-6);
    for (int i = 0; i < 10; ++i) {
        CHECK(s.assoc(i, 1) == doctest::Approx(s.assoc(i, 0)).epsilon(1e-8));
        CHECK(s.assoc(i, 2) == doctest::Approx(s.assoc(i, 0)).epsilon(1e-8));
    }

    CHECK_THROWS_AS(finite_diff_gradient(inst, st, 1.0, 0.9), StepTooLarge);
    CHECK_THROWS_AS(finite_diff_gradient(inst, st, 1.0, 0.0), DomainError);
}

TEST_CASE("feasibility audit") {
    const Instance inst = test::unit_square(0.25, 0.5);
    const FeasibilityAudit empty = audit_feasibility(inst, FlowTrace{});
    CHECK(empty.ok());
    CHECK(empty.min_psi_c_step == -1);

    FlowTrace t;
    t.steps.resize(10);
    for (FlowStep& s : t.steps) {
        s.min_psi_c = s.min_psi_l = 0.1;
        s.min_xi = 0.01;
    }
    t.steps[7].min_psi_c = -1e-3;
    const FeasibilityAudit a = audit_feasibility(inst, t);
    REQUIRE(a.breaches.size() == 1);
    CHECK(a.breaches[0].step == 7);
    CHECK(a.breaches[0].kind == "psi_c");
    CHECK(a.min_psi_c == -1e-3);
    CHECK(a.min_psi_c_step == 7);

    t.steps[7].min_psi_c = 0.1;
    t.steps[3].min_xi = 1e-13;
    t.steps[4].max_abs_phi = 5e-6;
    const FeasibilityAudit b = audit_feasibility(inst, t);
    CHECK(b.breaches.size() == 2);
    CHECK(b.min_xi_step == 3);
    CHECK(b.max_abs_phi_step == 4);

    const Instance small = test::unit_square(0.25, 0.5);
    const FlowResult r = flow_to_stationary(small, initialize_feasible(small, 1), 2.0, FlowConfig{});
    CHECK(audit_feasibility(small, r.trace).ok());
}
