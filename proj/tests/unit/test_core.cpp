#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "flpflow/core.hpp"
#include "test_util.hpp"

using namespace flpflow;

TEST_CASE("validate_instance accepts bounds that bracket the uniform load") {
    CHECK_NOTHROW(validate_instance(test::unit_square(0.25, 0.5)));
}

TEST_CASE("validate_instance rejects lower above upper") {
    CHECK_THROWS_AS(validate_instance(test::unit_square(0.6, 0.5)), BoundOrderError);
}

TEST_CASE("validate_instance rejects weights that do not sum to one") {
    Instance inst;
    inst.points.resize(2, 1);
    inst.points << 0, 1;
    inst.weights.resize(2);
    inst.weights << 0.5, 0.6;
    inst.facility_count = 2;
    inst.consumption = MatrixXd::Ones(2, 2);
    inst.lower_bounds = VectorXd::Zero(2);
    inst.upper_bounds = VectorXd::Ones(2);
    CHECK_THROWS_AS(validate_instance(inst), WeightSumError);
}

TEST_CASE("validate_instance rejects total capacity below demand") {
    CHECK_THROWS_AS(validate_instance(test::unit_square(0.0, 0.4)), CapacityInfeasible);
}

TEST_CASE("validate_instance rejects inconsistent shapes") {
    Instance inst = test::unit_square(0.25, 0.5);
    inst.consumption = MatrixXd::Ones(3, 2);
    CHECK_THROWS_AS(validate_instance(inst), ShapeError);
}

TEST_CASE("evaluate_hard on the unit square split") {
    const Instance inst = test::unit_square(0.25, 0.5);
    MatrixXd y(2, 2);
    y << 0.5, 0, 0.5, 1;
    const HardAssignment h = evaluate_hard(inst, y, {0, 0, 1, 1});
    CHECK(h.cost == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(h.utilization(0) == doctest::Approx(0.5));
    CHECK(h.utilization(1) == doctest::Approx(0.5));
    CHECK(h.lower_violations.empty());
}

TEST_CASE("evaluate_hard with a facility on the only point costs nothing") {
    Instance inst;
    inst.points.resize(1, 2);
    inst.points << 3, -2;
    inst.weights = VectorXd::Ones(1);
    inst.facility_count = 1;
    inst.consumption = MatrixXd::Ones(1, 1);
    inst.lower_bounds = VectorXd::Zero(1);
    inst.upper_bounds = VectorXd::Ones(1);
    CHECK(evaluate_hard(inst, inst.points, {0}).cost == 0.0);
}

TEST_CASE("evaluate_hard rejects bad indices") {
    const Instance inst = test::unit_square(0.25, 0.5);
    MatrixXd y = MatrixXd::Zero(2, 2);
    CHECK_THROWS_AS(evaluate_hard(inst, y, {0, 2, 1, 1}), IndexOutOfRange);
    CHECK_THROWS_AS(evaluate_hard(inst, y, {0, -1, 1, 1}), IndexOutOfRange);
    CHECK_THROWS_AS(evaluate_hard(inst, y, {0, 1, 1}), IndexOutOfRange);
}

TEST_CASE("evaluate_hard is invariant under relabeling and nonnegative") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        Instance inst = test::random_instance(rng, 9, 4, 2, 0.0, 1.0);
        inst.consumption.setOnes();
        std::uniform_int_distribution<int> pick(0, 3);
        std::vector<int> assign(9);
        for (int& a : assign) a = pick(rng);
        MatrixXd y = MatrixXd::Random(4, 2);
        std::vector<int> perm{0, 1, 2, 3};
        std::shuffle(perm.begin(), perm.end(), rng);
        MatrixXd y2(4, 2);
        std::vector<int> assign2(9);
        for (int j = 0; j < 4; ++j) y2.row(perm[j]) = y.row(j);
        for (int i = 0; i < 9; ++i) assign2[i] = perm[assign[i]];
        const HardAssignment a = evaluate_hard(inst, y, assign);
        const HardAssignment b = evaluate_hard(inst, y2, assign2);
        CHECK(a.cost >= 0.0);
        CHECK(b.cost == doctest::Approx(a.cost).epsilon(1e-14));
        for (int j = 0; j < 4; ++j) CHECK(b.utilization(perm[j]) == doctest::Approx(a.utilization(j)));
    }
}

TEST_CASE("lower violations are flagged") {
    const Instance inst = test::unit_square(0.25, 1.0);
    MatrixXd y = MatrixXd::Zero(2, 2);
    const HardAssignment h = evaluate_hard(inst, y, {0, 0, 0, 0});
    REQUIRE(h.lower_violations.size() == 1);
    CHECK(h.lower_violations[0] == 1);
}

TEST_CASE("schedule stage counts") {
    AnnealConfig c;
    c.growth = 1.5;
    CHECK(c.schedule().size() == 30);

    c = AnnealConfig{};
    const auto betas = c.schedule();
    CHECK(betas.size() == 26);
    CHECK(betas.front() == 1e-3);
    CHECK(betas.back() >= 1e2);
    CHECK(betas[betas.size() - 2] < 1e2);
    for (std::size_t k = 1; k < betas.size(); ++k) CHECK(betas[k] > betas[k - 1]);

    c.beta_max = c.beta0;
    CHECK(c.schedule().size() == 1);
}

TEST_CASE("config validation") {
    AnnealConfig c;
    CHECK_NOTHROW(c.validate());
    c.growth = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = AnnealConfig{};
    c.flow.mu = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = AnnealConfig{};
    c.flow.dt_init = 100.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = AnnealConfig{};
    c.flow.max_flow_seconds = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("uniform associations and weighted mean") {
    const Instance inst = test::unit_square(0.25, 0.5);
    const MatrixXd p = uniform_assoc(inst);
    CHECK(p.rows() == 4);
    CHECK((p.array() == 0.5).all());
    const VectorXd mean = inst.weighted_mean();
    CHECK(mean(0) == doctest::Approx(0.5));
    CHECK(mean(1) == doctest::Approx(0.5));
}
