#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <sstream>

#include "flpflow/anneal.hpp"
#include "flpflow/energy.hpp"
#include "flpflow/flow.hpp"
#include "flpflow/oracle.hpp"
#include "test_util.hpp"

using namespace flpflow;

namespace {

void check_trace(const Instance& inst, const FlowTrace& trace, bool descent) {
    CHECK(audit_feasibility(inst, trace).ok());
    if (!descent) return;
    for (std::size_t k = 1; k < trace.steps.size(); ++k) {
        const double prev = trace.steps[k - 1].free_energy_shifted;
        CHECK(trace.steps[k].free_energy_shifted <= prev + 1e-8 * std::max(1.0, std::abs(prev)));
    }
}

}  // namespace

TEST_CASE("step is explicit Euler") {
    State st;
    st.assoc = MatrixXd::Constant(2, 2, 0.5);
    st.locations = MatrixXd::Zero(2, 1);
    VectorXd w = VectorXd::Zero(6);
    State same = step(st, w, 0.3);
    CHECK(same.assoc == st.assoc);
    CHECK(same.locations == st.locations);

    w(0) = 1.0;
    w(5) = -2.0;
    same = step(st, w, 0.0);
    CHECK(same.assoc == st.assoc);

    const State moved = step(st, w, 0.1);
    CHECK(moved.assoc(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(moved.assoc(0, 1) == 0.5);
    CHECK(moved.locations(1, 0) == doctest::Approx(-0.2).epsilon(1e-15));

    // trailing delta is ignored, short controls are rejected
    VectorXd with_delta = VectorXd::Zero(7);
    with_delta(6) = 5.0;
    CHECK(step(st, with_delta, 1.0).assoc == st.assoc);
    CHECK_THROWS_AS(step(st, VectorXd::Zero(5), 1.0), ShapeError);
}

TEST_CASE("kkt residual vanishes at the interior minimum") {
    std::mt19937_64 rng(1);
    const Instance inst = test::random_instance(rng, 20, 3, 2, 0.0, 1.0);
    State st;
    st.assoc = uniform_assoc(inst);
    st.locations = inst.weighted_mean().transpose().replicate(3, 1);
    CHECK(kkt_residual(inst, st, 1e-3) <= 1e-8);
}

TEST_CASE("kkt residual sees a displaced facility") {
    std::mt19937_64 rng(2);
    const Instance inst = test::random_instance(rng, 20, 3, 2, 0.0, 1.0);
    State st;
    st.assoc = uniform_assoc(inst);
    st.locations = inst.weighted_mean().transpose().replicate(3, 1);
    st.locations(1, 0) += 0.1;
    const double res = kkt_residual(inst, st, 1e-3);
    // displaced by 0.1 with column mass 1/3: gradient 2 * (1/3) * 0.1
    const double expected = eval_energy(inst, st, 1e-3).grad_locations.norm();
    CHECK(expected == doctest::Approx(2.0 / 3.0 * 0.1).epsilon(1e-12));
    CHECK(res >= expected);
}

TEST_CASE("kkt residual is invariant under relabeling") {
    std::mt19937_64 rng(3);
    const Instance inst = test::random_instance(rng, 10, 3, 2, 0.2, 0.45);
    const State st = test::random_state(rng, inst);
    const std::vector<int> perm{1, 2, 0};
    Instance inst2 = inst;
    State st2 = st;
    for (int j = 0; j < 3; ++j) {
        st2.assoc.col(perm[j]) = st.assoc.col(j);
        st2.locations.row(perm[j]) = st.locations.row(j);
        inst2.consumption.col(perm[j]) = inst.consumption.col(j);
        inst2.lower_bounds(perm[j]) = inst.lower_bounds(j);
        inst2.upper_bounds(perm[j]) = inst.upper_bounds(j);
    }
    CHECK(kkt_residual(inst2, st2, 1.3) == doctest::Approx(kkt_residual(inst, st, 1.3)).epsilon(1e-10));
}

TEST_CASE("small beta converges to uniform associations at the centroid") {
    std::mt19937_64 rng(4);
    const Instance inst = test::random_instance(rng, 30, 3, 2, 0.0, 1.0);
    const State start = initialize_feasible(inst, 4);
    const FlowResult r = flow_to_stationary(inst, start, 1e-3, FlowConfig{});
    CHECK(r.trace.terminated_by == Termination::Stationary);
    CHECK((r.state.assoc.array() - 1.0 / 3.0).abs().maxCoeff() <= 1e-3);
    const VectorXd mean = inst.weighted_mean();
    for (int j = 0; j < 3; ++j) CHECK((r.state.locations.row(j).transpose() - mean).norm() <= 1e-3);
    check_trace(inst, r.trace, true);
}

TEST_CASE("a start at a stationary point ends at once") {
    std::mt19937_64 rng(5);
    const Instance inst = test::random_instance(rng, 15, 2, 2, 0.0, 1.0);
    State st;
    st.assoc = uniform_assoc(inst);
    st.locations = inst.weighted_mean().transpose().replicate(2, 1);
    const FlowConfig cfg;
    const FlowResult r = flow_to_stationary(inst, st, 0.5, cfg);
    CHECK(r.trace.steps.size() <= 2);
    CHECK(r.trace.steps.back().control_norm <= cfg.stat_tol_u);
}

TEST_CASE("unit square at beta 100 splits evenly") {
    const Instance inst = test::unit_square(0.25, 0.5);
    const State start = initialize_feasible(inst, 7);
    const FlowResult r = flow_to_stationary(inst, start, 100.0, FlowConfig{});
    CHECK(r.trace.terminated_by == Termination::Stationary);
    const BarrierEval b = eval_barriers(inst, r.state);
    for (int j = 0; j < 2; ++j) {
        CHECK(b.utilization(j) >= 0.25 - 1e-6);
        CHECK(b.utilization(j) <= 0.5 + 1e-6);
    }
    CHECK(harden(inst, r.state).cost == doctest::Approx(0.25).epsilon(1e-6));
    check_trace(inst, r.trace, true);
}

TEST_CASE("stationary flows with active bounds stay feasible and end at centroids") {
    std::mt19937_64 rng(6);
    const Instance inst = test::random_instance(rng, 25, 3, 2, 0.25, 0.36);
    const State start = initialize_feasible(inst, 6);
    for (double beta : {1.0, 20.0}) {
        const FlowResult r = flow_to_stationary(inst, start, beta, FlowConfig{});
        CHECK(r.trace.kkt_residual <= FlowConfig{}.stat_tol_kkt);
        const MatrixXd y = weighted_centroids(inst, r.state.assoc);
        for (int j = 0; j < 3; ++j) CHECK((r.state.locations.row(j) - y.row(j)).norm() <= 1e-4);
        check_trace(inst, r.trace, true);
    }
}

TEST_CASE("safe gradient flow keeps feasibility") {
    std::mt19937_64 rng(7);
    const Instance inst = test::random_instance(rng, 12, 2, 2, 0.3, 0.6);
    const State start = initialize_feasible(inst, 7);
    const FlowResult r = flow_to_stationary(inst, start, 5.0, FlowConfig{}, FlowMethod::Sgf);
    CHECK(r.trace.terminated_by == Termination::Stationary);
    check_trace(inst, r.trace, false);
}

TEST_CASE("infeasible starts and exhausted budgets are reported") {
    const Instance inst = test::unit_square(0.25, 0.5);
    State bad;
    bad.assoc = uniform_assoc(inst);
    bad.assoc.row(0) << 0.9, 0.2;
    bad.locations = MatrixXd::Zero(2, 2);
    CHECK_THROWS_AS(flow_to_stationary(inst, bad, 1.0, FlowConfig{}), InfeasibleStart);

    FlowConfig tight;
    tight.max_flow_steps = 3;
    const State start = initialize_feasible(inst, 1);
    try {
        flow_to_stationary(inst, start, 100.0, tight);
        FAIL("expected NonConvergence");
    } catch (const NonConvergence& e) {
        CHECK(e.trace.terminated_by == Termination::MaxSteps);
        CHECK(e.trace.steps.size() == 4);
        CHECK(e.state.assoc.rows() == 4);
    }
}

TEST_CASE("every control QP admits the trivial point") {
    std::mt19937_64 rng(8);
    const Instance inst = test::random_instance(rng, 10, 3, 2, 0.2, 0.45);
    FlowConfig cfg;
    int seen = 0;
    double worst = 0.0;
    cfg.inspect_qp = [&](const QpProblem& qp, const VectorXd& w) {
        ++seen;
        worst = std::max(worst, constraint_violation(qp, w));
    };
    flow_to_stationary(inst, initialize_feasible(inst, 8), 3.0, cfg);
    CHECK(seen > 0);
    CHECK(worst <= 1e-6);
}

TEST_CASE("trace csv has one row per step") {
    FlowTrace t;
    t.steps.resize(3);
    std::ostringstream os;
    write_trace_csv(t, os);
    const std::string s = os.str();
    CHECK(std::count(s.begin(), s.end(), '\n') == 4);
    CHECK(s.rfind("step,t,dt,", 0) == 0);
}
