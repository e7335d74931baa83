#include "flpflow/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>
#include <tuple>

#include "flpflow/anneal.hpp"
#include "flpflow/energy.hpp"

namespace flpflow {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Repeat short solves until the clock has something to measure.
double time_solve(const QpProblem& qp, const QpSettings& settings) {
    int reps = 0;
    const auto start = Clock::now();
    double elapsed = 0.0;
    do {
        const QpSolution sol = solve_qp(qp, nullptr, settings);
        if (sol.status == QpStatus::Infeasible) throw QpFailure("benchmark QP is infeasible");
        ++reps;
        elapsed = seconds_since(start);
    } while (elapsed < 0.05 && reps < 1000);
    return elapsed / reps;
}

}  // namespace

const std::vector<int>& bench_sizes() {
    static const std::vector<int> sizes{204, 404, 906, 1608, 2008, 3010};
    return sizes;
}

BenchShape bench_shape(int size) {
    switch (size) {
        case 204: return {204, 100, 2};
        case 404: return {404, 200, 2};
        case 906: return {906, 300, 3};
        case 1608: return {1608, 400, 4};
        case 2008: return {2008, 500, 4};
        case 3010: return {3010, 600, 5};
        default: break;
    }
    std::ostringstream os;
    os << "unknown problem size " << size << " (expected one of 204, 404, 906, 1608, 2008, 3010)";
    throw ConfigError(os.str());
}

GeneratorSpec bench_spec(int size, std::uint64_t seed) {
    const BenchShape shape = bench_shape(size);
    const int m = shape.num_facilities;
    GeneratorSpec spec;
    spec.num_points = shape.num_points;
    spec.num_facilities = m;
    spec.cluster_proportions.resize(m);
    const double total = 0.5 * m * (m + 1);
    for (int j = 0; j < m; ++j) spec.cluster_proportions[j] = (j + 1) / total;
    spec.area_width = 1.0;
    spec.area_height = 1.0;
    spec.cluster_std = 0.05;
    spec.capacity_upper.assign(m, 1.1 / m);
    spec.capacity_lower.assign(m, 0.5 / m);
    spec.seed = seed;
    return spec;
}

QpTiming time_control_qps(int size, int draws, std::uint64_t seed, const FlowConfig& config) {
    if (draws < 1) throw ConfigError("need at least one beta draw");
    const Instance instance = generate_instance(bench_spec(size, seed));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> exponent(-3.0, 2.0);
    const QpSettings settings = QpSettings::with_tol(config.qp_tol);
    QpTiming out;
    out.size = size;
    for (int k = 0; k < draws; ++k) {
        const double beta = std::pow(10.0, exponent(rng));
        const State state = random_start(instance, rng, beta);
        const EnergyEval energy = eval_energy(instance, state, beta);
        const BarrierEval barriers = eval_barriers(instance, state);
        const DerivativeRows rows = derivative_rows(instance, state, energy);
        const QpProblem cbf = build_cbf_qp(instance, state, energy, barriers, rows, config);
        const QpProblem sgf = build_sgf_qp(instance, state, energy, barriers, rows, config.sgf_alpha);
        out.cbf_seconds += time_solve(cbf, settings);
        out.sgf_seconds += time_solve(sgf, settings);
    }
    out.cbf_seconds /= draws;
    out.sgf_seconds /= draws;
    return out;
}

BenchRow bench_cell(const Instance& instance, int size, double beta, FlowMethod method, const AnnealConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.rng_seed);
    const State start = random_start(instance, rng, beta);
    BenchRow row;
    row.beta = beta;
    row.size = size;
    row.method = to_string(method);
    row.seed = config.rng_seed;
    const auto t0 = Clock::now();
    State last;
    try {
        last = flow_to_stationary(instance, start, beta, config.flow, method).state;
        row.stationary = true;
    } catch (const NonConvergence& e) {
        last = e.state;
    }
    row.seconds = seconds_since(t0);
    row.cost = eval_energy(instance, last, beta).free_energy_shifted;
    return row;
}

std::vector<BenchRow> run_bench(const std::vector<int>& sizes, const std::vector<double>& betas,
                                const std::vector<std::uint64_t>& seeds, const std::vector<FlowMethod>& methods,
                                const AnnealConfig& config) {
    std::vector<BenchRow> rows;
    for (int size : sizes) {
        for (std::uint64_t seed : seeds) {
            const Instance instance = generate_instance(bench_spec(size, seed));
            AnnealConfig cfg = config;
            cfg.rng_seed = seed;
            for (double beta : betas)
                for (FlowMethod method : methods) rows.push_back(bench_cell(instance, size, beta, method, cfg));
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
        return std::tie(a.beta, a.size, a.method, a.seed) < std::tie(b.beta, b.size, b.method, b.seed);
    });
    return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& os) {
    os << "beta,size,method,seed,cost,seconds,stationary\n";
    const auto old = os.precision(10);
    for (const BenchRow& r : rows)
        os << r.beta << ',' << r.size << ',' << r.method << ',' << r.seed << ',' << r.cost << ',' << r.seconds << ','
           << (r.stationary ? 1 : 0) << '\n';
    os.precision(old);
}

void write_qp_timing_csv(const std::vector<QpTiming>& rows, std::ostream& os) {
    os << "size,cbf_seconds,sgf_seconds,ratio\n";
    const auto old = os.precision(6);
    for (const QpTiming& r : rows) os << r.size << ',' << r.cbf_seconds << ',' << r.sgf_seconds << ',' << r.ratio() << '\n';
    os.precision(old);
}

}  // namespace flpflow
