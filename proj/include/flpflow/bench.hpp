#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "flpflow/core.hpp"
#include "flpflow/flow.hpp"
#include "flpflow/generator.hpp"

namespace flpflow {

/// Problem size is N*M + 2M, the number of decision variables.
struct BenchShape {
    int size = 0;
    int num_points = 0;
    int num_facilities = 0;
};

/// The fixed ladder 204, 404, 906, 1608, 2008, 3010. Throws ConfigError for
/// any other size.
BenchShape bench_shape(int size);
const std::vector<int>& bench_sizes();

/// Unit-square clustered instance for a ladder size: cluster proportions
/// proportional to 1..M, upper bounds 1.1/M, lower bounds 0.5/M, so the
/// largest clusters hit their capacity.
GeneratorSpec bench_spec(int size, std::uint64_t seed);

struct QpTiming {
    int size = 0;
    double cbf_seconds = 0.0;  // mean per solve
    double sgf_seconds = 0.0;
    double ratio() const { return sgf_seconds / cbf_seconds; }
};

/// Average solve time of both control QPs built at the same state, over
/// `draws` log-uniform beta in [1e-3, 1e2] with a random_start state each.
QpTiming time_control_qps(int size, int draws, std::uint64_t seed, const FlowConfig& config);

struct BenchRow {
    double beta = 0.0;
    int size = 0;
    std::string method;
    std::uint64_t seed = 0;
    double cost = 0.0;  // final shifted free energy
    double seconds = 0.0;
    bool stationary = false;
};

/// One fixed-beta solve from random_start (same start for every method). The
/// flow runs until stationary or until config.flow.max_flow_steps; either way
/// the row reports the last accepted state. Method "da" is not accepted.
BenchRow bench_cell(const Instance& instance, int size, double beta, FlowMethod method, const AnnealConfig& config);

/// Every (beta, size, method, seed) cell, rows sorted in that order.
std::vector<BenchRow> run_bench(const std::vector<int>& sizes, const std::vector<double>& betas,
                                const std::vector<std::uint64_t>& seeds, const std::vector<FlowMethod>& methods,
                                const AnnealConfig& config);

/// Header beta,size,method,seed,cost,seconds,stationary.
void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& os);
void write_qp_timing_csv(const std::vector<QpTiming>& rows, std::ostream& os);

}  // namespace flpflow
