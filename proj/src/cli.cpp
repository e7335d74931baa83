#include "flpflow/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "flpflow/anneal.hpp"
#include "flpflow/baselines.hpp"
#include "flpflow/bench.hpp"
#include "flpflow/energy.hpp"
#include "flpflow/io.hpp"
#include "flpflow/oracle.hpp"

namespace flpflow {

namespace {

struct ConfigFlags {
    std::uint64_t seed = 0;
    AnnealConfig anneal;
    double alpha_psi = 1.0;
    double time_budget = 0.0;

    void add_to(CLI::App& app) {
        app.add_option("--seed", seed, "RNG seed");
        app.add_option("--beta0", anneal.beta0, "first beta")->capture_default_str();
        app.add_option("--growth", anneal.growth, "annealing ratio")->capture_default_str();
        app.add_option("--beta-max", anneal.beta_max, "last beta (the schedule stops at the first beta >= it)")
            ->capture_default_str();
        app.add_option("--mu", anneal.flow.mu, "CLF decay gain")->capture_default_str();
        app.add_option("--q1", anneal.flow.q1, "CLF slack penalty")->capture_default_str();
        app.add_option("--alpha-psi", alpha_psi, "capacity barrier gain (upper and lower)")->capture_default_str();
        app.add_option("--alpha-xi", anneal.flow.alpha_xi, "positivity barrier gain")->capture_default_str();
        app.add_option("--tol", anneal.flow.stat_tol_kkt, "KKT residual that ends a stage")->capture_default_str();
        app.add_option("--max-steps", anneal.flow.max_flow_steps, "flow step budget per stage")->capture_default_str();
        app.add_option("--time-budget", time_budget, "flow wall-clock budget per stage in seconds (0 = none)");
    }

    AnnealConfig resolve() const {
        AnnealConfig c = anneal;
        c.rng_seed = seed;
        c.flow.alpha_psi_c = alpha_psi;
        c.flow.alpha_psi_l = alpha_psi;
        c.flow.max_flow_seconds = time_budget;
        c.validate();
        return c;
    }
};

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::istringstream is(item);
        T v{};
        if (!(is >> v) || !(is >> std::ws).eof()) throw CLI::ValidationError(what, "cannot parse '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw CLI::ValidationError(what, "empty list");
    return out;
}

FlowMethod parse_method(const std::string& name) {
    if (name == "cbf") return FlowMethod::Cbf;
    if (name == "sgf") return FlowMethod::Sgf;
    throw CLI::ValidationError("--methods", "unknown flow method '" + name + "'");
}

void emit_json(const Json& j, const std::string& path, std::ostream& out) {
    if (path.empty())
        out << j.dump(2) << '\n';
    else
        write_json_file(j, path);
}

// ---------------------------------------------------------------------------
// check

struct CheckLine {
    std::string name;
    bool pass = false;
    std::string detail;
};

State random_state(const Instance& instance, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    State s;
    s.assoc.resize(instance.num_points(), instance.num_facilities());
    for (int i = 0; i < s.assoc.rows(); ++i) {
        for (int j = 0; j < s.assoc.cols(); ++j) s.assoc(i, j) = u(rng);
        s.assoc.row(i) /= s.assoc.row(i).sum();
    }
    s.locations.resize(instance.num_facilities(), instance.dim());
    for (int j = 0; j < s.locations.rows(); ++j)
        for (int k = 0; k < s.locations.cols(); ++k) s.locations(j, k) = u(rng);
    return s;
}

CheckLine check_gradients(std::uint64_t seed) {
    double worst = 0.0;
    const double betas[] = {1e-3, 1.0, 100.0};
    for (int t = 0; t < 6; ++t) {
        GeneratorSpec g;
        g.num_points = 12;
        g.num_facilities = 3;
        g.cluster_proportions = {0.3, 0.3, 0.4};
        g.capacity_upper = {1.0, 1.0, 1.0};
        g.area_width = g.area_height = 1.0;
        g.cluster_std = 0.1;
        g.seed = seed + t;
        const Instance inst = generate_instance(g);
        std::mt19937_64 rng(seed + 100 + t);
        const State s = random_state(inst, rng);
        const double beta = betas[t % 3];
        const EnergyEval e = eval_energy(inst, s, beta);
        const GradientPair fd = finite_diff_gradient(inst, s, beta, 1e-6);
        worst = std::max(worst, (e.grad_assoc - fd.assoc).norm() / fd.assoc.norm());
        worst = std::max(worst, (e.grad_locations - fd.locations).norm() / std::max(fd.locations.norm(), 1e-12));
    }
    std::ostringstream os;
    os << "worst relative error " << worst;
    return {"gradients", worst < 1e-5, os.str()};
}

Instance unit_square() {
    Instance inst;
    inst.points.resize(4, 2);
    inst.points << 0, 0, 1, 0, 0, 1, 1, 1;
    inst.weights = VectorXd::Constant(4, 0.25);
    inst.facility_count = 2;
    inst.consumption = MatrixXd::Ones(4, 2);
    inst.lower_bounds = VectorXd::Constant(2, 0.25);
    inst.upper_bounds = VectorXd::Constant(2, 0.5);
    return inst;
}

CheckLine check_oracle() {
    const OracleResult r = brute_force_flp(unit_square());
    std::ostringstream os;
    os << "best_cost " << r.best_cost << ", feasible " << r.feasible_count << " of " << r.enumerated_count;
    const bool ok = std::abs(r.best_cost - 0.25) <= 1e-12 && r.feasible_count == 6 && r.enumerated_count == 16;
    return {"oracle", ok, os.str()};
}

std::vector<CheckLine> check_anneal(std::uint64_t seed) {
    GeneratorSpec g;
    g.num_points = 30;
    g.num_facilities = 3;
    g.cluster_proportions = {0.5, 0.3, 0.2};
    g.capacity_upper = {0.4, 0.4, 0.4};
    g.capacity_lower = {0.2, 0.2, 0.2};
    g.area_width = g.area_height = 1.0;
    g.cluster_std = 0.05;
    g.seed = seed;
    const Instance inst = generate_instance(g);
    AnnealConfig cfg;
    cfg.rng_seed = seed;
    double worst_trivial = 0.0;
    cfg.flow.inspect_qp = [&](const QpProblem& qp, const VectorXd& w) {
        worst_trivial = std::max(worst_trivial, constraint_violation(qp, w));
    };
    std::vector<FeasibilityAudit> audits;
    double worst_kkt = 0.0;
    const SolveReport r = anneal(inst, cfg, [&](double beta, const FlowTrace& trace, const State&) {
        audits.push_back(audit_feasibility(inst, trace));
        worst_kkt = std::max(worst_kkt, trace.kkt_residual);
        (void)beta;
    });
    std::size_t breaches = 0;
    for (const FeasibilityAudit& a : audits) breaches += a.breaches.size();
    std::vector<CheckLine> out;
    std::ostringstream os;
    os << audits.size() << " stages, " << breaches << " breaches";
    out.push_back({"feasibility", breaches == 0, os.str()});
    os.str("");
    os << "worst stage residual " << worst_kkt;
    out.push_back({"stationarity", worst_kkt <= 1e-4, os.str()});
    os.str("");
    // psi may sit up to 1e-6 below zero inside the feasibility tolerance.
    const double allowed = std::max({cfg.flow.alpha_psi_c, cfg.flow.alpha_psi_l, cfg.flow.alpha_xi}) * 1e-6;
    os << "worst violation of the trivial point " << worst_trivial;
    out.push_back({"trivial-point", worst_trivial <= allowed, os.str()});
    os.str("");
    const bool within = (r.hardened.utilization.array() <= inst.upper_bounds.array() + 1e-12).all();
    os << "hardened cost " << r.hardened.cost;
    out.push_back({"hardened-capacity", within, os.str()});
    return out;
}

// ---------------------------------------------------------------------------

int cmd_generate(const GeneratorSpec& spec, const std::string& out_path, std::ostream& out) {
    const Instance inst = generate_instance(spec);
    emit_json(instance_document(inst, &spec), out_path, out);
    return 0;
}

int cmd_solve(const std::string& instance_path, const std::string& method, double fixed_beta,
              const AnnealConfig& config, const std::string& out_path, const std::string& trace_dir,
              std::ostream& out) {
    const Instance inst = instance_from_json(read_json_file(instance_path));
    std::vector<FlowTrace> traces;
    const StageObserver keep = [&](double, const FlowTrace& trace, const State&) { traces.push_back(trace); };
    const StageObserver observer = trace_dir.empty() ? StageObserver{} : keep;
    SolveReport report;
    if (method == "da") {
        if (fixed_beta > 0.0) throw CLI::ValidationError("--beta", "not available for --method da");
        report = da_unconstrained(inst, config);
    } else if (fixed_beta > 0.0) {
        report = solve_at_beta(inst, config, fixed_beta, parse_method(method), observer);
    } else {
        report = anneal_with(inst, config, parse_method(method), observer);
    }
    emit_json(to_json(report, config), out_path, out);
    if (!traces.empty()) std::filesystem::create_directories(trace_dir);
    for (std::size_t k = 0; k < traces.size(); ++k) {
        const std::string path = trace_dir + "/trace_" + std::to_string(k) + ".csv";
        std::ofstream f(path);
        if (!f) throw ConfigError("cannot write " + path);
        write_trace_csv(traces[k], f);
    }
    return 0;
}

int cmd_bench(const std::string& sizes, const std::string& betas, const std::string& seeds,
              const std::string& methods, bool qp_only, int draws, const AnnealConfig& config,
              const std::string& out_path, std::ostream& out) {
    const std::vector<int> size_list = parse_list<int>(sizes, "--sizes");
    for (int s : size_list) bench_shape(s);
    std::ostringstream csv;
    if (qp_only) {
        std::vector<QpTiming> rows;
        for (int s : size_list) rows.push_back(time_control_qps(s, draws, config.rng_seed, config.flow));
        write_qp_timing_csv(rows, csv);
    } else {
        std::vector<FlowMethod> method_list;
        for (const std::string& m : parse_list<std::string>(methods, "--methods")) method_list.push_back(parse_method(m));
        const auto rows = run_bench(size_list, parse_list<double>(betas, "--betas"),
                                    parse_list<std::uint64_t>(seeds, "--seeds"), method_list, config);
        write_bench_csv(rows, csv);
    }
    if (out_path.empty()) {
        out << csv.str();
    } else {
        std::ofstream f(out_path);
        if (!f) throw ConfigError("cannot write " + out_path);
        f << csv.str();
    }
    return 0;
}

int cmd_check(std::uint64_t seed, std::ostream& out) {
    std::vector<CheckLine> lines;
    lines.push_back(check_gradients(seed));
    lines.push_back(check_oracle());
    for (CheckLine& l : check_anneal(seed)) lines.push_back(std::move(l));
    bool all = true;
    for (const CheckLine& l : lines) {
        out << (l.pass ? "PASS " : "FAIL ") << l.name << ": " << l.detail << '\n';
        all = all && l.pass;
    }
    return all ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Capacitated facility location by annealing with control-barrier flows"};
    app.name("flpflow");
    app.require_subcommand(1);

    GeneratorSpec gen;
    std::string gen_props, gen_upper, gen_lower;
    std::string out_path;
    auto* generate = app.add_subcommand("generate", "sample a clustered instance");
    generate->add_option("--points", gen.num_points, "number of demand points")->capture_default_str();
    generate->add_option("--facilities", gen.num_facilities, "number of facilities")->capture_default_str();
    generate->add_option("--proportions", gen_props, "cluster proportions, comma separated");
    generate->add_option("--upper", gen_upper, "capacity fractions, comma separated");
    generate->add_option("--lower", gen_lower, "lower-bound fractions, comma separated");
    generate->add_option("--width", gen.area_width, "area width")->capture_default_str();
    generate->add_option("--height", gen.area_height, "area height")->capture_default_str();
    generate->add_option("--std", gen.cluster_std, "cluster standard deviation")->capture_default_str();
    generate->add_option("--seed", gen.seed, "RNG seed");
    generate->add_option("--out", out_path, "output file (default stdout)");

    ConfigFlags solve_flags;
    std::string instance_path, method = "cbf", trace_dir;
    double fixed_beta = 0.0;
    auto* solve = app.add_subcommand("solve", "solve an instance");
    solve->add_option("instance", instance_path, "instance JSON")->required()->check(CLI::ExistingFile);
    solve->add_option("--method", method, "cbf, sgf or da")
        ->check(CLI::IsMember({"cbf", "sgf", "da"}))
        ->capture_default_str();
    solve->add_option("--beta", fixed_beta, "solve at this beta only, from a random start");
    solve->add_option("--trace-dir", trace_dir, "write one flow trace CSV per stage here (created if missing)");
    solve->add_option("--out", out_path, "report file (default stdout)");
    solve_flags.add_to(*solve);

    auto* oracle = app.add_subcommand("oracle", "exhaustive search on a tiny instance");
    oracle->add_option("instance", instance_path, "instance JSON")->required()->check(CLI::ExistingFile);
    oracle->add_option("--out", out_path, "result file (default stdout)");

    ConfigFlags bench_flags;
    std::string sizes = "204,404,906", betas = "1,100", seeds = "1,2,3,4,5", methods = "cbf,sgf";
    bool qp_only = false;
    int draws = 10;
    auto* bench = app.add_subcommand("bench", "fixed-beta cost and time over the size ladder");
    bench->add_option("--sizes", sizes, "problem sizes N*M+2M")->capture_default_str();
    bench->add_option("--betas", betas, "betas")->capture_default_str();
    bench->add_option("--seeds", seeds, "instance seeds")->capture_default_str();
    bench->add_option("--methods", methods, "flow methods")->capture_default_str();
    bench->add_flag("--qp", qp_only, "time single control QPs instead (columns size,cbf,sgf,ratio)");
    bench->add_option("--draws", draws, "random betas per size for --qp")->capture_default_str();
    bench->add_option("--out", out_path, "CSV file (default stdout)");
    bench_flags.add_to(*bench);

    std::uint64_t check_seed = 1;
    auto* check = app.add_subcommand("check", "run the property suite on seeded instances");
    check->add_option("--seed", check_seed, "seed")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        if (app.get_subcommands().empty())
            err << app.help();
        else
            err << app.get_subcommands().front()->help();
        return 2;
    }

    try {
        if (*generate) {
            if (!gen_props.empty()) gen.cluster_proportions = parse_list<double>(gen_props, "--proportions");
            if (!gen_upper.empty()) gen.capacity_upper = parse_list<double>(gen_upper, "--upper");
            if (!gen_lower.empty()) gen.capacity_lower = parse_list<double>(gen_lower, "--lower");
            return cmd_generate(gen, out_path, out);
        }
        if (*solve) return cmd_solve(instance_path, method, fixed_beta, solve_flags.resolve(), out_path, trace_dir, out);
        if (*oracle) {
            emit_json(to_json(brute_force_flp(instance_from_json(read_json_file(instance_path)))), out_path, out);
            return 0;
        }
        if (*bench) return cmd_bench(sizes, betas, seeds, methods, qp_only, draws, bench_flags.resolve(), out_path, out);
        if (*check) return cmd_check(check_seed, out);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const SpecError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace flpflow
