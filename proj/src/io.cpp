#include "flpflow/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace flpflow {

namespace {

Json matrix_json(const MatrixXd& m) {
    Json rows = Json::array();
    for (int i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json vector_json(const VectorXd& v) {
    Json out = Json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

// JSON has no infinity; it is written as null.
Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

MatrixXd matrix_from(const Json& j, const char* what, int cols_hint = -1) {
    if (!j.is_array()) throw ConfigError(std::string(what) + ": expected an array of rows");
    const int rows = static_cast<int>(j.size());
    const int cols = rows > 0 ? static_cast<int>(j[0].size()) : std::max(cols_hint, 0);
    MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols)
            throw ConfigError(std::string(what) + ": ragged rows");
        for (int k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

VectorXd vector_from(const Json& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + ": expected an array");
    VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

Json header(const char* kind) { return Json{{"schema", kind}, {"version", kSchemaVersion}}; }

void check_header(const Json& j, const char* kind) {
    if (!j.is_object() || !j.contains("schema") || j["schema"] != kind)
        throw ConfigError(std::string("expected a document with schema \"") + kind + "\"");
    const int version = j.value("version", 0);
    if (version < 1 || version > kSchemaVersion) {
        std::ostringstream os;
        os << kind << " schema version " << version << " is not supported (this build reads 1.." << kSchemaVersion
           << ")";
        throw ConfigError(os.str());
    }
}

template <class F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed ") + what + ": " + e.what());
    }
}

}  // namespace

Json to_json(const Instance& instance) {
    Json j = header("flpflow.instance");
    j["dim"] = instance.dim();
    j["facility_count"] = instance.facility_count;
    j["distance_kind"] = "squared_euclidean";
    j["points"] = matrix_json(instance.points);
    j["weights"] = vector_json(instance.weights);
    j["consumption"] = matrix_json(instance.consumption);
    j["lower_bounds"] = vector_json(instance.lower_bounds);
    j["upper_bounds"] = vector_json(instance.upper_bounds);
    return j;
}

Instance instance_from_json(const Json& j) {
    check_header(j, "flpflow.instance");
    return guarded("instance", [&] {
        if (j.value("distance_kind", "squared_euclidean") != "squared_euclidean")
            throw ConfigError("unknown distance_kind " + j["distance_kind"].dump());
        Instance out;
        out.facility_count = j.at("facility_count").get<int>();
        out.points = matrix_from(j.at("points"), "points", j.value("dim", 0));
        out.weights = vector_from(j.at("weights"), "weights");
        out.consumption = matrix_from(j.at("consumption"), "consumption", out.facility_count);
        out.lower_bounds = vector_from(j.at("lower_bounds"), "lower_bounds");
        out.upper_bounds = vector_from(j.at("upper_bounds"), "upper_bounds");
        if (j.contains("dim") && j["dim"].get<int>() != out.dim() && out.num_points() > 0)
            throw ConfigError("dim does not match the point coordinates");
        return out;
    });
}

Json to_json(const FlowConfig& c) {
    return Json{{"mu", c.mu},
                {"q1", c.q1},
                {"q2", c.q2},
                {"alpha_psi_c", c.alpha_psi_c},
                {"alpha_psi_l", c.alpha_psi_l},
                {"alpha_xi", c.alpha_xi},
                {"dt_init", c.dt_init},
                {"dt_min", c.dt_min},
                {"dt_max", c.dt_max},
                {"stat_tol_u", c.stat_tol_u},
                {"stat_tol_kkt", c.stat_tol_kkt},
                {"max_flow_steps", c.max_flow_steps},
                {"max_flow_seconds", c.max_flow_seconds},
                {"qp_tol", c.qp_tol},
                {"prune_inactive_xi", c.prune_inactive_xi},
                {"sgf_alpha", c.sgf_alpha}};
}

FlowConfig flow_config_from_json(const Json& j) {
    return guarded("flow config", [&] {
        FlowConfig c;
        c.mu = j.value("mu", c.mu);
        c.q1 = j.value("q1", c.q1);
        c.q2 = j.value("q2", c.q2);
        c.alpha_psi_c = j.value("alpha_psi_c", c.alpha_psi_c);
        c.alpha_psi_l = j.value("alpha_psi_l", c.alpha_psi_l);
        c.alpha_xi = j.value("alpha_xi", c.alpha_xi);
        c.dt_init = j.value("dt_init", c.dt_init);
        c.dt_min = j.value("dt_min", c.dt_min);
        c.dt_max = j.value("dt_max", c.dt_max);
        c.stat_tol_u = j.value("stat_tol_u", c.stat_tol_u);
        c.stat_tol_kkt = j.value("stat_tol_kkt", c.stat_tol_kkt);
        c.max_flow_steps = j.value("max_flow_steps", c.max_flow_steps);
        c.max_flow_seconds = j.value("max_flow_seconds", c.max_flow_seconds);
        c.qp_tol = j.value("qp_tol", c.qp_tol);
        c.prune_inactive_xi = j.value("prune_inactive_xi", c.prune_inactive_xi);
        c.sgf_alpha = j.value("sgf_alpha", c.sgf_alpha);
        return c;
    });
}

Json to_json(const AnnealConfig& c) {
    return Json{{"beta0", c.beta0},
                {"growth", c.growth},
                {"beta_max", c.beta_max},
                {"perturb_scale", c.perturb_scale},
                {"rng_seed", c.rng_seed},
                {"flow", to_json(c.flow)}};
}

AnnealConfig anneal_config_from_json(const Json& j) {
    return guarded("anneal config", [&] {
        AnnealConfig c;
        c.beta0 = j.value("beta0", c.beta0);
        c.growth = j.value("growth", c.growth);
        c.beta_max = j.value("beta_max", c.beta_max);
        c.perturb_scale = j.value("perturb_scale", c.perturb_scale);
        c.rng_seed = j.value("rng_seed", c.rng_seed);
        if (j.contains("flow")) c.flow = flow_config_from_json(j["flow"]);
        return c;
    });
}

Json to_json(const GeneratorSpec& s) {
    return Json{{"num_points", s.num_points},
                {"num_facilities", s.num_facilities},
                {"cluster_proportions", s.cluster_proportions},
                {"area_width", s.area_width},
                {"area_height", s.area_height},
                {"cluster_std", s.cluster_std},
                {"capacity_upper", s.capacity_upper},
                {"capacity_lower", s.capacity_lower},
                {"seed", s.seed}};
}

GeneratorSpec generator_spec_from_json(const Json& j) {
    return guarded("generator spec", [&] {
        GeneratorSpec s;
        s.num_points = j.value("num_points", s.num_points);
        s.num_facilities = j.value("num_facilities", s.num_facilities);
        s.cluster_proportions = j.value("cluster_proportions", s.cluster_proportions);
        s.area_width = j.value("area_width", s.area_width);
        s.area_height = j.value("area_height", s.area_height);
        s.cluster_std = j.value("cluster_std", s.cluster_std);
        s.capacity_upper = j.value("capacity_upper", s.capacity_upper);
        s.capacity_lower = j.value("capacity_lower", s.capacity_lower);
        s.seed = j.value("seed", s.seed);
        return s;
    });
}

Json to_json(const State& state) {
    return Json{{"assoc", matrix_json(state.assoc)}, {"locations", matrix_json(state.locations)}};
}

State state_from_json(const Json& j) {
    return guarded("state", [&] {
        State s;
        s.assoc = matrix_from(j.at("assoc"), "assoc");
        s.locations = matrix_from(j.at("locations"), "locations");
        return s;
    });
}

Json to_json(const HardAssignment& h) {
    return Json{{"assign", h.assign},
                {"cost", h.cost},
                {"utilization", vector_json(h.utilization)},
                {"lower_violations", h.lower_violations}};
}

HardAssignment hard_assignment_from_json(const Json& j) {
    return guarded("hard assignment", [&] {
        HardAssignment h;
        h.assign = j.at("assign").get<std::vector<int>>();
        h.cost = j.at("cost").get<double>();
        h.utilization = vector_from(j.at("utilization"), "utilization");
        h.lower_violations = j.value("lower_violations", std::vector<int>{});
        return h;
    });
}

Json to_json(const SolveReport& report, const AnnealConfig& config) {
    Json j = header("flpflow.report");
    j["method"] = report.method;
    j["seed"] = config.rng_seed;
    j["config"] = to_json(config);
    Json stages = Json::array();
    for (const BetaRecord& r : report.per_beta) {
        stages.push_back(Json{{"beta", r.beta},
                              {"free_energy", r.free_energy},
                              {"distortion", r.distortion},
                              {"entropy", r.entropy},
                              {"utilization", vector_json(r.utilization)},
                              {"kkt_residual", r.kkt_residual},
                              {"flow_steps", r.flow_steps},
                              {"wall_time_seconds", r.wall_time_seconds}});
    }
    j["per_beta"] = std::move(stages);
    j["final_state"] = to_json(report.final_state);
    j["hardened"] = to_json(report.hardened);
    j["total_wall_time_seconds"] = report.total_wall_time_seconds;
    return j;
}

SolveReport report_from_json(const Json& j) {
    check_header(j, "flpflow.report");
    return guarded("report", [&] {
        SolveReport r;
        r.method = j.at("method").get<std::string>();
        for (const Json& s : j.at("per_beta")) {
            BetaRecord b;
            b.beta = s.at("beta").get<double>();
            b.free_energy = s.at("free_energy").get<double>();
            b.distortion = s.at("distortion").get<double>();
            b.entropy = s.at("entropy").get<double>();
            b.utilization = vector_from(s.at("utilization"), "utilization");
            b.kkt_residual = s.at("kkt_residual").get<double>();
            b.flow_steps = s.at("flow_steps").get<int>();
            b.wall_time_seconds = s.at("wall_time_seconds").get<double>();
            r.per_beta.push_back(std::move(b));
        }
        r.final_state = state_from_json(j.at("final_state"));
        r.hardened = hard_assignment_from_json(j.at("hardened"));
        r.total_wall_time_seconds = j.at("total_wall_time_seconds").get<double>();
        return r;
    });
}

Json to_json(const OracleResult& result) {
    Json j = header("flpflow.oracle");
    j["best_assign"] = result.best_assign;
    j["best_cost"] = number_or_null(result.best_cost);
    j["best_locations"] = matrix_json(result.best_locations);
    j["feasible_count"] = result.feasible_count;
    j["enumerated_count"] = result.enumerated_count;
    return j;
}

Json instance_document(const Instance& instance, const GeneratorSpec* spec) {
    Json j = to_json(instance);
    if (spec) j["generator"] = to_json(*spec);
    return j;
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void write_json_file(const Json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw ConfigError("write to " + path + " failed");
}

}  // namespace flpflow
