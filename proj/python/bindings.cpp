#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flpflow/anneal.hpp"
#include "flpflow/baselines.hpp"
#include "flpflow/energy.hpp"
#include "flpflow/generator.hpp"
#include "flpflow/io.hpp"
#include "flpflow/oracle.hpp"

namespace py = pybind11;
using namespace flpflow;

namespace {

FlowMethod parse_method(const std::string& name) {
    if (name == "cbf") return FlowMethod::Cbf;
    if (name == "sgf") return FlowMethod::Sgf;
    throw ConfigError("method must be 'cbf' or 'sgf', got '" + name + "'");
}

Instance make_instance(const MatrixXd& points, const VectorXd& weights, int facility_count,
                       const MatrixXd& consumption, const VectorXd& lower, const VectorXd& upper) {
    Instance inst;
    inst.points = points;
    inst.weights = weights;
    inst.facility_count = facility_count;
    inst.consumption = consumption;
    inst.lower_bounds = lower;
    inst.upper_bounds = upper;
    validate_instance(inst);
    return inst;
}

}  // namespace

PYBIND11_MODULE(_flpflow, m) {
    m.doc() = "Capacitated facility location by annealed control-barrier flows";

    auto base = py::register_exception<FlpError>(m, "FlpError", PyExc_RuntimeError);
    py::register_exception<WeightSumError>(m, "WeightSumError", base.ptr());
    py::register_exception<BoundOrderError>(m, "BoundOrderError", base.ptr());
    py::register_exception<CapacityInfeasible>(m, "CapacityInfeasible", base.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<IndexOutOfRange>(m, "IndexOutOfRange", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<ZeroMassColumn>(m, "ZeroMassColumn", base.ptr());
    py::register_exception<InfeasibleStart>(m, "InfeasibleStart", base.ptr());
    py::register_exception<QpFailure>(m, "QpFailure", base.ptr());
    py::register_exception<RepairFailed>(m, "RepairFailed", base.ptr());
    py::register_exception<NoFeasibleFacility>(m, "NoFeasibleFacility", base.ptr());
    py::register_exception<TooLarge>(m, "TooLarge", base.ptr());
    py::register_exception<StepTooLarge>(m, "StepTooLarge", base.ptr());
    py::register_exception<SpecError>(m, "SpecError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<NonConvergence>(m, "NonConvergence", base.ptr());

    py::class_<Instance>(m, "Instance")
        .def(py::init(&make_instance), py::arg("points"), py::arg("weights"), py::arg("facility_count"),
             py::arg("consumption"), py::arg("lower_bounds"), py::arg("upper_bounds"))
        .def_readonly("points", &Instance::points)
        .def_readonly("weights", &Instance::weights)
        .def_readonly("facility_count", &Instance::facility_count)
        .def_readonly("consumption", &Instance::consumption)
        .def_readonly("lower_bounds", &Instance::lower_bounds)
        .def_readonly("upper_bounds", &Instance::upper_bounds)
        .def_property_readonly("num_points", &Instance::num_points)
        .def_property_readonly("dim", &Instance::dim)
        .def("distance_matrix", &Instance::distance_matrix, py::arg("locations"))
        .def("to_json", [](const Instance& i) { return to_json(i).dump(); })
        .def_static("from_json", [](const std::string& s) { return instance_from_json(Json::parse(s)); });

    py::class_<State>(m, "State")
        .def(py::init([](const MatrixXd& assoc, const MatrixXd& locations) { return State{assoc, locations}; }),
             py::arg("assoc"), py::arg("locations"))
        .def_readwrite("assoc", &State::assoc)
        .def_readwrite("locations", &State::locations);

    py::class_<HardAssignment>(m, "HardAssignment")
        .def_readonly("assign", &HardAssignment::assign)
        .def_readonly("cost", &HardAssignment::cost)
        .def_readonly("utilization", &HardAssignment::utilization)
        .def_readonly("lower_violations", &HardAssignment::lower_violations);

    py::class_<FlowConfig>(m, "FlowConfig")
        .def(py::init<>())
        .def_readwrite("mu", &FlowConfig::mu)
        .def_readwrite("q1", &FlowConfig::q1)
        .def_readwrite("q2", &FlowConfig::q2)
        .def_readwrite("alpha_psi_c", &FlowConfig::alpha_psi_c)
        .def_readwrite("alpha_psi_l", &FlowConfig::alpha_psi_l)
        .def_readwrite("alpha_xi", &FlowConfig::alpha_xi)
        .def_readwrite("dt_init", &FlowConfig::dt_init)
        .def_readwrite("dt_min", &FlowConfig::dt_min)
        .def_readwrite("dt_max", &FlowConfig::dt_max)
        .def_readwrite("stat_tol_u", &FlowConfig::stat_tol_u)
        .def_readwrite("stat_tol_kkt", &FlowConfig::stat_tol_kkt)
        .def_readwrite("max_flow_steps", &FlowConfig::max_flow_steps)
        .def_readwrite("max_flow_seconds", &FlowConfig::max_flow_seconds)
        .def_readwrite("qp_tol", &FlowConfig::qp_tol)
        .def_readwrite("prune_inactive_xi", &FlowConfig::prune_inactive_xi)
        .def_readwrite("sgf_alpha", &FlowConfig::sgf_alpha)
        .def("validate", &FlowConfig::validate);

    py::class_<AnnealConfig>(m, "AnnealConfig")
        .def(py::init<>())
        .def_readwrite("beta0", &AnnealConfig::beta0)
        .def_readwrite("growth", &AnnealConfig::growth)
        .def_readwrite("beta_max", &AnnealConfig::beta_max)
        .def_readwrite("perturb_scale", &AnnealConfig::perturb_scale)
        .def_readwrite("flow", &AnnealConfig::flow)
        .def_readwrite("rng_seed", &AnnealConfig::rng_seed)
        .def("validate", &AnnealConfig::validate)
        .def("schedule", &AnnealConfig::schedule);

    py::class_<BetaRecord>(m, "BetaRecord")
        .def_readonly("beta", &BetaRecord::beta)
        .def_readonly("free_energy", &BetaRecord::free_energy)
        .def_readonly("distortion", &BetaRecord::distortion)
        .def_readonly("entropy", &BetaRecord::entropy)
        .def_readonly("utilization", &BetaRecord::utilization)
        .def_readonly("kkt_residual", &BetaRecord::kkt_residual)
        .def_readonly("flow_steps", &BetaRecord::flow_steps)
        .def_readonly("wall_time_seconds", &BetaRecord::wall_time_seconds);

    py::class_<SolveReport>(m, "SolveReport")
        .def_readonly("method", &SolveReport::method)
        .def_readonly("per_beta", &SolveReport::per_beta)
        .def_readonly("final_state", &SolveReport::final_state)
        .def_readonly("hardened", &SolveReport::hardened)
        .def_readonly("total_wall_time_seconds", &SolveReport::total_wall_time_seconds)
        .def(
            "to_json", [](const SolveReport& r, const AnnealConfig& c) { return to_json(r, c).dump(); },
            py::arg("config"));

    py::class_<GeneratorSpec>(m, "GeneratorSpec")
        .def(py::init<>())
        .def_readwrite("num_points", &GeneratorSpec::num_points)
        .def_readwrite("num_facilities", &GeneratorSpec::num_facilities)
        .def_readwrite("cluster_proportions", &GeneratorSpec::cluster_proportions)
        .def_readwrite("area_width", &GeneratorSpec::area_width)
        .def_readwrite("area_height", &GeneratorSpec::area_height)
        .def_readwrite("cluster_std", &GeneratorSpec::cluster_std)
        .def_readwrite("capacity_upper", &GeneratorSpec::capacity_upper)
        .def_readwrite("capacity_lower", &GeneratorSpec::capacity_lower)
        .def_readwrite("seed", &GeneratorSpec::seed);

    py::class_<OracleResult>(m, "OracleResult")
        .def_readonly("best_assign", &OracleResult::best_assign)
        .def_readonly("best_cost", &OracleResult::best_cost)
        .def_readonly("best_locations", &OracleResult::best_locations)
        .def_readonly("feasible_count", &OracleResult::feasible_count)
        .def_readonly("enumerated_count", &OracleResult::enumerated_count);

    py::class_<EnergyEval>(m, "EnergyEval")
        .def_readonly("distortion", &EnergyEval::distortion)
        .def_readonly("entropy", &EnergyEval::entropy)
        .def_readonly("free_energy_shifted", &EnergyEval::free_energy_shifted)
        .def_readonly("grad_assoc", &EnergyEval::grad_assoc)
        .def_readonly("grad_locations", &EnergyEval::grad_locations);

    m.def("generate_instance", &generate_instance, py::arg("spec"));
    m.def("evaluate_hard", &evaluate_hard, py::arg("instance"), py::arg("locations"), py::arg("assign"));
    m.def("eval_energy", &eval_energy, py::arg("instance"), py::arg("state"), py::arg("beta"));
    m.def("harden", &harden, py::arg("instance"), py::arg("state"));
    m.def("brute_force_flp", &brute_force_flp, py::arg("instance"), py::call_guard<py::gil_scoped_release>());

    m.def(
        "anneal", [](const Instance& i, const AnnealConfig& c) { return anneal(i, c); }, py::arg("instance"),
        py::arg("config") = AnnealConfig{}, py::call_guard<py::gil_scoped_release>());
    m.def(
        "sgf_solve", [](const Instance& i, const AnnealConfig& c) { return sgf_solve(i, c); }, py::arg("instance"),
        py::arg("config") = AnnealConfig{}, py::call_guard<py::gil_scoped_release>());
    m.def("da_unconstrained", &da_unconstrained, py::arg("instance"), py::arg("config") = AnnealConfig{},
          py::call_guard<py::gil_scoped_release>());
    m.def(
        "solve_at_beta",
        [](const Instance& i, const AnnealConfig& c, double beta, const std::string& method) {
            const FlowMethod fm = parse_method(method);
            py::gil_scoped_release release;
            return solve_at_beta(i, c, beta, fm);
        },
        py::arg("instance"), py::arg("config"), py::arg("beta"), py::arg("method") = "cbf");
}
