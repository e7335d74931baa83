#include "flpflow/qp.hpp"

#include <vector>

namespace flpflow {

namespace {

using Triplet = Eigen::Triplet<double>;
using SparseCols = Eigen::SparseMatrix<double>;

VectorXd stacked_gradient(const ControlLayout& lay, const EnergyEval& energy) {
    return lay.stack(energy.grad_assoc, energy.grad_locations);
}

}  // namespace

MatrixXd ControlLayout::assoc_block(const VectorXd& w) const {
    MatrixXd out(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out(i, j) = w(assoc(i, j));
    return out;
}

MatrixXd ControlLayout::location_block(const VectorXd& w) const {
    MatrixXd out(m, d);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < d; ++k) out(j, k) = w(location(j, k));
    return out;
}

VectorXd ControlLayout::stack(const MatrixXd& assoc_rate, const MatrixXd& location_rate) const {
    VectorXd w(num_controls());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) w(assoc(i, j)) = assoc_rate(i, j);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < d; ++k) w(location(j, k)) = location_rate(j, k);
    return w;
}

QpProblem build_cbf_qp(const Instance& instance, const State&, const EnergyEval& energy,
                       const BarrierEval& barriers, const DerivativeRows& rows, const FlowConfig& config,
                       CbfQpRows* row_info) {
    const ControlLayout lay = ControlLayout::of(instance);
    const int n = lay.n;
    const int m = lay.m;
    const int nv = lay.num_controls() + 1;

    QpProblem qp;
    qp.num_vars = nv;
    qp.diag_hessian = VectorXd::Constant(nv, 2.0);
    qp.diag_hessian(lay.delta()) = 2.0 * config.q1;
    qp.linear_cost = VectorXd::Zero(nv);

    // phi_dot_i = sum_j v_ij = 0
    std::vector<Triplet> eq;
    eq.reserve(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) eq.emplace_back(i, lay.assoc(i, j), 1.0);
    qp.eq_matrix.resize(n, nv);
    qp.eq_matrix.setFromTriplets(eq.begin(), eq.end());
    qp.eq_rhs = VectorXd::Zero(n);

    std::vector<int> xi_kept;
    xi_kept.reserve(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            if (config.prune_inactive_xi) {
                // Only the midpoint p = 1/2 has a vanishing coefficient, and
                // there xi_dot = 0 >= -alpha xi holds for every control.
                constexpr double margin = 1e-6;
                if (barriers.xi(i, j) >= 0.25 * (1.0 - margin) && std::abs(rows.xi(i, j)) < 1e-12) continue;
            }
            xi_kept.push_back(lay.assoc(i, j));
        }
    }

    const int n_ineq = 1 + 2 * m + static_cast<int>(xi_kept.size());
    std::vector<Triplet> in;
    in.reserve(static_cast<std::size_t>(nv) + 3 * static_cast<std::size_t>(n) * m);
    qp.ineq_rhs.resize(n_ineq);

    // CLF: grad F~ . (v, u) - delta <= -mu F~
    int row = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) in.emplace_back(row, lay.assoc(i, j), rows.clf_assoc(i, j));
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < lay.d; ++k) in.emplace_back(row, lay.location(j, k), rows.clf_locations(j, k));
    in.emplace_back(row, lay.delta(), -1.0);
    qp.ineq_rhs(row) = -config.mu * energy.free_energy_shifted;
    ++row;

    // psi_c_dot = -sum_i p_i c_ij v_ij >= -alpha psi_c
    for (int j = 0; j < m; ++j, ++row) {
        for (int i = 0; i < n; ++i) in.emplace_back(row, lay.assoc(i, j), rows.capacity(i, j));
        qp.ineq_rhs(row) = config.alpha_psi_c * barriers.psi_c(j);
    }
    // psi_l_dot = +sum_i p_i c_ij v_ij >= -alpha psi_l
    for (int j = 0; j < m; ++j, ++row) {
        for (int i = 0; i < n; ++i) in.emplace_back(row, lay.assoc(i, j), -rows.capacity(i, j));
        qp.ineq_rhs(row) = config.alpha_psi_l * barriers.psi_l(j);
    }
    // xi_dot = (1 - 2p) v >= -alpha (xi - floor)
    for (const int flat : xi_kept) {
        const int i = flat / m;
        const int j = flat % m;
        in.emplace_back(row, flat, -rows.xi(i, j));
        qp.ineq_rhs(row) = config.alpha_xi * (barriers.xi(i, j) - kXiFloor);
        ++row;
    }
    qp.ineq_matrix.resize(n_ineq, nv);
    qp.ineq_matrix.setFromTriplets(in.begin(), in.end());

    if (row_info) row_info->xi_entries = std::move(xi_kept);
    return qp;
}

VectorXd cbf_trivial_point(const Instance& instance, const EnergyEval& energy, const FlowConfig& config) {
    const ControlLayout lay = ControlLayout::of(instance);
    VectorXd w = VectorXd::Zero(lay.num_controls() + 1);
    w(lay.delta()) = config.mu * energy.free_energy_shifted;
    return w;
}

namespace {

// Jacobians of the inequality constraints h = (psi_c, psi_l, xi) and the
// equality constraints g = phi with respect to the stacked state.
struct ConstraintJacobians {
    SparseCols jh;
    SparseCols jg;
    VectorXd h;
    VectorXd g;
};

ConstraintJacobians constraint_jacobians(const Instance& instance, const State& state,
                                         const BarrierEval& barriers, const DerivativeRows& rows) {
    const ControlLayout lay = ControlLayout::of(instance);
    const int n = lay.n;
    const int m = lay.m;
    const int k = 2 * m + n * m;
    const int b = lay.num_controls();

    ConstraintJacobians out;
    std::vector<Triplet> th;
    th.reserve(3 * static_cast<std::size_t>(n) * m);
    out.h.resize(k);
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < n; ++i) {
            th.emplace_back(j, lay.assoc(i, j), -rows.capacity(i, j));
            th.emplace_back(m + j, lay.assoc(i, j), rows.capacity(i, j));
        }
        out.h(j) = barriers.psi_c(j);
        out.h(m + j) = barriers.psi_l(j);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const int r = 2 * m + lay.assoc(i, j);
            th.emplace_back(r, lay.assoc(i, j), 1.0 - 2.0 * state.assoc(i, j));
            out.h(r) = barriers.xi(i, j) - kXiFloor;
        }
    }
    out.jh.resize(k, b);
    out.jh.setFromTriplets(th.begin(), th.end());

    std::vector<Triplet> tg;
    tg.reserve(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) tg.emplace_back(i, lay.assoc(i, j), 1.0);
    out.jg.resize(n, b);
    out.jg.setFromTriplets(tg.begin(), tg.end());
    out.g = barriers.phi;
    return out;
}

}  // namespace

QpProblem build_sgf_qp(const Instance& instance, const State& state, const EnergyEval& energy,
                       const BarrierEval& barriers, const DerivativeRows& rows, double alpha) {
    const ControlLayout lay = ControlLayout::of(instance);
    const ConstraintJacobians jac = constraint_jacobians(instance, state, barriers, rows);
    const int k = static_cast<int>(jac.jh.rows());
    const int n_eq = static_cast<int>(jac.jg.rows());
    const int nv = k + n_eq;
    const VectorXd grad = stacked_gradient(lay, energy);

    // G = [Jh; Jg] so that the multiplier correction is G' (u, v).
    SparseCols g_stack(nv, lay.num_controls());
    {
        std::vector<Triplet> t;
        t.reserve(jac.jh.nonZeros() + jac.jg.nonZeros());
        for (int c = 0; c < jac.jh.outerSize(); ++c)
            for (SparseCols::InnerIterator it(jac.jh, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
        for (int c = 0; c < jac.jg.outerSize(); ++c)
            for (SparseCols::InnerIterator it(jac.jg, c); it; ++it)
                t.emplace_back(k + it.row(), it.col(), it.value());
        g_stack.setFromTriplets(t.begin(), t.end());
    }
    const SparseCols gram = g_stack * SparseCols(g_stack.transpose());

    QpProblem qp;
    qp.num_vars = nv;
    qp.diag_hessian = VectorXd::Ones(nv);
    qp.dense_hessian = 2.0 * MatrixXd(gram);
    qp.linear_cost = VectorXd::Zero(nv);

    // Tangency to the equality manifold: Jg zdot = -alpha g, zdot = -grad - G' w.
    const SparseCols jg_gt = jac.jg * SparseCols(g_stack.transpose());
    qp.eq_matrix = SparseRows(jg_gt);
    qp.eq_rhs = alpha * jac.g - jac.jg * grad;

    // Barrier condition Jh zdot >= -alpha h, then u <= 0.
    const SparseCols jh_gt = jac.jh * SparseCols(g_stack.transpose());
    std::vector<Triplet> t;
    t.reserve(jh_gt.nonZeros() + k);
    for (int c = 0; c < jh_gt.outerSize(); ++c)
        for (SparseCols::InnerIterator it(jh_gt, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (int r = 0; r < k; ++r) t.emplace_back(k + r, r, 1.0);
    qp.ineq_matrix.resize(2 * k, nv);
    qp.ineq_matrix.setFromTriplets(t.begin(), t.end());
    qp.ineq_rhs.resize(2 * k);
    qp.ineq_rhs.head(k) = alpha * jac.h - jac.jh * grad;
    qp.ineq_rhs.tail(k).setZero();
    return qp;
}

VectorXd sgf_field(const Instance& instance, const State& state, const EnergyEval& energy,
                   const VectorXd& multipliers) {
    const ControlLayout lay = ControlLayout::of(instance);
    const int n = lay.n;
    const int m = lay.m;
    const int k = 2 * m + n * m;
    if (multipliers.size() != k + n) throw ShapeError("SGF multipliers must have 2M + NM + N entries");

    // -grad f - Jh' u - Jg' v, written out entrywise.
    MatrixXd assoc_rate = -energy.grad_assoc;
    for (int i = 0; i < n; ++i) {
        const double v = multipliers(k + i);
        for (int j = 0; j < m; ++j) {
            const double pc = instance.weights(i) * instance.consumption(i, j);
            const double u_c = multipliers(j);
            const double u_l = multipliers(m + j);
            const double u_xi = multipliers(2 * m + lay.assoc(i, j));
            assoc_rate(i, j) -= -pc * u_c + pc * u_l + (1.0 - 2.0 * state.assoc(i, j)) * u_xi + v;
        }
    }
    return lay.stack(assoc_rate, -energy.grad_locations);
}

}  // namespace flpflow
