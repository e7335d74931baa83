#include "flpflow/qp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

namespace flpflow {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Problem in OSQP form, l <= A x <= u, after Ruiz equilibration:
//   P_s = c D P D,  q_s = c D q,  A_s = E A D,  l_s = E l,  u_s = E u.
struct Scaled {
    int n = 0;
    int m = 0;
    bool dense = false;
    VectorXd p_diag;
    MatrixXd p_dense;
    VectorXd q;
    SpMat a;
    SparseRows a_rows;
    VectorXd l;
    VectorXd u;
    VectorXd d;
    VectorXd e;
    double c = 1.0;

    VectorXd p_times(const VectorXd& x) const {
        return dense ? VectorXd(p_dense * x) : VectorXd(p_diag.cwiseProduct(x));
    }
    bool is_eq(int r) const { return l(r) == u(r); }
};

double clamp_norm(double v) {
    if (v < 1e-4) return 1.0;
    return std::min(v, 1e4);
}

Scaled equilibrate(const QpProblem& pr, int iters) {
    Scaled s;
    s.n = pr.num_vars;
    const int me = static_cast<int>(pr.eq_matrix.rows());
    const int mi = static_cast<int>(pr.ineq_matrix.rows());
    s.m = me + mi;
    s.dense = pr.dense_hessian.has_value();
    if (s.dense) {
        s.p_dense = *pr.dense_hessian;
    } else {
        s.p_diag = pr.diag_hessian;
    }
    s.q = pr.linear_cost;

    std::vector<Triplet> t;
    t.reserve(pr.eq_matrix.nonZeros() + pr.ineq_matrix.nonZeros());
    for (int r = 0; r < me; ++r)
        for (SparseRows::InnerIterator it(pr.eq_matrix, r); it; ++it) t.emplace_back(r, it.col(), it.value());
    for (int r = 0; r < mi; ++r)
        for (SparseRows::InnerIterator it(pr.ineq_matrix, r); it; ++it)
            t.emplace_back(me + r, it.col(), it.value());
    s.a.resize(s.m, s.n);
    s.a.setFromTriplets(t.begin(), t.end());
    s.l.resize(s.m);
    s.u.resize(s.m);
    s.l.head(me) = pr.eq_rhs;
    s.u.head(me) = pr.eq_rhs;
    s.l.tail(mi).setConstant(-kInf);
    s.u.tail(mi) = pr.ineq_rhs;

    s.d = VectorXd::Ones(s.n);
    s.e = VectorXd::Ones(s.m);
    for (int it = 0; it < iters; ++it) {
        VectorXd col(s.n);
        if (s.dense) {
            col = s.p_dense.cwiseAbs().colwise().maxCoeff().transpose();
        } else {
            col = s.p_diag.cwiseAbs();
        }
        VectorXd row = VectorXd::Zero(s.m);
        for (int c = 0; c < s.a.outerSize(); ++c) {
            for (SpMat::InnerIterator a(s.a, c); a; ++a) {
                const double v = std::abs(a.value());
                col(c) = std::max(col(c), v);
                row(a.row()) = std::max(row(a.row()), v);
            }
        }
        VectorXd dt(s.n);
        VectorXd et(s.m);
        for (int j = 0; j < s.n; ++j) dt(j) = 1.0 / std::sqrt(clamp_norm(col(j)));
        for (int r = 0; r < s.m; ++r) et(r) = 1.0 / std::sqrt(clamp_norm(row(r)));

        if (s.dense) {
            s.p_dense = dt.asDiagonal() * s.p_dense * dt.asDiagonal();
        } else {
            s.p_diag = s.p_diag.cwiseProduct(dt).cwiseProduct(dt);
        }
        s.q = s.q.cwiseProduct(dt);
        s.a = et.asDiagonal() * s.a * dt.asDiagonal();
        s.d = s.d.cwiseProduct(dt);
        s.e = s.e.cwiseProduct(et);

        // cost scaling
        const double mean_col = s.dense ? s.p_dense.cwiseAbs().colwise().maxCoeff().mean()
                                        : (s.n ? s.p_diag.cwiseAbs().mean() : 0.0);
        const double gamma = 1.0 / clamp_norm(std::max(mean_col, inf_norm(s.q)));
        if (s.dense) {
            s.p_dense *= gamma;
        } else {
            s.p_diag *= gamma;
        }
        s.q *= gamma;
        s.c *= gamma;
    }
    for (int r = 0; r < s.m; ++r) {
        if (std::isfinite(s.l(r))) s.l(r) *= s.e(r);
        if (std::isfinite(s.u(r))) s.u(r) *= s.e(r);
    }
    s.a.makeCompressed();
    s.a_rows = SparseRows(s.a);
    return s;
}

// Linear system of the ADMM x-update.
class KktBackend {
public:
    virtual ~KktBackend() = default;
    virtual bool factor(const Scaled& s, double sigma, const VectorXd& rho) = 0;
    virtual void solve(const Scaled& s, const VectorXd& rhs_x, const VectorXd& z, const VectorXd& y,
                       const VectorXd& rho, VectorXd& xt, VectorXd& zt) = 0;
};

// Quasi-definite system [P + sigma I, A'; A, -diag(1/rho)] with a sparse LDL'.
class SparseKkt final : public KktBackend {
public:
    bool factor(const Scaled& s, double sigma, const VectorXd& rho) override {
        std::vector<Triplet> t;
        t.reserve(static_cast<std::size_t>(s.n + s.m) + s.a.nonZeros());
        for (int j = 0; j < s.n; ++j) t.emplace_back(j, j, s.p_diag(j) + sigma);
        for (int c = 0; c < s.a.outerSize(); ++c)
            for (SpMat::InnerIterator it(s.a, c); it; ++it) t.emplace_back(s.n + it.row(), c, it.value());
        for (int r = 0; r < s.m; ++r) t.emplace_back(s.n + r, s.n + r, -1.0 / rho(r));
        kkt_.resize(s.n + s.m, s.n + s.m);
        kkt_.setFromTriplets(t.begin(), t.end());
        if (!analyzed_) {
            ldlt_.analyzePattern(kkt_);
            analyzed_ = true;
        }
        ldlt_.factorize(kkt_);
        return ldlt_.info() == Eigen::Success;
    }

    void solve(const Scaled& s, const VectorXd& rhs_x, const VectorXd& z, const VectorXd& y,
               const VectorXd& rho, VectorXd& xt, VectorXd& zt) override {
        VectorXd rhs(s.n + s.m);
        rhs.head(s.n) = rhs_x;
        rhs.tail(s.m) = z - y.cwiseQuotient(rho);
        const VectorXd sol = ldlt_.solve(rhs);
        xt = sol.head(s.n);
        zt = z + (sol.tail(s.m) - y).cwiseQuotient(rho);
    }

private:
    SpMat kkt_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
    bool analyzed_ = false;
};

// Reduced system P + sigma I + A' diag(rho) A, dense Cholesky.
class DenseKkt final : public KktBackend {
public:
    bool factor(const Scaled& s, double sigma, const VectorXd& rho) override {
        const SpMat atra = SpMat(s.a.transpose()) * rho.asDiagonal() * s.a;
        MatrixXd k = s.p_dense;
        k.diagonal().array() += sigma;
        k += MatrixXd(atra);
        llt_.compute(k);
        return llt_.info() == Eigen::Success;
    }

    void solve(const Scaled& s, const VectorXd& rhs_x, const VectorXd& z, const VectorXd& y,
               const VectorXd& rho, VectorXd& xt, VectorXd& zt) override {
        const VectorXd rhs = rhs_x + s.a.transpose() * (rho.cwiseProduct(z) - y);
        xt = llt_.solve(rhs);
        zt = s.a * xt;
    }

private:
    Eigen::LLT<MatrixXd> llt_;
};

struct Residuals {
    double prim = 0.0;
    double dual = 0.0;
    double eps_prim = 0.0;
    double eps_dual = 0.0;
    // normalizers for the adaptive step parameter
    double prim_scale = 0.0;
    double dual_scale = 0.0;

    bool converged() const { return prim <= eps_prim && dual <= eps_dual; }
};

Residuals residuals(const Scaled& s, const QpSettings& cfg, const VectorXd& x, const VectorXd& z,
                    const VectorXd& y) {
    const VectorXd ax = s.a * x;
    const VectorXd px = s.p_times(x);
    const VectorXd aty = s.a.transpose() * y;
    const VectorXd e_inv = s.e.cwiseInverse();
    const VectorXd d_inv = s.d.cwiseInverse();
    Residuals r;
    r.prim = inf_norm((ax - z).cwiseProduct(e_inv));
    r.dual = inf_norm((px + s.q + aty).cwiseProduct(d_inv)) / s.c;
    r.prim_scale = std::max(inf_norm(ax.cwiseProduct(e_inv)), inf_norm(z.cwiseProduct(e_inv)));
    r.dual_scale = std::max({inf_norm(px.cwiseProduct(d_inv)), inf_norm(aty.cwiseProduct(d_inv)),
                             inf_norm(s.q.cwiseProduct(d_inv))}) /
                   s.c;
    r.eps_prim = cfg.eps_abs + cfg.eps_rel * r.prim_scale;
    r.eps_dual = cfg.eps_abs + cfg.eps_rel * r.dual_scale;
    return r;
}

VectorXd project(const VectorXd& v, const VectorXd& l, const VectorXd& u) {
    return v.cwiseMax(l).cwiseMin(u);
}

bool primal_infeasible(const Scaled& s, const VectorXd& dy_scaled, double eps) {
    // certificate in unscaled terms: A' dy = 0, u'dy+ + l'dy- < 0
    const VectorXd dy = s.e.cwiseProduct(dy_scaled);
    const double norm = inf_norm(dy);
    if (norm < 1e-30) return false;
    const VectorXd atdy = s.d.cwiseInverse().cwiseProduct(s.a.transpose() * dy_scaled);
    if (inf_norm(atdy) > eps * norm) return false;
    double support = 0.0;
    for (int r = 0; r < s.m; ++r) {
        const double ul = std::isfinite(s.u(r)) ? s.u(r) / s.e(r) : kInf;
        const double ll = std::isfinite(s.l(r)) ? s.l(r) / s.e(r) : -kInf;
        if (dy(r) > 0) {
            if (!std::isfinite(ul)) {
                if (dy(r) > eps * norm) return false;
                continue;
            }
            support += ul * dy(r);
        } else if (dy(r) < 0) {
            if (!std::isfinite(ll)) {
                if (-dy(r) > eps * norm) return false;
                continue;
            }
            support += ll * dy(r);
        }
    }
    return support < -eps * norm;
}

// Active-set refinement: solve the equality-constrained QP on the rows the
// ADMM iterate identifies as active. Rows touching a single variable fix that
// variable directly; the rest go into a regularized KKT system refined
// against the exact one.
bool polish(const Scaled& s, const VectorXd& z_in, const VectorXd& y_in,
            VectorXd& x_out, VectorXd& z_out, VectorXd& y_out) {
    constexpr double delta = 1e-9;
    const int n = s.n;
    std::vector<int> active_rows;
    std::vector<double> bound;
    for (int r = 0; r < s.m; ++r) {
        if (s.is_eq(r)) {
            active_rows.push_back(r);
            bound.push_back(s.l(r));
        } else if (std::isfinite(s.l(r)) && z_in(r) - s.l(r) < -y_in(r)) {
            active_rows.push_back(r);
            bound.push_back(s.l(r));
        } else if (std::isfinite(s.u(r)) && s.u(r) - z_in(r) < y_in(r)) {
            active_rows.push_back(r);
            bound.push_back(s.u(r));
        }
    }

    std::vector<int> fixed_row(n, -1);
    VectorXd x = VectorXd::Zero(n);
    std::vector<int> general;  // indices into active_rows
    for (std::size_t a = 0; a < active_rows.size(); ++a) {
        const int r = active_rows[a];
        int nnz = 0;
        int col = -1;
        double val = 0.0;
        for (SparseRows::InnerIterator it(s.a_rows, r); it; ++it) {
            if (it.value() != 0.0) {
                ++nnz;
                col = static_cast<int>(it.col());
                val = it.value();
            }
        }
        if (nnz == 0) continue;
        if (nnz == 1 && fixed_row[col] < 0) {
            fixed_row[col] = r;
            x(col) = bound[a] / val;
        } else {
            general.push_back(static_cast<int>(a));
        }
    }

    std::vector<int> free_index(n, -1);
    std::vector<int> free_vars;
    for (int j = 0; j < n; ++j) {
        if (fixed_row[j] < 0) {
            free_index[j] = static_cast<int>(free_vars.size());
            free_vars.push_back(j);
        }
    }
    const int nf = static_cast<int>(free_vars.size());
    const int ng = static_cast<int>(general.size());

    // rhs: [-q_F - P_{F,fixed} x_fixed ; b_R - A_{R,fixed} x_fixed]
    const VectorXd px_fixed = s.p_times(x);
    VectorXd rhs(nf + ng);
    for (int f = 0; f < nf; ++f) rhs(f) = -s.q(free_vars[f]) - px_fixed(free_vars[f]);
    std::vector<Triplet> a_free;  // (general row, free col, value)
    for (int g = 0; g < ng; ++g) {
        const int r = active_rows[general[g]];
        double acc = bound[general[g]];
        for (SparseRows::InnerIterator it(s.a_rows, r); it; ++it) {
            const int c = static_cast<int>(it.col());
            if (free_index[c] >= 0) {
                a_free.emplace_back(g, free_index[c], it.value());
            } else {
                acc -= it.value() * x(c);
            }
        }
        rhs(nf + g) = acc;
    }

    VectorXd sol;
    auto refine = [&](auto&& solve_reg, auto&& apply_exact) {
        sol = solve_reg(rhs);
        for (int k = 0; k < 5; ++k) {
            const VectorXd res = rhs - apply_exact(sol);
            sol += solve_reg(res);
        }
    };

    if (s.dense) {
        MatrixXd k = MatrixXd::Zero(nf + ng, nf + ng);
        for (int a = 0; a < nf; ++a)
            for (int b = 0; b < nf; ++b) k(a, b) = s.p_dense(free_vars[a], free_vars[b]);
        for (const Triplet& t : a_free) {
            k(nf + t.row(), t.col()) = t.value();
            k(t.col(), nf + t.row()) = t.value();
        }
        MatrixXd k_reg = k;
        k_reg.diagonal().head(nf).array() += delta;
        k_reg.diagonal().tail(ng).array() -= delta;
        Eigen::LDLT<MatrixXd> ldlt(k_reg);
        if (ldlt.info() != Eigen::Success) return false;
        refine([&](const VectorXd& r) { return VectorXd(ldlt.solve(r)); },
               [&](const VectorXd& v) { return VectorXd(k * v); });
    } else {
        std::vector<Triplet> t;
        t.reserve(nf + ng + a_free.size());
        for (int f = 0; f < nf; ++f) t.emplace_back(f, f, s.p_diag(free_vars[f]) + delta);
        for (const Triplet& a : a_free) t.emplace_back(nf + a.row(), a.col(), a.value());
        for (int g = 0; g < ng; ++g) t.emplace_back(nf + g, nf + g, -delta);
        SpMat k_reg(nf + ng, nf + ng);
        k_reg.setFromTriplets(t.begin(), t.end());
        Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(k_reg);
        if (ldlt.info() != Eigen::Success) return false;
        const SpMat full = k_reg.selfadjointView<Eigen::Lower>();
        refine([&](const VectorXd& r) { return VectorXd(ldlt.solve(r)); },
               [&](const VectorXd& v) {
                   VectorXd out = full * v;
                   out.head(nf) -= delta * v.head(nf);
                   out.tail(ng) += delta * v.tail(ng);
                   return out;
               });
    }
    if (!sol.allFinite()) return false;

    for (int f = 0; f < nf; ++f) x(free_vars[f]) = sol(f);
    VectorXd y = VectorXd::Zero(s.m);
    for (int g = 0; g < ng; ++g) y(active_rows[general[g]]) = sol(nf + g);

    // multipliers of the singleton rows from stationarity in their variable
    const VectorXd grad = s.p_times(x) + s.q + s.a.transpose() * y;
    for (int j = 0; j < n; ++j) {
        const int r = fixed_row[j];
        if (r < 0) continue;
        double coef = 0.0;
        for (SparseRows::InnerIterator it(s.a_rows, r); it; ++it)
            if (it.col() == j) coef = it.value();
        y(r) = -grad(j) / coef;
    }

    // dual sign: rows with l = -inf need y >= 0, rows with u = +inf need y <= 0
    const double y_scale = std::max(1.0, inf_norm(y));
    for (int r = 0; r < s.m; ++r) {
        if (s.is_eq(r)) continue;
        if (!std::isfinite(s.l(r)) && y(r) < 0) {
            if (y(r) < -1e-9 * y_scale) return false;
            y(r) = 0.0;
        }
        if (!std::isfinite(s.u(r)) && y(r) > 0) {
            if (y(r) > 1e-9 * y_scale) return false;
            y(r) = 0.0;
        }
    }
    x_out = x;
    z_out = project(s.a * x, s.l, s.u);
    y_out = y;
    return true;
}

QpSolution finish(const QpProblem& pr, const Scaled& s, const VectorXd& x, const VectorXd& y,
                  const Residuals& res, QpStatus status, int iters,
                  std::chrono::steady_clock::time_point start) {
    QpSolution out;
    out.primal = s.d.cwiseProduct(x);
    const VectorXd yu = s.e.cwiseProduct(y) / s.c;
    const int me = static_cast<int>(pr.eq_matrix.rows());
    out.dual_eq = yu.head(me);
    out.dual_ineq = yu.tail(s.m - me);
    out.objective = pr.objective(out.primal);
    out.status = status;
    out.iterations = iters;
    out.primal_residual = res.prim;
    out.dual_residual = res.dual;
    out.solve_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace

const char* to_string(QpStatus status) {
    switch (status) {
        case QpStatus::Solved: return "solved";
        case QpStatus::MaxIters: return "max_iters";
        case QpStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

void QpProblem::check() const {
    if (num_vars <= 0) throw ShapeError("QP needs at least one variable");
    if (linear_cost.size() != num_vars) throw ShapeError("QP linear cost has wrong size");
    if (dense_hessian) {
        if (dense_hessian->rows() != num_vars || dense_hessian->cols() != num_vars)
            throw ShapeError("QP dense Hessian has wrong size");
    } else {
        if (diag_hessian.size() != num_vars) throw ShapeError("QP diagonal Hessian has wrong size");
        if ((diag_hessian.array() <= 0).any()) throw ShapeError("QP diagonal Hessian must be positive");
    }
    if (eq_matrix.rows() != eq_rhs.size() || (eq_matrix.rows() > 0 && eq_matrix.cols() != num_vars))
        throw ShapeError("QP equality system has inconsistent dimensions");
    if (ineq_matrix.rows() != ineq_rhs.size() || (ineq_matrix.rows() > 0 && ineq_matrix.cols() != num_vars))
        throw ShapeError("QP inequality system has inconsistent dimensions");
}

VectorXd QpProblem::hessian_times(const VectorXd& w) const {
    return dense_hessian ? VectorXd(*dense_hessian * w) : VectorXd(diag_hessian.cwiseProduct(w));
}

double QpProblem::objective(const VectorXd& w) const {
    return 0.5 * w.dot(hessian_times(w)) + linear_cost.dot(w);
}

double constraint_violation(const QpProblem& pr, const VectorXd& w) {
    double worst = 0.0;
    if (pr.eq_matrix.rows() > 0) worst = inf_norm(pr.eq_matrix * w - pr.eq_rhs);
    if (pr.ineq_matrix.rows() > 0) {
        const VectorXd slack = pr.ineq_matrix * w - pr.ineq_rhs;
        worst = std::max(worst, std::max(0.0, slack.maxCoeff()));
    }
    return worst;
}

QpSolution solve_qp(const QpProblem& pr, const QpSolution* warm, const QpSettings& cfg) {
    const auto start = std::chrono::steady_clock::now();
    pr.check();
    const Scaled s = equilibrate(pr, cfg.scaling_iters);
    const int n = s.n;
    const int m = s.m;

    if (m == 0) {
        VectorXd x;
        if (s.dense) {
            MatrixXd p = s.p_dense;
            p.diagonal().array() += cfg.sigma;
            x = -p.ldlt().solve(s.q);
        } else {
            x = -s.q.cwiseQuotient(s.p_diag);
        }
        const Residuals res = residuals(s, cfg, x, VectorXd(), VectorXd());
        return finish(pr, s, x, VectorXd(), res, QpStatus::Solved, 0, start);
    }

    auto rho_vector = [&](double rho) {
        VectorXd r(m);
        for (int i = 0; i < m; ++i) {
            if (s.is_eq(i)) {
                r(i) = 1e3 * rho;
            } else if (!std::isfinite(s.l(i)) && !std::isfinite(s.u(i))) {
                r(i) = 1e-6;
            } else {
                r(i) = rho;
            }
        }
        return r;
    };
    double rho = cfg.rho;
    VectorXd rho_vec = rho_vector(rho);

    std::unique_ptr<KktBackend> kkt;
    if (s.dense) {
        kkt = std::make_unique<DenseKkt>();
    } else {
        kkt = std::make_unique<SparseKkt>();
    }
    if (!kkt->factor(s, cfg.sigma, rho_vec)) throw QpFailure("KKT factorization failed");

    VectorXd x = VectorXd::Zero(n);
    VectorXd y = VectorXd::Zero(m);
    if (warm && warm->primal.size() == n && warm->dual_eq.size() + warm->dual_ineq.size() == m) {
        x = warm->primal.cwiseQuotient(s.d);
        VectorXd yu(m);
        yu << warm->dual_eq, warm->dual_ineq;
        y = s.c * yu.cwiseQuotient(s.e);
    }
    VectorXd z = project(s.a * x, s.l, s.u);

    VectorXd xt(n);
    VectorXd zt(m);
    VectorXd y_prev = y;
    Residuals res;
    double polish_trigger = 1e4;
    int iter = 0;
    auto try_polish = [&]() -> std::optional<QpSolution> {
        VectorXd xp;
        VectorXd zp;
        VectorXd yp;
        if (!polish(s, z, y, xp, zp, yp)) return std::nullopt;
        const Residuals pres = residuals(s, cfg, xp, zp, yp);
        if (!pres.converged()) return std::nullopt;
        QpSolution out = finish(pr, s, xp, yp, pres, QpStatus::Solved, iter, start);
        out.polished = true;
        return out;
    };
    for (iter = 1; iter <= cfg.max_iter; ++iter) {
        y_prev = y;
        const VectorXd z_prev = z;
        kkt->solve(s, cfg.sigma * x - s.q, z, y, rho_vec, xt, zt);
        x = cfg.relaxation * xt + (1.0 - cfg.relaxation) * x;
        const VectorXd z_relaxed = cfg.relaxation * zt + (1.0 - cfg.relaxation) * z_prev;
        z = project(z_relaxed + y.cwiseQuotient(rho_vec), s.l, s.u);
        y += rho_vec.cwiseProduct(z_relaxed - z);

        const bool check = iter == 1 || iter % cfg.check_interval == 0 || iter == cfg.max_iter;
        if (!check) continue;
        res = residuals(s, cfg, x, z, y);
        if (res.converged()) {
            if (cfg.polish) {
                if (auto out = try_polish()) return std::move(*out);
            }
            return finish(pr, s, x, y, res, QpStatus::Solved, iter, start);
        }

        if (primal_infeasible(s, y - y_prev, cfg.eps_infeasible)) {
            return finish(pr, s, x, y, res, QpStatus::Infeasible, iter, start);
        }

        if (cfg.polish && res.prim <= polish_trigger * res.eps_prim && res.dual <= polish_trigger * res.eps_dual) {
            if (auto out = try_polish()) return std::move(*out);
            polish_trigger = std::min(polish_trigger, std::max(res.prim / res.eps_prim, res.dual / res.eps_dual)) * 0.1;
        }

        if (cfg.adaptive_rho && iter % cfg.adaptive_rho_interval == 0) {
            const double pn = res.prim / std::max(res.prim_scale, 1e-10);
            const double dn = res.dual / std::max(res.dual_scale, 1e-10);
            if (pn > 0 && dn > 0) {
                const double rho_new = std::clamp(rho * std::sqrt(pn / dn), 1e-6, 1e6);
                if (rho_new > 5.0 * rho || rho_new < 0.2 * rho) {
                    rho = rho_new;
                    rho_vec = rho_vector(rho);
                    if (!kkt->factor(s, cfg.sigma, rho_vec)) throw QpFailure("KKT refactorization failed");
                }
            }
        }
    }
    return finish(pr, s, x, y, res, QpStatus::MaxIters, cfg.max_iter, start);
}

void dump_qp(const QpProblem& pr, std::ostream& os) {
    const int n = pr.num_vars;
    os.precision(17);
    os << "qp " << n << ' ' << pr.eq_matrix.rows() << ' ' << pr.ineq_matrix.rows() << '\n';
    os << "hessian\n";
    const MatrixXd h = pr.dense_hessian ? *pr.dense_hessian : MatrixXd(pr.diag_hessian.asDiagonal());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) os << (j ? " " : "") << h(i, j);
        os << '\n';
    }
    os << "linear\n";
    for (int j = 0; j < n; ++j) os << (j ? " " : "") << pr.linear_cost(j);
    os << '\n';
    auto rows = [&](const char* tag, const SparseRows& a, const VectorXd& b) {
        os << tag << '\n';
        const MatrixXd dense = MatrixXd(a);
        for (int r = 0; r < dense.rows(); ++r) {
            for (int j = 0; j < n; ++j) os << dense(r, j) << ' ';
            os << "| " << b(r) << '\n';
        }
    };
    rows("eq", pr.eq_matrix, pr.eq_rhs);
    rows("ineq", pr.ineq_matrix, pr.ineq_rhs);
}

}  // namespace flpflow
