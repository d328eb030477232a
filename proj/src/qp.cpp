#include "qp.hpp"

#include <algorithm>
#include <cmath>

namespace ebal {

namespace {

void validate(const QuadraticProgram& prob) {
    Eigen::Index n = prob.P.rows();
    if (prob.P.cols() != n) throw DataError("quadratic term must be square");
    if (prob.q.size() != n) throw DataError("linear term length mismatch");
    double scale = prob.P.cwiseAbs().maxCoeff();
    if ((prob.P - prob.P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale))
        throw DataError("quadratic term must be symmetric");
    std::vector<int> seen(n, 0);
    for (const auto& g : prob.groups) {
        if (!(g.sum > 0.0)) throw DataError("group constraint sum must be positive");
        for (int i : g.idx) {
            if (i < 0 || i >= n) throw DataError("group index out of range");
            seen[i]++;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i)
        if (seen[i] != 1) throw DataError("every variable must belong to exactly one group");
}

int group_of(const QuadraticProgram& prob, std::vector<int>& out) {
    out.assign(prob.P.rows(), -1);
    for (size_t g = 0; g < prob.groups.size(); ++g)
        for (int i : prob.groups[g].idx) out[i] = (int)g;
    return (int)prob.groups.size();
}

// exact solve restricted to the free set; returns false when the resulting
// point fails the optimality checks
bool polish(const QuadraticProgram& prob, const Eigen::VectorXd& z, Eigen::VectorXd& out) {
    Eigen::Index n = z.size();
    int K = (int)prob.groups.size();
    std::vector<int> free_idx;
    for (Eigen::Index i = 0; i < n; ++i)
        if (z[i] > 1e-8) free_idx.push_back((int)i);
    int nf = (int)free_idx.size();
    if (nf == 0) return false;
    for (const auto& g : prob.groups) {
        bool any = false;
        for (int i : g.idx) any = any || z[i] > 1e-8;
        if (!any) return false;
    }

    std::vector<int> gof;
    group_of(prob, gof);

    Eigen::MatrixXd K_mat = Eigen::MatrixXd::Zero(nf + K, nf + K);
    Eigen::VectorXd rhs(nf + K);
    for (int r = 0; r < nf; ++r) {
        for (int c = 0; c < nf; ++c) K_mat(r, c) = prob.P(free_idx[r], free_idx[c]);
        K_mat(r, nf + gof[free_idx[r]]) = -1.0;
        K_mat(nf + gof[free_idx[r]], r) = 1.0;
        rhs[r] = -prob.q[free_idx[r]];
    }
    for (int g = 0; g < K; ++g) rhs[nf + g] = prob.groups[g].sum;

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(K_mat);
    Eigen::VectorXd sol = lu.solve(rhs);
    if (!sol.allFinite()) return false;
    double solve_err = (K_mat * sol - rhs).cwiseAbs().maxCoeff();
    double rhs_scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    if (solve_err > 1e-8 * rhs_scale) return false;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    for (int r = 0; r < nf; ++r) w[free_idx[r]] = sol[r];
    Eigen::VectorXd lambda = sol.tail(K);

    double scale = std::max(1.0, prob.q.cwiseAbs().maxCoeff());
    for (int r = 0; r < nf; ++r)
        if (w[free_idx[r]] < -1e-9) return false;
    Eigen::VectorXd grad = prob.P * w + prob.q;
    for (Eigen::Index i = 0; i < n; ++i) {
        double resid = grad[i] - lambda[gof[i]];
        if (w[i] > 1e-8) {
            if (std::abs(resid) > 1e-7 * scale) return false;
        } else {
            if (resid < -1e-7 * scale) return false;  // bound multiplier must be >= 0
        }
    }

    // clamp roundoff negatives and restore exact group sums
    for (Eigen::Index i = 0; i < n; ++i) w[i] = std::max(0.0, w[i]);
    for (const auto& g : prob.groups) {
        double s = 0.0;
        for (int i : g.idx) s += w[i];
        if (!(s > 0.0)) return false;
        for (int i : g.idx) w[i] *= g.sum / s;
    }
    out = std::move(w);
    return true;
}

}  // namespace

Eigen::VectorXd feasible_start(const QuadraticProgram& prob) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(prob.P.rows());
    for (const auto& g : prob.groups) {
        if (g.idx.empty()) throw SolverError("infeasible: empty constraint group");
        for (int i : g.idx) w[i] = g.sum / (double)g.idx.size();
    }
    return w;
}

double qp_objective(const QuadraticProgram& prob, const Eigen::VectorXd& w) {
    return 0.5 * w.dot(prob.P * w) + prob.q.dot(w) + prob.constant;
}

Eigen::VectorXd project_scaled_simplex(const Eigen::VectorXd& v, double s) {
    Eigen::Index m = v.size();
    std::vector<double> u(v.data(), v.data() + m);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, tau = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
        css += u[k];
        double t = (css - s) / (double)(k + 1);
        if (u[k] > t) tau = t;
    }
    return (v.array() - tau).max(0.0);
}

QpSolution solve_qp(const QuadraticProgram& prob, const QpOptions& opts) {
    validate(prob);
    Eigen::Index n = prob.P.rows();
    QpSolution sol;
    for (const auto& g : prob.groups)
        if (g.idx.empty()) {
            sol.status = QpStatus::infeasible;
            sol.w = Eigen::VectorXd::Zero(n);
            return sol;
        }

    double rho = opts.rho;
    double rho_floor = 0.0;  // raised when a restart proves small rho unstable
    Eigen::LLT<Eigen::MatrixXd> llt;
    auto factor = [&]() {
        for (int tries = 0; tries < 60; ++tries) {
            Eigen::MatrixXd M = prob.P;
            M.diagonal().array() += rho;
            llt.compute(M);
            if (llt.info() == Eigen::Success) return;
            rho *= 2.0;  // distance quadratics are only mildly indefinite
        }
        throw SolverError("cannot factor shifted quadratic term");
    };
    factor();

    Eigen::VectorXd z = feasible_start(prob);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);

    auto project = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd out(n);
        for (const auto& g : prob.groups) {
            Eigen::VectorXd sub((Eigen::Index)g.idx.size());
            for (size_t k = 0; k < g.idx.size(); ++k) sub[(Eigen::Index)k] = v[g.idx[k]];
            Eigen::VectorXd pr = project_scaled_simplex(sub, g.sum);
            for (size_t k = 0; k < g.idx.size(); ++k) out[g.idx[k]] = pr[(Eigen::Index)k];
        }
        return out;
    };

    double best_obj = qp_objective(prob, z);
    Eigen::VectorXd best_z = z;

    // iterate scale beyond which the splitting has clearly diverged (weights
    // live on per-group simplexes, so legitimate iterates stay near the sums)
    double blowup = 1e9 * std::max(1.0, z.cwiseAbs().maxCoeff());

    int it = 0;
    bool converged = false;
    for (; it < opts.max_iter; ++it) {
        Eigen::VectorXd x = llt.solve(rho * (z - u) - prob.q);
        Eigen::VectorXd xh = opts.alpha * x + (1.0 - opts.alpha) * z;
        Eigen::VectorXd z_new = project(xh + u);
        u += xh - z_new;

        if (!u.allFinite() || !z_new.allFinite() || u.cwiseAbs().maxCoeff() > blowup ||
            z_new.cwiseAbs().maxCoeff() > blowup) {
            // a too-small step for this curvature; raise it and restart clean
            rho *= 10.0;
            rho_floor = rho;
            factor();
            z = feasible_start(prob);
            u.setZero();
            continue;
        }

        double pr = (x - z_new).cwiseAbs().maxCoeff();
        double dr = rho * (z_new - z).cwiseAbs().maxCoeff();
        z = std::move(z_new);

        double obj = qp_objective(prob, z);
        if (obj < best_obj) {
            best_obj = obj;
            best_z = z;
        }

        if (pr <= opts.tol && dr <= opts.tol) {
            converged = true;
            ++it;
            break;
        }

        if (opts.polish_every > 0 && (it + 1) % opts.polish_every == 0) {
            Eigen::VectorXd w;
            if (polish(prob, z, w)) {
                sol.w = w;
                sol.objective = qp_objective(prob, w);
                sol.iterations = it + 1;
                sol.primal_residual = 0.0;
                for (const auto& g : prob.groups) {
                    double s = 0.0;
                    for (int i : g.idx) s += w[i];
                    sol.primal_residual = std::max(sol.primal_residual, std::abs(s - g.sum));
                }
                sol.status = QpStatus::converged;
                return sol;
            }
        }

        if (opts.adapt_every > 0 && (it + 1) % opts.adapt_every == 0) {
            if (pr > 10.0 * dr) {
                rho *= 2.0;
                u /= 2.0;
                factor();
            } else if (dr > 10.0 * pr && rho / 2.0 >= rho_floor) {
                rho /= 2.0;
                u *= 2.0;
                factor();
            }
        }
    }

    // on a converged run the last iterate is optimal; otherwise fall back to
    // the best feasible iterate seen
    if (converged) {
        double obj = qp_objective(prob, z);
        if (obj <= best_obj) {
            best_obj = obj;
            best_z = z;
        }
    }
    sol.status = converged ? QpStatus::converged : QpStatus::max_iter;
    sol.w = best_z;
    sol.objective = best_obj;
    sol.iterations = it;
    sol.primal_residual = 0.0;
    for (const auto& g : prob.groups) {
        double s = 0.0;
        for (int i : g.idx) s += best_z[i];
        sol.primal_residual = std::max(sol.primal_residual, std::abs(s - g.sum));
    }
    double neg = std::max(0.0, -best_z.minCoeff());
    sol.primal_residual = std::max(sol.primal_residual, neg);
    return sol;
}

QpSolution solve_qp(const QuadraticProgram& prob, double tol, int max_iter) {
    QpOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    return solve_qp(prob, o);
}

KktResiduals kkt_residuals(const QuadraticProgram& prob, const Eigen::VectorXd& w) {
    validate(prob);
    if (!w.allFinite()) throw DataError("non-finite weights");
    std::vector<int> gof;
    int K = group_of(prob, gof);

    KktResiduals r;
    for (const auto& g : prob.groups) {
        double s = 0.0;
        for (int i : g.idx) s += w[i];
        r.primal = std::max(r.primal, std::abs(s - g.sum));
    }
    r.primal = std::max(r.primal, std::max(0.0, -w.minCoeff()));

    Eigen::VectorXd grad = prob.P * w + prob.q;
    // least-squares equality multiplier per group = mean gradient on its
    // free coordinates; groups fully at the bound get the full-group mean
    Eigen::VectorXd lambda(K);
    for (int g = 0; g < K; ++g) {
        double s = 0.0;
        int cnt = 0;
        for (int i : prob.groups[g].idx)
            if (w[i] >= 1e-8) {
                s += grad[i];
                cnt++;
            }
        if (cnt == 0) {
            for (int i : prob.groups[g].idx) s += grad[i];
            cnt = (int)prob.groups[g].idx.size();
        }
        lambda[g] = s / cnt;
    }
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        double mu = grad[i] - lambda[gof[i]];
        if (w[i] >= 1e-8) {
            r.stationarity = std::max(r.stationarity, std::abs(mu));
        } else {
            r.stationarity = std::max(r.stationarity, std::max(0.0, -mu));
        }
        r.complementarity = std::max(r.complementarity, std::abs(std::max(0.0, w[i]) * mu));
    }
    return r;
}

}  // namespace ebal
