#include "balancing.hpp"

#include <cmath>

namespace ebal {

namespace {

void require_binary(const Sample& s) {
    if (!s.binary()) throw DataError("method requires binary treatment coded 0/1");
}

void require_group_sizes(const Sample& s, int min_size) {
    for (int lab : s.labels) {
        int cnt = (int)group_indices(s.A, lab).size();
        if (cnt < min_size)
            throw DataError("group " + std::to_string(lab) + " needs at least " +
                            std::to_string(min_size) + " units");
    }
}

void check_dist(const Sample& s, const Eigen::MatrixXd& D) {
    if (D.rows() != s.n() || D.cols() != s.n())
        throw DataError("distance matrix size does not match sample");
}

// quadratic/linear pieces of Σ_a E(F_{n,a,w}, F_n) over the given labels
QuadraticProgram one_sided_problem(const Sample& s, const Eigen::MatrixXd& D,
                                   const std::vector<int>& labels) {
    Eigen::Index n = s.n();
    QuadraticProgram prob;
    prob.P = Eigen::MatrixXd::Zero(n, n);
    prob.q = Eigen::VectorXd::Zero(n);
    double pooled = D.sum() / ((double)n * n);
    for (int lab : labels) {
        auto idx = group_indices(s.A, lab);
        double na = (double)idx.size();
        for (int i : idx) {
            prob.q[i] = 2.0 / (na * (double)n) * D.row(i).sum();
            for (int j : idx) prob.P(i, j) = -2.0 / (na * na) * D(i, j);
        }
        GroupConstraint g;
        g.idx = idx;
        g.sum = na;
        prob.groups.push_back(std::move(g));
        prob.constant -= pooled;
    }
    return prob;
}

// adds the between-group energy E(F_{n,a,w}, F_{n,b,w}) for one pair
void add_between_term(QuadraticProgram& prob, const Sample& s, const Eigen::MatrixXd& D, int a,
                      int b) {
    auto ia = group_indices(s.A, a), ib = group_indices(s.A, b);
    double na = (double)ia.size(), nb = (double)ib.size();
    for (int i : ia)
        for (int j : ib) {
            prob.P(i, j) += 2.0 / (na * nb) * D(i, j);
            prob.P(j, i) += 2.0 / (na * nb) * D(i, j);
        }
    for (int i : ia)
        for (int j : ia) prob.P(i, j) -= 2.0 / (na * na) * D(i, j);
    for (int i : ib)
        for (int j : ib) prob.P(i, j) -= 2.0 / (nb * nb) * D(i, j);
}

EnergyBreakdown between_breakdown(const Eigen::MatrixXd& D, const Eigen::VectorXi& A,
                                  const Eigen::VectorXd& w, int a, int b) {
    auto ia = group_indices(A, a), ib = group_indices(A, b);
    double na = (double)ia.size(), nb = (double)ib.size();
    double cross = 0.0, wa = 0.0, wb = 0.0;
    for (int i : ia)
        for (int j : ib) cross += w[i] * w[j] * D(i, j);
    for (int i : ia)
        for (int j : ia) wa += w[i] * w[j] * D(i, j);
    for (int i : ib)
        for (int j : ib) wb += w[i] * w[j] * D(i, j);
    EnergyBreakdown out;
    out.cross = 2.0 / (na * nb) * cross;
    out.within_weighted = wa / (na * na);
    out.within_pooled = wb / (nb * nb);
    out.value = out.cross - out.within_weighted - out.within_pooled;
    return out;
}

}  // namespace

std::string method_name(WeightMethod m) {
    switch (m) {
        case WeightMethod::ebw: return "ebw";
        case WeightMethod::iebw: return "iebw";
        case WeightMethod::att: return "att";
        case WeightMethod::multi: return "multi";
        case WeightMethod::multi_improved: return "multi-improved";
    }
    return "ebw";
}

WeightMethod parse_method(const std::string& name) {
    if (name == "ebw") return WeightMethod::ebw;
    if (name == "iebw") return WeightMethod::iebw;
    if (name == "att") return WeightMethod::att;
    if (name == "multi") return WeightMethod::multi;
    if (name == "multi-improved" || name == "multi_improved") return WeightMethod::multi_improved;
    throw DataError("unknown weight method: " + name);
}

QuadraticProgram ebw_problem(const Sample& s, const Eigen::MatrixXd& D) {
    require_binary(s);
    require_group_sizes(s, 1);
    check_dist(s, D);
    return one_sided_problem(s, D, s.labels);
}

QuadraticProgram iebw_problem(const Sample& s, const Eigen::MatrixXd& D) {
    require_binary(s);
    require_group_sizes(s, 1);
    check_dist(s, D);
    QuadraticProgram prob = one_sided_problem(s, D, s.labels);
    add_between_term(prob, s, D, 1, 0);
    return prob;
}

QuadraticProgram att_problem(const Sample& s, const Eigen::MatrixXd& D) {
    require_binary(s);
    check_dist(s, D);
    auto ic = group_indices(s.A, 0), it = group_indices(s.A, 1);
    if (ic.empty()) throw DataError("need at least 1 control unit");
    if (it.empty()) throw DataError("need at least 1 treated unit");
    double n0 = (double)ic.size(), n1 = (double)it.size();

    QuadraticProgram prob;
    Eigen::Index m = (Eigen::Index)ic.size();
    prob.P.resize(m, m);
    prob.q.resize(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        for (Eigen::Index c = 0; c < m; ++c) prob.P(r, c) = -2.0 / (n0 * n0) * D(ic[r], ic[c]);
        double s1 = 0.0;
        for (int j : it) s1 += D(ic[r], j);
        prob.q[r] = 2.0 / (n0 * n1) * s1;
    }
    double tt = 0.0;
    for (int i : it)
        for (int j : it) tt += D(i, j);
    prob.constant = -tt / (n1 * n1);
    GroupConstraint g;
    for (Eigen::Index r = 0; r < m; ++r) g.idx.push_back((int)r);
    g.sum = n0;
    prob.groups.push_back(std::move(g));
    return prob;
}

QuadraticProgram multi_problem(const Sample& s, const Eigen::MatrixXd& D, bool improved) {
    require_group_sizes(s, 1);
    check_dist(s, D);
    if (s.labels.size() < 2) throw DataError("need at least 2 treatment groups");
    QuadraticProgram prob = one_sided_problem(s, D, s.labels);
    if (improved)
        for (size_t a = 0; a < s.labels.size(); ++a)
            for (size_t b = a + 1; b < s.labels.size(); ++b)
                add_between_term(prob, s, D, s.labels[a], s.labels[b]);
    return prob;
}

BalancingWeights solve_weights(const QuadraticProgram& prob, const Sample& s, WeightMethod method,
                               const QpOptions& opts) {
    return solve_weights(prob, s, distance_matrix(s.X), method, opts);
}

BalancingWeights solve_weights(const QuadraticProgram& prob, const Sample& s,
                               const Eigen::MatrixXd& D, WeightMethod method,
                               const QpOptions& opts) {
    check_dist(s, D);
    QpSolution qs = solve_qp(prob, opts);
    if (qs.status == QpStatus::infeasible) throw SolverError("infeasible balancing problem");

    BalancingWeights bw;
    bw.method = method;
    bw.solver = qs;

    Eigen::Index n = s.n();
    if (method == WeightMethod::att) {
        auto ic = group_indices(s.A, 0);
        bw.w = Eigen::VectorXd::Ones(n);
        for (size_t r = 0; r < ic.size(); ++r) bw.w[ic[r]] = qs.w[(Eigen::Index)r];
        bw.target_label = 1;
    } else {
        bw.w = qs.w;
    }

    for (Eigen::Index i = 0; i < n; ++i)
        if (bw.w[i] < 0.0 && bw.w[i] >= -1e-10) bw.w[i] = 0.0;
    for (int lab : s.labels) {
        if (method == WeightMethod::att && lab == 1) continue;  // treated fixed at 1
        auto idx = group_indices(s.A, lab);
        double sum = 0.0;
        for (int i : idx) sum += bw.w[i];
        if (sum > 0.0)
            for (int i : idx) bw.w[i] *= (double)idx.size() / sum;
    }

    switch (method) {
        case WeightMethod::ebw:
        case WeightMethod::multi:
            for (int lab : s.labels) {
                EnergyTerm t;
                t.name = "group " + std::to_string(lab) + " vs pooled";
                t.parts = weighted_energy_distance(D, s.A, bw.w, lab);
                t.value = t.parts.value;
                bw.energy_at_solution.push_back(std::move(t));
            }
            break;
        case WeightMethod::iebw:
        case WeightMethod::multi_improved:
            for (int lab : s.labels) {
                EnergyTerm t;
                t.name = "group " + std::to_string(lab) + " vs pooled";
                t.parts = weighted_energy_distance(D, s.A, bw.w, lab);
                t.value = t.parts.value;
                bw.energy_at_solution.push_back(std::move(t));
            }
            for (size_t a = 0; a < s.labels.size(); ++a)
                for (size_t b = a + 1; b < s.labels.size(); ++b) {
                    EnergyTerm t;
                    t.name = "between " + std::to_string(s.labels[a]) + " and " +
                             std::to_string(s.labels[b]);
                    t.parts = between_breakdown(D, s.A, bw.w, s.labels[a], s.labels[b]);
                    t.value = t.parts.value;
                    bw.energy_at_solution.push_back(std::move(t));
                }
            break;
        case WeightMethod::att: {
            EnergyTerm t;
            t.name = "weighted control vs treated";
            t.parts = between_breakdown(D, s.A, bw.w, 0, 1);
            t.value = t.parts.value;
            bw.energy_at_solution.push_back(std::move(t));
            break;
        }
    }
    // full audit across every term, whether or not the method optimized it
    bw.energy_total = 0.0;
    for (int lab : s.labels) bw.energy_total += weighted_energy_distance(D, s.A, bw.w, lab).value;
    for (size_t a = 0; a < s.labels.size(); ++a)
        for (size_t b = a + 1; b < s.labels.size(); ++b)
            bw.energy_total +=
                between_group_weighted_energy(D, s.A, bw.w, s.labels[a], s.labels[b]);

    bw.a5_stat = bw.w.maxCoeff() / std::cbrt((double)n);
    if (bw.a5_stat > 1.0)
        bw.warnings.push_back("largest weight " + std::to_string(bw.w.maxCoeff()) +
                              " exceeds n^(1/3); estimates may be unstable");
    if (qs.status != QpStatus::converged)
        bw.warnings.push_back("solver stopped at iteration limit; primal residual " +
                              std::to_string(qs.primal_residual));
    return bw;
}

BalancingWeights solve_weights(const QuadraticProgram& prob, const Sample& s,
                               const QpOptions& opts) {
    WeightMethod method;
    if (prob.P.rows() < s.n()) {
        method = WeightMethod::att;
    } else {
        bool cross = false;
        for (size_t g = 0; g < prob.groups.size() && !cross; ++g)
            for (size_t h = g + 1; h < prob.groups.size() && !cross; ++h)
                for (int i : prob.groups[g].idx) {
                    for (int j : prob.groups[h].idx)
                        if (prob.P(i, j) != 0.0) {
                            cross = true;
                            break;
                        }
                    if (cross) break;
                }
        if (prob.groups.size() > 2)
            method = cross ? WeightMethod::multi_improved : WeightMethod::multi;
        else
            method = cross ? WeightMethod::iebw : WeightMethod::ebw;
    }
    return solve_weights(prob, s, method, opts);
}

BalancingWeights balance(const Sample& s, const Eigen::MatrixXd& D, WeightMethod method,
                         const QpOptions& opts) {
    QuadraticProgram prob;
    switch (method) {
        case WeightMethod::ebw: prob = ebw_problem(s, D); break;
        case WeightMethod::iebw: prob = iebw_problem(s, D); break;
        case WeightMethod::att: prob = att_problem(s, D); break;
        case WeightMethod::multi: prob = multi_problem(s, D, false); break;
        case WeightMethod::multi_improved: prob = multi_problem(s, D, true); break;
    }
    return solve_weights(prob, s, D, method, opts);
}

BalancingWeights balance(const Sample& s, WeightMethod method, const QpOptions& opts) {
    return balance(s, distance_matrix(s.X), method, opts);
}

}  // namespace ebal
