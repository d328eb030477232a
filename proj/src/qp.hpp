#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sample.hpp"

namespace ebal {

struct GroupConstraint {
    std::vector<int> idx;
    double sum = 0.0;
};

// min ½wᵀPw + qᵀw + constant  s.t.  per-group sums fixed, w >= 0.
// P is indefinite globally but convex on the constraint-affine set.
struct QuadraticProgram {
    Eigen::MatrixXd P;
    Eigen::VectorXd q;
    std::vector<GroupConstraint> groups;
    double constant = 0.0;
};

enum class QpStatus { converged, max_iter, infeasible };

struct QpSolution {
    Eigen::VectorXd w;
    double objective = 0.0;
    double primal_residual = 0.0;
    int iterations = 0;
    QpStatus status = QpStatus::infeasible;
};

struct QpOptions {
    double rho = 1.0;
    double alpha = 1.6;
    double tol = 1e-7;
    int max_iter = 20000;
    int adapt_every = 25;    // rho rescaling cadence
    int polish_every = 250;  // active-set refinement cadence
};

// Uniform per-group start satisfying all equality constraints exactly.
Eigen::VectorXd feasible_start(const QuadraticProgram& prob);

double qp_objective(const QuadraticProgram& prob, const Eigen::VectorXd& w);

// Projects v onto {u >= 0, Σu = s} by the sort-based algorithm.
Eigen::VectorXd project_scaled_simplex(const Eigen::VectorXd& v, double s);

// Operator-splitting solve: x-update through a factorization of P + ρI,
// relaxation, projection onto the product of scaled simplexes, with periodic
// exact refinement on the apparent active set. Deterministic.
QpSolution solve_qp(const QuadraticProgram& prob, const QpOptions& opts = {});
QpSolution solve_qp(const QuadraticProgram& prob, double tol, int max_iter);

struct KktResiduals {
    double stationarity = 0.0;
    double primal = 0.0;
    double complementarity = 0.0;
};

// Residuals of the KKT system at w; equality multipliers recovered by least
// squares over the free set (w_i >= 1e-8).
KktResiduals kkt_residuals(const QuadraticProgram& prob, const Eigen::VectorXd& w);

}  // namespace ebal
