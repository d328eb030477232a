#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "energy.hpp"
#include "qp.hpp"
#include "sample.hpp"

namespace ebal {

enum class WeightMethod { ebw, iebw, att, multi, multi_improved };

std::string method_name(WeightMethod m);
WeightMethod parse_method(const std::string& name);

// One audited term of the solved objective. For one-sided terms `parts` is
// the usual breakdown; for between-group terms the two within slots hold the
// first and second group self-terms.
struct EnergyTerm {
    std::string name;
    double value = 0.0;
    EnergyBreakdown parts;
};

struct BalancingWeights {
    Eigen::VectorXd w;  // full n-vector; fixed units (att treated) carry 1
    WeightMethod method = WeightMethod::ebw;
    std::optional<int> target_label;
    std::vector<EnergyTerm> energy_at_solution;
    // all group-vs-pooled terms plus all between-group terms at w, whether
    // or not the method optimized them; comparable across methods
    double energy_total = 0.0;
    QpSolution solver;
    double a5_stat = 0.0;  // max_i w_i / n^{1/3}
    std::vector<std::string> warnings;
};

// Objective: sum over groups a of the energy distance between the reweighted
// group-a ECDF and the pooled ECDF.
QuadraticProgram ebw_problem(const Sample& s, const Eigen::MatrixXd& D);

// Adds the between-group energy term to the two one-sided terms.
QuadraticProgram iebw_problem(const Sample& s, const Eigen::MatrixXd& D);

// Control weights minimizing energy distance to the (unweighted) treated
// group; treated weights are fixed at 1 and are not decision variables.
QuadraticProgram att_problem(const Sample& s, const Eigen::MatrixXd& D);

// K-group generalization; improved=true adds all unordered pairwise
// between-group terms.
QuadraticProgram multi_problem(const Sample& s, const Eigen::MatrixXd& D, bool improved);

// Solves an assembled problem and audits the result: clamps roundoff
// negatives, renormalizes group sums, recomputes every energy term from raw
// formulas, checks the weight-growth bound max w_i <= n^{1/3}, and carries
// non-converged solver status as a warning rather than failing silently.
BalancingWeights solve_weights(const QuadraticProgram& prob, const Sample& s, WeightMethod method,
                               const QpOptions& opts = {});
BalancingWeights solve_weights(const QuadraticProgram& prob, const Sample& s,
                               const Eigen::MatrixXd& D, WeightMethod method,
                               const QpOptions& opts = {});

// Convenience overload inferring the method from the problem shape (control
// sized => att; positive cross-group quadratic entries => improved variant).
// Only valid on problems assembled by the ops above.
BalancingWeights solve_weights(const QuadraticProgram& prob, const Sample& s,
                               const QpOptions& opts = {});

// Assemble-and-solve in one step.
BalancingWeights balance(const Sample& s, WeightMethod method, const QpOptions& opts = {});
BalancingWeights balance(const Sample& s, const Eigen::MatrixXd& D, WeightMethod method,
                         const QpOptions& opts = {});

}  // namespace ebal
