#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sample.hpp"

namespace ebal {

// Signed (weighted treated mean - weighted control mean) / pooled unweighted
// SD per covariate. The denominator is computed once on the full sample so
// every weighting is judged against the same scale.
Eigen::VectorXd smd(const Sample& s, const Eigen::VectorXd& w);

// smd over the expanded set {x_j^k : k <= max_poly} then {x_j x_l : j < l},
// built on standardized covariates.
Eigen::VectorXd smd_derived(const Sample& s, const Eigen::VectorXd& w, int max_poly);
std::vector<std::string> derived_term_names(const Sample& s, int max_poly);

// Root integrated squared difference of the two weighted marginal ECDFs,
// integrated exactly over the pooled observed values (left rule, exact for
// step functions).
Eigen::VectorXd rimse_1d(const Sample& s, const Eigen::VectorXd& w);

// Same construction on bivariate ECDFs for every covariate pair (j < l,
// lexicographic); per-axis evaluation grids are capped at 200 observed
// quantiles for large n.
std::vector<double> rimse_2d(const Sample& s, const Eigen::VectorXd& w, int grid_cap = 200);
std::vector<std::string> pair_names(const Sample& s);

struct WeightStats {
    double min = 0.0, max = 0.0, mean = 0.0, sd = 0.0;
    double a5 = 0.0;  // max_i w_i / n^{1/3}
};

struct BalanceReport {
    double energy_two_term = 0.0;    // sum of one-sided group-vs-pooled energies
    double energy_three_term = 0.0;  // plus all pairwise between-group energies
    std::vector<std::string> covariates;
    std::vector<double> smd;  // empty for non-binary treatment
    std::vector<std::string> derived_terms;
    std::vector<double> smd2;  // empty for non-binary treatment
    std::vector<double> rimse1;
    std::vector<std::string> pairs;
    std::vector<double> rimse2;
    WeightStats weight_stats;
};

// Normalizes weights per group, then assembles every diagnostic. SMD and
// RIMSE columns are only populated for binary treatment.
BalanceReport balance_report(const Sample& s, const Eigen::VectorXd& w, int max_poly = 2);

// Key-value block plus per-covariate tables; full switches to round-trip
// precision for machine-readable output.
std::string render_report(const BalanceReport& r, bool full = false);

}  // namespace ebal
