#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "balancing.hpp"
#include "sample.hpp"

namespace ebal {

// Weighting schemes an estimator can be driven by; the last five delegate to
// the balancing solver.
enum class WeightScheme { uniform, ipw, ebw, iebw, att, multi, multi_improved };

std::string scheme_name(WeightScheme s);
WeightScheme parse_scheme(const std::string& name);

// Group-normalized weights for a scheme. Balancing and ipw schemes
// standardize the covariates internally.
Eigen::VectorXd compute_weights(const Sample& s, WeightScheme scheme, const QpOptions& opts = {});

struct EstimateResult {
    double point = 0.0;
    std::optional<double> se;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    std::optional<int> B;
    std::string method;
    int redraws = 0;  // bootstrap replicates redrawn for degenerate groups
};

// Hájek estimators: weights are renormalized within each group before the
// weighted group-mean difference is taken.
double weighted_ate(const Sample& s, const Eigen::VectorXd& w);
double weighted_att(const Sample& s, const BalancingWeights& w);
double weighted_contrast(const Sample& s, const Eigen::VectorXd& w, int a, int b);

struct LogisticFit {
    Eigen::VectorXd beta;
    double intercept = 0.0;
    bool converged = false;
    int iterations = 0;
    double loglik = 0.0;
};

// Logistic regression of A on the given design (plus intercept) by
// iteratively reweighted least squares with step halving, so the
// log-likelihood never decreases. Diverging coefficients raise an error.
LogisticFit logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXi& A, int max_iter = 100,
                         double tol = 1e-10);

Eigen::VectorXd predict_probs(const LogisticFit& fit, const Eigen::MatrixXd& X);

// A_i/π_i + (1-A_i)/(1-π_i), group-normalized.
Eigen::VectorXd ipw_weights_from_propensity(const Eigen::VectorXi& A, const Eigen::VectorXd& pi);

// First-order logistic propensity baseline on standardized covariates.
Eigen::VectorXd logistic_ipw_weights(const Sample& s);

enum class Estimand { ate, att, contrast };

struct BootstrapOptions {
    int B = 1000;
    std::uint64_t seed = 0;
    int contrast_a = 0, contrast_b = 0;  // only read for Estimand::contrast
    int jobs = 1;
    QpOptions qp;
};

// Nonparametric bootstrap: resamples rows, re-solves weights per replicate,
// percentile confidence interval. Replicates with a degenerate group are
// redrawn from the replicate's own RNG stream; results do not depend on the
// thread count.
EstimateResult bootstrap(const Sample& s, WeightScheme scheme, Estimand estimand,
                         const BootstrapOptions& opts);

enum class SurrogateLoss { logistic, hinge };

struct LinearRule {
    Eigen::VectorXd beta;  // original covariate scale
    double intercept = 0.0;
    SurrogateLoss loss = SurrogateLoss::logistic;
    double lambda = 0.0;
    double y_shift = 0.0;  // amount added to Y before fitting
    int iterations = 0;
    bool converged = false;

    bool decide(const Eigen::RowVectorXd& x) const {
        return x.dot(beta) + intercept >= 0.0;
    }
};

// Weighted-surrogate objective for a linear rule on a raw design; exposed
// for gradient checking.
double itr_objective(const Eigen::MatrixXd& X, const Eigen::VectorXi& A, const Eigen::VectorXd& c,
                     const Eigen::VectorXd& beta, double intercept, SurrogateLoss loss,
                     double lambda);

// Analytic gradient of itr_objective stacked as (d/dbeta, d/dintercept).
Eigen::VectorXd itr_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXi& A,
                             const Eigen::VectorXd& c, const Eigen::VectorXd& beta,
                             double intercept, SurrogateLoss loss, double lambda);

// Fits (1/n) Σ Y_i w_i φ((2A_i-1) f(X_i)) + λ|beta|² over linear f by
// full-batch descent with backtracking; Y is shifted to be nonnegative
// first. lambda < 0 means the 1/n default.
LinearRule fit_itr(const Sample& s, const Eigen::VectorXd& w,
                   SurrogateLoss loss = SurrogateLoss::logistic, double lambda = -1.0);

// Simulation truth carrying both potential outcome surfaces.
struct PotentialOutcomes {
    Eigen::MatrixXd X;
    Eigen::VectorXd mu0;
    Eigen::VectorXd mu1;
};

// Mean of mu_{d(x)}(x) over the oracle rows.
double evaluate_value(const LinearRule& rule, const PotentialOutcomes& po);

}  // namespace ebal
