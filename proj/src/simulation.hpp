#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "estimation.hpp"
#include "rng.hpp"
#include "sample.hpp"

namespace ebal {

enum class PropModel { I = 1, II, III, IV, V, VI };
enum class OutModel { A, B, C, D, E };

PropModel parse_prop_model(const std::string& name);
OutModel parse_out_model(const std::string& name);
std::string prop_model_name(PropModel m);
std::string out_model_name(OutModel m);

struct ScenarioSpec {
    PropModel propensity = PropModel::I;
    OutModel outcome = OutModel::A;
    int n = 250;
    int p = 10;
    int setup = 0;  // 0 = auto: 2 under propensity III or outcome B/E, else 1
    std::uint64_t seed = 0;
};

int effective_setup(const ScenarioSpec& spec);

// Covariance (-0.75)^{|i-j|}: unit diagonal, alternating-sign bands.
Eigen::MatrixXd ar_covariance(int p);

// Latent rows ~ N(0, ar_covariance(p)).
Eigen::MatrixXd latent_covariates(int n, int p, Rng& rng);

// Observed covariates; setup 2 applies the eight nonlinear maps to the
// first eight latent coordinates and passes the rest through.
Eigen::MatrixXd setup_transform(const Eigen::MatrixXd& Z, int setup);
Eigen::MatrixXd gen_covariates(const ScenarioSpec& spec, Rng& rng);

// Treatment and outcome surfaces are defined on the latent scale; the
// covariate setup only changes what the estimators get to see.
Eigen::VectorXd propensity_logits(PropModel m, const Eigen::MatrixXd& Z);
Eigen::VectorXi gen_treatment(const ScenarioSpec& spec, const Eigen::MatrixXd& Z, Rng& rng);
Eigen::VectorXd outcome_mean(OutModel m, const Eigen::MatrixXd& Z, const Eigen::VectorXi& A);
Eigen::VectorXd gen_outcome(const ScenarioSpec& spec, const Eigen::MatrixXd& Z,
                            const Eigen::VectorXi& A, Rng& rng);

struct ScenarioData {
    Eigen::MatrixXd Z;
    Sample sample;
};
ScenarioData gen_scenario(const ScenarioSpec& spec, Rng& rng);

// Exact 0 for outcome surfaces free of A; otherwise a cached million-draw
// Monte-Carlo population mean of mu(Z,1) - mu(Z,0).
double true_tau(const ScenarioSpec& spec);
double mc_true_tau(const ScenarioSpec& spec, int draws, std::uint64_t seed);

// 1-d designs with increasingly nonlinear assignment; the outcome never
// depends on A, so the effect is exactly 0.
Eigen::VectorXd toy_logits(int which, const Eigen::VectorXd& x);
Sample toy_scenario(int which, int n, std::uint64_t seed);

struct ItrData {
    Sample sample;
    Eigen::VectorXd mu0, mu1, delta, pi;
};

// Uniform(-1,1)^10 designs with heterogeneous effects for rule learning.
ItrData itr_scenario(int which, int n, std::uint64_t seed);
PotentialOutcomes itr_oracle(int which, int points, std::uint64_t seed);

struct McRow {
    std::string method;
    double rmse = 0.0;
    double bias = 0.0;
    int reps = 0;      // replicates contributing an estimate
    int failures = 0;  // solver non-convergence or degenerate fits
};

// Replicated generate / weight / estimate loop; deterministic under the
// seed for any job count (per-replicate streams, fixed accumulation order).
std::vector<McRow> run_mc(const ScenarioSpec& spec, const std::vector<WeightScheme>& methods,
                          int reps, std::uint64_t seed, int jobs = 1, const QpOptions& opts = {});

}  // namespace ebal
