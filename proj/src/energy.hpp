#pragma once

#include <Eigen/Dense>

#include "sample.hpp"

namespace ebal {

// Terms of the weighted energy distance between the reweighted group-a ECDF
// and the pooled ECDF; value = cross - within_weighted - within_pooled.
struct EnergyBreakdown {
    double cross = 0.0;
    double within_weighted = 0.0;
    double within_pooled = 0.0;
    double value = 0.0;
};

// Exact pairwise Euclidean distances; symmetric, zero diagonal.
Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& X);

// Plain two-sample energy distance 2/(nm)ΣΣ|z-v| - 1/n²ΣΣ - 1/m²ΣΣ.
double energy_distance(const Eigen::MatrixXd& Za, const Eigen::MatrixXd& Zb);

// Rescales weights within each treatment group so the group sum equals the
// group size. Callers holding unnormalized competitor weights go through
// here before any energy evaluation.
Eigen::VectorXd normalize_group_weights(const Eigen::VectorXi& A, const Eigen::VectorXd& w);

// Energy distance between the w-weighted ECDF of group a and the pooled
// (unweighted) ECDF. Requires w >= 0 and the group-a weights summing to the
// group size within 1e-8.
EnergyBreakdown weighted_energy_distance(const Eigen::MatrixXd& D, const Eigen::VectorXi& A,
                                         const Eigen::VectorXd& w, int a);

// Energy distance between the weighted ECDFs of groups a and b.
double between_group_weighted_energy(const Eigen::MatrixXd& D, const Eigen::VectorXi& A,
                                     const Eigen::VectorXd& w, int a, int b);

// Quadrature settings for the characteristic-function integrals below.
// nodes == 0 picks the per-dimension default (4000 at p=1, 400 at p=2).
struct QuadratureSpec {
    double T = 50.0;
    double eps0 = 1e-4;
    int nodes = 0;
};

// Numerically integrates |Σ_i gamma_i e^{i t·x_i}|² ω(t) dt with
// ω(t) = 1/(C_p ||t||^{1+p}), C_1 = π, C_2 = 2π, over [-T,T]^p minus a ball
// of radius eps0, plus an analytic correction for the mass outside the box
// (coincident rows contribute a non-oscillating term there). Requires
// Σ gamma_i = 0 so the singularity at 0 is integrable. Oracle, not a
// production path; p must be 1 or 2.
double echf_gamma_integral(const Eigen::MatrixXd& X, const Eigen::VectorXd& gamma,
                           const QuadratureSpec& spec = {});

// ∫ |φ_pool(t) - φ_{a,w}(t)|² ω(t) dt, the dual form of
// weighted_energy_distance.
double echf_integral(const Eigen::MatrixXd& X, const Eigen::VectorXi& A, const Eigen::VectorXd& w,
                     int a, const QuadratureSpec& spec = {});

// ∫ |φ_{a,w}(t) - φ_{b,w}(t)|² ω(t) dt, dual of between_group_weighted_energy.
double echf_between_integral(const Eigen::MatrixXd& X, const Eigen::VectorXi& A,
                             const Eigen::VectorXd& w, int a, int b,
                             const QuadratureSpec& spec = {});

// ∫ |φ_{Za}(t) - φ_{Zb}(t)|² ω(t) dt, dual of energy_distance.
double echf_two_sample_integral(const Eigen::MatrixXd& Za, const Eigen::MatrixXd& Zb,
                                const QuadratureSpec& spec = {});

}  // namespace ebal
