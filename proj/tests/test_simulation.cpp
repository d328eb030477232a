#include <cmath>

#include "doctest.h"
#include "energy.hpp"
#include "estimation.hpp"
#include "rng.hpp"
#include "simulation.hpp"

using namespace ebal;

TEST_CASE("model names round-trip") {
    for (auto m : {PropModel::I, PropModel::II, PropModel::III, PropModel::IV, PropModel::V,
                   PropModel::VI})
        CHECK(parse_prop_model(prop_model_name(m)) == m);
    for (auto m : {OutModel::A, OutModel::B, OutModel::C, OutModel::D, OutModel::E})
        CHECK(parse_out_model(out_model_name(m)) == m);
    CHECK_THROWS_AS(parse_prop_model("VII"), DataError);
    CHECK_THROWS_AS(parse_out_model("F"), DataError);
}

TEST_CASE("covariate setup auto-selection") {
    ScenarioSpec s;
    s.propensity = PropModel::I;
    s.outcome = OutModel::A;
    CHECK(effective_setup(s) == 1);
    s.propensity = PropModel::III;
    CHECK(effective_setup(s) == 2);
    s.propensity = PropModel::I;
    s.outcome = OutModel::B;
    CHECK(effective_setup(s) == 2);
    s.outcome = OutModel::E;
    CHECK(effective_setup(s) == 2);
    s.setup = 1;
    CHECK(effective_setup(s) == 1);
    s.setup = 3;
    CHECK_THROWS_AS(effective_setup(s), DataError);
}

TEST_CASE("latent covariance has unit diagonal and alternating bands") {
    Eigen::MatrixXd S = ar_covariance(5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            CHECK(S(i, j) == doctest::Approx(std::pow(-0.75, std::abs(i - j))).epsilon(1e-14));

    Rng rng(11);
    Eigen::MatrixXd Z = latent_covariates(100000, 10, rng);
    Eigen::MatrixXd centered = Z.rowwise() - Z.colwise().mean();
    Eigen::MatrixXd C = centered.transpose() * centered / (double)(Z.rows() - 1);
    Eigen::MatrixXd target = ar_covariance(10);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) CHECK(std::abs(C(i, j) - target(i, j)) <= 0.02);
}

TEST_CASE("one-dimensional latents are standard normal") {
    Rng rng(13);
    Eigen::MatrixXd Z = latent_covariates(100000, 1, rng);
    CHECK(std::abs(Z.col(0).mean()) <= 0.02);
    double sd = std::sqrt((Z.col(0).array() - Z.col(0).mean()).square().sum() /
                          (double)(Z.rows() - 1));
    CHECK(std::abs(sd - 1.0) <= 0.02);
}

TEST_CASE("setup-2 transforms respect their ranges and pass extras through") {
    Rng rng(17);
    Eigen::MatrixXd Z = latent_covariates(2000, 10, rng);
    Eigen::MatrixXd X = setup_transform(Z, 2);
    for (int i = 0; i < 2000; ++i) {
        CHECK(X(i, 0) > 0.0);
        CHECK(X(i, 3) >= 20.0);
        CHECK(X(i, 7) >= 5.0);
        CHECK(X(i, 0) == doctest::Approx(std::exp(Z(i, 0) / 2.0)).epsilon(1e-12));
        CHECK(X(i, 8) == Z(i, 8));
        CHECK(X(i, 9) == Z(i, 9));
    }
    CHECK_THROWS_AS(setup_transform(Z.leftCols(4), 2), DataError);
}

TEST_CASE("treated fractions match the reported marginal rates") {
    Rng rng(19);
    ScenarioSpec s;
    s.n = 100000;
    s.p = 10;

    s.propensity = PropModel::I;
    Eigen::MatrixXd Z1 = latent_covariates(s.n, s.p, rng);
    double rate1 = (double)gen_treatment(s, Z1, rng).sum() / s.n;
    CHECK(std::abs(rate1 - 0.35) <= 0.01);

    s.propensity = PropModel::III;
    Eigen::MatrixXd Z3 = latent_covariates(s.n, s.p, rng);
    double rate3 = (double)gen_treatment(s, Z3, rng).sum() / s.n;
    CHECK(std::abs(rate3 - 0.50) <= 0.01);
}

TEST_CASE("quadratic-score model is rescaled to spread five") {
    Rng rng(23);
    Eigen::MatrixXd Z = latent_covariates(5000, 6, rng);
    Eigen::VectorXd eta = propensity_logits(PropModel::IV, Z);
    double mean = eta.mean();
    double sd = std::sqrt((eta.array() - mean).square().sum() / (double)(eta.size() - 1));
    CHECK(sd == doctest::Approx(5.0).epsilon(1e-8));
}

TEST_CASE("outcome surfaces at pinned points") {
    Eigen::MatrixXd Z0 = Eigen::MatrixXd::Zero(2, 7);
    Eigen::VectorXi A(2);
    A << 1, 0;
    CHECK(outcome_mean(OutModel::A, Z0, A)[0] == doctest::Approx(210.0));
    CHECK(outcome_mean(OutModel::A, Z0, A)[1] == doctest::Approx(210.0));
    CHECK(outcome_mean(OutModel::C, Z0, A)[0] == doctest::Approx(0.0));
    CHECK(outcome_mean(OutModel::C, Z0, A)[1] == doctest::Approx(0.0));
    CHECK(outcome_mean(OutModel::E, Z0, A)[0] == doctest::Approx(210.0));

    Rng rng(29);
    Eigen::MatrixXd Z(2, 7);
    for (int j = 0; j < 7; ++j) {
        double v = rng.normal();
        Z(0, j) = v;
        Z(1, j) = v;
    }
    Eigen::VectorXd mu = outcome_mean(OutModel::E, Z, A);
    double lin = 27.4 * Z(0, 0) + 13.7 * Z(0, 1) + 13.7 * Z(0, 2) + 13.7 * Z(0, 3);
    CHECK(mu[0] - mu[1] == doctest::Approx(1.5 * lin).epsilon(1e-12));

    CHECK_THROWS_AS(outcome_mean(OutModel::D, Z0.leftCols(5), A), DataError);
}

TEST_CASE("outcome noise is unit standard normal") {
    Rng rng(31);
    ScenarioSpec s;
    s.outcome = OutModel::A;
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(100000, 4);
    Eigen::VectorXi A = Eigen::VectorXi::Zero(100000);
    Eigen::VectorXd Y = gen_outcome(s, Z, A, rng);
    Eigen::VectorXd resid = Y.array() - 210.0;
    CHECK(std::abs(resid.mean()) <= 0.02);
    double sd = std::sqrt((resid.array() - resid.mean()).square().sum() /
                          (double)(resid.size() - 1));
    CHECK(std::abs(sd - 1.0) <= 0.02);
}

TEST_CASE("true effect is exactly zero for treatment-free surfaces") {
    ScenarioSpec s;
    for (auto m : {OutModel::A, OutModel::B, OutModel::D}) {
        s.outcome = m;
        s.p = 10;
        CHECK(true_tau(s) == 0.0);
        CHECK(mc_true_tau(s, 20000, 7) == 0.0);
    }

    s.outcome = OutModel::E;
    double tau_e = true_tau(s);
    CHECK(std::abs(tau_e) <= 0.2);
    CHECK(true_tau(s) == tau_e);

    s.outcome = OutModel::C;
    s.p = 5;
    double tau_c = true_tau(s);
    CHECK(std::isfinite(tau_c));
    CHECK(true_tau(s) == tau_c);
}

TEST_CASE("toy assignment scores at pinned points") {
    Eigen::VectorXd x(3);
    x << 1.0, 0.0, -1.0;
    Eigen::VectorXd e1 = toy_logits(1, x);
    CHECK(e1[0] == doctest::Approx(0.0));
    CHECK(e1[1] == doctest::Approx(-1.0));
    Eigen::VectorXd e2 = toy_logits(2, x);
    CHECK(e2[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    Eigen::VectorXd e3 = toy_logits(3, x);
    CHECK(e3[1] == doctest::Approx(-1.0));
    CHECK(e3[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(toy_logits(4, x), DataError);
}

TEST_CASE("toy samples are reproducible and well-formed") {
    Sample a = toy_scenario(3, 400, 99);
    Sample b = toy_scenario(3, 400, 99);
    CHECK((a.X - b.X).norm() == 0.0);
    CHECK((a.A - b.A).cwiseAbs().sum() == 0);
    CHECK((a.Y - b.Y).norm() == 0.0);
    Sample c = toy_scenario(3, 400, 100);
    CHECK((a.X - c.X).norm() != 0.0);
    CHECK(a.p() == 1);
    CHECK(a.binary());
    CHECK(std::abs(a.X.col(0).mean()) <= 0.2);
}

TEST_CASE("misspecified propensity scores balance worse on the quadratic toy") {
    // scenario 2 assigns by a quadratic score; weights from a linear-only fit
    // should leave more imbalance than weights from the right design
    int reps = 1000, n = 250;
    double mis = 0.0, rig = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
        Sample s = toy_scenario(2, n, 1000 + (std::uint64_t)rep);
        Eigen::MatrixXd D = distance_matrix(s.X);

        LogisticFit f1 = logistic_fit(s.X, s.A);
        Eigen::VectorXd w1 = ipw_weights_from_propensity(s.A, predict_probs(f1, s.X));
        mis += weighted_energy_distance(D, s.A, w1, 1).value;

        Eigen::MatrixXd X2(n, 2);
        X2.col(0) = s.X.col(0);
        X2.col(1) = s.X.col(0).array().square().matrix();
        LogisticFit f2 = logistic_fit(X2, s.A);
        Eigen::VectorXd w2 = ipw_weights_from_propensity(s.A, predict_probs(f2, X2));
        rig += weighted_energy_distance(D, s.A, w2, 1).value;
    }
    CHECK(mis / reps > rig / reps);
}

TEST_CASE("rule scenarios carry consistent truth columns") {
    ItrData d = itr_scenario(1, 800, 55);
    CHECK(d.sample.p() == 10);
    CHECK(d.sample.n() == 800);
    for (Eigen::Index i = 0; i < 800; ++i) {
        for (Eigen::Index j = 0; j < 10; ++j) {
            CHECK(d.sample.X(i, j) >= -1.0);
            CHECK(d.sample.X(i, j) <= 1.0);
        }
        CHECK(d.pi[i] > 0.0);
        CHECK(d.pi[i] < 1.0);
        CHECK(d.mu1[i] - d.mu0[i] == doctest::Approx(d.delta[i]).epsilon(1e-12));
        double x1 = d.sample.X(i, 0), x2 = d.sample.X(i, 1);
        double x3 = d.sample.X(i, 2), x4 = d.sample.X(i, 3);
        double want = x2 - 0.25 * x1 * x1 - x4 + 0.25 * x3 * x3;
        CHECK(d.delta[i] == doctest::Approx(want).epsilon(1e-10));
    }

    Eigen::VectorXd resid(800);
    for (Eigen::Index i = 0; i < 800; ++i)
        resid[i] = d.sample.Y[i] - (d.sample.A[i] == 1 ? d.mu1[i] : d.mu0[i]);
    double sd = std::sqrt((resid.array() - resid.mean()).square().sum() / 799.0);
    CHECK(std::abs(sd - 1.0) <= 0.15);
}

TEST_CASE("rule oracle surfaces dominate fixed policies") {
    PotentialOutcomes po = itr_oracle(2, 20000, 4242);
    PotentialOutcomes po2 = itr_oracle(2, 20000, 4242);
    CHECK((po.X - po2.X).norm() == 0.0);
    CHECK((po.mu0 - po2.mu0).norm() == 0.0);
    double always0 = po.mu0.mean(), always1 = po.mu1.mean();
    double best = po.mu0.cwiseMax(po.mu1).mean();
    CHECK(best >= always0);
    CHECK(best >= always1);
    double frac = 0.0;
    for (Eigen::Index i = 0; i < po.X.rows(); ++i) frac += po.mu1[i] > po.mu0[i] ? 1.0 : 0.0;
    frac /= (double)po.X.rows();
    CHECK(frac > 0.0);
    CHECK(frac < 1.0);
}

TEST_CASE("replicated benchmark is deterministic and consistent") {
    ScenarioSpec spec;
    spec.propensity = PropModel::I;
    spec.outcome = OutModel::A;
    spec.n = 60;
    spec.p = 4;
    std::vector<WeightScheme> methods = {WeightScheme::uniform, WeightScheme::ipw,
                                         WeightScheme::ebw};

    auto t1 = run_mc(spec, methods, 6, 777, 1);
    auto t3 = run_mc(spec, methods, 6, 777, 3);
    REQUIRE(t1.size() == 3);
    REQUIRE(t3.size() == 3);
    for (size_t k = 0; k < 3; ++k) {
        CHECK(t1[k].method == scheme_name(methods[k]));
        CHECK(t1[k].rmse == t3[k].rmse);
        CHECK(t1[k].bias == t3[k].bias);
        CHECK(t1[k].reps == 6);
        CHECK(t1[k].failures == t3[k].failures);
        CHECK(t1[k].rmse >= std::abs(t1[k].bias) - 1e-12);
    }

    auto again = run_mc(spec, methods, 6, 777, 2);
    CHECK(again[2].rmse == t1[2].rmse);
    auto other = run_mc(spec, methods, 6, 778, 1);
    CHECK(other[2].rmse != t1[2].rmse);
}

TEST_CASE("single-replicate error collapses to the absolute bias") {
    ScenarioSpec spec;
    spec.propensity = PropModel::I;
    spec.outcome = OutModel::A;
    spec.n = 50;
    spec.p = 4;
    auto t = run_mc(spec, {WeightScheme::uniform, WeightScheme::ebw}, 1, 5, 1);
    for (const auto& row : t) CHECK(row.rmse == doctest::Approx(std::abs(row.bias)).epsilon(1e-12));
}

TEST_CASE("starved solver budgets are counted, not fatal") {
    ScenarioSpec spec;
    spec.propensity = PropModel::I;
    spec.outcome = OutModel::A;
    spec.n = 80;
    spec.p = 4;
    QpOptions opts;
    opts.max_iter = 3;
    auto t = run_mc(spec, {WeightScheme::iebw}, 4, 11, 1, opts);
    REQUIRE(t.size() == 1);
    CHECK(t[0].failures == 4);
    CHECK(t[0].reps == 4);
    CHECK(std::isfinite(t[0].rmse));
}
