#include <cmath>

#include "balancing.hpp"
#include "doctest.h"
#include "energy.hpp"
#include "estimation.hpp"
#include "oracles.hpp"
#include "qp.hpp"
#include "rng.hpp"
#include "sample.hpp"

using namespace ebal;

namespace {

Sample random_binary_sample(int n, int p, Rng& rng) {
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
    Eigen::VectorXi A(n);
    for (;;) {
        for (int i = 0; i < n; ++i) A[i] = rng.bernoulli(0.5) ? 1 : 0;
        int n1 = A.sum();
        if (n1 >= 3 && n - n1 >= 3) break;
    }
    return make_sample(X, A);
}

Sample three_arm_sample(int per_group, int p, Rng& rng) {
    int n = 3 * per_group;
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
    Eigen::VectorXi A(n);
    for (int i = 0; i < n; ++i) A[i] = i / per_group;
    return make_sample(X, A);
}

double two_term(const Sample& s, const Eigen::MatrixXd& D, const Eigen::VectorXd& w) {
    return weighted_energy_distance(D, s.A, w, 1).value +
           weighted_energy_distance(D, s.A, w, 0).value;
}

double three_term(const Sample& s, const Eigen::MatrixXd& D, const Eigen::VectorXd& w) {
    return two_term(s, D, w) + between_group_weighted_energy(D, s.A, w, 1, 0);
}

}  // namespace

TEST_CASE("method names round-trip") {
    for (auto m : {WeightMethod::ebw, WeightMethod::iebw, WeightMethod::att, WeightMethod::multi,
                   WeightMethod::multi_improved})
        CHECK(parse_method(method_name(m)) == m);
    CHECK_THROWS_AS(parse_method("nope"), DataError);
}

TEST_CASE("ebw objective equals the energy sum at any feasible point") {
    Rng rng(71);
    Sample s = random_binary_sample(12, 2, rng);
    Eigen::MatrixXd D = distance_matrix(s.X);
    QuadraticProgram prob = ebw_problem(s, D);

    Eigen::VectorXd ones = Eigen::VectorXd::Ones(s.n());
    CHECK(oracle::qp_objective(prob, ones) == doctest::Approx(two_term(s, D, ones)).epsilon(1e-10));

    Eigen::VectorXd w(s.n());
    for (Eigen::Index i = 0; i < s.n(); ++i) w[i] = rng.uniform(0.1, 2.0);
    w = normalize_group_weights(s.A, w);
    CHECK(oracle::qp_objective(prob, w) == doctest::Approx(two_term(s, D, w)).epsilon(1e-10));
}

TEST_CASE("ebw on a two-point sample is the forced hand value") {
    Eigen::MatrixXd X(2, 1);
    X << 0.0, 1.0;
    Eigen::VectorXi A(2);
    A << 1, 0;
    Sample s = make_sample(X, A);
    QuadraticProgram prob = ebw_problem(s, distance_matrix(s.X));
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);
    CHECK(oracle::qp_objective(prob, ones) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("iebw objective equals the three-term energy sum") {
    Rng rng(73);
    Sample s = random_binary_sample(10, 2, rng);
    Eigen::MatrixXd D = distance_matrix(s.X);
    QuadraticProgram prob = iebw_problem(s, D);
    Eigen::VectorXd w(s.n());
    for (Eigen::Index i = 0; i < s.n(); ++i) w[i] = rng.uniform(0.1, 2.0);
    w = normalize_group_weights(s.A, w);
    CHECK(oracle::qp_objective(prob, w) == doctest::Approx(three_term(s, D, w)).epsilon(1e-10));
}

TEST_CASE("identical treated and control point sets solve to uniform weights") {
    Eigen::MatrixXd X(8, 1);
    X << 0.0, 1.0, 2.0, 3.0, 0.0, 1.0, 2.0, 3.0;
    Eigen::VectorXi A(8);
    A << 1, 1, 1, 1, 0, 0, 0, 0;
    Sample s = make_sample(X, A);
    for (auto m : {WeightMethod::ebw, WeightMethod::iebw}) {
        BalancingWeights bw = balance(s, m);
        CHECK((bw.w - Eigen::VectorXd::Ones(8)).cwiseAbs().maxCoeff() < 1e-5);
        if (m == WeightMethod::iebw) {
            Eigen::MatrixXd D = distance_matrix(s.X);
            CHECK(between_group_weighted_energy(D, s.A, bw.w, 1, 0) <= 1e-8);
        }
    }
}

TEST_CASE("iebw cannot lose to ebw weights on the three-term objective") {
    Rng rng(79);
    for (int rep = 0; rep < 3; ++rep) {
        Sample s = random_binary_sample(16, 2, rng);
        Eigen::MatrixXd D = distance_matrix(s.X);
        BalancingWeights ebw = balance(s, D, WeightMethod::ebw);
        BalancingWeights iebw = balance(s, D, WeightMethod::iebw);
        CHECK(three_term(s, D, iebw.w) <= three_term(s, D, ebw.w) + 1e-6);
        CHECK(between_group_weighted_energy(D, s.A, iebw.w, 1, 0) <=
              between_group_weighted_energy(D, s.A, ebw.w, 1, 0) + 1e-6);
        CHECK(two_term(s, D, ebw.w) <= two_term(s, D, iebw.w) + 1e-6);
    }
}

TEST_CASE("ebw dominates uniform and fitted propensity weights") {
    Rng rng(83);
    Sample s = random_binary_sample(30, 3, rng);
    Eigen::MatrixXd D = distance_matrix(s.X);
    BalancingWeights bw = balance(s, D, WeightMethod::ebw);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(s.n());
    Eigen::VectorXd ipw = logistic_ipw_weights(s);
    double opt = two_term(s, D, bw.w);
    CHECK(opt <= two_term(s, D, ones) + 1e-8);
    CHECK(opt <= two_term(s, D, ipw) + 1e-8);
}

TEST_CASE("att fixes treated weights at one and balances controls") {
    Rng rng(89);
    Sample s = random_binary_sample(20, 2, rng);
    Eigen::MatrixXd D = distance_matrix(s.X);
    BalancingWeights bw = balance(s, D, WeightMethod::att);
    CHECK(bw.method == WeightMethod::att);
    CHECK(bw.target_label.has_value());
    CHECK(*bw.target_label == 1);
    double csum = 0.0;
    for (Eigen::Index i = 0; i < s.n(); ++i) {
        if (s.A[i] == 1)
            CHECK(bw.w[i] == 1.0);
        else
            csum += bw.w[i];
    }
    CHECK(csum == doctest::Approx((double)(s.n() - s.A.sum())).epsilon(1e-6));
}

TEST_CASE("att objective at uniform weights is the plain two-sample energy") {
    Rng rng(97);
    Sample s = random_binary_sample(14, 2, rng);
    Eigen::MatrixXd D = distance_matrix(s.X);
    QuadraticProgram prob = att_problem(s, D);

    auto ctl = group_indices(s.A, 0);
    auto trt = group_indices(s.A, 1);
    Eigen::MatrixXd Xc((int)ctl.size(), s.p()), Xt((int)trt.size(), s.p());
    for (int k = 0; k < (int)ctl.size(); ++k) Xc.row(k) = s.X.row(ctl[k]);
    for (int k = 0; k < (int)trt.size(); ++k) Xt.row(k) = s.X.row(trt[k]);

    Eigen::VectorXd ones = Eigen::VectorXd::Ones((int)ctl.size());
    CHECK(oracle::qp_objective(prob, ones) ==
          doctest::Approx(energy_distance(Xc, Xt)).epsilon(1e-10));
}

TEST_CASE("att with control rows equal to treated rows is already balanced") {
    Eigen::MatrixXd X(6, 1);
    X << 0.0, 1.0, 2.0, 0.0, 1.0, 2.0;
    Eigen::VectorXi A(6);
    A << 1, 1, 1, 0, 0, 0;
    Sample s = make_sample(X, A);
    BalancingWeights bw = balance(s, WeightMethod::att);
    CHECK((bw.w - Eigen::VectorXd::Ones(6)).cwiseAbs().maxCoeff() < 1e-5);
    CHECK(bw.energy_at_solution.size() == 1);
    CHECK(bw.energy_at_solution[0].value <= 1e-8);
}

TEST_CASE("single control unit is forced to its group sum") {
    Eigen::MatrixXd X(4, 1);
    X << 0.0, 1.0, 2.0, 0.5;
    Eigen::VectorXi A(4);
    A << 1, 1, 1, 0;
    Sample s = make_sample(X, A);
    BalancingWeights bw = balance(s, WeightMethod::att);
    CHECK(bw.w[3] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("two-group multi problem is exactly the ebw problem") {
    Rng rng(101);
    Sample s = random_binary_sample(12, 2, rng);
    Eigen::MatrixXd D = distance_matrix(s.X);
    QuadraticProgram a = ebw_problem(s, D);
    QuadraticProgram b = multi_problem(s, D, false);
    CHECK((a.P - b.P).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.q - b.q).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.constant == b.constant);

    BalancingWeights wa = balance(s, D, WeightMethod::ebw);
    BalancingWeights wb = balance(s, D, WeightMethod::multi);
    CHECK((wa.w - wb.w).cwiseAbs().maxCoeff() < 1e-8);

    QuadraticProgram c = iebw_problem(s, D);
    QuadraticProgram d = multi_problem(s, D, true);
    CHECK((c.P - d.P).cwiseAbs().maxCoeff() == 0.0);
    CHECK((c.q - d.q).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("three-arm objectives audit against the energy module") {
    Rng rng(103);
    Sample s = three_arm_sample(3, 2, rng);
    Eigen::MatrixXd D = distance_matrix(s.X);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(s.n());

    double one_sided = 0.0;
    for (int lab : s.labels) one_sided += weighted_energy_distance(D, s.A, ones, lab).value;
    CHECK(oracle::qp_objective(multi_problem(s, D, false), ones) ==
          doctest::Approx(one_sided).epsilon(1e-10));

    double pairs = 0.0;
    for (size_t a = 0; a < s.labels.size(); ++a)
        for (size_t b = a + 1; b < s.labels.size(); ++b)
            pairs += between_group_weighted_energy(D, s.A, ones, s.labels[a], s.labels[b]);
    CHECK(oracle::qp_objective(multi_problem(s, D, true), ones) ==
          doctest::Approx(one_sided + pairs).epsilon(1e-10));
}

TEST_CASE("three identical groups solve to uniform weights") {
    Eigen::MatrixXd X(9, 1);
    X << 0.0, 1.0, 2.0, 0.0, 1.0, 2.0, 0.0, 1.0, 2.0;
    Eigen::VectorXi A(9);
    A << 0, 0, 0, 1, 1, 1, 2, 2, 2;
    Sample s = make_sample(X, A);
    for (auto m : {WeightMethod::multi, WeightMethod::multi_improved}) {
        BalancingWeights bw = balance(s, m);
        CHECK((bw.w - Eigen::VectorXd::Ones(9)).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("solve_weights audits energies and records solver metadata") {
    Rng rng(107);
    Sample s = random_binary_sample(18, 2, rng);
    Eigen::MatrixXd D = distance_matrix(s.X);
    BalancingWeights bw = balance(s, D, WeightMethod::iebw);

    CHECK(bw.solver.status == QpStatus::converged);
    CHECK(bw.warnings.empty());
    CHECK(bw.w.minCoeff() >= 0.0);
    CHECK(bw.energy_at_solution.size() == 3);
    double audited = 0.0;
    for (const auto& t : bw.energy_at_solution) audited += t.value;
    CHECK(audited == doctest::Approx(bw.solver.objective).epsilon(1e-8));
    CHECK(bw.energy_total == doctest::Approx(three_term(s, D, bw.w)).epsilon(1e-10));
    CHECK(bw.a5_stat == doctest::Approx(bw.w.maxCoeff() / std::cbrt((double)s.n())));

    for (int lab : s.labels) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < s.n(); ++i)
            if (s.A[i] == lab) sum += bw.w[i];
        double target = (double)group_indices(s.A, lab).size();
        CHECK(sum == doctest::Approx(target).epsilon(1e-6));
    }
}

TEST_CASE("non-convergence is carried as a warning not a silent success") {
    Rng rng(109);
    Sample s = random_binary_sample(20, 2, rng);
    Eigen::MatrixXd D = distance_matrix(s.X);
    QpOptions opts;
    opts.tol = 1e-14;
    opts.max_iter = 2;
    BalancingWeights bw = balance(s, D, WeightMethod::ebw, opts);
    CHECK(bw.solver.status == QpStatus::max_iter);
    CHECK(!bw.warnings.empty());
    CHECK(bw.w.allFinite());
}

TEST_CASE("balancing rejects invalid samples") {
    Eigen::MatrixXd X(5, 1);
    X << 0.0, 1.0, 2.0, 3.0, 4.0;
    Eigen::VectorXi A(5);
    A << 0, 1, 2, 0, 1;
    Sample s = make_sample(X, A);  // three labels
    CHECK_THROWS_AS(balance(s, WeightMethod::ebw), DataError);
    CHECK_THROWS_AS(balance(s, WeightMethod::iebw), DataError);
    CHECK_THROWS_AS(balance(s, WeightMethod::att), DataError);
    // multi accepts any group sizes; the singleton group is forced to one
    BalancingWeights bw = balance(s, WeightMethod::multi);
    CHECK(bw.w[2] == doctest::Approx(1.0).epsilon(1e-8));
}
