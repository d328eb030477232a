#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ebal/ebal.h"
#include "rng.hpp"

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
    std::string path = "/tmp/ebal_capi_" + name;
    std::ofstream f(path);
    f << body;
    return path;
}

struct SampleHandle {
    ebal_sample* s = nullptr;
    ~SampleHandle() { ebal_sample_free(s); }
};

struct WeightsHandle {
    ebal_weights* w = nullptr;
    ~WeightsHandle() { ebal_weights_free(w); }
};

struct Text {
    char* t = nullptr;
    ~Text() { ebal_free_text(t); }
    std::string str() const { return t ? t : ""; }
};

SampleHandle random_sample(int n, int p, unsigned long long seed, bool outcome = true) {
    ebal::Rng rng(seed);
    std::vector<double> x((size_t)n * p);
    std::vector<int> a(n);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) x[(size_t)i * p + j] = rng.normal();
        a[i] = i % 2;
        y[i] = rng.normal() + a[i];
    }
    SampleHandle h;
    REQUIRE(ebal_sample_create(n, p, x.data(), a.data(), outcome ? y.data() : nullptr, &h.s) ==
            EBAL_OK);
    return h;
}

double parse_kv(const std::string& text, const std::string& key) {
    size_t at = text.find(key + "=");
    REQUIRE(at != std::string::npos);
    return std::strtod(text.c_str() + at + key.size() + 1, nullptr);
}

}  // namespace

TEST_CASE("version and error text are always available") {
    CHECK(std::strlen(ebal_version()) > 0);
    CHECK(ebal_last_error() != nullptr);
}

TEST_CASE("sample creation exposes shape and labels") {
    SampleHandle h = random_sample(10, 3, 1);
    CHECK(ebal_sample_n(h.s) == 10);
    CHECK(ebal_sample_p(h.s) == 3);
    CHECK(ebal_sample_groups(h.s) == 2);
    CHECK(ebal_sample_has_outcome(h.s) == 1);
    CHECK(ebal_sample_label(h.s, 0) == 0);
    CHECK(ebal_sample_label(h.s, 1) == 1);
    CHECK(std::string(ebal_sample_column_name(h.s, 0)) == "x1");
    CHECK(std::string(ebal_sample_column_name(h.s, 2)) == "x3");
    CHECK(std::string(ebal_sample_column_name(h.s, 7)) == "");

    SampleHandle noy = random_sample(8, 2, 2, false);
    CHECK(ebal_sample_has_outcome(noy.s) == 0);
}

TEST_CASE("argument and data failures map to distinct codes") {
    CHECK(ebal_sample_create(4, 1, nullptr, nullptr, nullptr, nullptr) == EBAL_ERR_INVALID);
    CHECK(ebal_sample_create(0, 1, nullptr, nullptr, nullptr, nullptr) == EBAL_ERR_INVALID);

    ebal_sample* out = nullptr;
    CHECK(ebal_sample_read("/tmp/ebal_no_such_file.csv", "a", nullptr, nullptr, nullptr, &out) ==
          EBAL_ERR_IO);
    CHECK(std::strlen(ebal_last_error()) > 0);

    std::string path = write_temp("codes.csv", "y,a,x1\n1.0,0,0.5\n2.0,1,0.25\n3.0,0,1.5\n");
    CHECK(ebal_sample_read(path.c_str(), "nope", "y", nullptr, nullptr, &out) == EBAL_ERR_DATA);
    CHECK(ebal_sample_read(path.c_str(), "x1", "y", nullptr, nullptr, &out) == EBAL_ERR_DATA);

    double x[4] = {0.0, 1.0, 2.0, 3.0};
    int a[4] = {0, 0, 1, 1};
    SampleHandle h;
    REQUIRE(ebal_sample_create(4, 1, x, a, nullptr, &h.s) == EBAL_OK);
    ebal_weights* w = nullptr;
    CHECK(ebal_weights_solve(h.s, "nope", 0.0, 0, &w) == EBAL_ERR_DATA);
    CHECK(ebal_weights_solve(nullptr, "ebw", 0.0, 0, &w) == EBAL_ERR_INVALID);
}

TEST_CASE("file loading honors column roles") {
    std::string path = write_temp(
        "roles.csv", "y,a,x1,x2,junk\n1.0,0,0.5,1.0,q\n2.0,1,0.25,2.0,w\n3.0,0,1.5,0.0,e\n"
                     "1.5,1,0.75,1.5,r\n");
    SampleHandle h;
    REQUIRE(ebal_sample_read(path.c_str(), "a", "y", "x1,x2", nullptr, &h.s) == EBAL_OK);
    CHECK(ebal_sample_n(h.s) == 4);
    CHECK(ebal_sample_p(h.s) == 2);
    CHECK(ebal_sample_has_outcome(h.s) == 1);

    SampleHandle h2;
    REQUIRE(ebal_sample_read(path.c_str(), "a", nullptr, nullptr, "junk,y", &h2.s) == EBAL_OK);
    CHECK(ebal_sample_p(h2.s) == 2);
    CHECK(ebal_sample_has_outcome(h2.s) == 0);

    ebal_sample* bad = nullptr;
    CHECK(ebal_sample_read(path.c_str(), "a", nullptr, "x1,missing", nullptr, &bad) ==
          EBAL_ERR_DATA);
}

TEST_CASE("weight solving round-trips through the handle") {
    SampleHandle h = random_sample(30, 2, 3);
    WeightsHandle w;
    REQUIRE(ebal_weights_solve(h.s, "iebw", 0.0, 0, &w.w) == EBAL_OK);
    CHECK(std::string(ebal_weights_method(w.w)) == "iebw");
    CHECK(std::string(ebal_weights_status(w.w)) == "converged");
    CHECK(ebal_weights_iterations(w.w) > 0);
    CHECK(ebal_weights_energy(w.w) >= 0.0);
    CHECK(ebal_weights_a5(w.w) > 0.0);

    std::vector<double> wv(30);
    REQUIRE(ebal_weights_get(w.w, wv.data()) == EBAL_OK);
    double s0 = 0.0, s1 = 0.0;
    for (int i = 0; i < 30; ++i) {
        CHECK(wv[i] >= 0.0);
        (i % 2 ? s1 : s0) += wv[i];
    }
    CHECK(s0 == doctest::Approx(15.0).epsilon(1e-9));
    CHECK(s1 == doctest::Approx(15.0).epsilon(1e-9));

    Text rep;
    REQUIRE(ebal_weights_report(w.w, &rep.t) == EBAL_OK);
    std::string text = rep.str();
    CHECK(text.find("method=iebw\n") != std::string::npos);
    CHECK(text.find("status=converged\n") != std::string::npos);
    CHECK(text.find("energy_objective=") != std::string::npos);
    CHECK(text.find("energy_total=") != std::string::npos);
    CHECK(text.find("a5_stat=") != std::string::npos);
    CHECK(parse_kv(text, "energy_objective") ==
          doctest::Approx(ebal_weights_energy(w.w)).epsilon(1e-15));

    // the audit total equals the report total recomputed from the sample
    double two = 0.0, three = 0.0;
    REQUIRE(ebal_energy_terms(h.s, wv.data(), &two, &three) == EBAL_OK);
    CHECK(three == doctest::Approx(ebal_weights_energy_total(w.w)).epsilon(1e-9));
    CHECK(two <= three + 1e-12);
}

TEST_CASE("weight files round-trip at full precision") {
    SampleHandle h = random_sample(12, 2, 4);
    WeightsHandle w;
    REQUIRE(ebal_weights_solve(h.s, "ebw", 0.0, 0, &w.w) == EBAL_OK);
    std::vector<double> orig(12);
    REQUIRE(ebal_weights_get(w.w, orig.data()) == EBAL_OK);

    std::string path = "/tmp/ebal_capi_weights.tsv";
    REQUIRE(ebal_weights_write(w.w, path.c_str()) == EBAL_OK);
    std::vector<double> back(12);
    REQUIRE(ebal_weight_vector_read(path.c_str(), 12, back.data()) == EBAL_OK);
    for (int i = 0; i < 12; ++i) CHECK(back[i] == orig[i]);

    CHECK(ebal_weight_vector_read(path.c_str(), 11, back.data()) == EBAL_ERR_DATA);
    CHECK(ebal_weight_vector_read("/tmp/ebal_missing.tsv", 12, back.data()) == EBAL_ERR_IO);
}

TEST_CASE("propensity weights normalize within groups") {
    SampleHandle h = random_sample(40, 3, 5);
    std::vector<double> w(40);
    REQUIRE(ebal_ipw_weights(h.s, w.data()) == EBAL_OK);
    double s0 = 0.0, s1 = 0.0;
    for (int i = 0; i < 40; ++i) {
        CHECK(w[i] > 0.0);
        (i % 2 ? s1 : s0) += w[i];
    }
    CHECK(s0 == doctest::Approx(20.0).epsilon(1e-9));
    CHECK(s1 == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("balance text carries the report keys") {
    SampleHandle h = random_sample(20, 2, 6);
    Text t;
    REQUIRE(ebal_balance_text(h.s, nullptr, 0, 1, &t.t) == EBAL_OK);
    std::string text = t.str();
    CHECK(text.find("energy_two_term\t") == 0);
    CHECK(text.find("energy_three_term\t") != std::string::npos);
    CHECK(text.find("weight_max_over_cuberoot_n\t") != std::string::npos);
    CHECK(text.find("covariate\tsmd\trimse1") != std::string::npos);
}

TEST_CASE("point estimates match hand arithmetic") {
    double x[4] = {0.0, 1.0, 2.0, 3.0};
    int a[4] = {1, 0, 1, 0};
    double y[4] = {3.0, 1.0, 5.0, 3.0};
    SampleHandle h;
    REQUIRE(ebal_sample_create(4, 1, x, a, y, &h.s) == EBAL_OK);

    double est = 0.0;
    REQUIRE(ebal_point_estimate(h.s, nullptr, "ate", 0, 0, &est) == EBAL_OK);
    CHECK(est == doctest::Approx(2.0).epsilon(1e-12));
    REQUIRE(ebal_point_estimate(h.s, nullptr, "att", 0, 0, &est) == EBAL_OK);
    CHECK(est == doctest::Approx(2.0).epsilon(1e-12));
    REQUIRE(ebal_point_estimate(h.s, nullptr, "contrast", 0, 1, &est) == EBAL_OK);
    CHECK(est == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(ebal_point_estimate(h.s, nullptr, "nope", 0, 0, &est) == EBAL_ERR_DATA);
    CHECK(ebal_point_estimate(h.s, nullptr, "contrast", 0, 7, &est) == EBAL_ERR_DATA);
}

TEST_CASE("bootstrap intervals are seed-deterministic across jobs") {
    SampleHandle h = random_sample(36, 2, 7);
    double p1, se1, lo1, hi1, p3, se3, lo3, hi3;
    int rd1 = -1, rd3 = -1;
    REQUIRE(ebal_bootstrap_estimate(h.s, "ebw", "ate", 0, 0, 60, 99, 1, 0.0, 0, &p1, &se1, &lo1,
                                    &hi1, &rd1) == EBAL_OK);
    REQUIRE(ebal_bootstrap_estimate(h.s, "ebw", "ate", 0, 0, 60, 99, 3, 0.0, 0, &p3, &se3, &lo3,
                                    &hi3, &rd3) == EBAL_OK);
    CHECK(p1 == p3);
    CHECK(se1 == se3);
    CHECK(lo1 == lo3);
    CHECK(hi1 == hi3);
    CHECK(rd1 == rd3);
    CHECK(lo1 <= p1);
    CHECK(p1 <= hi1);
    CHECK(se1 >= 0.0);

    CHECK(ebal_bootstrap_estimate(h.s, "nope", "ate", 0, 0, 20, 1, 1, 0.0, 0, &p1, &se1, &lo1,
                                  &hi1, nullptr) == EBAL_ERR_DATA);
}

TEST_CASE("benchmark tables are reproducible byte for byte") {
    Text t1, t2, t3;
    REQUIRE(ebal_mc_table("I", "A", 50, 4, 0, 4, 21, 1, "uniform,ipw", 0.0, 0, &t1.t) == EBAL_OK);
    REQUIRE(ebal_mc_table("I", "A", 50, 4, 0, 4, 21, 2, "uniform,ipw", 0.0, 0, &t2.t) == EBAL_OK);
    REQUIRE(ebal_mc_table("I", "A", 50, 4, 0, 4, 22, 1, "uniform,ipw", 0.0, 0, &t3.t) == EBAL_OK);
    CHECK(t1.str() == t2.str());
    CHECK(t1.str() != t3.str());
    CHECK(t1.str().find("method\trmse\tbias\treps\tfailures\n") == 0);
    CHECK(t1.str().find("\nuniform\t") != std::string::npos);
    CHECK(t1.str().find("\nipw\t") != std::string::npos);

    Text bad;
    CHECK(ebal_mc_table("I", "A", 50, 4, 0, 4, 21, 1, "nope", 0.0, 0, &bad.t) == EBAL_ERR_DATA);
    CHECK(ebal_mc_table("IX", "A", 50, 4, 0, 4, 21, 1, "uniform", 0.0, 0, &bad.t) ==
          EBAL_ERR_DATA);
}

TEST_CASE("scenario effect oracle is exact for treatment-free surfaces") {
    double tau = -1.0;
    REQUIRE(ebal_true_tau("IV", "A", 250, 10, 0, &tau) == EBAL_OK);
    CHECK(tau == 0.0);
    REQUIRE(ebal_true_tau("I", "B", 250, 10, 0, &tau) == EBAL_OK);
    CHECK(tau == 0.0);
    CHECK(ebal_true_tau("I", "F", 250, 10, 0, &tau) == EBAL_ERR_DATA);
}

TEST_CASE("rule fitting through the flat interface") {
    SampleHandle h = random_sample(60, 3, 8);
    std::vector<double> coef(3);
    double intercept = 0.0;
    int iters = 0, conv = 0;
    REQUIRE(ebal_itr_fit(h.s, nullptr, "logistic", -1.0, coef.data(), &intercept, &iters,
                         &conv) == EBAL_OK);
    for (double c : coef) CHECK(std::isfinite(c));
    CHECK(std::isfinite(intercept));
    CHECK(iters > 0);

    CHECK(ebal_itr_fit(h.s, nullptr, "nope", -1.0, coef.data(), &intercept, nullptr, nullptr) ==
          EBAL_ERR_DATA);
    SampleHandle noy = random_sample(20, 3, 9, false);
    CHECK(ebal_itr_fit(noy.s, nullptr, "logistic", -1.0, coef.data(), &intercept, nullptr,
                       nullptr) == EBAL_ERR_DATA);
}

TEST_CASE("rule benchmark reports a self-consistent summary") {
    Text t1, t2;
    REQUIRE(ebal_itr_scenario(1, 120, 2, 5, 1, "iebw", "logistic", -1.0, 0.0, 0, &t1.t) ==
            EBAL_OK);
    REQUIRE(ebal_itr_scenario(1, 120, 2, 5, 2, "iebw", "logistic", -1.0, 0.0, 0, &t2.t) ==
            EBAL_OK);
    CHECK(t1.str() == t2.str());
    std::string text = t1.str();
    // reps counts the replicates that produced a rule; the rest are failures
    CHECK(parse_kv(text, "reps") + parse_kv(text, "failures") == 2.0);
    CHECK(parse_kv(text, "reps") >= 1.0);
    double mv = parse_kv(text, "mean_value");
    double ov = parse_kv(text, "oracle_value");
    double mc = parse_kv(text, "mean_misclass");
    CHECK(std::isfinite(mv));
    CHECK(mv <= ov + 1e-9);
    CHECK(mc >= 0.0);
    CHECK(mc <= 1.0);
    CHECK(ebal_itr_scenario(3, 120, 2, 5, 1, "iebw", "logistic", -1.0, 0.0, 0, &t2.t) ==
          EBAL_ERR_DATA);
}
