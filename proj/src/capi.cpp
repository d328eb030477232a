#include "ebal/ebal.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "balancing.hpp"
#include "diagnostics.hpp"
#include "energy.hpp"
#include "estimation.hpp"
#include "parallel.hpp"
#include "sample.hpp"
#include "simulation.hpp"
#include "table.hpp"

using namespace ebal;

struct ebal_sample {
    Sample s;
};

struct ebal_weights {
    BalancingWeights bw;
};

namespace {

thread_local std::string g_error;

template <typename F>
int guard(F&& f) {
    try {
        f();
        return EBAL_OK;
    } catch (const DataError& e) {
        g_error = e.what();
        return EBAL_ERR_DATA;
    } catch (const SolverError& e) {
        g_error = e.what();
        return EBAL_ERR_SOLVER;
    } catch (const std::runtime_error& e) {
        g_error = e.what();  // table io is the only plain runtime_error source
        return EBAL_ERR_IO;
    } catch (const std::exception& e) {
        g_error = e.what();
        return EBAL_ERR_INVALID;
    }
}

int invalid(const std::string& msg) {
    g_error = msg;
    return EBAL_ERR_INVALID;
}

char* dup_text(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) {
        size_t a = cur.find_first_not_of(" \t");
        size_t b = cur.find_last_not_of(" \t");
        if (a != std::string::npos) out.push_back(cur.substr(a, b - a + 1));
    }
    return out;
}

QpOptions make_opts(double tol, int max_iter) {
    QpOptions opts;
    if (tol > 0.0) opts.tol = tol;
    if (max_iter > 0) opts.max_iter = max_iter;
    return opts;
}

Eigen::VectorXd weights_or_uniform(const ebal_sample* s, const double* w) {
    if (!w) return Eigen::VectorXd::Ones(s->s.n());
    return Eigen::Map<const Eigen::VectorXd>(w, s->s.n());
}

SurrogateLoss parse_loss(const char* loss) {
    std::string l = loss;
    if (l == "logistic") return SurrogateLoss::logistic;
    if (l == "hinge") return SurrogateLoss::hinge;
    throw DataError("unknown loss: " + l);
}

}  // namespace

extern "C" {

const char* ebal_version(void) { return "1.0.0"; }

const char* ebal_last_error(void) { return g_error.c_str(); }

void ebal_free_text(char* text) { delete[] text; }

int ebal_sample_read(const char* path, const char* treatment, const char* outcome,
                     const char* covariates_csv, const char* ignore_csv, ebal_sample** out) {
    if (!path || !treatment || !*treatment || !out) return invalid("null argument");
    return guard([&] {
        TextTable t = read_table(path);
        std::map<std::string, Role> roles;
        if (covariates_csv) {
            std::set<std::string> keep;
            for (const auto& c : split_csv(covariates_csv)) keep.insert(c);
            for (const auto& c : keep)
                if (std::find(t.header.begin(), t.header.end(), c) == t.header.end())
                    throw DataError("covariate column not in file: " + c);
            for (const auto& col : t.header)
                roles[col] = keep.count(col) ? Role::covariate : Role::ignore;
        }
        if (ignore_csv)
            for (const auto& c : split_csv(ignore_csv)) roles[c] = Role::ignore;
        roles[treatment] = Role::treatment;
        if (outcome && *outcome) roles[outcome] = Role::outcome;
        *out = new ebal_sample{load_table(path, roles)};
    });
}

int ebal_sample_create(int n, int p, const double* x, const int* labels, const double* y,
                       ebal_sample** out) {
    if (!x || !labels || !out) return invalid("null argument");
    if (n < 1 || p < 1) return invalid("n and p must be positive");
    return guard([&] {
        Eigen::MatrixXd X(n, p);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j) X(i, j) = x[(size_t)i * p + j];
        Eigen::VectorXi A = Eigen::Map<const Eigen::VectorXi>(labels, n);
        Eigen::VectorXd Y;
        if (y) Y = Eigen::Map<const Eigen::VectorXd>(y, n);
        *out = new ebal_sample{make_sample(std::move(X), std::move(A), std::move(Y))};
    });
}

void ebal_sample_free(ebal_sample* s) { delete s; }

int ebal_sample_n(const ebal_sample* s) { return (int)s->s.n(); }
int ebal_sample_p(const ebal_sample* s) { return (int)s->s.p(); }
int ebal_sample_groups(const ebal_sample* s) { return (int)s->s.labels.size(); }
int ebal_sample_has_outcome(const ebal_sample* s) { return s->s.has_outcome() ? 1 : 0; }
int ebal_sample_label(const ebal_sample* s, int i) { return s->s.A(i); }

const char* ebal_sample_column_name(const ebal_sample* s, int j) {
    if (j < 0 || j >= (int)s->s.covariate_names.size()) return "";
    return s->s.covariate_names[(size_t)j].c_str();
}

int ebal_weights_solve(const ebal_sample* s, const char* method, double tol, int max_iter,
                       ebal_weights** out) {
    if (!s || !method || !out) return invalid("null argument");
    return guard([&] {
        WeightMethod m = parse_method(method);
        // same convention as the estimation pipeline: distances on
        // standardized covariates
        *out = new ebal_weights{balance(standardize(s->s).first, m, make_opts(tol, max_iter))};
    });
}

void ebal_weights_free(ebal_weights* w) { delete w; }

int ebal_weights_get(const ebal_weights* w, double* out) {
    if (!w || !out) return invalid("null argument");
    Eigen::Map<Eigen::VectorXd>(out, w->bw.w.size()) = w->bw.w;
    return EBAL_OK;
}

const char* ebal_weights_method(const ebal_weights* w) {
    thread_local std::string name;
    name = method_name(w->bw.method);
    return name.c_str();
}

const char* ebal_weights_status(const ebal_weights* w) {
    switch (w->bw.solver.status) {
        case QpStatus::converged: return "converged";
        case QpStatus::max_iter: return "max_iter";
        default: return "infeasible";
    }
}

int ebal_weights_iterations(const ebal_weights* w) { return w->bw.solver.iterations; }

double ebal_weights_energy(const ebal_weights* w) {
    double v = 0.0;
    for (const auto& t : w->bw.energy_at_solution) v += t.value;
    return v;
}

double ebal_weights_energy_total(const ebal_weights* w) { return w->bw.energy_total; }

double ebal_weights_a5(const ebal_weights* w) { return w->bw.a5_stat; }

int ebal_weights_report(const ebal_weights* w, char** out_text) {
    if (!w || !out_text) return invalid("null argument");
    return guard([&] {
        std::ostringstream os;
        os << "method=" << method_name(w->bw.method) << "\n";
        if (w->bw.target_label) os << "target_label=" << *w->bw.target_label << "\n";
        os << "status=" << ebal_weights_status(w) << "\n";
        os << "iterations=" << w->bw.solver.iterations << "\n";
        for (const auto& t : w->bw.energy_at_solution)
            os << "energy[" << t.name << "]=" << format_full(t.value) << "\n";
        os << "energy_objective=" << format_full(ebal_weights_energy(w)) << "\n";
        os << "energy_total=" << format_full(w->bw.energy_total) << "\n";
        os << "a5_stat=" << format_full(w->bw.a5_stat) << "\n";
        for (const auto& msg : w->bw.warnings) os << "warning=" << msg << "\n";
        *out_text = dup_text(os.str());
    });
}

int ebal_weights_write(const ebal_weights* w, const char* path) {
    if (!w || !path) return invalid("null argument");
    return guard([&] {
        std::vector<std::vector<std::string>> rows;
        for (Eigen::Index i = 0; i < w->bw.w.size(); ++i)
            rows.push_back({std::to_string(i + 1), format_full(w->bw.w(i))});
        write_table(path, {"row", "weight"}, rows);
    });
}

int ebal_weight_vector_read(const char* path, int expected_n, double* out) {
    if (!path || !out) return invalid("null argument");
    return guard([&] {
        TextTable t = read_table(path);
        size_t col = t.header.size();
        for (size_t j = 0; j < t.header.size(); ++j)
            if (t.header[j] == "weight") col = j;
        if (col == t.header.size()) {
            if (t.header.size() != 1)
                throw DataError("weight file needs a 'weight' column or a single column");
            col = 0;
        }
        if ((int)t.rows.size() != expected_n)
            throw DataError("weight file has " + std::to_string(t.rows.size()) +
                            " rows but the data has " + std::to_string(expected_n));
        for (size_t i = 0; i < t.rows.size(); ++i) {
            double v;
            if (!parse_double(t.rows[i][col], v) || !std::isfinite(v))
                throw DataError("weight file row " + std::to_string(i + 2) +
                                ": bad value '" + t.rows[i][col] + "'");
            out[i] = v;
        }
    });
}

int ebal_ipw_weights(const ebal_sample* s, double* out) {
    if (!s || !out) return invalid("null argument");
    return guard([&] {
        Eigen::VectorXd w = logistic_ipw_weights(s->s);
        Eigen::Map<Eigen::VectorXd>(out, w.size()) = w;
    });
}

int ebal_balance_text(const ebal_sample* s, const double* w, int max_poly, int full,
                      char** out_text) {
    if (!s || !out_text) return invalid("null argument");
    return guard([&] {
        BalanceReport r =
            balance_report(s->s, weights_or_uniform(s, w), max_poly <= 0 ? 2 : max_poly);
        *out_text = dup_text(render_report(r, full != 0));
    });
}

int ebal_energy_terms(const ebal_sample* s, const double* w, double* two_term,
                      double* three_term) {
    if (!s || !two_term || !three_term) return invalid("null argument");
    return guard([&] {
        Eigen::VectorXd wn = normalize_group_weights(s->s.A, weights_or_uniform(s, w));
        Eigen::MatrixXd D = distance_matrix(standardize(s->s).first.X);
        double two = 0.0;
        for (int lab : s->s.labels) two += weighted_energy_distance(D, s->s.A, wn, lab).value;
        double three = two;
        for (size_t a = 0; a + 1 < s->s.labels.size(); ++a)
            for (size_t b = a + 1; b < s->s.labels.size(); ++b)
                three += between_group_weighted_energy(D, s->s.A, wn, s->s.labels[a],
                                                       s->s.labels[b]);
        *two_term = two;
        *three_term = three;
    });
}

int ebal_point_estimate(const ebal_sample* s, const double* w, const char* estimand,
                        int contrast_a, int contrast_b, double* out) {
    if (!s || !estimand || !out) return invalid("null argument");
    return guard([&] {
        Eigen::VectorXd wv = weights_or_uniform(s, w);
        std::string e = estimand;
        if (e == "ate")
            *out = weighted_ate(s->s, wv);
        else if (e == "att") {
            if (!s->s.binary()) throw DataError("att estimand needs 0/1 treatment");
            *out = weighted_contrast(s->s, wv, 1, 0);
        } else if (e == "contrast")
            *out = weighted_contrast(s->s, wv, contrast_a, contrast_b);
        else
            throw DataError("unknown estimand: " + e);
    });
}

int ebal_bootstrap_estimate(const ebal_sample* s, const char* scheme, const char* estimand,
                            int contrast_a, int contrast_b, int B, unsigned long long seed,
                            int jobs, double tol, int max_iter, double* point, double* se,
                            double* lo, double* hi, int* redraws) {
    if (!s || !scheme || !estimand || !point || !se || !lo || !hi)
        return invalid("null argument");
    return guard([&] {
        std::string e = estimand;
        Estimand est;
        if (e == "ate")
            est = Estimand::ate;
        else if (e == "att")
            est = Estimand::att;
        else if (e == "contrast")
            est = Estimand::contrast;
        else
            throw DataError("unknown estimand: " + e);
        BootstrapOptions opts;
        opts.B = B;
        opts.seed = seed;
        opts.contrast_a = contrast_a;
        opts.contrast_b = contrast_b;
        opts.jobs = jobs;
        opts.qp = make_opts(tol, max_iter);
        EstimateResult r = bootstrap(s->s, parse_scheme(scheme), est, opts);
        *point = r.point;
        *se = r.se.value();
        *lo = r.ci_low.value();
        *hi = r.ci_high.value();
        if (redraws) *redraws = r.redraws;
    });
}

int ebal_mc_table(const char* propensity, const char* outcome, int n, int p, int setup, int reps,
                  unsigned long long seed, int jobs, const char* methods_csv, double tol,
                  int max_iter, char** out_text) {
    if (!propensity || !outcome || !methods_csv || !out_text) return invalid("null argument");
    return guard([&] {
        ScenarioSpec spec;
        spec.propensity = parse_prop_model(propensity);
        spec.outcome = parse_out_model(outcome);
        spec.n = n;
        spec.p = p;
        spec.setup = setup;
        spec.seed = seed;
        std::vector<WeightScheme> methods;
        for (const auto& name : split_csv(methods_csv)) methods.push_back(parse_scheme(name));
        if (methods.empty()) throw DataError("no methods given");
        std::vector<McRow> rows = run_mc(spec, methods, reps, seed, jobs, make_opts(tol, max_iter));
        std::ostringstream os;
        os << "method\trmse\tbias\treps\tfailures\n";
        for (const auto& r : rows)
            os << r.method << "\t" << format_full(r.rmse) << "\t" << format_full(r.bias) << "\t"
               << r.reps << "\t" << r.failures << "\n";
        *out_text = dup_text(os.str());
    });
}

int ebal_true_tau(const char* propensity, const char* outcome, int n, int p, int setup,
                  double* out) {
    if (!propensity || !outcome || !out) return invalid("null argument");
    return guard([&] {
        ScenarioSpec spec;
        spec.propensity = parse_prop_model(propensity);
        spec.outcome = parse_out_model(outcome);
        spec.n = n;
        spec.p = p;
        spec.setup = setup;
        *out = true_tau(spec);
    });
}

int ebal_itr_fit(const ebal_sample* s, const double* w, const char* loss, double lambda,
                 double* coef, double* intercept, int* iterations, int* converged) {
    if (!s || !loss || !coef || !intercept) return invalid("null argument");
    return guard([&] {
        LinearRule rule = fit_itr(s->s, weights_or_uniform(s, w), parse_loss(loss), lambda);
        Eigen::Map<Eigen::VectorXd>(coef, rule.beta.size()) = rule.beta;
        *intercept = rule.intercept;
        if (iterations) *iterations = rule.iterations;
        if (converged) *converged = rule.converged ? 1 : 0;
    });
}

int ebal_itr_scenario(int scenario, int n, int reps, unsigned long long seed, int jobs,
                      const char* weight_method, const char* loss, double lambda, double tol,
                      int max_iter, char** out_text) {
    if (!weight_method || !loss || !out_text) return invalid("null argument");
    return guard([&] {
        if (reps < 1) throw DataError("need at least 1 replicate");
        WeightScheme scheme = parse_scheme(weight_method);
        SurrogateLoss sl = parse_loss(loss);
        QpOptions opts = make_opts(tol, max_iter);

        const int oracle_points = 200000;
        PotentialOutcomes oracle = itr_oracle(scenario, oracle_points, seed ^ 0x6f7261636c65ULL);
        double oracle_value = 0.0, oracle_fraction = 0.0;
        for (int i = 0; i < oracle_points; ++i) {
            oracle_value += std::max(oracle.mu0(i), oracle.mu1(i));
            oracle_fraction += oracle.mu1(i) > oracle.mu0(i) ? 1.0 : 0.0;
        }
        oracle_value /= oracle_points;
        oracle_fraction /= oracle_points;

        std::vector<double> value((size_t)reps, std::numeric_limits<double>::quiet_NaN());
        std::vector<double> misclass((size_t)reps, 0.0);
        parallel_for(jobs, reps, [&](int r) {
            std::uint64_t rep_seed = Rng::stream(seed, (std::uint64_t)r).next_u64();
            try {
                ItrData d = itr_scenario(scenario, n, rep_seed);
                Eigen::VectorXd w = compute_weights(d.sample, scheme, opts);
                LinearRule rule = fit_itr(d.sample, w, sl, lambda);
                double v = 0.0, mc = 0.0;
                for (int i = 0; i < oracle_points; ++i) {
                    bool treat = rule.decide(oracle.X.row(i));
                    v += treat ? oracle.mu1(i) : oracle.mu0(i);
                    if (treat != (oracle.mu1(i) > oracle.mu0(i))) mc += 1.0;
                }
                value[(size_t)r] = v / oracle_points;
                misclass[(size_t)r] = mc / oracle_points;
            } catch (const DataError&) {
            } catch (const SolverError&) {
            }
        });

        int ok = 0;
        double mean_v = 0.0, mean_mc = 0.0;
        for (int r = 0; r < reps; ++r)
            if (!std::isnan(value[(size_t)r])) {
                mean_v += value[(size_t)r];
                mean_mc += misclass[(size_t)r];
                ok++;
            }
        if (ok == 0) throw SolverError("every replicate failed");
        mean_v /= ok;
        mean_mc /= ok;
        double sd_v = 0.0;
        for (int r = 0; r < reps; ++r)
            if (!std::isnan(value[(size_t)r]))
                sd_v += (value[(size_t)r] - mean_v) * (value[(size_t)r] - mean_v);
        sd_v = ok > 1 ? std::sqrt(sd_v / (ok - 1)) : 0.0;

        std::ostringstream os;
        os << "scenario=" << scenario << "\n";
        os << "n=" << n << "\n";
        os << "reps=" << ok << "\n";
        os << "failures=" << reps - ok << "\n";
        os << "weight_method=" << scheme_name(scheme) << "\n";
        os << "loss=" << loss << "\n";
        os << "lambda=" << format_full(lambda < 0 ? 1.0 / n : lambda) << "\n";
        os << "mean_value=" << format_full(mean_v) << "\n";
        os << "sd_value=" << format_full(sd_v) << "\n";
        os << "mean_misclass=" << format_full(mean_mc) << "\n";
        os << "oracle_value=" << format_full(oracle_value) << "\n";
        os << "oracle_fraction=" << format_full(oracle_fraction) << "\n";
        *out_text = dup_text(os.str());
    });
}

}  // extern "C"
