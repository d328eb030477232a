#include "simulation.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>

#include "parallel.hpp"

namespace ebal {

namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_p(const Eigen::MatrixXd& Z, int need, const std::string& what) {
    if (Z.cols() < need)
        throw DataError(what + " needs at least " + std::to_string(need) + " covariates");
}

int prop_min_p(PropModel m) {
    switch (m) {
        case PropModel::I: return 4;
        case PropModel::II: return 4;
        case PropModel::III: return 8;
        case PropModel::IV: return 4;
        case PropModel::V: return 5;
        case PropModel::VI: return 8;
    }
    return 4;
}

int out_min_p(OutModel m) {
    switch (m) {
        case OutModel::A: return 4;
        case OutModel::B: return 4;
        case OutModel::C: return 5;
        case OutModel::D: return 7;
        case OutModel::E: return 4;
    }
    return 4;
}

}  // namespace

PropModel parse_prop_model(const std::string& name) {
    if (name == "I" || name == "1") return PropModel::I;
    if (name == "II" || name == "2") return PropModel::II;
    if (name == "III" || name == "3") return PropModel::III;
    if (name == "IV" || name == "4") return PropModel::IV;
    if (name == "V" || name == "5") return PropModel::V;
    if (name == "VI" || name == "6") return PropModel::VI;
    throw DataError("unknown propensity model: " + name);
}

OutModel parse_out_model(const std::string& name) {
    if (name == "A" || name == "a") return OutModel::A;
    if (name == "B" || name == "b") return OutModel::B;
    if (name == "C" || name == "c") return OutModel::C;
    if (name == "D" || name == "d") return OutModel::D;
    if (name == "E" || name == "e") return OutModel::E;
    throw DataError("unknown outcome model: " + name);
}

std::string prop_model_name(PropModel m) {
    switch (m) {
        case PropModel::I: return "I";
        case PropModel::II: return "II";
        case PropModel::III: return "III";
        case PropModel::IV: return "IV";
        case PropModel::V: return "V";
        case PropModel::VI: return "VI";
    }
    return "I";
}

std::string out_model_name(OutModel m) {
    switch (m) {
        case OutModel::A: return "A";
        case OutModel::B: return "B";
        case OutModel::C: return "C";
        case OutModel::D: return "D";
        case OutModel::E: return "E";
    }
    return "A";
}

int effective_setup(const ScenarioSpec& spec) {
    if (spec.setup == 1 || spec.setup == 2) return spec.setup;
    if (spec.setup != 0) throw DataError("covariate setup must be 1, 2 or 0 (auto)");
    bool forced = spec.propensity == PropModel::III || spec.outcome == OutModel::B ||
                  spec.outcome == OutModel::E;
    return forced ? 2 : 1;
}

Eigen::MatrixXd ar_covariance(int p) {
    if (p < 1) throw DataError("dimension must be positive");
    Eigen::MatrixXd S(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) S(i, j) = std::pow(-0.75, std::abs(i - j));
    return S;
}

Eigen::MatrixXd latent_covariates(int n, int p, Rng& rng) {
    Eigen::MatrixXd S = ar_covariance(p);
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw DataError("latent covariance is not positive definite at p=" + std::to_string(p));
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd Z(n, p);
    Eigen::VectorXd g(p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) g[j] = rng.normal();
        Z.row(i) = (L * g).transpose();
    }
    return Z;
}

Eigen::MatrixXd setup_transform(const Eigen::MatrixXd& Z, int setup) {
    if (setup == 1) return Z;
    if (setup != 2) throw DataError("covariate setup must be 1 or 2");
    if (Z.cols() < 8) throw DataError("covariate setup 2 needs at least 8 covariates");
    Eigen::MatrixXd X = Z;
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        double z1 = Z(i, 0), z2 = Z(i, 1), z3 = Z(i, 2), z4 = Z(i, 3);
        double z5 = Z(i, 4), z6 = Z(i, 5), z7 = Z(i, 6), z8 = Z(i, 7);
        X(i, 0) = std::exp(z1 / 2.0);
        X(i, 1) = z2 / (1.0 + std::exp(z1)) + 10.0;
        X(i, 2) = std::pow(z1 * z3 / 25.0 + 0.6, 3);
        X(i, 3) = 20.0 + (z2 + z4) * (z2 + z4);
        X(i, 4) = std::exp(z5 / 2.0);
        X(i, 5) = z6 / (1.0 + std::exp(z5)) + 10.0;
        X(i, 6) = std::pow(z1 * z7 / 25.0 + 0.6, 3);
        X(i, 7) = 5.0 + (z6 + z8) * (z6 + z8);
    }
    return X;
}

Eigen::MatrixXd gen_covariates(const ScenarioSpec& spec, Rng& rng) {
    return setup_transform(latent_covariates(spec.n, spec.p, rng), effective_setup(spec));
}

Eigen::VectorXd propensity_logits(PropModel m, const Eigen::MatrixXd& Z) {
    require_p(Z, prop_min_p(m), "propensity model " + prop_model_name(m));
    Eigen::Index n = Z.rows();
    Eigen::VectorXd eta(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x1 = Z(i, 0), x2 = Z(i, 1), x3 = Z(i, 2), x4 = Z(i, 3);
        switch (m) {
            case PropModel::I: {
                double v = 0.0;
                if (std::abs(x1) > 1 && std::abs(x2) > 1) v += 2.0 * x1 * x2;
                if (std::abs(x2) < 1 && std::abs(x3) < 1) v += 2.0 * x2 * x3;
                if (std::abs(x3) > 1 && std::abs(x4) > 1) v += 2.0 * x3 * x4;
                if (std::abs(x1) < 1 && std::abs(x4) < 1) v += 2.0 * x4 * x1;
                if (std::abs(x1) > 0.5 && std::abs(x2) > 0.5 && std::abs(x3) > 0.5 &&
                    std::abs(x4) > 0.5)
                    v += 1.0;
                if (std::abs(x1) < 0.25 && std::abs(x2) > 0.25 && std::abs(x3) < 0.25 &&
                    std::abs(x4) > 0.25)
                    v += 1.0;
                eta[i] = v;
                break;
            }
            case PropModel::II:
                eta[i] = -2.0 + std::log(std::abs(x1 - x2)) - std::log(std::abs(x2 - x3)) +
                         std::sqrt(std::abs((x3 - x4) * x1 * x2));
                break;
            case PropModel::III:
                eta[i] = -x1 + 0.5 * x2 - 0.25 * x3 - 0.1 * x4 - Z(i, 4) + 0.5 * Z(i, 5) -
                         0.25 * Z(i, 6) - 0.1 * Z(i, 7);
                break;
            case PropModel::IV: {
                double v = 0.0;
                for (int a = 1; a <= 3; ++a) {
                    double inner = 0.0;
                    for (int b = a; b <= 4; ++b) inner += Z(i, a - 1) * Z(i, b - 1);
                    v += (a % 2 == 1 ? -1.0 : 1.0) * inner;
                }
                eta[i] = v;  // calibrated to SD 5 by the caller
                break;
            }
            case PropModel::V:
                eta[i] = -2.0 + 2.0 * x1 * x2 + (x1 - x2) * (x1 - x2) - 2.0 * x3 * x4 -
                         (x3 + Z(i, 4)) * (x3 + Z(i, 4));
                break;
            case PropModel::VI:
                eta[i] = std::abs(x1 - 2.0 * x2) * std::abs(x2 - 2.0 * x3) -
                         std::abs(x3 - 2.0 * x4) * std::abs(x4 - 2.0 * Z(i, 4)) + Z(i, 5) -
                         0.5 * Z(i, 6) - 0.25 * Z(i, 7);
                break;
        }
    }
    if (m == PropModel::IV) {
        double mean = eta.mean();
        double sd = std::sqrt((eta.array() - mean).square().sum() / (double)(n - 1));
        if (!(sd > 0.0)) throw DataError("degenerate treatment score; cannot scale to SD 5");
        eta *= 5.0 / sd;
    }
    return eta;
}

Eigen::VectorXi gen_treatment(const ScenarioSpec& spec, const Eigen::MatrixXd& Z, Rng& rng) {
    Eigen::VectorXd eta = propensity_logits(spec.propensity, Z);
    Eigen::VectorXi A(Z.rows());
    for (Eigen::Index i = 0; i < Z.rows(); ++i) A[i] = rng.bernoulli(expit(eta[i])) ? 1 : 0;
    return A;
}

Eigen::VectorXd outcome_mean(OutModel m, const Eigen::MatrixXd& Z, const Eigen::VectorXi& A) {
    require_p(Z, out_min_p(m), "outcome model " + out_model_name(m));
    if (A.size() != Z.rows()) throw DataError("length mismatch");
    Eigen::Index n = Z.rows();
    static const double beta[7] = {0.8, 0.25, 0.6, -0.4, -0.8, -0.5, 0.7};
    Eigen::VectorXd mu(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x1 = Z(i, 0), x2 = Z(i, 1), x3 = Z(i, 2), x4 = Z(i, 3);
        switch (m) {
            case OutModel::A:
                mu[i] = 210.0 + 27.4 * std::abs(x1) + 13.7 * std::abs(x2) +
                        13.7 * std::abs(x3) + 13.7 * std::abs(x4);
                break;
            case OutModel::B:
                mu[i] = x1 * x2 * x2 * x2 * x3 * x3 * x4 + x4 * std::sqrt(std::abs(x1));
                break;
            case OutModel::C: {
                double v = 0.0;
                for (int j = 1; j <= 4; ++j) {
                    double xj = Z(i, j - 1), xn = Z(i, j);
                    double gate = xj > 0.0 ? xj * (double)A[i] : 0.0;
                    v += 2.0 * (1.0 - gate) * (xj - 2.0 * xn);
                }
                mu[i] = v;
                break;
            }
            case OutModel::D: {
                double x5 = Z(i, 4), x6 = Z(i, 5), x7 = Z(i, 6);
                double v = 0.0;
                for (int j = 0; j < 7; ++j) v += Z(i, j) * beta[j];
                v += beta[1] * x2 * x2 + beta[3] * x4 * x4 + beta[6] * x7 * x7;
                v += 0.5 * beta[0] * x1 * x3 + 0.7 * beta[1] * x2 * x4 + 0.5 * beta[2] * x3 * x5 +
                     0.7 * beta[3] * x4 * x6 + 0.5 * beta[4] * x5 * x7 + 0.5 * beta[0] * x1 * x6 +
                     0.7 * beta[1] * x2 * x3 + 0.5 * beta[2] * x3 * x4 + 0.5 * beta[3] * x4 * x5 +
                     0.5 * beta[4] * x5 * x6;
                mu[i] = v;
                break;
            }
            case OutModel::E:
                mu[i] = 210.0 + (1.5 * (double)A[i] - 0.5) *
                                    (27.4 * x1 + 13.7 * x2 + 13.7 * x3 + 13.7 * x4);
                break;
        }
    }
    return mu;
}

Eigen::VectorXd gen_outcome(const ScenarioSpec& spec, const Eigen::MatrixXd& Z,
                            const Eigen::VectorXi& A, Rng& rng) {
    Eigen::VectorXd mu = outcome_mean(spec.outcome, Z, A);
    for (Eigen::Index i = 0; i < mu.size(); ++i) mu[i] += rng.normal();
    return mu;
}

ScenarioData gen_scenario(const ScenarioSpec& spec, Rng& rng) {
    ScenarioData d;
    d.Z = latent_covariates(spec.n, spec.p, rng);
    Eigen::MatrixXd X = setup_transform(d.Z, effective_setup(spec));
    Eigen::VectorXi A = gen_treatment(spec, d.Z, rng);
    Eigen::VectorXd Y = gen_outcome(spec, d.Z, A, rng);
    d.sample = make_sample(std::move(X), std::move(A), std::move(Y));
    return d;
}

double mc_true_tau(const ScenarioSpec& spec, int draws, std::uint64_t seed) {
    Rng rng(seed);
    const int chunk = 10000;
    double total = 0.0;
    long long done = 0;
    while (done < draws) {
        int m = (int)std::min((long long)chunk, (long long)draws - done);
        Eigen::MatrixXd Z = latent_covariates(m, spec.p, rng);
        Eigen::VectorXi ones = Eigen::VectorXi::Ones(m), zeros = Eigen::VectorXi::Zero(m);
        total += (outcome_mean(spec.outcome, Z, ones) - outcome_mean(spec.outcome, Z, zeros)).sum();
        done += m;
    }
    return total / (double)draws;
}

double true_tau(const ScenarioSpec& spec) {
    switch (spec.outcome) {
        case OutModel::A:
        case OutModel::B:
        case OutModel::D: return 0.0;  // no A term in the surface
        default: break;
    }
    static std::map<std::tuple<int, int, int, int>, double> cache;
    static std::mutex mu;
    auto key = std::make_tuple((int)spec.outcome, (int)spec.propensity, spec.p,
                               effective_setup(spec));
    std::lock_guard<std::mutex> lk(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    double tau = mc_true_tau(spec, 1000000, 0x5eedULL);
    cache[key] = tau;
    return tau;
}

Eigen::VectorXd toy_logits(int which, const Eigen::VectorXd& x) {
    if (which < 1 || which > 3) throw DataError("toy scenario must be 1, 2 or 3");
    Eigen::VectorXd eta(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double v = -1.0 + x[i];
        if (which >= 2) v += 2.0 * x[i] * x[i] / 3.0;
        if (which == 3) v -= x[i] * x[i] * x[i] / 3.0;
        eta[i] = v;
    }
    return eta;
}

Sample toy_scenario(int which, int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd X(n, 1);
    Eigen::VectorXi A(n);
    Eigen::VectorXd Y(n);
    Eigen::VectorXd xv(1);
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        X(i, 0) = x;
        xv[0] = x;
        A[i] = rng.bernoulli(expit(toy_logits(which, xv)[0])) ? 1 : 0;
        Y[i] = x + x * x * x - 1.0 / (0.1 + 0.1 * x * x) + std::sqrt(2.0) * rng.normal();
    }
    return make_sample(std::move(X), std::move(A), std::move(Y));
}

namespace {

double itr_main_term(double x) { return x + 10.0 * x * x * x - 1.0 / (0.1 + 0.1 * x * x); }
double itr_logit_term(double x) {
    return 7.0 / 4.0 * x + 7.0 / 6.0 * x * x + 7.0 / 12.0 * x * x * x;
}

void itr_surfaces(int which, const Eigen::MatrixXd& X, Eigen::VectorXd& g, Eigen::VectorXd& delta,
                  Eigen::VectorXd& logit) {
    if (which != 1 && which != 2) throw DataError("rule scenario must be 1 or 2");
    Eigen::Index n = X.rows();
    g.resize(n);
    delta.resize(n);
    logit.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x1 = X(i, 0), x2 = X(i, 1), x3 = X(i, 2), x4 = X(i, 3), x5 = X(i, 4);
        double x6 = X(i, 5), x7 = X(i, 6), x8 = X(i, 7);
        if (which == 1) {
            g[i] = 8.0 + itr_main_term(x1) - itr_main_term(x2) + itr_main_term(x3);
            delta[i] = x2 - 0.25 * x1 * x1 - x4 + 0.25 * x3 * x3;
            logit[i] = -1.0 + itr_logit_term(x1) - itr_logit_term(x2) + itr_logit_term(x3);
        } else {
            g[i] = 8.0 + 0.5 * itr_main_term(x1);
            delta[i] = -1.0 - x1 * x1 * x1 + std::exp(x3 * x3 + x5) + 0.6 * x6 -
                       (x7 + x8) * (x7 + x8);
            logit[i] = -1.0 + itr_logit_term(x1);
        }
    }
}

}  // namespace

ItrData itr_scenario(int which, int n, std::uint64_t seed) {
    Rng rng(seed);
    const int p = 10;
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd g, delta, logit;
    itr_surfaces(which, X, g, delta, logit);
    Eigen::VectorXi A(n);
    Eigen::VectorXd Y(n);
    for (int i = 0; i < n; ++i) {
        A[i] = rng.bernoulli(expit(logit[i])) ? 1 : 0;
        Y[i] = g[i] + (2.0 * A[i] - 1.0) * delta[i] / 2.0 + rng.normal();
    }

    ItrData d;
    d.sample = make_sample(std::move(X), std::move(A), std::move(Y));
    d.mu0 = g - delta / 2.0;
    d.mu1 = g + delta / 2.0;
    d.delta = std::move(delta);
    d.pi = logit.unaryExpr([](double v) { return expit(v); });
    return d;
}

PotentialOutcomes itr_oracle(int which, int points, std::uint64_t seed) {
    Rng rng(seed);
    const int p = 10;
    PotentialOutcomes po;
    po.X.resize(points, p);
    for (int i = 0; i < points; ++i)
        for (int j = 0; j < p; ++j) po.X(i, j) = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd g, delta, logit;
    itr_surfaces(which, po.X, g, delta, logit);
    po.mu0 = g - delta / 2.0;
    po.mu1 = g + delta / 2.0;
    return po;
}

std::vector<McRow> run_mc(const ScenarioSpec& spec, const std::vector<WeightScheme>& methods,
                          int reps, std::uint64_t seed, int jobs, const QpOptions& opts) {
    if (reps < 1) throw DataError("need at least 1 replicate");
    for (WeightScheme m : methods)
        if (m != WeightScheme::uniform && m != WeightScheme::ipw && m != WeightScheme::ebw &&
            m != WeightScheme::iebw)
            throw DataError("replication study supports uniform, ipw, ebw and iebw");
    double tau = true_tau(spec);

    size_t M = methods.size();
    std::vector<std::vector<double>> est(M, std::vector<double>((size_t)reps,
                                                               std::numeric_limits<double>::quiet_NaN()));
    std::vector<std::vector<int>> fail(M, std::vector<int>((size_t)reps, 0));

    parallel_for(jobs, reps, [&](int r) {
        Rng rng = Rng::stream(seed, (std::uint64_t)r);
        ScenarioData d = gen_scenario(spec, rng);
        Sample ss = standardize(d.sample).first;
        Eigen::MatrixXd D;
        for (WeightScheme m : methods)
            if (m == WeightScheme::ebw || m == WeightScheme::iebw) {
                D = distance_matrix(ss.X);
                break;
            }
        for (size_t k = 0; k < M; ++k) {
            switch (methods[k]) {
                case WeightScheme::uniform:
                    est[k][(size_t)r] = weighted_ate(d.sample, Eigen::VectorXd::Ones(spec.n));
                    break;
                case WeightScheme::ipw:
                    try {
                        est[k][(size_t)r] =
                            weighted_ate(d.sample, logistic_ipw_weights(d.sample));
                    } catch (const DataError&) {
                        fail[k][(size_t)r] = 1;  // separation; no usable estimate
                    }
                    break;
                case WeightScheme::ebw:
                case WeightScheme::iebw: {
                    WeightMethod wm = methods[k] == WeightScheme::ebw ? WeightMethod::ebw
                                                                      : WeightMethod::iebw;
                    BalancingWeights bw = balance(ss, D, wm, opts);
                    if (bw.solver.status != QpStatus::converged) fail[k][(size_t)r] = 1;
                    est[k][(size_t)r] = weighted_ate(d.sample, bw.w);
                    break;
                }
                default: break;
            }
        }
    });

    std::vector<McRow> rows;
    for (size_t k = 0; k < M; ++k) {
        McRow row;
        row.method = scheme_name(methods[k]);
        double se = 0.0, sb = 0.0;
        int cnt = 0;
        for (int r = 0; r < reps; ++r) {
            row.failures += fail[k][(size_t)r];
            double e = est[k][(size_t)r];
            if (std::isnan(e)) continue;
            se += (e - tau) * (e - tau);
            sb += e - tau;
            cnt++;
        }
        if (cnt > 0) {
            row.rmse = std::sqrt(se / (double)cnt);
            row.bias = sb / (double)cnt;
        }
        row.reps = cnt;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace ebal
