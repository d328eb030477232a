#include "estimation.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"
#include "rng.hpp"

namespace ebal {

namespace {

void require_outcome(const Sample& s) {
    if (!s.has_outcome()) throw DataError("estimator requires an outcome column");
}

double group_weighted_mean(const Sample& s, const Eigen::VectorXd& w, int label) {
    auto idx = group_indices(s.A, label);
    if (idx.empty()) throw DataError("empty treatment group " + std::to_string(label));
    double sw = 0.0, swy = 0.0;
    for (int i : idx) {
        if (w[i] < 0.0) throw DataError("negative weight");
        sw += w[i];
        swy += w[i] * s.Y[i];
    }
    if (!(sw > 0.0))
        throw DataError("weights in group " + std::to_string(label) + " sum to zero");
    return swy / sw;
}

double quantile_sorted(const std::vector<double>& v, double p) {
    double pos = p * (double)(v.size() - 1);
    size_t lo = (size_t)std::floor(pos);
    size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - (double)lo;
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

double logistic_loglik(const Eigen::VectorXd& eta, const Eigen::VectorXi& A) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        // log(1+e^eta) computed stably on both tails
        double lse = eta[i] > 0 ? eta[i] + std::log1p(std::exp(-eta[i]))
                                : std::log1p(std::exp(eta[i]));
        ll += (A[i] == 1 ? eta[i] : 0.0) - lse;
    }
    return ll;
}

struct ItrGradient {
    Eigen::VectorXd g_beta;
    double g_intercept = 0.0;
};

double itr_loss_and_grad(const Eigen::MatrixXd& X, const Eigen::VectorXi& A,
                         const Eigen::VectorXd& c, const Eigen::VectorXd& beta, double intercept,
                         SurrogateLoss loss, double lambda, ItrGradient* grad) {
    Eigen::Index n = X.rows();
    Eigen::VectorXd f = X * beta;
    f.array() += intercept;
    double obj = 0.0;
    Eigen::VectorXd dm = Eigen::VectorXd::Zero(n);  // d loss / d margin, scaled by c/n
    for (Eigen::Index i = 0; i < n; ++i) {
        double sgn = A[i] == 1 ? 1.0 : -1.0;
        double m = sgn * f[i];
        if (loss == SurrogateLoss::logistic) {
            double l = m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
            obj += c[i] * l;
            if (grad) dm[i] = c[i] * (-1.0 / (1.0 + std::exp(m))) * sgn;
        } else {
            obj += c[i] * std::max(0.0, 1.0 - m);
            if (grad) dm[i] = m < 1.0 ? -c[i] * sgn : 0.0;
        }
    }
    obj = obj / (double)n + lambda * beta.squaredNorm();
    if (grad) {
        grad->g_beta = X.transpose() * dm / (double)n + 2.0 * lambda * beta;
        grad->g_intercept = dm.sum() / (double)n;
    }
    return obj;
}

}  // namespace

std::string scheme_name(WeightScheme s) {
    switch (s) {
        case WeightScheme::uniform: return "uniform";
        case WeightScheme::ipw: return "ipw";
        case WeightScheme::ebw: return "ebw";
        case WeightScheme::iebw: return "iebw";
        case WeightScheme::att: return "att";
        case WeightScheme::multi: return "multi";
        case WeightScheme::multi_improved: return "multi-improved";
    }
    return "uniform";
}

WeightScheme parse_scheme(const std::string& name) {
    if (name == "uniform") return WeightScheme::uniform;
    if (name == "ipw") return WeightScheme::ipw;
    if (name == "ebw") return WeightScheme::ebw;
    if (name == "iebw") return WeightScheme::iebw;
    if (name == "att") return WeightScheme::att;
    if (name == "multi") return WeightScheme::multi;
    if (name == "multi-improved" || name == "multi_improved") return WeightScheme::multi_improved;
    throw DataError("unknown weight scheme: " + name);
}

Eigen::VectorXd compute_weights(const Sample& s, WeightScheme scheme, const QpOptions& opts) {
    switch (scheme) {
        case WeightScheme::uniform: return Eigen::VectorXd::Ones(s.n());
        case WeightScheme::ipw: return logistic_ipw_weights(s);
        case WeightScheme::ebw: return balance(standardize(s).first, WeightMethod::ebw, opts).w;
        case WeightScheme::iebw: return balance(standardize(s).first, WeightMethod::iebw, opts).w;
        case WeightScheme::att: return balance(standardize(s).first, WeightMethod::att, opts).w;
        case WeightScheme::multi: return balance(standardize(s).first, WeightMethod::multi, opts).w;
        case WeightScheme::multi_improved:
            return balance(standardize(s).first, WeightMethod::multi_improved, opts).w;
    }
    throw DataError("unknown weight scheme");
}

double weighted_ate(const Sample& s, const Eigen::VectorXd& w) {
    require_outcome(s);
    if (!s.binary()) throw DataError("average treatment effect requires binary treatment");
    if (w.size() != s.n()) throw DataError("weight length mismatch");
    return group_weighted_mean(s, w, 1) - group_weighted_mean(s, w, 0);
}

double weighted_att(const Sample& s, const BalancingWeights& w) {
    if (w.method != WeightMethod::att)
        throw DataError("treated-group estimand needs att weights");
    return weighted_ate(s, w.w);
}

double weighted_contrast(const Sample& s, const Eigen::VectorXd& w, int a, int b) {
    require_outcome(s);
    if (a == b) throw DataError("contrast needs two distinct labels");
    if (w.size() != s.n()) throw DataError("weight length mismatch");
    if (std::find(s.labels.begin(), s.labels.end(), a) == s.labels.end() ||
        std::find(s.labels.begin(), s.labels.end(), b) == s.labels.end())
        throw DataError("contrast label not present in the sample");
    return group_weighted_mean(s, w, a) - group_weighted_mean(s, w, b);
}

LogisticFit logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXi& A, int max_iter,
                         double tol) {
    Eigen::Index n = X.rows(), p = X.cols();
    if (A.size() != n) throw DataError("length mismatch");
    Eigen::MatrixXd Xd(n, p + 1);
    Xd.col(0).setOnes();
    Xd.rightCols(p) = X;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    double ll = logistic_loglik(eta, A);
    LogisticFit fit;
    int it = 0;
    for (; it < max_iter; ++it) {
        Eigen::VectorXd prob = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
        Eigen::VectorXd wgt = (prob.array() * (1.0 - prob.array())).cwiseMax(1e-10).matrix();
        Eigen::VectorXd resid(n);
        for (Eigen::Index i = 0; i < n; ++i) resid[i] = (A[i] == 1 ? 1.0 : 0.0) - prob[i];

        Eigen::MatrixXd XtWX = Xd.transpose() * wgt.asDiagonal() * Xd;
        Eigen::VectorXd score = Xd.transpose() * resid;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(XtWX);
        if (ldlt.info() != Eigen::Success)
            throw DataError("singular design in logistic regression");
        Eigen::VectorXd step = ldlt.solve(score);
        if (!step.allFinite()) throw DataError("singular design in logistic regression");

        // halve the step until the log-likelihood does not decrease
        double t = 1.0, ll_new = 0.0;
        Eigen::VectorXd beta_new, eta_new;
        bool ok = false;
        for (int h = 0; h < 40; ++h) {
            beta_new = beta + t * step;
            eta_new = Xd * beta_new;
            ll_new = logistic_loglik(eta_new, A);
            if (ll_new >= ll - 1e-12) {
                ok = true;
                break;
            }
            t /= 2.0;
        }
        if (!ok) break;

        double delta = (beta_new - beta).cwiseAbs().maxCoeff();
        beta = beta_new;
        eta = eta_new;
        ll = ll_new;
        if (delta <= tol) {
            fit.converged = true;
            ++it;
            break;
        }
    }
    if (!fit.converged && beta.norm() > 1e6)
        throw DataError("logistic regression diverged (perfectly separated groups)");
    fit.intercept = beta[0];
    fit.beta = beta.tail(p);
    fit.iterations = it;
    fit.loglik = ll;
    return fit;
}

Eigen::VectorXd predict_probs(const LogisticFit& fit, const Eigen::MatrixXd& X) {
    Eigen::VectorXd eta = X * fit.beta;
    eta.array() += fit.intercept;
    return (1.0 / (1.0 + (-eta.array()).exp())).matrix();
}

Eigen::VectorXd ipw_weights_from_propensity(const Eigen::VectorXi& A, const Eigen::VectorXd& pi) {
    if (A.size() != pi.size()) throw DataError("length mismatch");
    Eigen::VectorXd w(A.size());
    for (Eigen::Index i = 0; i < A.size(); ++i) {
        double p = std::min(1.0 - 1e-12, std::max(1e-12, pi[i]));
        w[i] = A[i] == 1 ? 1.0 / p : 1.0 / (1.0 - p);
    }
    return normalize_group_weights(A, w);
}

Eigen::VectorXd logistic_ipw_weights(const Sample& s) {
    if (!s.binary()) throw DataError("logistic propensity baseline requires binary treatment");
    Sample ss = standardize(s).first;
    LogisticFit fit = logistic_fit(ss.X, ss.A);
    return ipw_weights_from_propensity(s.A, predict_probs(fit, ss.X));
}

EstimateResult bootstrap(const Sample& s, WeightScheme scheme, Estimand estimand,
                         const BootstrapOptions& opts) {
    require_outcome(s);
    if (opts.B < 2) throw DataError("need at least 2 bootstrap replicates");

    auto estimate = [&](const Sample& samp) {
        Eigen::VectorXd w = compute_weights(samp, scheme, opts.qp);
        switch (estimand) {
            case Estimand::ate: return weighted_ate(samp, w);
            case Estimand::att: {
                if (scheme != WeightScheme::att && scheme != WeightScheme::uniform &&
                    scheme != WeightScheme::ipw)
                    throw DataError("treated-group estimand expects att, uniform or ipw weights");
                return weighted_ate(samp, w);
            }
            case Estimand::contrast:
                return weighted_contrast(samp, w, opts.contrast_a, opts.contrast_b);
        }
        throw DataError("unknown estimand");
    };

    EstimateResult res;
    res.point = estimate(s);
    res.method = scheme_name(scheme);
    res.B = opts.B;

    Eigen::Index n = s.n();
    std::vector<double> reps((size_t)opts.B);
    std::vector<int> redraws((size_t)opts.B, 0);
    parallel_for(opts.jobs, opts.B, [&](int b) {
        Rng rng = Rng::stream(opts.seed, (std::uint64_t)b);
        for (int attempt = 0;; ++attempt) {
            if (attempt > 100)
                throw DataError("bootstrap replicates keep producing degenerate groups");
            Eigen::MatrixXd X(n, s.p());
            Eigen::VectorXi A(n);
            Eigen::VectorXd Y(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                Eigen::Index k = (Eigen::Index)rng.below((std::uint64_t)n);
                X.row(i) = s.X.row(k);
                A[i] = s.A[k];
                Y[i] = s.Y[k];
            }
            try {
                Sample rs = make_sample(std::move(X), std::move(A), std::move(Y),
                                        s.covariate_names);
                if (rs.labels != s.labels) throw DataError("missing group");
                reps[(size_t)b] = estimate(rs);
                redraws[(size_t)b] = attempt;
                break;
            } catch (const DataError&) {
                continue;  // degenerate resample; redraw from this stream
            }
        }
    });

    for (int r : redraws) res.redraws += r;
    std::vector<double> sorted = reps;
    std::sort(sorted.begin(), sorted.end());
    double mean = 0.0;
    for (double v : reps) mean += v;
    mean /= (double)opts.B;
    double ss = 0.0;
    for (double v : reps) ss += (v - mean) * (v - mean);
    res.se = std::sqrt(ss / (double)(opts.B - 1));
    res.ci_low = quantile_sorted(sorted, 0.025);
    res.ci_high = quantile_sorted(sorted, 0.975);
    return res;
}

double itr_objective(const Eigen::MatrixXd& X, const Eigen::VectorXi& A, const Eigen::VectorXd& c,
                     const Eigen::VectorXd& beta, double intercept, SurrogateLoss loss,
                     double lambda) {
    return itr_loss_and_grad(X, A, c, beta, intercept, loss, lambda, nullptr);
}

Eigen::VectorXd itr_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXi& A,
                             const Eigen::VectorXd& c, const Eigen::VectorXd& beta,
                             double intercept, SurrogateLoss loss, double lambda) {
    ItrGradient g;
    itr_loss_and_grad(X, A, c, beta, intercept, loss, lambda, &g);
    Eigen::VectorXd out(beta.size() + 1);
    out.head(beta.size()) = g.g_beta;
    out[beta.size()] = g.g_intercept;
    return out;
}

LinearRule fit_itr(const Sample& s, const Eigen::VectorXd& w, SurrogateLoss loss, double lambda) {
    require_outcome(s);
    if (!s.binary()) throw DataError("rule fitting requires binary treatment");
    if (w.size() != s.n()) throw DataError("weight length mismatch");
    Eigen::Index n = s.n(), p = s.p();
    if (lambda < 0.0) lambda = 1.0 / (double)n;

    auto [ss, st] = standardize(s);
    double y_shift = s.Y.minCoeff() < 0.0 ? -s.Y.minCoeff() : 0.0;
    Eigen::VectorXd c(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (w[i] < 0.0) throw DataError("negative weight");
        c[i] = (s.Y[i] + y_shift) * w[i];
    }

    // diagonal curvature bound (phi'' <= 1/4) as a preconditioner, so the
    // penalty dominating the data term cannot stall the descent
    Eigen::VectorXd pre = Eigen::VectorXd::Constant(p, 2.0 * lambda);
    double pre_int = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        pre += (0.25 / (double)n * c[i]) * ss.X.row(i).array().square().matrix().transpose();
        pre_int += 0.25 / (double)n * c[i];
    }
    for (Eigen::Index j = 0; j < p; ++j) pre[j] = std::max(pre[j], 1e-12);
    pre_int = std::max(pre_int, 1e-12);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    double intercept = 0.0;
    ItrGradient g;
    double obj = itr_loss_and_grad(ss.X, ss.A, c, beta, intercept, loss, lambda, &g);
    Eigen::VectorXd best_beta = beta;
    double best_intercept = intercept, best_obj = obj;
    const int max_iter = 50000;
    const double gtol = 1e-7;
    int it = 0;
    bool converged = false;
    double step0 = 1.0;
    for (; it < max_iter; ++it) {
        double gnorm2 = g.g_beta.squaredNorm() + g.g_intercept * g.g_intercept;
        if (std::sqrt(gnorm2) <= gtol) {
            converged = true;
            break;
        }
        if (loss == SurrogateLoss::logistic) {
            Eigen::VectorXd d_beta = g.g_beta.array() / pre.array();
            double d_int = g.g_intercept / pre_int;
            double slope = g.g_beta.dot(d_beta) + g.g_intercept * d_int;
            double t = step0;
            for (int h = 0; h < 60; ++h) {
                Eigen::VectorXd beta_new = beta - t * d_beta;
                double int_new = intercept - t * d_int;
                double obj_new =
                    itr_loss_and_grad(ss.X, ss.A, c, beta_new, int_new, loss, lambda, nullptr);
                if (obj_new <= obj - 1e-4 * t * slope) {
                    beta = std::move(beta_new);
                    intercept = int_new;
                    obj = obj_new;
                    break;
                }
                t /= 2.0;
            }
            step0 = std::min(1.0, 2.0 * t);
        } else {
            // diminishing-step subgradient descent; the best iterate wins
            double t = 0.5 / std::sqrt((double)it + 1.0);
            beta -= t * g.g_beta;
            intercept -= t * g.g_intercept;
        }
        obj = itr_loss_and_grad(ss.X, ss.A, c, beta, intercept, loss, lambda, &g);
        if (obj < best_obj) {
            best_obj = obj;
            best_beta = beta;
            best_intercept = intercept;
        }
    }
    if (loss == SurrogateLoss::logistic && !converged)
        throw SolverError("rule fitting did not converge");
    if (loss == SurrogateLoss::logistic && converged) {
        best_beta = beta;
        best_intercept = intercept;
    }
    beta = best_beta;
    intercept = best_intercept;

    LinearRule rule;
    rule.loss = loss;
    rule.lambda = lambda;
    rule.y_shift = y_shift;
    rule.iterations = it;
    rule.converged = converged || loss == SurrogateLoss::hinge;
    rule.beta.resize(p);
    double adj = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        rule.beta[j] = beta[j] / st.sds[j];
        adj += beta[j] * st.means[j] / st.sds[j];
    }
    rule.intercept = intercept - adj;
    return rule;
}

double evaluate_value(const LinearRule& rule, const PotentialOutcomes& po) {
    if (po.mu0.size() != po.X.rows() || po.mu1.size() != po.X.rows())
        throw DataError("potential outcome length mismatch");
    if (po.X.rows() == 0) throw DataError("empty oracle sample");
    double total = 0.0;
    for (Eigen::Index i = 0; i < po.X.rows(); ++i)
        total += rule.decide(po.X.row(i)) ? po.mu1[i] : po.mu0[i];
    return total / (double)po.X.rows();
}

}  // namespace ebal
