#ifndef EBAL_H
#define EBAL_H

/* C interface to the energy-balancing library.
 *
 * Every function returns an ebal status code; on failure a human-readable
 * message is available from ebal_last_error() (thread-local). Strings
 * returned through char** out parameters are heap-allocated and must be
 * released with ebal_free_text(). Handles are released with their _free
 * function; accessors on a valid handle cannot fail. */

#include <stddef.h>

#if defined(_WIN32)
#define EBAL_API __declspec(dllexport)
#else
#define EBAL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum {
    EBAL_OK = 0,
    EBAL_ERR_INVALID = 1, /* bad arguments / misuse */
    EBAL_ERR_DATA = 2,    /* input data fails validation */
    EBAL_ERR_SOLVER = 3,  /* solver could not produce a usable result */
    EBAL_ERR_IO = 4       /* file read/write failure */
};

EBAL_API const char* ebal_version(void);
EBAL_API const char* ebal_last_error(void);
EBAL_API void ebal_free_text(char* text);

typedef struct ebal_sample ebal_sample;
typedef struct ebal_weights ebal_weights;

/* Reads a delimited table (comma, tab or semicolon; sniffed from the
 * header). treatment names the treatment column; outcome may be NULL.
 * covariates_csv, when non-NULL, restricts covariates to the named columns;
 * ignore_csv drops columns. Non-numeric covariates are one-hot expanded. */
EBAL_API int ebal_sample_read(const char* path, const char* treatment, const char* outcome,
                              const char* covariates_csv, const char* ignore_csv,
                              ebal_sample** out);

/* Builds a sample from dense arrays: x is row-major n*p, labels has n
 * integer treatment codes, y may be NULL. */
EBAL_API int ebal_sample_create(int n, int p, const double* x, const int* labels, const double* y,
                                ebal_sample** out);
EBAL_API void ebal_sample_free(ebal_sample* s);

EBAL_API int ebal_sample_n(const ebal_sample* s);
EBAL_API int ebal_sample_p(const ebal_sample* s);
EBAL_API int ebal_sample_groups(const ebal_sample* s);
EBAL_API int ebal_sample_has_outcome(const ebal_sample* s);
EBAL_API int ebal_sample_label(const ebal_sample* s, int i);
EBAL_API const char* ebal_sample_column_name(const ebal_sample* s, int j);

/* Solves for balancing weights. method is one of "ebw", "iebw", "att",
 * "multi", "multi-improved". Distances are computed on internally
 * standardized covariates; tol <= 0 and max_iter <= 0 pick defaults. */
EBAL_API int ebal_weights_solve(const ebal_sample* s, const char* method, double tol, int max_iter,
                                ebal_weights** out);
EBAL_API void ebal_weights_free(ebal_weights* w);

/* Copies the n weights into out. */
EBAL_API int ebal_weights_get(const ebal_weights* w, double* out);
EBAL_API const char* ebal_weights_method(const ebal_weights* w);
/* "converged", "max_iter" or "infeasible". */
EBAL_API const char* ebal_weights_status(const ebal_weights* w);
EBAL_API int ebal_weights_iterations(const ebal_weights* w);
/* Sum of the audited objective energy terms at the solution. */
EBAL_API double ebal_weights_energy(const ebal_weights* w);
/* Full multi-term energy (group-vs-pooled plus all between-group terms). */
EBAL_API double ebal_weights_energy_total(const ebal_weights* w);
/* max_i w_i / n^{1/3}; values above 1 signal unstable weights. */
EBAL_API double ebal_weights_a5(const ebal_weights* w);
/* Key=value metadata block: method, status, iterations, every energy term,
 * totals, the weight-growth statistic and any warnings. */
EBAL_API int ebal_weights_report(const ebal_weights* w, char** out_text);
/* Writes a (row, weight) table at round-trip precision. */
EBAL_API int ebal_weights_write(const ebal_weights* w, const char* path);

/* Reads a weight vector back from a table (a "weight" column, or the only
 * column); fails unless it has exactly expected_n rows. */
EBAL_API int ebal_weight_vector_read(const char* path, int expected_n, double* out);

/* Inverse-propensity weights from a first-order logistic fit on the
 * standardized covariates, renormalized within groups; n values. */
EBAL_API int ebal_ipw_weights(const ebal_sample* s, double* out);

/* Renders the full balance report for the given weights (NULL = uniform).
 * max_poly <= 0 defaults to 2; full != 0 prints round-trip precision. */
EBAL_API int ebal_balance_text(const ebal_sample* s, const double* w, int max_poly, int full,
                               char** out_text);
/* Two-term (group-vs-pooled) and three-term (plus between-group) energies
 * under the given weights (NULL = uniform). */
EBAL_API int ebal_energy_terms(const ebal_sample* s, const double* w, double* two_term,
                               double* three_term);

/* Weighted difference of group outcome means. estimand: "ate" ("att" is the
 * binary 1-vs-0 contrast under treated-anchored weights; "contrast" compares
 * groups a and b). Weights are renormalized within groups. */
EBAL_API int ebal_point_estimate(const ebal_sample* s, const double* w, const char* estimand,
                                 int contrast_a, int contrast_b, double* out);

/* Nonparametric bootstrap re-solving the weighting scheme per replicate.
 * scheme: "uniform", "ipw", "ebw", "iebw", "att", "multi", "multi-improved".
 * Percentile confidence interval; deterministic for a given seed and any
 * jobs count. redraws may be NULL. */
EBAL_API int ebal_bootstrap_estimate(const ebal_sample* s, const char* scheme,
                                     const char* estimand, int contrast_a, int contrast_b, int B,
                                     unsigned long long seed, int jobs, double tol, int max_iter,
                                     double* point, double* se, double* lo, double* hi,
                                     int* redraws);

/* Replicated simulate / weight / estimate benchmark. propensity: "I".."VI";
 * outcome: "A".."E"; setup 0 picks the model-driven default. methods_csv
 * like "uniform,ipw,ebw,iebw". Returns a tab-delimited table
 * method/rmse/bias/reps/failures at round-trip precision. */
EBAL_API int ebal_mc_table(const char* propensity, const char* outcome, int n, int p, int setup,
                           int reps, unsigned long long seed, int jobs, const char* methods_csv,
                           double tol, int max_iter, char** out_text);

/* Population mean treatment effect for a scenario (exact zero where the
 * outcome surface is treatment-free, cached Monte Carlo otherwise). */
EBAL_API int ebal_true_tau(const char* propensity, const char* outcome, int n, int p, int setup,
                           double* out);

/* Fits a weighted linear treatment rule on the sample (outcome required).
 * loss: "logistic" or "hinge"; lambda < 0 picks the 1/n default. coef
 * receives p slopes on the raw covariate scale. converged may be NULL. */
EBAL_API int ebal_itr_fit(const ebal_sample* s, const double* w, const char* loss, double lambda,
                          double* coef, double* intercept, int* iterations, int* converged);

/* Replicated rule-learning benchmark on a built-in scenario (1 or 2):
 * generates data, solves weights by weight_method, fits the rule, and
 * evaluates it against a large oracle draw. Returns a key=value report
 * (mean/sd of achieved value, misclassification versus the sign of the
 * true effect, oracle value) at round-trip precision. */
EBAL_API int ebal_itr_scenario(int scenario, int n, int reps, unsigned long long seed, int jobs,
                               const char* weight_method, const char* loss, double lambda,
                               double tol, int max_iter, char** out_text);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* EBAL_H */
