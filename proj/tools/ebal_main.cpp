#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ebal/ebal.h"

namespace {

int exit_code(int rc) {
    if (rc == EBAL_OK) return 0;
    if (rc == EBAL_ERR_IO) return 2;
    return rc;
}

void check(int rc) {
    if (rc == EBAL_OK) return;
    std::fprintf(stderr, "error: %s\n", ebal_last_error());
    std::exit(exit_code(rc));
}

[[noreturn]] void usage_error(const std::string& msg) {
    std::fprintf(stderr, "error: %s\n", msg.c_str());
    std::exit(1);
}

std::string fmt(double v, bool full) {
    char buf[40];
    std::snprintf(buf, sizeof buf, full ? "%.17g" : "%.6g", v);
    return buf;
}

// reprints every numeric token of a machine-precision report with 6
// significant digits for the console
std::string to_console(const std::string& text) {
    std::string out, tok;
    auto flush = [&] {
        if (tok.empty()) return;
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (end && *end == '\0') out += fmt(v, false);
        else out += tok;
        tok.clear();
    };
    for (char c : text) {
        if (c == '\t' || c == '\n' || c == '=' || c == ',' || c == ' ') {
            flush();
            out += c;
        } else {
            tok += c;
        }
    }
    flush();
    return out;
}

// flat key=value config files are merged by appending an --option=value
// token for every key the command line did not set, so flags always win
std::vector<std::string> merge_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    for (size_t i = 0; i < args.size() && path.empty(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    std::ifstream f(path);
    if (!f) {
        std::fprintf(stderr, "error: cannot read config file: %s\n", path.c_str());
        std::exit(2);
    }
    auto trim = [](const std::string& s) {
        size_t b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    std::string line;
    while (std::getline(f, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::fprintf(stderr, "error: config line is not key=value: %s\n", t.c_str());
            std::exit(2);
        }
        std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
        std::string flag = "--" + key;
        bool given = false;
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
        if (!given) args.push_back(flag + "=" + value);
    }
    return args;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        std::fprintf(stderr, "error: cannot write file: %s\n", path.c_str());
        std::exit(2);
    }
    out << text;
}

std::string grab_text(int rc, char** txt) {
    check(rc);
    std::string s = *txt;
    ebal_free_text(*txt);
    *txt = nullptr;
    return s;
}

struct DataOpts {
    std::string input, treatment, outcome, covariates, ignore;
};

void add_data_opts(CLI::App* cmd, DataOpts& d, bool required) {
    auto* in = cmd->add_option("--input", d.input, "input table (comma/tab/semicolon delimited)");
    auto* tr = cmd->add_option("--treatment", d.treatment, "treatment column name");
    if (required) {
        in->required();
        tr->required();
    }
    cmd->add_option("--outcome", d.outcome, "outcome column name");
    cmd->add_option("--covariates", d.covariates, "comma list restricting the covariate columns");
    cmd->add_option("--ignore", d.ignore, "comma list of columns to drop");
}

ebal_sample* load_sample(const DataOpts& d) {
    ebal_sample* s = nullptr;
    check(ebal_sample_read(d.input.c_str(), d.treatment.c_str(),
                           d.outcome.empty() ? nullptr : d.outcome.c_str(),
                           d.covariates.empty() ? nullptr : d.covariates.c_str(),
                           d.ignore.empty() ? nullptr : d.ignore.c_str(), &s));
    return s;
}

void check_solver_status(const std::string& status, bool strict) {
    if (status == "converged") return;
    std::fprintf(stderr, "warning: solver status %s\n", status.c_str());
    if (strict) {
        std::fprintf(stderr, "error: solver did not converge\n");
        std::exit(3);
    }
}

// weights from a file, a method name, or empty() meaning uniform
std::vector<double> resolve_weights(ebal_sample* s, const std::string& file,
                                    const std::string& method, double tol, int max_iter,
                                    bool strict) {
    int n = ebal_sample_n(s);
    std::vector<double> w;
    if (!file.empty()) {
        w.resize((size_t)n);
        check(ebal_weight_vector_read(file.c_str(), n, w.data()));
    } else if (method == "ipw") {
        w.resize((size_t)n);
        check(ebal_ipw_weights(s, w.data()));
    } else if (!method.empty() && method != "uniform") {
        ebal_weights* bw = nullptr;
        check(ebal_weights_solve(s, method.c_str(), tol, max_iter, &bw));
        check_solver_status(ebal_weights_status(bw), strict);
        w.resize((size_t)n);
        check(ebal_weights_get(bw, w.data()));
        ebal_weights_free(bw);
    }
    return w;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"energy balancing weights for observational studies"};
    app.require_subcommand(1);
    app.set_version_flag("--version", ebal_version());

    int env_jobs = 1;
    if (const char* e = std::getenv("EBAL_JOBS")) env_jobs = std::max(1, std::atoi(e));

    // weights
    auto* wc = app.add_subcommand("weights", "solve balancing weights and write them out");
    DataOpts wd;
    add_data_opts(wc, wd, true);
    std::string w_method = "ebw", w_output, w_metadata;
    double w_tol = 0.0;
    int w_maxit = 0;
    bool w_strict = false;
    wc->add_option("--method", w_method, "ebw, iebw, att, multi or multi-improved");
    wc->add_option("--output", w_output, "weight table destination")->required();
    wc->add_option("--metadata", w_metadata, "write solver metadata here as well");
    wc->add_option("--tol", w_tol, "solver tolerance");
    wc->add_option("--max-iter", w_maxit, "solver iteration cap");
    wc->add_flag("--strict", w_strict, "non-convergence becomes an error");
    wc->set_config("--config", "", "key=value file; command-line flags win");

    // estimate
    auto* ec = app.add_subcommand("estimate", "weighted treatment effect estimate");
    DataOpts ed;
    add_data_opts(ec, ed, true);
    std::string e_method = "uniform", e_weights, e_estimand;
    int e_boot = 0, e_jobs = env_jobs, e_maxit = 0, e_ca = 0, e_cb = 0;
    unsigned long long e_seed = 0;
    double e_tol = 0.0;
    bool e_strict = false;
    auto* e_mopt = ec->add_option("--method", e_method,
                                  "uniform, ipw, ebw, iebw, att, multi or multi-improved");
    auto* e_wopt = ec->add_option("--weights", e_weights, "weight file instead of a method");
    e_wopt->excludes(e_mopt);
    ec->add_option("--estimand", e_estimand, "ate, att or contrast");
    ec->add_option("--contrast-a", e_ca, "first group for --estimand contrast");
    ec->add_option("--contrast-b", e_cb, "second group for --estimand contrast");
    ec->add_option("--bootstrap", e_boot, "bootstrap replicates (0 = off)");
    auto* e_sopt = ec->add_option("--seed", e_seed, "rng seed (required with --bootstrap)");
    ec->add_option("--jobs", e_jobs, "bootstrap worker threads");
    ec->add_option("--tol", e_tol, "solver tolerance");
    ec->add_option("--max-iter", e_maxit, "solver iteration cap");
    ec->add_flag("--strict", e_strict, "non-convergence becomes an error");
    std::string e_output;
    ec->add_option("--output", e_output, "write the report here as well");
    ec->set_config("--config", "", "key=value file; command-line flags win");

    // balance
    auto* bc = app.add_subcommand("balance", "covariate balance report");
    DataOpts bd;
    add_data_opts(bc, bd, true);
    std::string b_method, b_weights, b_output;
    int b_poly = 2, b_maxit = 0;
    double b_tol = 0.0;
    bool b_strict = false;
    auto* b_mopt = bc->add_option("--method", b_method, "solve weights by this method first");
    auto* b_wopt = bc->add_option("--weights", b_weights, "weight file (default uniform)");
    b_wopt->excludes(b_mopt);
    bc->add_option("--max-poly", b_poly, "highest power in the derived-term table");
    bc->add_option("--tol", b_tol, "solver tolerance");
    bc->add_option("--max-iter", b_maxit, "solver iteration cap");
    bc->add_flag("--strict", b_strict, "non-convergence becomes an error");
    bc->add_option("--output", b_output, "write the report here as well");
    bc->set_config("--config", "", "key=value file; command-line flags win");

    // simulate
    auto* sc = app.add_subcommand("simulate", "replicated benchmark on built-in scenarios");
    std::string s_prop, s_out, s_methods = "uniform,ipw,ebw,iebw", s_output;
    int s_n = 250, s_p = 10, s_setup = 0, s_reps = 0, s_jobs = env_jobs, s_maxit = 0;
    unsigned long long s_seed = 0;
    double s_tol = 0.0;
    sc->add_option("--propensity", s_prop, "treatment model I..VI")->required();
    sc->add_option("--outcome", s_out, "outcome model A..E")->required();
    sc->add_option("--n", s_n, "sample size per replicate");
    sc->add_option("--p", s_p, "covariate count");
    sc->add_option("--setup", s_setup, "1 latent, 2 transformed, 0 model default");
    sc->add_option("--reps", s_reps, "replicates")->required();
    sc->add_option("--seed", s_seed, "rng seed")->required();
    sc->add_option("--jobs", s_jobs, "worker threads");
    sc->add_option("--methods", s_methods, "comma list of weighting methods");
    sc->add_option("--tol", s_tol, "solver tolerance");
    sc->add_option("--max-iter", s_maxit, "solver iteration cap");
    sc->add_option("--output", s_output, "write the table here as well");
    sc->set_config("--config", "", "key=value file; command-line flags win");

    // itr
    auto* ic = app.add_subcommand("itr", "fit a linear treatment rule");
    DataOpts id;
    add_data_opts(ic, id, false);
    std::string i_wmethod = "iebw", i_weights, i_loss = "logistic", i_output;
    int i_scenario = 0, i_n = 400, i_reps = 1, i_jobs = env_jobs, i_maxit = 0;
    unsigned long long i_seed = 0;
    double i_lambda = -1.0, i_tol = 0.0;
    bool i_strict = false;
    auto* i_scen = ic->add_option("--scenario", i_scenario, "built-in scenario 1 or 2");
    i_scen->excludes("--input");
    ic->add_option("--n", i_n, "scenario sample size per replicate");
    ic->add_option("--reps", i_reps, "scenario replicates");
    auto* i_sopt = ic->add_option("--seed", i_seed, "rng seed (required with --scenario)");
    ic->add_option("--jobs", i_jobs, "worker threads");
    ic->add_option("--weight-method", i_wmethod, "weighting for the fit (default iebw)");
    auto* i_wopt = ic->add_option("--weights", i_weights, "weight file instead of a method");
    i_wopt->excludes(i_scen);
    ic->add_option("--loss", i_loss, "logistic or hinge");
    ic->add_option("--lambda", i_lambda, "ridge penalty (negative = 1/n)");
    ic->add_option("--tol", i_tol, "solver tolerance");
    ic->add_option("--max-iter", i_maxit, "solver iteration cap");
    ic->add_flag("--strict", i_strict, "non-convergence becomes an error");
    ic->add_option("--output", i_output, "write the rule / report here as well");
    ic->set_config("--config", "", "key=value file; command-line flags win");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int c = app.exit(e);
        return c ? 1 : 0;
    }

    if (app.got_subcommand(wc)) {
        ebal_sample* s = load_sample(wd);
        ebal_weights* bw = nullptr;
        check(ebal_weights_solve(s, w_method.c_str(), w_tol, w_maxit, &bw));
        check_solver_status(ebal_weights_status(bw), w_strict);
        check(ebal_weights_write(bw, w_output.c_str()));
        char* rep = nullptr;
        std::string report = grab_text(ebal_weights_report(bw, &rep), &rep);
        if (!w_metadata.empty()) write_text(w_metadata, report);
        std::cout << to_console(report);
        ebal_weights_free(bw);
        ebal_sample_free(s);
        return 0;
    }

    if (app.got_subcommand(ec)) {
        if (ed.outcome.empty()) usage_error("estimate needs --outcome");
        ebal_sample* s = load_sample(ed);
        std::string estimand = e_estimand;
        if (estimand.empty()) estimand = e_method == "att" ? "att" : "ate";
        std::ostringstream full;
        full << "estimand=" << estimand << "\n";
        if (!e_weights.empty()) full << "weights=" << e_weights << "\n";
        else full << "method=" << e_method << "\n";
        if (e_boot > 0) {
            if (!e_weights.empty()) usage_error("--bootstrap re-solves weights; use --method");
            if (!e_sopt->count()) usage_error("--bootstrap needs --seed");
            double point, se, lo, hi;
            int redraws = 0;
            check(ebal_bootstrap_estimate(s, e_method.c_str(), estimand.c_str(), e_ca, e_cb,
                                          e_boot, e_seed, e_jobs, e_tol, e_maxit, &point, &se,
                                          &lo, &hi, &redraws));
            full << "point=" << fmt(point, true) << "\n";
            full << "B=" << e_boot << "\n";
            full << "seed=" << e_seed << "\n";
            full << "se=" << fmt(se, true) << "\n";
            full << "ci_low=" << fmt(lo, true) << "\n";
            full << "ci_high=" << fmt(hi, true) << "\n";
            full << "redraws=" << redraws << "\n";
        } else {
            std::vector<double> w =
                resolve_weights(s, e_weights, e_method, e_tol, e_maxit, e_strict);
            double point;
            check(ebal_point_estimate(s, w.empty() ? nullptr : w.data(), estimand.c_str(), e_ca,
                                      e_cb, &point));
            full << "point=" << fmt(point, true) << "\n";
        }
        if (!e_output.empty()) write_text(e_output, full.str());
        std::cout << to_console(full.str());
        ebal_sample_free(s);
        return 0;
    }

    if (app.got_subcommand(bc)) {
        ebal_sample* s = load_sample(bd);
        std::vector<double> w = resolve_weights(s, b_weights, b_method, b_tol, b_maxit, b_strict);
        const double* wp = w.empty() ? nullptr : w.data();
        char* txt = nullptr;
        std::string console = grab_text(ebal_balance_text(s, wp, b_poly, 0, &txt), &txt);
        if (!b_output.empty()) {
            char* txt2 = nullptr;
            write_text(b_output, grab_text(ebal_balance_text(s, wp, b_poly, 1, &txt2), &txt2));
        }
        std::cout << console;
        ebal_sample_free(s);
        return 0;
    }

    if (app.got_subcommand(sc)) {
        char* txt = nullptr;
        std::string table =
            grab_text(ebal_mc_table(s_prop.c_str(), s_out.c_str(), s_n, s_p, s_setup, s_reps,
                                    s_seed, s_jobs, s_methods.c_str(), s_tol, s_maxit, &txt),
                      &txt);
        if (!s_output.empty()) write_text(s_output, table);
        std::cout << to_console(table);
        return 0;
    }

    if (app.got_subcommand(ic)) {
        if (i_scen->count()) {
            if (!i_sopt->count()) usage_error("--scenario needs --seed");
            char* txt = nullptr;
            std::string report = grab_text(
                ebal_itr_scenario(i_scenario, i_n, i_reps, i_seed, i_jobs, i_wmethod.c_str(),
                                  i_loss.c_str(), i_lambda, i_tol, i_maxit, &txt),
                &txt);
            if (!i_output.empty()) write_text(i_output, report);
            std::cout << to_console(report);
            return 0;
        }
        if (id.input.empty() || id.treatment.empty())
            usage_error("itr needs --scenario or --input with --treatment");
        if (id.outcome.empty()) usage_error("itr needs --outcome");
        ebal_sample* s = load_sample(id);
        std::vector<double> w =
            resolve_weights(s, i_weights, i_wmethod, i_tol, i_maxit, i_strict);
        int p = ebal_sample_p(s), iters = 0, conv = 0;
        std::vector<double> coef((size_t)p, 0.0);
        double intercept = 0.0;
        check(ebal_itr_fit(s, w.empty() ? nullptr : w.data(), i_loss.c_str(), i_lambda,
                           coef.data(), &intercept, &iters, &conv));
        if (!conv) {
            std::fprintf(stderr, "warning: rule fit stopped before the gradient tolerance\n");
            if (i_strict) {
                std::fprintf(stderr, "error: rule fit did not converge\n");
                return 3;
            }
        }
        std::ostringstream full;
        full << "loss=" << i_loss << "\n";
        full << "lambda=" << fmt(i_lambda < 0 ? 1.0 / ebal_sample_n(s) : i_lambda, true) << "\n";
        full << "iterations=" << iters << "\n";
        full << "converged=" << conv << "\n";
        full << "\nterm\tcoefficient\n";
        full << "intercept\t" << fmt(intercept, true) << "\n";
        for (int j = 0; j < p; ++j)
            full << ebal_sample_column_name(s, j) << "\t" << fmt(coef[(size_t)j], true) << "\n";
        if (!i_output.empty()) write_text(i_output, full.str());
        std::cout << to_console(full.str());
        ebal_sample_free(s);
        return 0;
    }

    return 1;
}
