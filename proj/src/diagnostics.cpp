#include "diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "energy.hpp"
#include "table.hpp"

namespace ebal {

namespace {

void check_weights_len(const Sample& s, const Eigen::VectorXd& w) {
    if (w.size() != s.n()) throw DataError("weight length mismatch");
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (!(w[i] >= 0.0)) throw DataError("negative weight at index " + std::to_string(i));
}

double pooled_sd(const Eigen::VectorXd& col) {
    double mean = col.mean();
    return std::sqrt((col.array() - mean).square().sum() / (double)(col.size() - 1));
}

// signed weighted-mean difference over sd for one column
double smd_column(const Eigen::VectorXd& col, const Eigen::VectorXi& A, const Eigen::VectorXd& w,
                  const std::string& name) {
    double sd = pooled_sd(col);
    if (!(sd > 0.0)) throw DataError("zero pooled spread for term " + name);
    double m1 = 0.0, s1 = 0.0, m0 = 0.0, s0 = 0.0;
    for (Eigen::Index i = 0; i < col.size(); ++i) {
        if (A[i] == 1) {
            m1 += w[i] * col[i];
            s1 += w[i];
        } else {
            m0 += w[i] * col[i];
            s0 += w[i];
        }
    }
    if (!(s1 > 0.0) || !(s0 > 0.0)) throw DataError("a group carries zero total weight");
    return (m1 / s1 - m0 / s0) / sd;
}

// weighted ECDF values of one group over the given sorted grid
std::vector<double> group_ecdf(const Eigen::VectorXd& col, const Eigen::VectorXi& A,
                               const Eigen::VectorXd& w, int label,
                               const std::vector<double>& grid) {
    std::vector<std::pair<double, double>> pts;  // (value, weight)
    double total = 0.0;
    for (Eigen::Index i = 0; i < col.size(); ++i)
        if (A[i] == label) {
            pts.push_back({col[i], w[i]});
            total += w[i];
        }
    std::sort(pts.begin(), pts.end());
    std::vector<double> F(grid.size());
    size_t k = 0;
    double acc = 0.0;
    for (size_t g = 0; g < grid.size(); ++g) {
        while (k < pts.size() && pts[k].first <= grid[g]) acc += pts[k++].second;
        F[g] = total > 0.0 ? acc / total : 0.0;
    }
    return F;
}

std::vector<double> sorted_unique(const Eigen::VectorXd& col) {
    std::vector<double> v(col.data(), col.data() + col.size());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

// thin a sorted grid to at most cap entries, keeping the ends
std::vector<double> thin_grid(std::vector<double> v, int cap) {
    if ((int)v.size() <= cap) return v;
    std::vector<double> out;
    out.reserve(cap);
    for (int i = 0; i < cap; ++i) {
        size_t idx = (size_t)std::llround((double)i * (double)(v.size() - 1) / (double)(cap - 1));
        out.push_back(v[idx]);
    }
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Eigen::MatrixXd derived_matrix(const Sample& s, int max_poly) {
    if (max_poly < 1) throw DataError("polynomial order must be at least 1");
    Sample ss = standardize(s).first;
    Eigen::Index n = s.n(), p = s.p();
    Eigen::Index terms = p * max_poly + p * (p - 1) / 2;
    Eigen::MatrixXd M(n, terms);
    Eigen::Index c = 0;
    for (Eigen::Index j = 0; j < p; ++j)
        for (int k = 1; k <= max_poly; ++k) M.col(c++) = ss.X.col(j).array().pow(k).matrix();
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index l = j + 1; l < p; ++l)
            M.col(c++) = (ss.X.col(j).array() * ss.X.col(l).array()).matrix();
    return M;
}

}  // namespace

Eigen::VectorXd smd(const Sample& s, const Eigen::VectorXd& w) {
    if (!s.binary()) throw DataError("mean-difference diagnostics require binary treatment");
    check_weights_len(s, w);
    Eigen::VectorXd out(s.p());
    for (Eigen::Index j = 0; j < s.p(); ++j)
        out[j] = smd_column(s.X.col(j), s.A, w, s.covariate_names[j]);
    return out;
}

std::vector<std::string> derived_term_names(const Sample& s, int max_poly) {
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < s.p(); ++j)
        for (int k = 1; k <= max_poly; ++k)
            names.push_back(k == 1 ? s.covariate_names[j]
                                   : s.covariate_names[j] + "^" + std::to_string(k));
    for (Eigen::Index j = 0; j < s.p(); ++j)
        for (Eigen::Index l = j + 1; l < s.p(); ++l)
            names.push_back(s.covariate_names[j] + "*" + s.covariate_names[l]);
    return names;
}

Eigen::VectorXd smd_derived(const Sample& s, const Eigen::VectorXd& w, int max_poly) {
    if (!s.binary()) throw DataError("mean-difference diagnostics require binary treatment");
    check_weights_len(s, w);
    Eigen::MatrixXd M = derived_matrix(s, max_poly);
    auto names = derived_term_names(s, max_poly);
    Eigen::VectorXd out(M.cols());
    for (Eigen::Index j = 0; j < M.cols(); ++j)
        out[j] = smd_column(M.col(j), s.A, w, names[(size_t)j]);
    return out;
}

Eigen::VectorXd rimse_1d(const Sample& s, const Eigen::VectorXd& w) {
    if (!s.binary()) throw DataError("ECDF diagnostics require binary treatment");
    check_weights_len(s, w);
    Eigen::VectorXd out(s.p());
    for (Eigen::Index j = 0; j < s.p(); ++j) {
        auto grid = sorted_unique(s.X.col(j));
        auto F1 = group_ecdf(s.X.col(j), s.A, w, 1, grid);
        auto F0 = group_ecdf(s.X.col(j), s.A, w, 0, grid);
        double acc = 0.0;
        for (size_t g = 0; g + 1 < grid.size(); ++g) {
            double d = F1[g] - F0[g];
            acc += d * d * (grid[g + 1] - grid[g]);
        }
        out[j] = std::sqrt(acc);
    }
    return out;
}

std::vector<std::string> pair_names(const Sample& s) {
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < s.p(); ++j)
        for (Eigen::Index l = j + 1; l < s.p(); ++l)
            names.push_back(s.covariate_names[j] + "," + s.covariate_names[l]);
    return names;
}

std::vector<double> rimse_2d(const Sample& s, const Eigen::VectorXd& w, int grid_cap) {
    if (!s.binary()) throw DataError("ECDF diagnostics require binary treatment");
    check_weights_len(s, w);
    if (grid_cap < 2) throw DataError("grid cap must be at least 2");
    Eigen::Index n = s.n(), p = s.p();

    double tot1 = 0.0, tot0 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) (s.A[i] == 1 ? tot1 : tot0) += w[i];
    if (!(tot1 > 0.0) || !(tot0 > 0.0)) throw DataError("a group carries zero total weight");

    std::vector<std::vector<double>> grids((size_t)p);
    for (Eigen::Index j = 0; j < p; ++j)
        grids[(size_t)j] = thin_grid(sorted_unique(s.X.col(j)), grid_cap);

    std::vector<double> out;
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index l = j + 1; l < p; ++l) {
            const auto& gx = grids[(size_t)j];
            const auto& gy = grids[(size_t)l];
            size_t G = gx.size(), H = gy.size();
            // per-group weight mass binned at the first grid node >= value
            Eigen::MatrixXd h1 = Eigen::MatrixXd::Zero((Eigen::Index)G, (Eigen::Index)H);
            Eigen::MatrixXd h0 = h1;
            for (Eigen::Index i = 0; i < n; ++i) {
                size_t gi = (size_t)(std::lower_bound(gx.begin(), gx.end(), s.X(i, j)) -
                                     gx.begin());
                size_t hi = (size_t)(std::lower_bound(gy.begin(), gy.end(), s.X(i, l)) -
                                     gy.begin());
                // values above the thinned grid maximum cannot occur: the
                // maximum observed value is always kept
                (s.A[i] == 1 ? h1 : h0)((Eigen::Index)gi, (Eigen::Index)hi) += w[i];
            }
            for (auto* hp : {&h1, &h0}) {
                auto& hm = *hp;
                for (size_t g = 1; g < G; ++g) hm.row((Eigen::Index)g) += hm.row((Eigen::Index)g - 1);
                for (size_t h = 1; h < H; ++h) hm.col((Eigen::Index)h) += hm.col((Eigen::Index)h - 1);
            }
            double acc = 0.0;
            for (size_t g = 0; g + 1 < G; ++g)
                for (size_t h = 0; h + 1 < H; ++h) {
                    double d = h1((Eigen::Index)g, (Eigen::Index)h) / tot1 -
                               h0((Eigen::Index)g, (Eigen::Index)h) / tot0;
                    acc += d * d * (gx[g + 1] - gx[g]) * (gy[h + 1] - gy[h]);
                }
            out.push_back(std::sqrt(acc));
        }
    return out;
}

BalanceReport balance_report(const Sample& s, const Eigen::VectorXd& w, int max_poly) {
    check_weights_len(s, w);
    Eigen::VectorXd wn = normalize_group_weights(s.A, w);
    // energies on the standardized scale, matching how weights are solved,
    // so the minimizing method really carries the smallest reported value
    Eigen::MatrixXd D = distance_matrix(standardize(s).first.X);

    BalanceReport r;
    r.covariates = s.covariate_names;
    for (int lab : s.labels) r.energy_two_term += weighted_energy_distance(D, s.A, wn, lab).value;
    r.energy_three_term = r.energy_two_term;
    for (size_t a = 0; a < s.labels.size(); ++a)
        for (size_t b = a + 1; b < s.labels.size(); ++b)
            r.energy_three_term +=
                between_group_weighted_energy(D, s.A, wn, s.labels[a], s.labels[b]);

    if (s.binary()) {
        Eigen::VectorXd m = smd(s, wn);
        r.smd.assign(m.data(), m.data() + m.size());
        Eigen::VectorXd m2 = smd_derived(s, wn, max_poly);
        r.smd2.assign(m2.data(), m2.data() + m2.size());
        r.derived_terms = derived_term_names(s, max_poly);
        Eigen::VectorXd r1 = rimse_1d(s, wn);
        r.rimse1.assign(r1.data(), r1.data() + r1.size());
        r.rimse2 = rimse_2d(s, wn);
        r.pairs = pair_names(s);
    }

    r.weight_stats.min = wn.minCoeff();
    r.weight_stats.max = wn.maxCoeff();
    r.weight_stats.mean = wn.mean();
    r.weight_stats.sd = std::sqrt((wn.array() - wn.mean()).square().sum() /
                                  (double)(wn.size() - 1));
    r.weight_stats.a5 = wn.maxCoeff() / std::cbrt((double)s.n());
    return r;
}

std::string render_report(const BalanceReport& r, bool full) {
    auto fmt = full ? format_full : format_short;
    std::ostringstream os;
    os << "energy_two_term\t" << fmt(r.energy_two_term) << "\n";
    os << "energy_three_term\t" << fmt(r.energy_three_term) << "\n";
    os << "weight_min\t" << fmt(r.weight_stats.min) << "\n";
    os << "weight_max\t" << fmt(r.weight_stats.max) << "\n";
    os << "weight_mean\t" << fmt(r.weight_stats.mean) << "\n";
    os << "weight_sd\t" << fmt(r.weight_stats.sd) << "\n";
    os << "weight_max_over_cuberoot_n\t" << fmt(r.weight_stats.a5) << "\n";
    if (!r.smd.empty()) {
        os << "\ncovariate\tsmd\trimse1\n";
        for (size_t j = 0; j < r.covariates.size(); ++j)
            os << r.covariates[j] << "\t" << fmt(r.smd[j]) << "\t" << fmt(r.rimse1[j]) << "\n";
        if (!r.smd2.empty()) {
            os << "\nterm\tsmd\n";
            for (size_t j = 0; j < r.derived_terms.size(); ++j)
                os << r.derived_terms[j] << "\t" << fmt(r.smd2[j]) << "\n";
        }
        if (!r.rimse2.empty()) {
            os << "\npair\trimse2\n";
            for (size_t j = 0; j < r.pairs.size(); ++j)
                os << r.pairs[j] << "\t" << fmt(r.rimse2[j]) << "\n";
        }
    }
    return os.str();
}

}  // namespace ebal
