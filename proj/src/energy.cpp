#include "energy.hpp"

#include <cmath>
#include <set>
#include <vector>

namespace ebal {

namespace {

constexpr double kPi = 3.14159265358979323846;

double pair_dist(const Eigen::MatrixXd& X, Eigen::Index i, const Eigen::MatrixXd& Y,
                 Eigen::Index j) {
    double s2 = (X.row(i) - Y.row(j)).squaredNorm();
    return std::sqrt(std::max(0.0, s2));
}

void check_group_sum(const Eigen::VectorXi& A, const Eigen::VectorXd& w, int label) {
    auto idx = group_indices(A, label);
    if (idx.empty()) throw DataError("empty treatment group " + std::to_string(label));
    double s = 0.0;
    for (int i : idx) s += w[i];
    if (std::abs(s - (double)idx.size()) > 1e-8)
        throw DataError("group " + std::to_string(label) +
                        " weights must sum to the group size; normalize_group_weights first");
}

void check_weights(const Eigen::VectorXd& w) {
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (!(w[i] >= 0.0)) throw DataError("negative weight at index " + std::to_string(i));
}

}  // namespace

Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& X) {
    if (!X.allFinite()) throw DataError("non-finite covariate");
    Eigen::Index n = X.rows();
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double d = pair_dist(X, i, X, j);
            D(i, j) = d;
            D(j, i) = d;
        }
    return D;
}

double energy_distance(const Eigen::MatrixXd& Za, const Eigen::MatrixXd& Zb) {
    if (Za.rows() == 0 || Zb.rows() == 0) throw DataError("empty sample");
    if (Za.cols() != Zb.cols()) throw DataError("dimension mismatch");
    Eigen::Index n = Za.rows(), m = Zb.rows();
    double cross = 0.0, within_a = 0.0, within_b = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) cross += pair_dist(Za, i, Zb, j);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) within_a += 2.0 * pair_dist(Za, i, Za, j);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i + 1; j < m; ++j) within_b += 2.0 * pair_dist(Zb, i, Zb, j);
    return 2.0 / ((double)n * m) * cross - within_a / ((double)n * n) - within_b / ((double)m * m);
}

Eigen::VectorXd normalize_group_weights(const Eigen::VectorXi& A, const Eigen::VectorXd& w) {
    if (A.size() != w.size()) throw DataError("weight length does not match treatment length");
    check_weights(w);
    std::set<int> labels(A.data(), A.data() + A.size());
    Eigen::VectorXd out = w;
    for (int lab : labels) {
        auto idx = group_indices(A, lab);
        double s = 0.0;
        for (int i : idx) s += w[i];
        if (!(s > 0.0))
            throw DataError("weights in group " + std::to_string(lab) + " sum to zero");
        double scale = (double)idx.size() / s;
        for (int i : idx) out[i] = w[i] * scale;
    }
    return out;
}

EnergyBreakdown weighted_energy_distance(const Eigen::MatrixXd& D, const Eigen::VectorXi& A,
                                         const Eigen::VectorXd& w, int a) {
    Eigen::Index n = D.rows();
    if (A.size() != n || w.size() != n) throw DataError("length mismatch");
    check_weights(w);
    check_group_sum(A, w, a);
    auto idx = group_indices(A, a);
    double na = (double)idx.size();

    double cross = 0.0;
    for (int i : idx) cross += w[i] * D.row(i).sum();
    cross *= 2.0 / (na * (double)n);

    double within_w = 0.0;
    for (int i : idx)
        for (int j : idx) within_w += w[i] * w[j] * D(i, j);
    within_w /= na * na;

    double within_pool = D.sum() / ((double)n * n);

    EnergyBreakdown b;
    b.cross = cross;
    b.within_weighted = within_w;
    b.within_pooled = within_pool;
    b.value = cross - within_w - within_pool;
    return b;
}

double between_group_weighted_energy(const Eigen::MatrixXd& D, const Eigen::VectorXi& A,
                                     const Eigen::VectorXd& w, int a, int b) {
    if (a == b) throw DataError("between-group energy needs two distinct groups");
    Eigen::Index n = D.rows();
    if (A.size() != n || w.size() != n) throw DataError("length mismatch");
    check_weights(w);
    check_group_sum(A, w, a);
    check_group_sum(A, w, b);
    auto ia = group_indices(A, a), ib = group_indices(A, b);
    double na = (double)ia.size(), nb = (double)ib.size();

    double cross = 0.0;
    for (int i : ia)
        for (int j : ib) cross += w[i] * w[j] * D(i, j);
    double within_a = 0.0;
    for (int i : ia)
        for (int j : ia) within_a += w[i] * w[j] * D(i, j);
    double within_b = 0.0;
    for (int i : ib)
        for (int j : ib) within_b += w[i] * w[j] * D(i, j);

    return 2.0 / (na * nb) * cross - within_a / (na * na) - within_b / (nb * nb);
}

double echf_gamma_integral(const Eigen::MatrixXd& X, const Eigen::VectorXd& gamma,
                           const QuadratureSpec& spec) {
    Eigen::Index n = X.rows(), p = X.cols();
    if (p < 1 || p > 2) throw DataError("characteristic-function quadrature supports p in {1,2}");
    if (gamma.size() != n) throw DataError("length mismatch");
    if (std::abs(gamma.sum()) > 1e-8)
        throw DataError("contrast coefficients must sum to zero");

    int N = spec.nodes > 0 ? spec.nodes : (p == 1 ? 4000 : 400);
    double T = spec.T;
    double h = 2.0 * T / (N - 1);
    std::vector<double> t(N), wt(N);
    for (int k = 0; k < N; ++k) {
        t[k] = -T + k * h;
        wt[k] = (k == 0 || k == N - 1) ? h / 2.0 : h;
    }

    // coincident rows keep a non-oscillating contribution beyond the box;
    // everything else is averaged out by the 1/||t||^{1+p} decay
    double dup = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (X.row(i) == X.row(j)) dup += gamma[i] * gamma[j];

    double total = 0.0;
    if (p == 1) {
        for (int k = 0; k < N; ++k) {
            if (std::abs(t[k]) <= spec.eps0) continue;
            double c = 0.0, s = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                double ang = t[k] * X(j, 0);
                c += gamma[j] * std::cos(ang);
                s += gamma[j] * std::sin(ang);
            }
            total += wt[k] * (c * c + s * s) / (kPi * t[k] * t[k]);
        }
        total += dup * 2.0 / (kPi * T);
    } else {
        // the integrand behaves like c(theta)/r near the origin, which a
        // cartesian grid cannot resolve; blend it out smoothly and integrate
        // the near region in polar coordinates where it is regular
        double ra = 4.0 * h, rb = 12.0 * h;
        auto blend = [&](double r) {
            if (r <= ra) return 0.0;
            if (r >= rb) return 1.0;
            double s = (r - ra) / (rb - ra);
            return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
        };
        auto mass = [&](double tx, double ty) {
            double c = 0.0, s = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                double ang = tx * X(j, 0) + ty * X(j, 1);
                c += gamma[j] * std::cos(ang);
                s += gamma[j] * std::sin(ang);
            }
            return c * c + s * s;
        };

        Eigen::MatrixXd c1(N, n), s1(N, n), c2(N, n), s2(N, n);
        for (int k = 0; k < N; ++k)
            for (Eigen::Index j = 0; j < n; ++j) {
                c1(k, j) = std::cos(t[k] * X(j, 0));
                s1(k, j) = std::sin(t[k] * X(j, 0));
                c2(k, j) = std::cos(t[k] * X(j, 1));
                s2(k, j) = std::sin(t[k] * X(j, 1));
            }
        for (int k1 = 0; k1 < N; ++k1)
            for (int k2 = 0; k2 < N; ++k2) {
                double r2 = t[k1] * t[k1] + t[k2] * t[k2];
                double r = std::sqrt(r2);
                if (r <= ra) continue;
                double c = 0.0, s = 0.0;
                for (Eigen::Index j = 0; j < n; ++j) {
                    double cj = c1(k1, j) * c2(k2, j) - s1(k1, j) * s2(k2, j);
                    double sj = s1(k1, j) * c2(k2, j) + c1(k1, j) * s2(k2, j);
                    c += gamma[j] * cj;
                    s += gamma[j] * sj;
                }
                total += wt[k1] * wt[k2] * blend(r) * (c * c + s * s) / (2.0 * kPi * r2 * r);
            }

        // polar disk eps0 < r < rb: periodic trapezoid in the angle, Simpson
        // in the radius; the angular spectrum width grows with r * diameter
        double maxd = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j)
                maxd = std::max(maxd, pair_dist(X, i, X, j));
        int M1 = std::max(96, (int)std::ceil(3.0 * rb * maxd));
        M1 = std::min(M1 + (M1 & 1), 4096);
        int M2 = 200;
        double hr = (rb - spec.eps0) / M2;
        double near = 0.0;
        for (int k = 0; k <= M2; ++k) {
            double r = spec.eps0 + k * hr;
            double ring = 0.0;
            for (int l = 0; l < M1; ++l) {
                double th = 2.0 * kPi * l / M1;
                ring += mass(r * std::cos(th), r * std::sin(th));
            }
            ring *= 2.0 * kPi / M1;
            double g = (1.0 - blend(r)) * ring / (2.0 * kPi * r * r);
            double sw = (k == 0 || k == M2) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
            near += sw * g;
        }
        total += near * hr / 3.0;
        total += dup * 2.0 * std::sqrt(2.0) / (kPi * T);
    }
    return total;
}

double echf_integral(const Eigen::MatrixXd& X, const Eigen::VectorXi& A, const Eigen::VectorXd& w,
                     int a, const QuadratureSpec& spec) {
    Eigen::Index n = X.rows();
    if (A.size() != n || w.size() != n) throw DataError("length mismatch");
    check_weights(w);
    check_group_sum(A, w, a);
    double na = (double)group_indices(A, a).size();
    Eigen::VectorXd gamma(n);
    for (Eigen::Index i = 0; i < n; ++i)
        gamma[i] = 1.0 / (double)n - (A[i] == a ? w[i] / na : 0.0);
    return echf_gamma_integral(X, gamma, spec);
}

double echf_between_integral(const Eigen::MatrixXd& X, const Eigen::VectorXi& A,
                             const Eigen::VectorXd& w, int a, int b, const QuadratureSpec& spec) {
    if (a == b) throw DataError("between-group energy needs two distinct groups");
    Eigen::Index n = X.rows();
    if (A.size() != n || w.size() != n) throw DataError("length mismatch");
    check_weights(w);
    check_group_sum(A, w, a);
    check_group_sum(A, w, b);
    double na = (double)group_indices(A, a).size();
    double nb = (double)group_indices(A, b).size();
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (A[i] == a) gamma[i] = w[i] / na;
        if (A[i] == b) gamma[i] = -w[i] / nb;
    }
    return echf_gamma_integral(X, gamma, spec);
}

double echf_two_sample_integral(const Eigen::MatrixXd& Za, const Eigen::MatrixXd& Zb,
                                const QuadratureSpec& spec) {
    if (Za.cols() != Zb.cols()) throw DataError("dimension mismatch");
    Eigen::Index n = Za.rows(), m = Zb.rows();
    Eigen::MatrixXd X(n + m, Za.cols());
    X.topRows(n) = Za;
    X.bottomRows(m) = Zb;
    Eigen::VectorXd gamma(n + m);
    gamma.head(n).setConstant(1.0 / (double)n);
    gamma.tail(m).setConstant(-1.0 / (double)m);
    return echf_gamma_integral(X, gamma, spec);
}

}  // namespace ebal
