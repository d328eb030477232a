#include "sample.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "table.hpp"

namespace ebal {

Sample make_sample(Eigen::MatrixXd X, Eigen::VectorXi A, Eigen::VectorXd Y,
                   std::vector<std::string> names) {
    if (X.rows() < 2) throw DataError("need at least 2 rows");
    if (A.size() != X.rows()) throw DataError("treatment length does not match covariate rows");
    if (Y.size() != 0 && Y.size() != X.rows())
        throw DataError("outcome length does not match covariate rows");
    if (!X.allFinite()) throw DataError("non-finite covariate");
    if (Y.size() && !Y.allFinite()) throw DataError("non-finite outcome");

    Sample s;
    s.X = std::move(X);
    s.A = std::move(A);
    s.Y = std::move(Y);
    std::set<int> seen(s.A.data(), s.A.data() + s.A.size());
    s.labels.assign(seen.begin(), seen.end());
    if (s.labels.size() < 2) throw DataError("need at least 2 treatment groups");
    if (names.empty())
        for (Eigen::Index j = 0; j < s.X.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
    if ((Eigen::Index)names.size() != s.X.cols())
        throw DataError("covariate name count does not match columns");
    s.covariate_names = std::move(names);
    return s;
}

std::vector<int> group_indices(const Eigen::VectorXi& A, int label) {
    std::vector<int> idx;
    for (Eigen::Index i = 0; i < A.size(); ++i)
        if (A[i] == label) idx.push_back((int)i);
    return idx;
}

std::pair<Sample, Standardization> standardize(const Sample& s) {
    Eigen::Index n = s.n(), p = s.p();
    Standardization st;
    st.means = s.X.colwise().mean();
    st.sds.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        double ss = (s.X.col(j).array() - st.means[j]).square().sum();
        double sd = std::sqrt(ss / double(n - 1));
        if (!(sd > 0.0))
            throw DataError("zero-variance covariate: " + s.covariate_names[j]);
        st.sds[j] = sd;
    }
    Sample out = s;
    out.X = apply_standardization(s.X, st);
    return {std::move(out), std::move(st)};
}

Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& X, const Standardization& st) {
    return (X.rowwise() - st.means.transpose()).array().rowwise() /
           st.sds.transpose().array();
}

Eigen::MatrixXd invert_standardization(const Eigen::MatrixXd& Xs, const Standardization& st) {
    return (Xs.array().rowwise() * st.sds.transpose().array()).matrix().rowwise() +
           st.means.transpose();
}

namespace {

bool column_is_numeric(const TextTable& t, size_t col) {
    double v;
    for (const auto& row : t.rows)
        if (!parse_double(row[col], v)) return false;
    return true;
}

}  // namespace

Sample load_table(const std::string& path, const std::map<std::string, Role>& role_map) {
    TextTable t;
    try {
        t = read_table(path);
    } catch (const std::runtime_error& e) {
        throw DataError(e.what());
    }
    for (const auto& [name, role] : role_map) {
        (void)role;
        if (std::find(t.header.begin(), t.header.end(), name) == t.header.end())
            throw DataError("column not found: " + name);
    }

    auto role_of = [&](const std::string& name) {
        auto it = role_map.find(name);
        return it == role_map.end() ? Role::covariate : it->second;
    };

    int treat_col = -1, outcome_col = -1;
    std::vector<int> cov_cols;
    for (size_t j = 0; j < t.header.size(); ++j) {
        switch (role_of(t.header[j])) {
            case Role::treatment:
                if (treat_col >= 0) throw DataError("multiple treatment columns");
                treat_col = (int)j;
                break;
            case Role::outcome:
                if (outcome_col >= 0) throw DataError("multiple outcome columns");
                outcome_col = (int)j;
                break;
            case Role::covariate:
                cov_cols.push_back((int)j);
                break;
            case Role::ignore:
                break;
        }
    }
    if (treat_col < 0) throw DataError("no treatment column mapped");
    if (cov_cols.empty()) throw DataError("no covariate columns");

    size_t n = t.rows.size();
    Eigen::VectorXi A(n);
    for (size_t i = 0; i < n; ++i) {
        double v;
        if (!parse_double(t.rows[i][treat_col], v) || !std::isfinite(v))
            throw DataError("non-finite treatment at row " + std::to_string(i + 2));
        if (v != std::floor(v)) throw DataError("non-integer treatment code at row " + std::to_string(i + 2));
        A[(Eigen::Index)i] = (int)v;
    }

    Eigen::VectorXd Y;
    if (outcome_col >= 0) {
        Y.resize(n);
        for (size_t i = 0; i < n; ++i) {
            double v;
            if (!parse_double(t.rows[i][outcome_col], v) || !std::isfinite(v))
                throw DataError("non-finite outcome at row " + std::to_string(i + 2));
            Y[(Eigen::Index)i] = v;
        }
    }

    // build covariates: numeric columns pass through, categorical one-hot
    std::vector<std::string> names;
    std::vector<Eigen::VectorXd> cols;
    for (int j : cov_cols) {
        for (size_t i = 0; i < n; ++i)
            if (t.rows[i][j].empty())
                throw DataError("missing value in column " + t.header[j] + " at row " +
                                std::to_string(i + 2));
        if (column_is_numeric(t, j)) {
            Eigen::VectorXd c(n);
            for (size_t i = 0; i < n; ++i) {
                double v;
                parse_double(t.rows[i][j], v);
                if (!std::isfinite(v))
                    throw DataError("non-finite covariate " + t.header[j] + " at row " +
                                    std::to_string(i + 2));
                c[(Eigen::Index)i] = v;
            }
            cols.push_back(std::move(c));
            names.push_back(t.header[j]);
        } else {
            std::set<std::string> levels;
            for (const auto& row : t.rows) levels.insert(row[j]);
            if (levels.size() < 2)
                throw DataError("categorical column " + t.header[j] + " has a single level");
            bool first = true;
            for (const auto& lev : levels) {
                if (first) {  // reference level dropped
                    first = false;
                    continue;
                }
                Eigen::VectorXd c(n);
                for (size_t i = 0; i < n; ++i) c[(Eigen::Index)i] = t.rows[i][j] == lev ? 1.0 : 0.0;
                cols.push_back(std::move(c));
                names.push_back(t.header[j] + "=" + lev);
            }
        }
    }

    Eigen::MatrixXd X(n, cols.size());
    for (size_t j = 0; j < cols.size(); ++j) X.col((Eigen::Index)j) = cols[j];
    return make_sample(std::move(X), std::move(A), std::move(Y), std::move(names));
}

}  // namespace ebal
