#pragma once
#include <Eigen/Dense>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ebal {

// thrown for invalid user-supplied data (maps to exit code 2 in the CLI)
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// thrown when the QP solver cannot produce a usable result
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Sample {
    Eigen::MatrixXd X;                          // n x p covariates
    Eigen::VectorXi A;                          // treatment code per row
    Eigen::VectorXd Y;                          // size 0 when absent
    std::vector<int> labels;                    // sorted distinct treatment codes
    std::vector<std::string> covariate_names;   // size p

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index p() const { return X.cols(); }
    bool has_outcome() const { return Y.size() == X.rows(); }
    bool binary() const { return labels.size() == 2 && labels[0] == 0 && labels[1] == 1; }
};

Sample make_sample(Eigen::MatrixXd X, Eigen::VectorXi A, Eigen::VectorXd Y = {},
                   std::vector<std::string> names = {});

std::vector<int> group_indices(const Eigen::VectorXi& A, int label);

struct Standardization {
    Eigen::VectorXd means;
    Eigen::VectorXd sds;  // n-1 divisor, strictly positive
};

// pooled mean-zero / unit-variance rescaling of every covariate
std::pair<Sample, Standardization> standardize(const Sample& s);
Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& X, const Standardization& st);
Eigen::MatrixXd invert_standardization(const Eigen::MatrixXd& Xs, const Standardization& st);

enum class Role { covariate, treatment, outcome, ignore };

// reads a delimited table; columns absent from role_map default to covariate.
// non-numeric covariate columns are one-hot expanded with the first (sorted)
// level dropped.
Sample load_table(const std::string& path, const std::map<std::string, Role>& role_map);

}  // namespace ebal
