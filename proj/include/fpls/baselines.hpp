#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace fpls {

struct LinearFit {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;  // zero-filled for penalized fits
  double intercept_std_error = 0.0;
  double r_squared = 0.0;
  double lambda = 0.0;
  // Set when the normal equations needed a 1e-10 ridge jitter to solve.
  bool ridge_fallback = false;
  int sweeps = 0;  // coordinate-descent sweeps used (lasso only)
};

// Least squares with intercept via the centered normal equations. Standard
// errors use the n - p - 1 residual variance. A numerically singular design
// falls back to a 1e-10 ridge jitter (flagged); a design that stays singular
// raises RankDeficiencyError.
LinearFit ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// L1-penalized least squares, objective (1/2n) ||y - a - Xb||^2 + lambda*|b|_1.
// Features are standardized internally and coefficients mapped back; the
// intercept is unpenalized. Cyclic coordinate descent, iterated until the
// KKT conditions hold to 1e-6 on the standardized problem. lambda = 0
// reproduces least squares.
LinearFit lasso_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    double lambda);

// Geometric grid from the smallest lambda that zeroes every coefficient down
// to ratio * that value.
std::vector<double> default_lambda_grid(const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y, int count = 50,
                                        double ratio = 1e-4);

// K-fold cross-validated lambda: minimizes mean held-out squared error over
// the grid (ties to the smaller lambda), then refits on all rows.
LinearFit lasso_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const std::vector<double>& grid, int folds, std::uint64_t seed);

// Variance-reduction importance from a single deterministic regression tree
// grown on (features, effects): nodes with at least 20 rows are split where
// the squared-error reduction is largest, children keep at least
// max(10, ceil(0.2 * parent)) rows, and each feature's share is its summed
// reduction over the total. A constant response yields uniform shares and
// the degenerate flag.
struct ImportanceReport {
  std::vector<std::string> features;
  Eigen::VectorXd shares;  // sums to 1
  bool degenerate = false;
};

ImportanceReport regression_tree_importance(const Eigen::MatrixXd& features,
                                            const Eigen::VectorXd& response,
                                            const std::vector<std::string>& names);

}  // namespace fpls
