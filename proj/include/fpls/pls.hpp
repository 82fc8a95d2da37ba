#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fpls/data.hpp"

namespace fpls {

// Partial least squares fit for a single outcome, built by iterated
// deflation. Column j of `weights` maximizes covariance with the j-th
// outcome residual; `scores` columns are mutually orthogonal.
struct PlsModel {
  Eigen::MatrixXd weights;               // p x q, unit-norm columns
  Eigen::MatrixXd loadings;              // p x q
  Eigen::MatrixXd scores;                // n x q (training scores)
  Eigen::VectorXd outcome_coefficients;  // q, one slope per score
  Eigen::MatrixXd feature_residual;      // n x p left after q deflations
  CenteringStats centering;
  int q = 0;
  // True when fitting stopped before the requested count because the
  // residual covariance was exhausted; q then holds the achieved count,
  // possibly 0.
  bool truncated = false;

  // Regression coefficients mapped back to the centered feature space:
  // weights * (loadings' * weights)^-1 * outcome_coefficients. With q = p
  // this reproduces least squares.
  Eigen::VectorXd coefficients() const;
};

// Covariance-direction weight for one component: entry j is the sample
// covariance of feature-residual column j with the outcome residual,
// normalized to unit length. Returns nullopt when every entry is below
// 1e-12 in magnitude (residual exhausted).
std::optional<Eigen::VectorXd> compute_weight(const Eigen::MatrixXd& x_residual,
                                              const Eigen::VectorXd& y_residual);

// Fits q components on an already-centered dataset. 1 <= q <= p required.
PlsModel fit_nipals(const Dataset& centered, const CenteringStats& stats, int q);

// Maps new centered rows through the fitted deflation sequence, returning
// their scores (m x q). Rows must be centered with the model's statistics.
Eigen::MatrixXd project(const PlsModel& model, const Eigen::MatrixXd& x_centered);

// Fitted-value predictions for new centered rows, on the original outcome
// scale, using the first `use_q` components (0 = all).
Eigen::VectorXd predict_outcome(const PlsModel& model,
                                const Eigen::MatrixXd& x_centered, int use_q = 0);

// Krylov-basis form of the same estimator: basis column j equals
// S_xx^j * s_xy (built by repeated matrix-vector products), where S_xx and
// s_xy are the sample covariance of the features and their covariance with
// the outcome. Centering happens internally; inputs are raw.
struct KrylovBasis {
  Eigen::MatrixXd basis;  // p x q
  Eigen::MatrixXd s_xx;   // p x p
  Eigen::VectorXd s_xy;   // p
};

KrylovBasis make_krylov_basis(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              int q);

// Coefficients b = R (R' S_xx R)^-1 R' s_xy using the first q basis columns.
// The q x q middle matrix is eigen-solved; condition numbers above 1e12 (or
// a non-positive spectrum) raise RankDeficiencyError suggesting a smaller q.
Eigen::VectorXd krylov_coefficients(const KrylovBasis& basis, int q);

// Five-fold (by default) cross-validated component count. Per fold, centering
// is recomputed on the training portion; RMSEP is pooled over held-out rows.
// The selected q is the smallest whose RMSEP is within 1% of the minimum.
struct ComponentSelection {
  int q = 1;
  std::vector<double> rmsep;  // rmsep[j] is for j+1 components
};

ComponentSelection select_components_cv(const Dataset& data, int folds, int max_q,
                                        std::uint64_t seed, bool scale = false);

// Per-component interpretation table: each fitted score regressed on the raw
// features with an intercept, reported with standard errors and R^2.
struct LoadingRow {
  std::string feature;
  double coefficient = 0.0;
  double std_error = 0.0;
};

struct ComponentLoadings {
  int component = 0;  // 1-based in reports
  double intercept = 0.0;
  double intercept_std_error = 0.0;
  double r_squared = 0.0;
  std::vector<LoadingRow> rows;
};

std::vector<ComponentLoadings> loading_report(const PlsModel& model,
                                              const Dataset& raw_data);

}  // namespace fpls
