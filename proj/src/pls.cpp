#include "fpls/pls.hpp"

#include <algorithm>
#include <cmath>

#include "fpls/baselines.hpp"
#include "fpls/errors.hpp"
#include "fpls/stats.hpp"

namespace fpls {

namespace {

constexpr double kExhaustionTol = 1e-12;  // max |cov| below this ends the fit
constexpr double kConditionLimit = 1e12;

void check_centered(const Dataset& data) {
  const double feature_span = 1.0 + data.features.cwiseAbs().maxCoeff();
  const double outcome_span = 1.0 + data.outcome.cwiseAbs().maxCoeff();
  const double col_mean = data.features.colwise().mean().cwiseAbs().maxCoeff();
  const double y_mean = std::abs(data.outcome.mean());
  if (col_mean > 1e-8 * feature_span || y_mean > 1e-8 * outcome_span) {
    throw DataError("fit_nipals: input is not centered");
  }
}

}  // namespace

Eigen::VectorXd PlsModel::coefficients() const {
  if (q == 0) return Eigen::VectorXd::Zero(weights.rows());
  const Eigen::MatrixXd vw = loadings.transpose() * weights;  // q x q
  Eigen::FullPivLU<Eigen::MatrixXd> lu(vw);
  if (!lu.isInvertible()) {
    throw RankDeficiencyError("coefficient mapping: loadings' * weights is singular");
  }
  return weights * lu.solve(outcome_coefficients);
}

std::optional<Eigen::VectorXd> compute_weight(const Eigen::MatrixXd& x_residual,
                                              const Eigen::VectorXd& y_residual) {
  const Eigen::Index n = x_residual.rows();
  const Eigen::Index p = x_residual.cols();
  if (n != y_residual.size()) throw ShapeError("compute_weight: row mismatch");
  if (n < 2) throw ShapeError("compute_weight: need at least 2 rows");

  Eigen::VectorXd w(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    w[j] = sample_covariance(x_residual.col(j), y_residual);
  }
  if (w.cwiseAbs().maxCoeff() < kExhaustionTol) return std::nullopt;
  return w / w.norm();
}

PlsModel fit_nipals(const Dataset& centered, const CenteringStats& stats, int q) {
  const Eigen::Index n = centered.n_rows();
  const Eigen::Index p = centered.n_features();
  if (q < 1 || q > p) {
    throw ConfigError("fit_nipals: component count must be in [1, " +
                      std::to_string(p) + "], got " + std::to_string(q));
  }
  check_centered(centered);

  PlsModel model;
  model.centering = stats;
  model.weights.resize(p, q);
  model.loadings.resize(p, q);
  model.scores.resize(n, q);
  model.outcome_coefficients.resize(q);

  Eigen::MatrixXd x_res = centered.features;
  Eigen::VectorXd y_res = centered.outcome;

  int achieved = 0;
  for (int j = 0; j < q; ++j) {
    const auto weight = compute_weight(x_res, y_res);
    if (!weight) {
      model.truncated = true;
      break;
    }
    const Eigen::VectorXd score = x_res * (*weight);
    const double score_ss = score.squaredNorm();
    if (score_ss <= 0.0) {
      model.truncated = true;
      break;
    }
    const Eigen::VectorXd loading = x_res.transpose() * score / score_ss;
    const double slope = y_res.dot(score) / score_ss;

    model.weights.col(j) = *weight;
    model.loadings.col(j) = loading;
    model.scores.col(j) = score;
    model.outcome_coefficients[j] = slope;

    x_res.noalias() -= score * loading.transpose();
    y_res -= slope * score;
    ++achieved;
  }

  model.q = achieved;
  model.weights.conservativeResize(p, achieved);
  model.loadings.conservativeResize(p, achieved);
  model.scores.conservativeResize(n, achieved);
  model.outcome_coefficients.conservativeResize(achieved);
  model.feature_residual = std::move(x_res);
  return model;
}

Eigen::MatrixXd project(const PlsModel& model, const Eigen::MatrixXd& x_centered) {
  if (x_centered.cols() != model.weights.rows()) {
    throw ShapeError("project: column count does not match the fitted model");
  }
  Eigen::MatrixXd residual = x_centered;
  Eigen::MatrixXd scores(x_centered.rows(), model.q);
  for (int j = 0; j < model.q; ++j) {
    const Eigen::VectorXd score = residual * model.weights.col(j);
    scores.col(j) = score;
    residual.noalias() -= score * model.loadings.col(j).transpose();
  }
  return scores;
}

Eigen::VectorXd predict_outcome(const PlsModel& model,
                                const Eigen::MatrixXd& x_centered, int use_q) {
  if (use_q <= 0 || use_q > model.q) use_q = model.q;
  const Eigen::MatrixXd scores = project(model, x_centered);
  Eigen::VectorXd pred =
      Eigen::VectorXd::Constant(x_centered.rows(), model.centering.outcome_mean);
  for (int j = 0; j < use_q; ++j) {
    pred += model.outcome_coefficients[j] * scores.col(j);
  }
  return pred;
}

KrylovBasis make_krylov_basis(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              int q) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n != y.size()) throw ShapeError("krylov basis: row mismatch");
  if (n < 2) throw ShapeError("krylov basis: need at least 2 rows");
  if (q < 1 || q > p) {
    throw ConfigError("krylov basis: component count must be in [1, " +
                      std::to_string(p) + "]");
  }

  const Eigen::MatrixXd x_c = x.rowwise() - x.colwise().mean();
  const Eigen::VectorXd y_c = y.array() - y.mean();

  KrylovBasis out;
  out.s_xx = x_c.transpose() * x_c / static_cast<double>(n - 1);
  out.s_xy = x_c.transpose() * y_c / static_cast<double>(n - 1);
  out.basis.resize(p, q);
  out.basis.col(0) = out.s_xy;
  for (int j = 1; j < q; ++j) {
    out.basis.col(j).noalias() = out.s_xx * out.basis.col(j - 1);
  }
  return out;
}

Eigen::VectorXd krylov_coefficients(const KrylovBasis& basis, int q) {
  if (q < 1 || q > basis.basis.cols()) {
    throw ConfigError("krylov coefficients: q outside the built basis");
  }
  const auto r = basis.basis.leftCols(q);
  const Eigen::MatrixXd middle = r.transpose() * basis.s_xx * r;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen(middle);
  if (eigen.info() != Eigen::Success) {
    throw RankDeficiencyError("krylov coefficients: eigensolver failed");
  }
  const Eigen::VectorXd lambda = eigen.eigenvalues();
  const double lo = lambda.minCoeff();
  const double hi = lambda.maxCoeff();
  if (lo <= 0.0 || hi / lo > kConditionLimit) {
    throw RankDeficiencyError(
        "krylov coefficients: basis gram matrix condition exceeds 1e12; "
        "reduce the component count");
  }
  const Eigen::VectorXd rhs = r.transpose() * basis.s_xy;
  const Eigen::VectorXd z =
      eigen.eigenvectors() *
      (eigen.eigenvectors().transpose() * rhs).cwiseQuotient(lambda);
  return r * z;
}

ComponentSelection select_components_cv(const Dataset& data, int folds, int max_q,
                                        std::uint64_t seed, bool scale) {
  const Eigen::Index n = data.n_rows();
  const Eigen::Index p = data.n_features();
  if (folds < 2) throw ConfigError("component selection: need at least 2 folds");
  if (n < 2 * folds) {
    throw DataError("component selection: need at least 2 rows per fold");
  }
  max_q = std::clamp<int>(max_q, 1, static_cast<int>(p));

  std::vector<int> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<double> sse(static_cast<std::size_t>(max_q), 0.0);

  for (int f = 0; f < folds; ++f) {
    std::vector<int> hold, train;
    for (std::size_t i = 0; i < order.size(); ++i) {
      (static_cast<int>(i) % folds == f ? hold : train).push_back(order[i]);
    }

    Eigen::MatrixXd x_train(train.size(), p), x_hold(hold.size(), p);
    Eigen::VectorXd y_train(train.size()), y_hold(hold.size());
    Eigen::VectorXi p_train(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      x_train.row(static_cast<Eigen::Index>(i)) = data.features.row(train[i]);
      y_train[static_cast<Eigen::Index>(i)] = data.outcome[train[i]];
      p_train[static_cast<Eigen::Index>(i)] = data.policy[train[i]];
    }
    for (std::size_t i = 0; i < hold.size(); ++i) {
      x_hold.row(static_cast<Eigen::Index>(i)) = data.features.row(hold[i]);
      y_hold[static_cast<Eigen::Index>(i)] = data.outcome[hold[i]];
    }

    Dataset train_data(std::move(x_train), std::move(y_train), std::move(p_train),
                       data.feature_names);
    auto [centered, stats] = center(train_data, scale);
    const PlsModel model = fit_nipals(centered, stats, max_q);

    // Sequential held-out predictions; once the fit truncates, deeper q
    // reuse the last available prediction.
    const Eigen::MatrixXd hold_centered = apply_centering(stats, x_hold);
    Eigen::MatrixXd residual = hold_centered;
    Eigen::VectorXd pred =
        Eigen::VectorXd::Constant(hold_centered.rows(), stats.outcome_mean);
    for (int qq = 1; qq <= max_q; ++qq) {
      if (qq <= model.q) {
        const Eigen::VectorXd score = residual * model.weights.col(qq - 1);
        pred += model.outcome_coefficients[qq - 1] * score;
        residual.noalias() -= score * model.loadings.col(qq - 1).transpose();
      }
      sse[static_cast<std::size_t>(qq - 1)] += (y_hold - pred).squaredNorm();
    }
  }

  ComponentSelection selection;
  selection.rmsep.resize(static_cast<std::size_t>(max_q));
  for (int qq = 1; qq <= max_q; ++qq) {
    selection.rmsep[static_cast<std::size_t>(qq - 1)] =
        std::sqrt(sse[static_cast<std::size_t>(qq - 1)] / static_cast<double>(n));
  }
  const double best = *std::min_element(selection.rmsep.begin(), selection.rmsep.end());
  for (int qq = 1; qq <= max_q; ++qq) {
    if (selection.rmsep[static_cast<std::size_t>(qq - 1)] <= best * 1.01) {
      selection.q = qq;
      break;
    }
  }
  return selection;
}

std::vector<ComponentLoadings> loading_report(const PlsModel& model,
                                              const Dataset& raw_data) {
  if (raw_data.n_rows() != model.scores.rows()) {
    throw ShapeError("loading report: dataset rows do not match fitted scores");
  }
  std::vector<ComponentLoadings> report;
  for (int j = 0; j < model.q; ++j) {
    const LinearFit fit = ols_fit(raw_data.features, model.scores.col(j));
    ComponentLoadings comp;
    comp.component = j + 1;
    comp.intercept = fit.intercept;
    comp.intercept_std_error = fit.intercept_std_error;
    comp.r_squared = fit.r_squared;
    for (Eigen::Index k = 0; k < raw_data.n_features(); ++k) {
      comp.rows.push_back({raw_data.feature_names[static_cast<std::size_t>(k)],
                           fit.coefficients[k], fit.std_errors[k]});
    }
    report.push_back(std::move(comp));
  }
  return report;
}

}  // namespace fpls
