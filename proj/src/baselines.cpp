#include "fpls/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fpls/errors.hpp"
#include "fpls/random.hpp"
#include "fpls/stats.hpp"

namespace fpls {

namespace {

constexpr double kKktTol = 1e-6;
constexpr int kMaxSweeps = 100000;

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

}  // namespace

LinearFit ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n != y.size()) throw ShapeError("ols: row mismatch");
  if (n < p + 2) throw DataError("ols: need at least p + 2 rows");

  const Eigen::RowVectorXd mu = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - mu;
  const Eigen::VectorXd yc = y.array() - y_mean;

  Eigen::MatrixXd gram = xc.transpose() * xc;
  const Eigen::VectorXd rhs = xc.transpose() * yc;

  LinearFit fit;
  auto try_solve = [&](const Eigen::MatrixXd& a) -> std::pair<bool, Eigen::LDLT<Eigen::MatrixXd>> {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) return {false, std::move(ldlt)};
    const Eigen::VectorXd beta = ldlt.solve(rhs);
    if (!beta.allFinite()) return {false, std::move(ldlt)};
    const double scale = std::max({1.0, rhs.cwiseAbs().maxCoeff(),
                                   (a * beta).cwiseAbs().maxCoeff()});
    const double gap = (a * beta - rhs).cwiseAbs().maxCoeff();
    if (gap > 1e-6 * scale) return {false, std::move(ldlt)};
    fit.coefficients = beta;
    return {true, std::move(ldlt)};
  };

  auto [ok, solver] = try_solve(gram);
  if (!ok) {
    const double jitter = 1e-10 * std::max(1.0, gram.diagonal().maxCoeff());
    gram.diagonal().array() += jitter;
    auto [ok2, solver2] = try_solve(gram);
    if (!ok2) throw RankDeficiencyError("ols: singular design");
    solver = std::move(solver2);
    fit.ridge_fallback = true;
  }

  fit.intercept = y_mean - mu.dot(fit.coefficients);
  const Eigen::VectorXd residual = yc - xc * fit.coefficients;
  const double rss = residual.squaredNorm();
  const double tss = yc.squaredNorm();
  fit.r_squared = tss > 0.0 ? 1.0 - rss / tss : 1.0;

  const double dof = static_cast<double>(std::max<Eigen::Index>(n - p - 1, 1));
  const double sigma2 = rss / dof;
  const Eigen::MatrixXd gram_inv =
      solver.solve(Eigen::MatrixXd::Identity(p, p));
  fit.std_errors = (sigma2 * gram_inv.diagonal()).cwiseMax(0.0).cwiseSqrt();
  fit.intercept_std_error = std::sqrt(
      sigma2 * (1.0 / static_cast<double>(n) + mu * gram_inv * mu.transpose()));
  return fit;
}

LinearFit lasso_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    double lambda) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n != y.size()) throw ShapeError("lasso: row mismatch");
  if (n < 2) throw DataError("lasso: need at least 2 rows");
  if (lambda < 0.0) throw ConfigError("lasso: lambda must be nonnegative");

  const Eigen::RowVectorXd mu = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::VectorXd yc = y.array() - y_mean;

  // Standardize; zero-variance columns are carried with coefficient 0.
  Eigen::VectorXd sd(p);
  std::vector<Eigen::Index> live;
  for (Eigen::Index j = 0; j < p; ++j) {
    sd[j] = sample_sd(x.col(j));
    if (sd[j] > 0.0) live.push_back(j);
  }

  LinearFit fit;
  fit.lambda = lambda;
  fit.coefficients = Eigen::VectorXd::Zero(p);
  fit.std_errors = Eigen::VectorXd::Zero(p);
  if (live.empty()) {
    fit.intercept = y_mean;
    fit.r_squared = 0.0;
    return fit;
  }

  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(live.size()));
  for (std::size_t k = 0; k < live.size(); ++k) {
    z.col(static_cast<Eigen::Index>(k)) =
        (x.col(live[k]).array() - mu[live[k]]) / sd[live[k]];
  }
  const Eigen::Index m = z.cols();
  const Eigen::VectorXd denom = z.colwise().squaredNorm() / static_cast<double>(n);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd residual = yc;

  int sweeps = 0;
  bool converged = false;
  double worst_violation = 0.0;
  while (sweeps < kMaxSweeps) {
    ++sweeps;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double rho =
          z.col(j).dot(residual) / static_cast<double>(n) + denom[j] * beta[j];
      const double updated = soft_threshold(rho, lambda) / denom[j];
      if (updated != beta[j]) {
        residual -= (updated - beta[j]) * z.col(j);
        beta[j] = updated;
      }
    }
    // KKT check on the standardized problem.
    worst_violation = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double grad = z.col(j).dot(residual) / static_cast<double>(n);
      const double violation =
          beta[j] == 0.0 ? std::max(0.0, std::abs(grad) - lambda)
                         : std::abs(grad - lambda * (beta[j] > 0.0 ? 1.0 : -1.0));
      worst_violation = std::max(worst_violation, violation);
    }
    if (worst_violation <= kKktTol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ConvergenceError("lasso: coordinate descent stalled, KKT violation " +
                           std::to_string(worst_violation) + " after " +
                           std::to_string(sweeps) + " sweeps");
  }

  for (std::size_t k = 0; k < live.size(); ++k) {
    fit.coefficients[live[k]] = beta[static_cast<Eigen::Index>(k)] / sd[live[k]];
  }
  fit.intercept = y_mean - mu.dot(fit.coefficients);
  const double rss = residual.squaredNorm();
  const double tss = yc.squaredNorm();
  fit.r_squared = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  fit.sweeps = sweeps;
  return fit;
}

std::vector<double> default_lambda_grid(const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y, int count,
                                        double ratio) {
  if (count < 2) throw ConfigError("lambda grid: need at least 2 points");
  const Eigen::Index n = x.rows();
  const double y_mean = y.mean();
  const Eigen::VectorXd yc = y.array() - y_mean;

  double lambda_max = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double sd = sample_sd(x.col(j));
    if (sd <= 0.0) continue;
    const Eigen::VectorXd zj = (x.col(j).array() - x.col(j).mean()) / sd;
    lambda_max = std::max(lambda_max, std::abs(zj.dot(yc)) / static_cast<double>(n));
  }
  if (lambda_max <= 0.0) return {0.0};

  std::vector<double> grid(static_cast<std::size_t>(count));
  const double step = std::log(ratio) / static_cast<double>(count - 1);
  for (int i = 0; i < count; ++i) {
    grid[static_cast<std::size_t>(i)] = lambda_max * std::exp(step * i);
  }
  return grid;  // descending
}

LinearFit lasso_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const std::vector<double>& grid, int folds, std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  if (grid.empty()) throw ConfigError("lasso cv: empty lambda grid");
  if (folds < 2) throw ConfigError("lasso cv: need at least 2 folds");
  if (n < 2 * folds) throw DataError("lasso cv: need at least 2 rows per fold");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<double> lambdas = grid;
  std::sort(lambdas.begin(), lambdas.end());  // ascending: ties resolve small

  double best_mse = std::numeric_limits<double>::infinity();
  double best_lambda = lambdas.front();
  for (const double lambda : lambdas) {
    double sse = 0.0;
    for (int f = 0; f < folds; ++f) {
      std::vector<int> hold, train;
      for (std::size_t i = 0; i < order.size(); ++i) {
        (static_cast<int>(i) % folds == f ? hold : train).push_back(order[i]);
      }
      Eigen::MatrixXd x_train(train.size(), x.cols()), x_hold(hold.size(), x.cols());
      Eigen::VectorXd y_train(train.size()), y_hold(hold.size());
      for (std::size_t i = 0; i < train.size(); ++i) {
        x_train.row(static_cast<Eigen::Index>(i)) = x.row(train[i]);
        y_train[static_cast<Eigen::Index>(i)] = y[train[i]];
      }
      for (std::size_t i = 0; i < hold.size(); ++i) {
        x_hold.row(static_cast<Eigen::Index>(i)) = x.row(hold[i]);
        y_hold[static_cast<Eigen::Index>(i)] = y[hold[i]];
      }
      const LinearFit fit = lasso_fit(x_train, y_train, lambda);
      const Eigen::VectorXd pred =
          (x_hold * fit.coefficients).array() + fit.intercept;
      sse += (y_hold - pred).squaredNorm();
    }
    const double mse = sse / static_cast<double>(n);
    if (mse < best_mse) {
      best_mse = mse;
      best_lambda = lambda;
    }
  }
  return lasso_fit(x, y, best_lambda);
}

namespace {

struct ImportanceAccumulator {
  const Eigen::MatrixXd& features;
  const Eigen::VectorXd& response;
  Eigen::VectorXd gains;

  double node_sse(const std::vector<int>& rows) const {
    double sum = 0.0, sumsq = 0.0;
    for (int r : rows) {
      sum += response[r];
      sumsq += response[r] * response[r];
    }
    return std::max(0.0, sumsq - sum * sum / static_cast<double>(rows.size()));
  }

  void grow(std::vector<int> rows) {
    const std::size_t m = rows.size();
    if (m < 20) return;
    const std::size_t min_child = std::max<std::size_t>(
        10, static_cast<std::size_t>(
                std::ceil(0.2 * static_cast<double>(m))));

    const double parent_sse = node_sse(rows);
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<int> sorted = rows;
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      std::sort(sorted.begin(), sorted.end(), [&](int a, int b) {
        return features(a, j) < features(b, j);
      });
      double left_sum = 0.0, left_sumsq = 0.0;
      double total_sum = 0.0, total_sumsq = 0.0;
      for (int r : sorted) {
        total_sum += response[r];
        total_sumsq += response[r] * response[r];
      }
      for (std::size_t i = 0; i + 1 < m; ++i) {
        const double v = response[sorted[i]];
        left_sum += v;
        left_sumsq += v * v;
        if (features(sorted[i], j) == features(sorted[i + 1], j)) continue;
        const std::size_t left_n = i + 1;
        const std::size_t right_n = m - left_n;
        if (left_n < min_child || right_n < min_child) continue;
        const double left_sse = std::max(
            0.0, left_sumsq - left_sum * left_sum / static_cast<double>(left_n));
        const double right_sum = total_sum - left_sum;
        const double right_sumsq = total_sumsq - left_sumsq;
        const double right_sse = std::max(
            0.0,
            right_sumsq - right_sum * right_sum / static_cast<double>(right_n));
        const double gain = parent_sse - left_sse - right_sse;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(j);
          best_threshold =
              0.5 * (features(sorted[i], j) + features(sorted[i + 1], j));
        }
      }
    }

    if (best_feature < 0 || best_gain <= 0.0) return;
    gains[best_feature] += best_gain;

    std::vector<int> left, right;
    for (int r : rows) {
      (features(r, best_feature) <= best_threshold ? left : right).push_back(r);
    }
    grow(std::move(left));
    grow(std::move(right));
  }
};

}  // namespace

ImportanceReport regression_tree_importance(const Eigen::MatrixXd& features,
                                            const Eigen::VectorXd& response,
                                            const std::vector<std::string>& names) {
  const Eigen::Index n = features.rows();
  const Eigen::Index p = features.cols();
  if (n != response.size()) throw ShapeError("importance: row mismatch");
  if (names.size() != static_cast<std::size_t>(p)) {
    throw ShapeError("importance: name count mismatch");
  }
  if (n < 20) throw DataError("importance: need at least 20 rows");

  ImportanceAccumulator acc{features, response, Eigen::VectorXd::Zero(p)};
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  acc.grow(std::move(rows));

  ImportanceReport report;
  report.features = names;
  const double total = acc.gains.sum();
  if (total <= 0.0) {
    report.shares = Eigen::VectorXd::Constant(p, 1.0 / static_cast<double>(p));
    report.degenerate = true;
  } else {
    report.shares = acc.gains / total;
  }
  return report;
}

}  // namespace fpls
