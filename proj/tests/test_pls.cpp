#include <cmath>
#include <optional>
#include <vector>

#include "doctest.h"
#include "fpls/data.hpp"
#include "fpls/errors.hpp"
#include "fpls/pls.hpp"
#include "fpls/random.hpp"
#include "fpls/stats.hpp"

using fpls::Dataset;
using fpls::PlsModel;
using fpls::Rng;

namespace {

Dataset random_regression(int n, int p, std::uint64_t seed,
                          double noise_sd = 1.0) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd beta(p);
  for (int j = 0; j < p; ++j) beta[j] = rng.normal(0.0, 2.0);
  Eigen::VectorXd y(n);
  Eigen::VectorXi pol(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal(j * 0.3, 1.0 + 0.1 * j);
    y[i] = x.row(i).dot(beta) + rng.normal(0.0, noise_sd);
    pol[i] = i % 2;
  }
  std::vector<std::string> names;
  for (int j = 0; j < p; ++j) names.push_back("f" + std::to_string(j));
  return Dataset(x, y, pol, names);
}

}  // namespace

TEST_SUITE_BEGIN("pls");

TEST_CASE("weight is the normalized covariance direction") {
  Rng rng(41);
  int n = 60;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    y[i] = rng.normal();
  }
  x = x.rowwise() - x.colwise().mean().eval();
  y.array() -= y.mean();

  auto weight = fpls::compute_weight(x, y);
  REQUIRE(weight.has_value());
  // Independent two-pass covariance, n-1 denominator.
  Eigen::VectorXd expected(3);
  for (int j = 0; j < 3; ++j) {
    double mx = x.col(j).mean();
    double my = y.mean();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += (x(i, j) - mx) * (y[i] - my);
    expected[j] = acc / (n - 1);
  }
  expected.normalize();
  CHECK((*weight - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(weight->norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single proportional column gives weight one") {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  x.array() -= x.mean();
  y.array() -= y.mean();
  auto weight = fpls::compute_weight(x, y);
  REQUIRE(weight.has_value());
  CHECK((*weight)[0] == doctest::Approx(1.0));
}

TEST_CASE("orthogonal outcome exhausts the residual") {
  // Build y exactly orthogonal to every centered column, so all covariances
  // vanish to rounding.
  Rng rng(42);
  int n = 40;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    y[i] = rng.normal();
  }
  x = x.rowwise() - x.colwise().mean().eval();
  y.array() -= y.mean();
  y -= x * (x.transpose() * x).ldlt().solve(x.transpose() * y);

  auto weight = fpls::compute_weight(x, y);
  CHECK_FALSE(weight.has_value());

  Eigen::VectorXi pol(n);
  for (int i = 0; i < n; ++i) pol[i] = i % 2;
  Dataset d(x, y, pol, {"a", "b"});
  auto [centered, stats] = fpls::center(d, false);
  PlsModel model = fpls::fit_nipals(centered, stats, 2);
  CHECK(model.truncated);
  CHECK(model.q == 0);
}

TEST_CASE("scores are mutually orthogonal across random designs") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    int p = 2 + static_cast<int>(seed % 4);
    Dataset d = random_regression(150, p, 100 + seed);
    auto [centered, stats] = fpls::center(d, false);
    PlsModel model = fpls::fit_nipals(centered, stats, p);
    for (int a = 0; a < model.q; ++a) {
      for (int b = a + 1; b < model.q; ++b) {
        double cosangle =
            std::abs(model.scores.col(a).dot(model.scores.col(b))) /
            (model.scores.col(a).norm() * model.scores.col(b).norm());
        CHECK(cosangle < 1e-8);
      }
    }
  }
}

TEST_CASE("deflation telescopes back to the stored residual") {
  Dataset d = random_regression(120, 4, 7);
  auto [centered, stats] = fpls::center(d, false);
  PlsModel model = fpls::fit_nipals(centered, stats, 4);
  Eigen::MatrixXd reconstructed = centered.features;
  for (int j = 0; j < model.q; ++j) {
    reconstructed -= model.scores.col(j) * model.loadings.col(j).transpose();
  }
  CHECK((reconstructed - model.feature_residual).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("full component count reproduces least squares") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    int p = 2 + static_cast<int>(seed);
    Dataset d = random_regression(200, p, 300 + seed);
    auto [centered, stats] = fpls::center(d, false);
    PlsModel model = fpls::fit_nipals(centered, stats, p);
    REQUIRE(model.q == p);
    Eigen::VectorXd beta_pls = model.coefficients();
    Eigen::VectorXd beta_ols =
        (centered.features.transpose() * centered.features)
            .ldlt()
            .solve(centered.features.transpose() * centered.outcome);
    double rel = (beta_pls - beta_ols).norm() / beta_ols.norm();
    CHECK(rel < 1e-8);
  }
}

TEST_CASE("coefficients match a direct regression on the scores") {
  Dataset d = random_regression(90, 2, 55);
  auto [centered, stats] = fpls::center(d, false);
  PlsModel model = fpls::fit_nipals(centered, stats, 2);
  // Scores are orthogonal, so the joint regression of y on them separates
  // into per-score slopes; mapping through the weights must give the same
  // fitted values as the original-space coefficients.
  Eigen::VectorXd slopes(model.q);
  for (int j = 0; j < model.q; ++j) {
    slopes[j] = model.scores.col(j).dot(centered.outcome) /
                model.scores.col(j).squaredNorm();
  }
  Eigen::VectorXd fitted_scores = model.scores * slopes;
  Eigen::VectorXd fitted_beta = centered.features * model.coefficients();
  CHECK((fitted_scores - fitted_beta).cwiseAbs().maxCoeff() <
        1e-8 * fitted_scores.cwiseAbs().maxCoeff());
}

TEST_CASE("projection reproduces the training scores") {
  Dataset d = random_regression(80, 3, 21);
  auto [centered, stats] = fpls::center(d, false);
  PlsModel model = fpls::fit_nipals(centered, stats, 3);
  Eigen::MatrixXd replayed = fpls::project(model, centered.features);
  CHECK((replayed - model.scores).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("the mean row projects to zero scores") {
  Dataset d = random_regression(70, 3, 22);
  auto [centered, stats] = fpls::center(d, false);
  PlsModel model = fpls::fit_nipals(centered, stats, 2);
  Eigen::MatrixXd zero_row = Eigen::MatrixXd::Zero(1, 3);
  Eigen::MatrixXd score = fpls::project(model, zero_row);
  CHECK(score.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("project rejects the wrong column count") {
  Dataset d = random_regression(50, 3, 23);
  auto [centered, stats] = fpls::center(d, false);
  PlsModel model = fpls::fit_nipals(centered, stats, 2);
  Eigen::MatrixXd wrong = Eigen::MatrixXd::Zero(5, 2);
  CHECK_THROWS_AS(fpls::project(model, wrong), fpls::ShapeError);
}

TEST_CASE("rank deficiency truncates the component sequence") {
  Rng rng(63);
  int n = 60;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  Eigen::VectorXi pol(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = 2.0 * x(i, 0);  // rank one
    y[i] = 3.0 * x(i, 0);     // fully explained by the single direction
    pol[i] = i % 2;
  }
  Dataset d(x, y, pol, {"a", "b"});
  auto [centered, stats] = fpls::center(d, false);
  PlsModel model = fpls::fit_nipals(centered, stats, 2);
  CHECK(model.truncated);
  CHECK(model.q == 1);
}

TEST_CASE("krylov basis columns satisfy the power recurrence") {
  Dataset d = random_regression(100, 4, 31);
  fpls::KrylovBasis basis =
      fpls::make_krylov_basis(d.features, d.outcome, 4);
  REQUIRE(basis.basis.cols() == 4);
  CHECK((basis.basis.col(0) - basis.s_xy).cwiseAbs().maxCoeff() < 1e-12);
  for (int j = 1; j < 4; ++j) {
    Eigen::VectorXd expected = basis.s_xx * basis.basis.col(j - 1);
    CHECK((basis.basis.col(j) - expected).cwiseAbs().maxCoeff() <
          1e-10 * expected.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("identity covariance collapses the one-component solution") {
  // Orthonormalize columns so the sample covariance is exactly the identity,
  // then the q=1 closed form must return s_xy itself.
  Rng rng(32);
  int n = 200;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    y[i] = rng.normal();
  }
  x = x.rowwise() - x.colwise().mean().eval();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  Eigen::MatrixXd q_mat =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, 3);
  x = q_mat * std::sqrt(static_cast<double>(n - 1));

  fpls::KrylovBasis basis = fpls::make_krylov_basis(x, y, 1);
  CHECK((basis.s_xx - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <
        1e-10);
  Eigen::VectorXd b1 = fpls::krylov_coefficients(basis, 1);
  CHECK((b1 - basis.s_xy).cwiseAbs().maxCoeff() <
        1e-10 * basis.s_xy.cwiseAbs().maxCoeff());
}

TEST_CASE("krylov and nipals coefficients agree for every component count") {
  // Spread the feature scales so the covariance has well-separated
  // eigenvalues; with near-identical scales the power basis goes collinear
  // and the closed form rightly refuses.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(500 + seed);
    int n = 200;
    int p = 3;
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    Eigen::VectorXi pol(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = rng.normal(0.0, 1.0);
      x(i, 1) = rng.normal(0.0, 2.5);
      x(i, 2) = rng.normal(0.0, 6.0);
      y[i] = 1.5 * x(i, 0) - 0.8 * x(i, 1) + 0.4 * x(i, 2) + rng.normal();
      pol[i] = i % 2;
    }
    Dataset d(x, y, pol, {"a", "b", "c"});
    auto [centered, stats] = fpls::center(d, false);
    fpls::KrylovBasis basis =
        fpls::make_krylov_basis(d.features, d.outcome, p);
    for (int q = 1; q <= p; ++q) {
      PlsModel model = fpls::fit_nipals(centered, stats, q);
      Eigen::VectorXd via_nipals = model.coefficients();
      Eigen::VectorXd via_krylov = fpls::krylov_coefficients(basis, q);
      double rel =
          (via_nipals - via_krylov).norm() / std::max(via_krylov.norm(), 1e-30);
      CHECK(rel < 1e-6);
    }
  }
}

TEST_CASE("near-collinear power basis is refused, not inverted") {
  // Isotropic features make successive covariance powers of the weight
  // vector almost identical, so the gram system is numerically singular.
  Rng rng(91);
  int n = 300;
  Eigen::MatrixXd x(n, 4);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = rng.normal();
    y[i] = x(i, 0) + rng.normal();
  }
  fpls::KrylovBasis basis = fpls::make_krylov_basis(x, y, 4);
  CHECK_THROWS_AS(fpls::krylov_coefficients(basis, 4),
                  fpls::RankDeficiencyError);
}

TEST_CASE("cross-validation finds the single index") {
  // One feature carries all the signal. The first weight still has sampling
  // error, so a second component recovers a sliver of real signal; the sample
  // needs to be large enough to push that sliver below the one percent
  // stabilization threshold.
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(71 + seed);
    int n = 2000;
    Eigen::MatrixXd x(n, 4);
    Eigen::VectorXd y(n);
    Eigen::VectorXi pol(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < 4; ++j) x(i, j) = rng.normal();
      y[i] = 2.0 * x(i, 0) + rng.normal();
      pol[i] = i % 2;
    }
    Dataset d(x, y, pol, {"a", "b", "c", "d"});
    fpls::ComponentSelection pick = fpls::select_components_cv(d, 5, 4, 17);
    CHECK(pick.q == 1);
    REQUIRE(pick.rmsep.size() == 4);
    // The one-component error sits at the noise floor.
    CHECK(pick.rmsep[0] > 0.8);
    CHECK(pick.rmsep[0] < 1.2);
  }
}

TEST_CASE("exact linear outcomes drive selection to the full model") {
  // Noiseless and exactly linear in all four features: the full component
  // count reproduces least squares, whose held-out error is zero, so the
  // stabilization rule has to walk all the way out.
  Rng rng(75);
  int n = 250;
  Eigen::MatrixXd x(n, 4);
  Eigen::VectorXd y(n);
  Eigen::VectorXi pol(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = rng.normal();
    y[i] = 2.0 * x(i, 0) - 1.0 * x(i, 1) + 0.5 * x(i, 2) + 0.25 * x(i, 3);
    pol[i] = i % 2;
  }
  Dataset d(x, y, pol, {"a", "b", "c", "d"});
  fpls::ComponentSelection pick = fpls::select_components_cv(d, 5, 4, 17);
  CHECK(pick.q == 4);
  REQUIRE(pick.rmsep.size() == 4);
  CHECK(pick.rmsep[3] < 1e-8);
}

TEST_CASE("cross-validation on pure noise stays at one component") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(810 + seed);
    int n = 300;
    Eigen::MatrixXd x(n, 4);
    Eigen::VectorXd y(n);
    Eigen::VectorXi pol(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < 4; ++j) x(i, j) = rng.normal();
      y[i] = rng.normal();
      pol[i] = i % 2;
    }
    Dataset d(x, y, pol, {"a", "b", "c", "d"});
    fpls::ComponentSelection pick = fpls::select_components_cv(d, 5, 4, seed);
    CHECK(pick.q == 1);
  }
}

TEST_CASE("cross-validation is deterministic in the seed") {
  Dataset d = random_regression(150, 3, 88, 2.0);
  fpls::ComponentSelection a = fpls::select_components_cv(d, 5, 3, 5);
  fpls::ComponentSelection b = fpls::select_components_cv(d, 5, 3, 5);
  CHECK(a.q == b.q);
  REQUIRE(a.rmsep.size() == b.rmsep.size());
  for (std::size_t i = 0; i < a.rmsep.size(); ++i) {
    CHECK(a.rmsep[i] == b.rmsep[i]);
  }
}

TEST_CASE("predict_outcome matches the coefficient path") {
  Dataset d = random_regression(100, 3, 44);
  auto [centered, stats] = fpls::center(d, false);
  PlsModel model = fpls::fit_nipals(centered, stats, 2);
  Eigen::VectorXd via_predict =
      fpls::predict_outcome(model, centered.features);
  Eigen::VectorXd via_beta =
      (centered.features * model.coefficients()).array() +
      stats.outcome_mean;
  CHECK((via_predict - via_beta).cwiseAbs().maxCoeff() <
        1e-10 * via_beta.cwiseAbs().maxCoeff());
}

TEST_CASE("loading report recovers the exact linear map") {
  // Every score is a linear function of the raw features, so the per-component
  // regression must fit perfectly.
  Dataset d = random_regression(120, 3, 45);
  auto [centered, stats] = fpls::center(d, false);
  PlsModel model = fpls::fit_nipals(centered, stats, 3);
  auto report = fpls::loading_report(model, d);
  REQUIRE(report.size() == 3);
  for (const auto& comp : report) {
    CHECK(comp.r_squared > 1.0 - 1e-10);
    REQUIRE(comp.rows.size() == 3);
    for (const auto& row : comp.rows) {
      CHECK(row.std_error < 1e-6);
    }
  }
  // Component numbering is 1-based for the report files.
  CHECK(report[0].component == 1);
  CHECK(report[2].component == 3);
}

TEST_SUITE_END();
