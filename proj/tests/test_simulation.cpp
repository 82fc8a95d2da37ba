#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "fpls/errors.hpp"
#include "fpls/random.hpp"
#include "fpls/simulation.hpp"
#include "fpls/stats.hpp"

using fpls::Design;
using fpls::Estimator;
using fpls::ReplicationConfig;
using fpls::SimulatedDataset;
using fpls::SimulationSpec;

namespace {

// Closed-form effect moments, worked out from the design definitions with
// independent normal features (X1, X2, X3, X4) ~ N((-1, 1, 2, 0), I):
//   rct:     T = X3 + 0.1 X4 + 0.2 X3 X4
//            E[T] = 2;  E[T^2] = 5 + 0.01 + 0.04*5 + 2*0.02*2 = 5.29
//            Var = 5.29 - 4 = 1.29
//   iv:      T = 0.5 X1 -> mean -0.5, var 0.25
//   product: T = X3 X1  -> mean -2, var E[X3^2]E[X1^2] - 4 = 10 - 4 = 6
//   dose:    T = 3 X1   -> mean -3, var 9
struct EffectMoments {
  double mean;
  double variance;
};

EffectMoments expected_moments(Design design) {
  switch (design) {
    case Design::Rct:
      return {2.0, 1.29};
    case Design::Iv:
      return {-0.5, 0.25};
    case Design::Product:
      return {-2.0, 6.0};
    case Design::Dose:
      return {-3.0, 9.0};
  }
  return {0.0, 0.0};
}

double normal_density(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

}  // namespace

TEST_SUITE_BEGIN("simulation");

TEST_CASE("design and estimator names round-trip") {
  for (Design d :
       {Design::Rct, Design::Iv, Design::Product, Design::Dose}) {
    CHECK(fpls::design_from_name(fpls::design_name(d)) == d);
  }
  for (Estimator e : {Estimator::ForestPls, Estimator::CausalForest}) {
    CHECK(fpls::estimator_from_name(fpls::estimator_name(e)) == e);
  }
  CHECK_THROWS_AS(fpls::design_from_name("banana"), fpls::ConfigError);
  CHECK_THROWS_AS(fpls::estimator_from_name("banana"), fpls::ConfigError);
}

TEST_CASE("generated effects match their closed-form moments") {
  int n = 200000;
  for (Design design :
       {Design::Rct, Design::Iv, Design::Product, Design::Dose}) {
    SimulatedDataset sim = fpls::generate({design, n, 7});
    EffectMoments want = expected_moments(design);
    double got_mean = sim.true_effects.mean();
    double got_var =
        (sim.true_effects.array() - got_mean).square().sum() / (n - 1);
    // Monte Carlo tolerance: four standard errors of the sample moments.
    double mean_se = std::sqrt(want.variance / n);
    CHECK(std::abs(got_mean - want.mean) < 4.0 * mean_se);
    CHECK(std::abs(got_var - want.variance) < 0.05 * want.variance);
    CHECK(sim.design == design);
    CHECK(sim.dataset.n_rows() == n);
  }
}

TEST_CASE("feature draws sit at their stated means") {
  SimulatedDataset sim = fpls::generate({Design::Rct, 100000, 3});
  Eigen::VectorXd mu(4);
  mu << -1, 1, 2, 0;
  for (int j = 0; j < 4; ++j) {
    CHECK(std::abs(sim.dataset.features.col(j).mean() - mu[j]) < 0.02);
  }
  REQUIRE(sim.dataset.feature_names.size() == 4);
  CHECK(sim.dataset.feature_names[0] == "X1");
  CHECK(sim.dataset.feature_names[3] == "X4");
}

TEST_CASE("true effects are recomputable from the stored features") {
  SimulatedDataset sim = fpls::generate({Design::Rct, 500, 11});
  for (int i = 0; i < 500; ++i) {
    double x3 = sim.dataset.features(i, 2);
    double x4 = sim.dataset.features(i, 3);
    double want = x3 + 0.1 * x4 + 0.2 * x3 * x4;
    CHECK(sim.true_effects[i] == doctest::Approx(want).epsilon(1e-12));
  }

  SimulatedDataset prod = fpls::generate({Design::Product, 500, 11});
  for (int i = 0; i < 500; ++i) {
    double want = prod.dataset.features(i, 2) * prod.dataset.features(i, 0);
    CHECK(prod.true_effects[i] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("randomized designs keep a two-valued policy") {
  SimulatedDataset sim = fpls::generate({Design::Rct, 20000, 13});
  CHECK_FALSE(sim.policy_binarized);
  double treated = sim.dataset.policy.cast<double>().mean();
  CHECK(std::abs(treated - 0.5) < 0.02);

  SimulatedDataset prod = fpls::generate({Design::Product, 20000, 14});
  CHECK_FALSE(prod.policy_binarized);
}

TEST_CASE("continuous policies are cut at the sample median") {
  for (Design design : {Design::Iv, Design::Dose}) {
    SimulatedDataset sim = fpls::generate({design, 5001, 17});
    CHECK(sim.policy_binarized);
    REQUIRE(sim.raw_policy.size() == 5001);
    int treated = sim.dataset.policy.sum();
    // A median cut splits the sample as evenly as an odd count allows.
    CHECK(std::abs(2 * treated - 5001) <= 1);
    // The cut preserves order: treated rows hold the larger raw values.
    std::vector<double> raw(sim.raw_policy.data(),
                            sim.raw_policy.data() + sim.raw_policy.size());
    double med = fpls::quantile(raw, 0.5);
    for (int i = 0; i < 200; ++i) {
      if (sim.dataset.policy[i] == 1) {
        CHECK(sim.raw_policy[i] > med - 1e-12);
      } else {
        CHECK(sim.raw_policy[i] < med + 1e-12);
      }
    }
  }
}

TEST_CASE("dose policy has the advertised location") {
  SimulatedDataset sim = fpls::generate({Design::Dose, 100000, 19});
  // D = X1 - X2 + 2 X3 + noise has mean -1 - 1 + 4 = 2.
  CHECK(std::abs(sim.raw_policy.mean() - 2.0) < 0.03);
}

TEST_CASE("tiny samples are refused") {
  CHECK_THROWS_AS(fpls::generate({Design::Rct, 3, 1}), fpls::ConfigError);
}

TEST_CASE("silverman bandwidth applies its formula") {
  fpls::Rng rng(23);
  Eigen::VectorXd values(400);
  for (int i = 0; i < 400; ++i) values[i] = rng.normal(1.0, 2.0);
  double sd = fpls::sample_sd(values);
  double want = 1.06 * sd * std::pow(400.0, -0.2);
  CHECK(fpls::silverman_bandwidth(values) == doctest::Approx(want).epsilon(1e-12));

  Eigen::VectorXd flat = Eigen::VectorXd::Constant(50, 3.0);
  CHECK_THROWS_AS(fpls::silverman_bandwidth(flat), fpls::PointMassError);
}

TEST_CASE("kde grid covers the padded range") {
  Eigen::VectorXd grid = fpls::kde_grid(-1.0, 4.0, 0.5);
  REQUIRE(grid.size() == 512);
  CHECK(grid[0] == doctest::Approx(-1.0 - 1.5));
  CHECK(grid[511] == doctest::Approx(4.0 + 1.5));
  for (int i = 1; i < 512; ++i) {
    CHECK(grid[i] > grid[i - 1]);
  }
}

TEST_CASE("kernel density integrates to one") {
  fpls::Rng rng(29);
  for (int trial = 0; trial < 3; ++trial) {
    int n = 500 + 700 * trial;
    Eigen::VectorXd values(n);
    for (int i = 0; i < n; ++i) values[i] = rng.normal(trial, 1.0 + trial);
    double h = fpls::silverman_bandwidth(values);
    Eigen::VectorXd grid =
        fpls::kde_grid(values.minCoeff(), values.maxCoeff(), h);
    Eigen::VectorXd density = fpls::kde(values, grid, h);
    CHECK(density.minCoeff() >= 0.0);
    CHECK(fpls::trapezoid_mass(grid, density) == doctest::Approx(1.0).epsilon(0.01));
  }
}

TEST_CASE("kernel density tracks the standard normal") {
  fpls::Rng rng(31);
  int n = 10000;
  Eigen::VectorXd values(n);
  for (int i = 0; i < n; ++i) values[i] = rng.normal();
  double h = fpls::silverman_bandwidth(values);
  Eigen::VectorXd grid = fpls::kde_grid(values.minCoeff(), values.maxCoeff(), h);
  Eigen::VectorXd density = fpls::kde(values, grid, h);
  double worst = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    if (grid[i] < -3.0 || grid[i] > 3.0) continue;
    worst = std::max(worst, std::abs(density[i] - normal_density(grid[i])));
  }
  CHECK(worst < 0.02);
}

TEST_CASE("point masses are rejected by the kernel") {
  Eigen::VectorXd values = Eigen::VectorXd::Zero(100);
  Eigen::VectorXd grid = fpls::kde_grid(-5.0, 5.0, 1.0);
  CHECK_THROWS_AS(fpls::silverman_bandwidth(values), fpls::PointMassError);
  CHECK_THROWS_AS(fpls::kde(values, grid, 0.0), fpls::PointMassError);
}

TEST_CASE("trapezoid mass on a hand triangle") {
  Eigen::VectorXd grid(3);
  grid << 0, 1, 2;
  Eigen::VectorXd density(3);
  density << 0, 1, 0;
  CHECK(fpls::trapezoid_mass(grid, density) == doctest::Approx(1.0));
}

TEST_CASE("a perfect estimator collapses the two densities") {
  // Inject an oracle that returns the true effects; the estimated density
  // must coincide with the true one and every moment pair must match.
  ReplicationConfig cfg;
  cfg.design = Design::Rct;
  cfg.n = 300;
  cfg.replications = 4;
  cfg.seed = 37;
  auto oracle = [](const SimulatedDataset& sim, std::uint64_t,
                   int& selected_components) {
    selected_components = 2;
    return sim.true_effects;
  };
  fpls::ReplicationSummary summary = fpls::run_replications_with(cfg, oracle);
  REQUIRE(summary.moments.size() == 4);
  REQUIRE(summary.grid.size() == 512);
  CHECK((summary.density_true - summary.density_estimated)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  for (const auto& m : summary.moments) {
    CHECK(m.estimated_mean == doctest::Approx(m.true_mean).epsilon(1e-12));
    CHECK(m.estimated_variance ==
          doctest::Approx(m.true_variance).epsilon(1e-12));
    CHECK(m.selected_components == 2);
  }
  CHECK(fpls::trapezoid_mass(summary.grid, summary.density_true) ==
        doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("replication seeds follow the documented chain") {
  ReplicationConfig cfg;
  cfg.design = Design::Product;
  cfg.n = 200;
  cfg.replications = 3;
  cfg.seed = 41;
  std::vector<std::uint64_t> estimator_seeds;
  auto oracle = [&](const SimulatedDataset& sim, std::uint64_t seed,
                    int& selected_components) {
    selected_components = 1;
    estimator_seeds.push_back(seed);
    return sim.true_effects;
  };
  fpls::ReplicationSummary summary = fpls::run_replications_with(cfg, oracle);
  REQUIRE(estimator_seeds.size() == 3);
  for (int r = 0; r < 3; ++r) {
    CHECK(estimator_seeds[r] == fpls::Rng::derive(41, r, 1));
    // Replication r regenerates from derive(seed, r): its true moments are
    // reproducible from scratch.
    SimulatedDataset redo =
        fpls::generate({cfg.design, cfg.n, fpls::Rng::derive(41, r)});
    double mean = redo.true_effects.mean();
    CHECK(summary.moments[r].true_mean == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("the runner is deterministic") {
  ReplicationConfig cfg;
  cfg.design = Design::Rct;
  cfg.n = 150;
  cfg.replications = 2;
  cfg.seed = 43;
  auto oracle = [](const SimulatedDataset& sim, std::uint64_t,
                   int& selected_components) {
    selected_components = 1;
    return sim.true_effects * 0.9;
  };
  fpls::ReplicationSummary a = fpls::run_replications_with(cfg, oracle);
  fpls::ReplicationSummary b = fpls::run_replications_with(cfg, oracle);
  CHECK((a.density_estimated - b.density_estimated).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((a.grid - b.grid).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t i = 0; i < a.moments.size(); ++i) {
    CHECK(a.moments[i].estimated_mean == b.moments[i].estimated_mean);
  }
}

TEST_CASE("estimator failures carry the replication context") {
  ReplicationConfig cfg;
  cfg.design = Design::Rct;
  cfg.n = 120;
  cfg.replications = 2;
  cfg.seed = 47;
  auto broken = [](const SimulatedDataset&, std::uint64_t,
                   int&) -> Eigen::VectorXd {
    throw fpls::EstimationError("synthetic failure");
  };
  CHECK_THROWS_WITH_AS(fpls::run_replications_with(cfg, broken),
                       doctest::Contains("replication 0"),
                       fpls::EstimationError);
}

TEST_CASE("wrong-shaped estimates are rejected") {
  ReplicationConfig cfg;
  cfg.design = Design::Rct;
  cfg.n = 120;
  cfg.replications = 1;
  cfg.seed = 49;
  auto stub = [](const SimulatedDataset&, std::uint64_t,
                 int&) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(7); };
  CHECK_THROWS_AS(fpls::run_replications_with(cfg, stub), fpls::ShapeError);
}

TEST_CASE("the forest estimator runs end to end on a small draw") {
  ReplicationConfig cfg;
  cfg.design = Design::Rct;
  cfg.n = 70;  // below the small-sample threshold on purpose
  cfg.replications = 2;
  cfg.seed = 53;
  cfg.estimator = Estimator::ForestPls;
  cfg.pipeline.forest.n_trees = 40;
  fpls::ReplicationSummary summary = fpls::run_replications(cfg);
  REQUIRE(summary.moments.size() == 2);
  for (const auto& m : summary.moments) {
    CHECK(std::isfinite(m.estimated_mean));
    CHECK(m.estimated_variance >= 0.0);
    CHECK(m.selected_components >= 1);
  }
  CHECK(fpls::trapezoid_mass(summary.grid, summary.density_estimated) ==
        doctest::Approx(1.0).epsilon(0.01));

  cfg.estimator = Estimator::CausalForest;
  fpls::ReplicationSummary plain = fpls::run_replications(cfg);
  REQUIRE(plain.moments.size() == 2);
  for (const auto& m : plain.moments) {
    // The baseline forest splits on all four raw features directly.
    CHECK(m.selected_components == 4);
  }
}

TEST_SUITE_END();
