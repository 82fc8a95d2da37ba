#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fpls/errors.hpp"
#include "fpls/random.hpp"
#include "fpls/report.hpp"
#include "fpls/stats.hpp"

using fpls::Rng;
using fpls::RunConfig;
using fpls::VigintileReport;

namespace {

// Independent binning: a point belongs to the lowest bin whose upper edge
// (a 20-quantile of the scores) is not exceeded.
std::vector<int> oracle_bins(const Eigen::VectorXd& scores) {
  int n = static_cast<int>(scores.size());
  std::vector<double> sorted(scores.data(), scores.data() + n);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  for (int t = 1; t <= 19; ++t) {
    edges.push_back(fpls::quantile_sorted(sorted, t / 20.0));
  }
  std::vector<int> bins(n);
  for (int i = 0; i < n; ++i) {
    int b = 0;
    for (double e : edges) {
      if (scores[i] > e) ++b;
    }
    bins[i] = b;  // 0-based
  }
  return bins;
}

}  // namespace

TEST_SUITE_BEGIN("report");

TEST_CASE("forty points in order give two per bin") {
  Eigen::VectorXd scores(40);
  for (int i = 0; i < 40; ++i) scores[i] = i + 1;
  Eigen::VectorXd effects = scores;
  VigintileReport report = fpls::build_vigintile_report(scores, effects, 1);
  REQUIRE(report.rows.size() == 20);
  CHECK(report.component == 1);
  CHECK(report.warnings.empty());
  int total = 0;
  for (int b = 0; b < 20; ++b) {
    const auto& row = report.rows[b];
    CHECK(row.vigintile == b + 1);
    CHECK(row.count == 2);
    total += row.count;
  }
  // Bin 1 holds values {1, 2}: its median interpolates to 1.5.
  CHECK(report.rows[0].p50 == doctest::Approx(1.5));
  CHECK(report.rows[0].score_lo == doctest::Approx(1.0));
  CHECK(report.rows[0].score_hi == doctest::Approx(2.0));
  CHECK(total == 40);
}

TEST_CASE("constant effects flatten every percentile") {
  Rng rng(3);
  Eigen::VectorXd scores(200);
  for (int i = 0; i < 200; ++i) scores[i] = rng.normal();
  Eigen::VectorXd effects = Eigen::VectorXd::Constant(200, 1.25);
  VigintileReport report = fpls::build_vigintile_report(scores, effects, 2);
  CHECK(report.component == 2);
  for (const auto& row : report.rows) {
    CHECK(row.p2_5 == doctest::Approx(1.25));
    CHECK(row.p25 == doctest::Approx(1.25));
    CHECK(row.p50 == doctest::Approx(1.25));
    CHECK(row.p75 == doctest::Approx(1.25));
    CHECK(row.p97_5 == doctest::Approx(1.25));
    CHECK(row.spread() == doctest::Approx(0.0));
  }
}

TEST_CASE("random inputs match the sort-and-slice oracle") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    int n = 173 + static_cast<int>(seed) * 41;
    Eigen::VectorXd scores(n), effects(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = rng.normal(0.0, 2.0);
      effects[i] = rng.normal(1.0, 3.0);
    }
    VigintileReport report = fpls::build_vigintile_report(scores, effects, 1);

    std::vector<int> bins = oracle_bins(scores);
    std::vector<std::vector<double>> grouped(20);
    for (int i = 0; i < n; ++i) grouped[bins[i]].push_back(effects[i]);

    int total = 0;
    for (int b = 0; b < 20; ++b) {
      const auto& row = report.rows[b];
      CHECK(row.count == static_cast<int>(grouped[b].size()));
      total += row.count;
      if (grouped[b].empty()) continue;
      std::sort(grouped[b].begin(), grouped[b].end());
      CHECK(row.p2_5 ==
            doctest::Approx(fpls::quantile_sorted(grouped[b], 0.025)));
      CHECK(row.p50 ==
            doctest::Approx(fpls::quantile_sorted(grouped[b], 0.5)));
      CHECK(row.p97_5 ==
            doctest::Approx(fpls::quantile_sorted(grouped[b], 0.975)));
      // Percentiles are non-decreasing across the row.
      CHECK(row.p2_5 <= row.p25);
      CHECK(row.p25 <= row.p50);
      CHECK(row.p50 <= row.p75);
      CHECK(row.p75 <= row.p97_5);
      CHECK(row.score_lo <= row.score_hi);
      CHECK(row.spread() == doctest::Approx(row.p97_5 - row.p2_5));
    }
    CHECK(total == n);
  }
}

TEST_CASE("heavy score ties empty some bins with a warning") {
  int n = 100;
  Eigen::VectorXd scores(n), effects(n);
  Rng rng(7);
  for (int i = 0; i < n; ++i) {
    scores[i] = (i < 60) ? 0.0 : static_cast<double>(i);  // 60% tied at zero
    effects[i] = rng.normal();
  }
  VigintileReport report = fpls::build_vigintile_report(scores, effects, 1);
  CHECK(!report.warnings.empty());
  int total = 0;
  bool any_empty = false;
  for (const auto& row : report.rows) {
    total += row.count;
    if (row.count == 0) {
      any_empty = true;
      CHECK(std::isnan(row.p50));
      CHECK(std::isnan(row.score_lo));
    }
  }
  CHECK(any_empty);
  CHECK(total == n);
}

TEST_CASE("undersized or ragged reports are refused") {
  Eigen::VectorXd short_scores = Eigen::VectorXd::LinSpaced(39, 0, 1);
  Eigen::VectorXd short_effects = short_scores;
  CHECK_THROWS_AS(
      fpls::build_vigintile_report(short_scores, short_effects, 1),
      fpls::DataError);

  Eigen::VectorXd scores = Eigen::VectorXd::LinSpaced(40, 0, 1);
  Eigen::VectorXd effects = Eigen::VectorXd::LinSpaced(41, 0, 1);
  CHECK_THROWS_AS(fpls::build_vigintile_report(scores, effects, 1),
                  fpls::ShapeError);

  Eigen::VectorXd poisoned = Eigen::VectorXd::LinSpaced(40, 0, 1);
  poisoned[7] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fpls::build_vigintile_report(poisoned, poisoned, 1),
                  fpls::DataError);
}

TEST_CASE("run config validation polices its ranges") {
  RunConfig ok;
  ok.command = "simulate";
  CHECK_NOTHROW(ok.validate());

  auto expect_reject = [](void (*mutate)(RunConfig&)) {
    RunConfig cfg;
    cfg.command = "simulate";
    mutate(cfg);
    CHECK_THROWS_AS(cfg.validate(), fpls::ConfigError);
  };
  expect_reject([](RunConfig& c) { c.command = "explode"; });
  expect_reject([](RunConfig& c) { c.n = 3; });
  expect_reject([](RunConfig& c) { c.replications = 0; });
  expect_reject([](RunConfig& c) { c.trees = 0; });
  expect_reject([](RunConfig& c) { c.beta = 1.5; });
  expect_reject([](RunConfig& c) { c.alpha = 1.0; });
  expect_reject([](RunConfig& c) { c.k = 0; });
  expect_reject([](RunConfig& c) { c.pi = 0.0; });
  expect_reject([](RunConfig& c) { c.min_arm = 0; });
  expect_reject([](RunConfig& c) { c.honest_fraction = 1.0; });
  expect_reject([](RunConfig& c) { c.components = -1; });
  expect_reject([](RunConfig& c) { c.ci_level = 1.0; });
  expect_reject([](RunConfig& c) { c.grid_points = 1; });
  expect_reject([](RunConfig& c) { c.fixed_lambda = -0.5; });
  expect_reject([](RunConfig& c) { c.out_dir = ""; });
  expect_reject([](RunConfig& c) { c.preset = "unknown"; });

  RunConfig analyze;
  analyze.command = "analyze";
  CHECK_THROWS_AS(analyze.validate(), fpls::ConfigError);  // missing --data
  analyze.data_path = "somewhere.csv";
  CHECK_THROWS_AS(analyze.validate(), fpls::ConfigError);  // no preset/schema
  analyze.preset = "penn";
  CHECK_NOTHROW(analyze.validate());
  analyze.schema_path = "also.json";
  CHECK_THROWS_AS(analyze.validate(), fpls::ConfigError);  // both given
}

TEST_CASE("pipeline assembly carries the forest knobs through") {
  RunConfig cfg;
  cfg.command = "simulate";
  cfg.trees = 123;
  cfg.beta = 0.7;
  cfg.alpha = 0.25;
  cfg.k = 7;
  cfg.pi = 0.9;
  cfg.min_arm = 2;
  cfg.honest_fraction = 0.4;
  cfg.components = 3;
  cfg.ci_level = 0.9;
  fpls::PipelineConfig p = cfg.pipeline();
  CHECK(p.forest.n_trees == 123);
  CHECK(p.forest.beta == doctest::Approx(0.7));
  CHECK(p.forest.tree.alpha == doctest::Approx(0.25));
  CHECK(p.forest.tree.k == 7);
  CHECK(p.forest.tree.pi == doctest::Approx(0.9));
  CHECK(p.forest.tree.min_arm == 2);
  CHECK(p.forest.honest_fraction == doctest::Approx(0.4));
  CHECK(p.components == 3);
  CHECK(p.forest.ci_level == doctest::Approx(0.9));
}

TEST_CASE("feature scaling follows the preset unless forced") {
  RunConfig cfg;
  cfg.command = "analyze";
  cfg.data_path = "x.csv";
  cfg.preset = "penn";
  CHECK(cfg.scale_features());  // auto: on for the penn preset
  cfg.scale = 0;
  CHECK_FALSE(cfg.scale_features());
  cfg.scale = 1;
  CHECK(cfg.scale_features());

  RunConfig sim;
  sim.command = "simulate";
  CHECK_FALSE(sim.scale_features());  // auto: off elsewhere
  sim.scale = 1;
  CHECK(sim.scale_features());
}

TEST_SUITE_END();
