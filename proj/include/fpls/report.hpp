#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fpls/simulation.hpp"

namespace fpls {

// Effect distribution summarized across the 20 quantile bins of one
// component's scores. Bin edges are type-7 vigintiles of the scores; a value
// equal to an edge falls in the lower bin, so heavy ties can leave bins
// empty (reported in warnings, percentiles NaN).
struct VigintileRow {
  int vigintile = 0;  // 1-based
  int count = 0;
  double score_lo = 0.0;  // observed member range
  double score_hi = 0.0;
  double p2_5 = 0.0;
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
  double p97_5 = 0.0;

  double spread() const { return p97_5 - p2_5; }
};

struct VigintileReport {
  int component = 1;  // 1-based
  std::vector<VigintileRow> rows;  // exactly 20, counts sum to n
  std::vector<std::string> warnings;
};

VigintileReport build_vigintile_report(const Eigen::VectorXd& scores,
                                       const Eigen::VectorXd& effects,
                                       int component);

// One batch run. validate() enforces static ranges before any work starts;
// everything data-dependent surfaces later as DataError/EstimationError.
struct RunConfig {
  std::string command;  // simulate | analyze | compare
  Design design = Design::Rct;
  int n = 1000;
  int replications = 50;
  std::uint64_t seed = 1;
  Estimator estimator = Estimator::ForestPls;

  int trees = 1000;
  double beta = 0.8;
  double alpha = 0.2;
  int k = 10;
  double pi = 0.8;
  int min_arm = 3;
  double honest_fraction = 0.5;
  int components = 0;  // 0 = cross-validated
  double ci_level = 0.95;
  int grid_points = 512;
  double fixed_lambda = 2.605;

  std::string data_path;
  std::string schema_path;
  std::string preset;        // "penn" or empty
  std::string out_dir = ".";
  std::string forest_out;    // analyze: also serialize the fitted forest here
  int scale = -1;            // -1 auto (on for the penn preset), 0 off, 1 on

  void validate() const;
  PipelineConfig pipeline() const;
  bool scale_features() const;
};

// Each command writes summary.json plus its CSVs into out_dir, creating the
// directory if needed. Output bytes are a pure function of the config.
void cmd_simulate(const RunConfig& config);
void cmd_analyze(const RunConfig& config);
void cmd_compare(const RunConfig& config);

}  // namespace fpls
