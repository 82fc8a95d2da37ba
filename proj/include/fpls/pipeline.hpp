#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "fpls/data.hpp"
#include "fpls/forest.hpp"
#include "fpls/pls.hpp"

namespace fpls {

struct PipelineConfig {
  ForestConfig forest;
  // Number of extracted components; 0 selects by five-fold cross-validation.
  int components = 0;
  int cv_folds = 5;
  bool scale_features = false;
};

// One fitted estimation run: per-row effect predictions plus the pieces the
// reports need. `component_scores` holds the coordinates the forest was
// grown on (extracted scores, or centered features for the plain forest).
struct PipelineFit {
  Eigen::VectorXd effects;
  int selected_components = 0;
  std::vector<double> rmsep;  // cross-validation curve; empty if q was fixed
  PlsModel pls;               // empty (q = 0) for the plain forest
  CausalForest forest;
  Eigen::MatrixXd component_scores;
  CenteringStats centering;
};

// Component extraction first, then an honest forest on the score space.
PipelineFit fit_forest_pls(const Dataset& data, const PipelineConfig& config,
                           std::uint64_t seed);

// Baseline: the same forest grown directly on centered features.
PipelineFit fit_causal_forest(const Dataset& data, const PipelineConfig& config,
                              std::uint64_t seed);

// Small-sample adjustment used by the simulation runner and CLI: below 100
// rows the leaf scale drops to k = 5 and min_arm to 2.
PipelineConfig shrink_for_small_n(PipelineConfig config, int n);

}  // namespace fpls
