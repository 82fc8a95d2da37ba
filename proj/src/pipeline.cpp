#include "fpls/pipeline.hpp"

#include "fpls/errors.hpp"

namespace fpls {

PipelineFit fit_forest_pls(const Dataset& data, const PipelineConfig& config,
                           std::uint64_t seed) {
  const int p = static_cast<int>(data.n_features());
  if (config.components < 0 || config.components > p) {
    throw ConfigError("pipeline: components must be in [0, " + std::to_string(p) +
                      "], got " + std::to_string(config.components));
  }

  PipelineFit fit;
  int q = config.components;
  if (q == 0) {
    const ComponentSelection selection = select_components_cv(
        data, config.cv_folds, p, Rng::derive(seed, 0), config.scale_features);
    q = selection.q;
    fit.rmsep = selection.rmsep;
  }

  auto [centered, stats] = center(data, config.scale_features);
  fit.centering = stats;
  fit.pls = fit_nipals(centered, stats, q);
  if (fit.pls.q == 0) {
    throw EstimationError("pipeline: no predictive component could be extracted");
  }
  fit.selected_components = fit.pls.q;
  fit.component_scores = fit.pls.scores;

  ForestConfig forest_config = config.forest;
  forest_config.seed = Rng::derive(seed, 1);
  fit.forest =
      build_forest(fit.component_scores, data.outcome, data.policy, forest_config);

  fit.effects.resize(data.n_rows());
  for (Eigen::Index i = 0; i < data.n_rows(); ++i) {
    fit.effects[i] = fit.forest.predict(fit.component_scores.row(i).transpose());
  }
  return fit;
}

PipelineFit fit_causal_forest(const Dataset& data, const PipelineConfig& config,
                              std::uint64_t seed) {
  PipelineFit fit;
  auto [centered, stats] = center(data, config.scale_features);
  fit.centering = stats;
  fit.component_scores = centered.features;
  fit.selected_components = static_cast<int>(data.n_features());

  ForestConfig forest_config = config.forest;
  forest_config.seed = Rng::derive(seed, 1);
  fit.forest =
      build_forest(fit.component_scores, data.outcome, data.policy, forest_config);

  fit.effects.resize(data.n_rows());
  for (Eigen::Index i = 0; i < data.n_rows(); ++i) {
    fit.effects[i] = fit.forest.predict(fit.component_scores.row(i).transpose());
  }
  return fit;
}

PipelineConfig shrink_for_small_n(PipelineConfig config, int n) {
  if (n < 100) {
    config.forest.tree.k = 5;
    config.forest.tree.min_arm = 2;
  }
  return config;
}

}  // namespace fpls
