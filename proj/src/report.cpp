#include "fpls/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "fpls/baselines.hpp"
#include "fpls/csv.hpp"
#include "fpls/errors.hpp"
#include "fpls/pipeline.hpp"
#include "fpls/stats.hpp"

namespace fpls {

namespace {

constexpr double kPercentiles[5] = {0.025, 0.25, 0.5, 0.75, 0.975};

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

std::filesystem::path prepare_out_dir(const RunConfig& config) {
  std::filesystem::path dir(config.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory: " + config.out_dir);
  return dir;
}

nlohmann::json forest_settings_json(const RunConfig& config) {
  return {{"trees", config.trees},
          {"beta", config.beta},
          {"alpha", config.alpha},
          {"k", config.k},
          {"pi", config.pi},
          {"min_arm", config.min_arm},
          {"honest_fraction", config.honest_fraction}};
}

void write_vigintile_csv(const std::filesystem::path& path,
                         const VigintileReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.rows) {
    rows.push_back({std::to_string(r.vigintile), std::to_string(r.count),
                    format_double(r.score_lo), format_double(r.score_hi),
                    format_double(r.p2_5), format_double(r.p25),
                    format_double(r.p50), format_double(r.p75),
                    format_double(r.p97_5), format_double(r.spread()),
                    format_double(r.spread() * 100.0)});
  }
  write_csv(path.string(),
            {"vigintile", "count", "score_lo", "score_hi", "p2_5", "p25", "p50",
             "p75", "p97_5", "spread", "spread_x100"},
            rows);
}

}  // namespace

VigintileReport build_vigintile_report(const Eigen::VectorXd& scores,
                                       const Eigen::VectorXd& effects,
                                       int component) {
  const Eigen::Index n = scores.size();
  if (n != effects.size()) throw ShapeError("vigintile report: length mismatch");
  if (n < 40) throw DataError("vigintile report: need at least 40 points");
  if (!scores.allFinite() || !effects.allFinite()) {
    throw DataError("vigintile report: non-finite input");
  }

  std::vector<double> sorted_scores(scores.data(), scores.data() + n);
  std::sort(sorted_scores.begin(), sorted_scores.end());
  double edges[19];
  for (int t = 1; t <= 19; ++t) {
    edges[t - 1] = quantile_sorted(sorted_scores, static_cast<double>(t) / 20.0);
  }

  // Values equal to an edge stay in the lower bin.
  std::vector<std::vector<double>> bin_effects(20), bin_scores(20);
  for (Eigen::Index i = 0; i < n; ++i) {
    int bin = 0;
    while (bin < 19 && scores[i] > edges[bin]) ++bin;
    bin_effects[static_cast<std::size_t>(bin)].push_back(effects[i]);
    bin_scores[static_cast<std::size_t>(bin)].push_back(scores[i]);
  }

  VigintileReport report;
  report.component = component;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int b = 0; b < 20; ++b) {
    auto& values = bin_effects[static_cast<std::size_t>(b)];
    std::sort(values.begin(), values.end());
    VigintileRow row;
    row.vigintile = b + 1;
    row.count = static_cast<int>(values.size());
    if (values.empty()) {
      row.score_lo = row.score_hi = nan;
      row.p2_5 = row.p25 = row.p50 = row.p75 = row.p97_5 = nan;
      report.warnings.push_back("vigintile " + std::to_string(b + 1) +
                                " is empty (tied scores)");
    } else {
      const auto& members = bin_scores[static_cast<std::size_t>(b)];
      row.score_lo = *std::min_element(members.begin(), members.end());
      row.score_hi = *std::max_element(members.begin(), members.end());
      row.p2_5 = quantile_sorted(values, kPercentiles[0]);
      row.p25 = quantile_sorted(values, kPercentiles[1]);
      row.p50 = quantile_sorted(values, kPercentiles[2]);
      row.p75 = quantile_sorted(values, kPercentiles[3]);
      row.p97_5 = quantile_sorted(values, kPercentiles[4]);
      if (values.size() < 2) {
        report.warnings.push_back("vigintile " + std::to_string(b + 1) +
                                  " has a single observation");
      }
    }
    report.rows.push_back(row);
  }
  return report;
}

void RunConfig::validate() const {
  if (command != "simulate" && command != "analyze" && command != "compare") {
    throw ConfigError("unknown command '" + command + "'");
  }
  if (n < 4) throw ConfigError("n must be at least 4");
  if (replications < 1) throw ConfigError("reps must be at least 1");
  if (trees < 1) throw ConfigError("trees must be at least 1");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta outside (0, 1]");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha outside (0, 1)");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(pi > 0.0 && pi <= 1.0)) throw ConfigError("pi outside (0, 1]");
  if (min_arm < 1) throw ConfigError("min-arm must be at least 1");
  if (!(honest_fraction > 0.0 && honest_fraction < 1.0)) {
    throw ConfigError("honest-fraction outside (0, 1)");
  }
  if (components < 0) throw ConfigError("components must be >= 0 (0 = CV)");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw ConfigError("ci-level outside (0, 1)");
  if (grid_points < 2) throw ConfigError("grid-points must be at least 2");
  if (fixed_lambda < 0.0) throw ConfigError("lambda must be nonnegative");
  if (out_dir.empty()) throw ConfigError("out directory must be non-empty");
  if (!preset.empty() && preset != "penn") {
    throw ConfigError("unknown preset '" + preset + "'");
  }
  if (command == "analyze") {
    if (data_path.empty()) throw ConfigError("analyze requires --data");
    if (preset.empty() == schema_path.empty()) {
      throw ConfigError("analyze requires exactly one of --preset or --schema");
    }
  }
}

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig config;
  config.forest.n_trees = trees;
  config.forest.beta = beta;
  config.forest.tree.alpha = alpha;
  config.forest.tree.k = k;
  config.forest.tree.pi = pi;
  config.forest.tree.min_arm = min_arm;
  config.forest.honest_fraction = honest_fraction;
  config.forest.ci_level = ci_level;
  config.components = components;
  config.scale_features = scale_features();
  return config;
}

bool RunConfig::scale_features() const {
  if (scale >= 0) return scale > 0;
  return preset == "penn";
}

void cmd_simulate(const RunConfig& config) {
  config.validate();
  const auto dir = prepare_out_dir(config);

  ReplicationConfig rep;
  rep.design = config.design;
  rep.n = config.n;
  rep.replications = config.replications;
  rep.seed = config.seed;
  rep.estimator = config.estimator;
  rep.pipeline = config.pipeline();
  rep.grid_points = config.grid_points;

  const ReplicationSummary summary = run_replications(rep);

  nlohmann::json doc;
  doc["command"] = "simulate";
  doc["design"] = design_name(summary.design);
  doc["estimator"] = estimator_name(summary.estimator);
  doc["n"] = summary.n;
  doc["replications"] = config.replications;
  doc["seed"] = config.seed;
  doc["components"] = config.components;
  doc["forest"] = forest_settings_json(config);
  doc["grid"] = to_std(summary.grid);
  doc["density_true"] = to_std(summary.density_true);
  doc["density_estimated"] = to_std(summary.density_estimated);
  doc["warnings"] = summary.warnings;

  double mean_true = 0.0, mean_est = 0.0, var_true = 0.0, var_est = 0.0;
  for (const auto& m : summary.moments) {
    mean_true += m.true_mean;
    mean_est += m.estimated_mean;
    var_true += m.true_variance;
    var_est += m.estimated_variance;
  }
  const double reps = static_cast<double>(summary.moments.size());
  doc["mean_true_effect"] = mean_true / reps;
  doc["mean_estimated_effect"] = mean_est / reps;
  doc["mean_true_variance"] = var_true / reps;
  doc["mean_estimated_variance"] = var_est / reps;
  write_json(dir / "summary.json", doc);

  std::vector<std::vector<std::string>> rows;
  for (const auto& m : summary.moments) {
    rows.push_back({std::to_string(m.replication), format_double(m.true_mean),
                    format_double(m.true_variance), format_double(m.estimated_mean),
                    format_double(m.estimated_variance),
                    std::to_string(m.selected_components)});
  }
  write_csv((dir / "moments.csv").string(),
            {"replication", "true_mean", "true_variance", "estimated_mean",
             "estimated_variance", "selected_components"},
            rows);
}

void cmd_analyze(const RunConfig& config) {
  config.validate();
  const auto dir = prepare_out_dir(config);

  LoadReport loaded;
  try {
    const ColumnSchema schema = config.preset == "penn"
                                    ? penn_schema()
                                    : schema_from_json(config.schema_path);
    loaded = load_csv(config.data_path, schema);
  } catch (const DataError& e) {
    throw DataError(std::string("ingestion: ") + e.what());
  }
  const Dataset& data = loaded.dataset;

  const PipelineConfig pipeline_config =
      shrink_for_small_n(config.pipeline(), static_cast<int>(data.n_rows()));
  PipelineFit fit;
  try {
    fit = fit_forest_pls(data, pipeline_config, config.seed);
  } catch (const EstimationError& e) {
    throw EstimationError(std::string("estimation: ") + e.what());
  }

  // Per-row effect with jackknife variance.
  std::vector<EffectEstimate> estimates(static_cast<std::size_t>(data.n_rows()));
  int clamped = 0;
  for (Eigen::Index i = 0; i < data.n_rows(); ++i) {
    estimates[static_cast<std::size_t>(i)] =
        fit.forest.estimate(fit.component_scores.row(i).transpose());
    if (estimates[static_cast<std::size_t>(i)].variance_clamped) ++clamped;
  }

  const int q = fit.selected_components;
  std::vector<std::string> effect_header = {"row"};
  for (int j = 1; j <= q; ++j) effect_header.push_back("score_" + std::to_string(j));
  for (const char* name : {"effect", "variance", "ci_low", "ci_high", "variance_clamped"}) {
    effect_header.push_back(name);
  }
  std::vector<std::vector<std::string>> effect_rows;
  for (Eigen::Index i = 0; i < data.n_rows(); ++i) {
    const auto& est = estimates[static_cast<std::size_t>(i)];
    std::vector<std::string> row = {std::to_string(i)};
    for (int j = 0; j < q; ++j) {
      row.push_back(format_double(fit.component_scores(i, j)));
    }
    row.push_back(format_double(est.point));
    row.push_back(format_double(est.variance));
    row.push_back(format_double(est.ci_low));
    row.push_back(format_double(est.ci_high));
    row.push_back(est.variance_clamped ? "1" : "0");
    effect_rows.push_back(std::move(row));
  }
  write_csv((dir / "effects.csv").string(), effect_header, effect_rows);

  const std::vector<ComponentLoadings> loadings = loading_report(fit.pls, data);
  std::vector<std::vector<std::string>> loading_rows;
  for (const auto& comp : loadings) {
    loading_rows.push_back({std::to_string(comp.component), "(intercept)",
                            format_double(comp.intercept),
                            format_double(comp.intercept_std_error)});
    for (const auto& row : comp.rows) {
      loading_rows.push_back({std::to_string(comp.component), row.feature,
                              format_double(row.coefficient),
                              format_double(row.std_error)});
    }
  }
  write_csv((dir / "loadings.csv").string(),
            {"component", "feature", "coefficient", "std_error"}, loading_rows);

  std::vector<std::string> warnings = loaded.warnings;
  nlohmann::json vigintile_meta = nlohmann::json::array();
  for (int j = 0; j < q; ++j) {
    const VigintileReport report =
        build_vigintile_report(fit.component_scores.col(j), fit.effects, j + 1);
    write_vigintile_csv(dir / ("vigintiles_c" + std::to_string(j + 1) + ".csv"),
                        report);
    for (const auto& w : report.warnings) {
      warnings.push_back("component " + std::to_string(j + 1) + ": " + w);
    }
    const double first = report.rows.front().spread();
    const double last = report.rows.back().spread();
    vigintile_meta.push_back({{"component", j + 1},
                              {"first_spread", first},
                              {"last_spread", last},
                              {"first_exceeds_last", first > last}});
  }

  nlohmann::json doc;
  doc["command"] = "analyze";
  doc["data"] = config.data_path;
  doc["preset"] = config.preset;
  doc["n"] = data.n_rows();
  doc["features"] = data.feature_names;
  doc["dropped_constant_columns"] = loaded.dropped_constant_columns;
  doc["n_treated"] = data.n_treated();
  doc["n_control"] = data.n_control();
  doc["seed"] = config.seed;
  doc["scaled"] = pipeline_config.scale_features;
  doc["selected_components"] = q;
  doc["rmsep"] = fit.rmsep;
  doc["forest"] = forest_settings_json(config);
  doc["ci_level"] = config.ci_level;
  doc["variance_clamped_rows"] = clamped;
  doc["vigintiles"] = vigintile_meta;
  nlohmann::json r2 = nlohmann::json::array();
  for (const auto& comp : loadings) r2.push_back(comp.r_squared);
  doc["loading_r_squared"] = r2;
  doc["warnings"] = warnings;
  write_json(dir / "summary.json", doc);

  if (!config.forest_out.empty()) {
    save_forest(fit.forest, (dir / config.forest_out).string());
  }
}

void cmd_compare(const RunConfig& config) {
  config.validate();
  const auto dir = prepare_out_dir(config);

  SimulationSpec spec;
  spec.design = config.design;
  spec.n = config.n;
  spec.seed = Rng::derive(config.seed, 0);
  const SimulatedDataset sim = generate(spec);

  const PipelineConfig pipeline_config =
      shrink_for_small_n(config.pipeline(), config.n);
  const PipelineFit fit_pls =
      fit_forest_pls(sim.dataset, pipeline_config, Rng::derive(config.seed, 1));
  const PipelineFit fit_cf =
      fit_causal_forest(sim.dataset, pipeline_config, Rng::derive(config.seed, 2));

  const ImportanceReport imp_pls = regression_tree_importance(
      sim.dataset.features, fit_pls.effects, sim.dataset.feature_names);
  const ImportanceReport imp_cf = regression_tree_importance(
      sim.dataset.features, fit_cf.effects, sim.dataset.feature_names);

  std::vector<std::vector<std::string>> varimp_rows;
  for (Eigen::Index j = 0; j < sim.dataset.n_features(); ++j) {
    varimp_rows.push_back({sim.dataset.feature_names[static_cast<std::size_t>(j)],
                           format_double(imp_pls.shares[j]),
                           format_double(imp_cf.shares[j])});
  }
  write_csv((dir / "varimp.csv").string(),
            {"feature", "forest_pls_share", "causal_forest_share"}, varimp_rows);

  const std::vector<double> grid =
      default_lambda_grid(sim.dataset.features, sim.dataset.outcome);
  const LinearFit lasso_sel = lasso_cv(sim.dataset.features, sim.dataset.outcome,
                                       grid, 5, Rng::derive(config.seed, 3));
  const LinearFit lasso_fixed =
      lasso_fit(sim.dataset.features, sim.dataset.outcome, config.fixed_lambda);

  std::vector<std::vector<std::string>> lasso_rows;
  lasso_rows.push_back({"(intercept)", format_double(lasso_sel.intercept),
                        format_double(lasso_fixed.intercept)});
  for (Eigen::Index j = 0; j < sim.dataset.n_features(); ++j) {
    lasso_rows.push_back({sim.dataset.feature_names[static_cast<std::size_t>(j)],
                          format_double(lasso_sel.coefficients[j]),
                          format_double(lasso_fixed.coefficients[j])});
  }
  write_csv((dir / "lasso.csv").string(),
            {"term", "cv_coefficient", "fixed_coefficient"}, lasso_rows);

  nlohmann::json doc;
  doc["command"] = "compare";
  doc["design"] = design_name(config.design);
  doc["n"] = config.n;
  doc["seed"] = config.seed;
  doc["forest"] = forest_settings_json(config);
  doc["forest_pls"] = {
      {"selected_components", fit_pls.selected_components},
      {"mean_effect", fit_pls.effects.mean()},
      {"effect_variance", sample_variance(fit_pls.effects)},
      {"importance_degenerate", imp_pls.degenerate}};
  doc["causal_forest"] = {
      {"mean_effect", fit_cf.effects.mean()},
      {"effect_variance", sample_variance(fit_cf.effects)},
      {"importance_degenerate", imp_cf.degenerate}};
  doc["true_effect_mean"] = sim.true_effects.mean();
  doc["true_effect_variance"] = sample_variance(sim.true_effects);
  doc["lasso"] = {{"cv_lambda", lasso_sel.lambda},
                  {"fixed_lambda", lasso_fixed.lambda}};
  std::vector<std::string> warnings;
  if (sim.policy_binarized) {
    warnings.push_back(std::string("design '") + design_name(config.design) +
                       "' has a continuous policy; it was binarized at the "
                       "sample median before estimation");
  }
  doc["warnings"] = warnings;
  write_json(dir / "summary.json", doc);
}

}  // namespace fpls
