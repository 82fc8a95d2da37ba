#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "fpls/errors.hpp"
#include "fpls/report.hpp"

namespace {

// Thrown by callbacks so design/estimator names are checked at parse time.
void add_forest_flags(CLI::App* cmd, fpls::RunConfig& config) {
  cmd->add_option("--trees", config.trees, "Number of trees");
  cmd->add_option("--beta", config.beta, "Subsample exponent, s = ceil(n^beta)");
  cmd->add_option("--alpha", config.alpha, "Minimum child share of parent rows");
  cmd->add_option("--k", config.k, "Leaf scale; nodes under 2k rows stay leaves");
  cmd->add_option("--pi", config.pi, "Per-coordinate split eligibility probability");
  cmd->add_option("--min-arm", config.min_arm, "Minimum treated/control rows per leaf");
  cmd->add_option("--honest-fraction", config.honest_fraction,
                  "Training share of each subsample");
  cmd->add_option("--seed", config.seed, "Master seed");
  cmd->add_option("--out", config.out_dir, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forest-PLS: treatment effect heterogeneity in component space"};
  app.require_subcommand(1);

  fpls::RunConfig config;
  std::string design_name = "rct";
  std::string estimator_name = "forest_pls";

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Replicated synthetic-design runs with density summaries");
  simulate->add_option("--design", design_name, "rct, iv, product, or dose");
  simulate->add_option("--n", config.n, "Sample size per replication");
  simulate->add_option("--reps", config.replications, "Number of replications");
  simulate->add_option("--estimator", estimator_name,
                       "forest_pls or causal_forest");
  simulate->add_option("--components", config.components,
                       "Component count; 0 cross-validates");
  simulate->add_option("--grid-points", config.grid_points, "Density grid size");
  add_forest_flags(simulate, config);

  CLI::App* analyze = app.add_subcommand(
      "analyze", "Fit one dataset and write effect and component reports");
  analyze->add_option("--data", config.data_path, "Input table (CSV or whitespace)");
  analyze->add_option("--schema", config.schema_path, "Column-mapping JSON");
  analyze->add_option("--preset", config.preset, "Built-in schema (penn)");
  analyze->add_option("--components", config.components,
                      "Component count; 0 cross-validates");
  analyze->add_option("--ci-level", config.ci_level, "Interval coverage level");
  analyze->add_option("--scale", config.scale,
                      "1 scales features to unit variance, 0 disables");
  analyze->add_option("--save-forest", config.forest_out,
                      "Also serialize the fitted forest to this file");
  add_forest_flags(analyze, config);

  CLI::App* compare = app.add_subcommand(
      "compare", "Run both estimators plus importance and LASSO baselines");
  compare->add_option("--design", design_name, "rct, iv, product, or dose");
  compare->add_option("--n", config.n, "Sample size");
  compare->add_option("--components", config.components,
                      "Component count; 0 cross-validates");
  compare->add_option("--lambda", config.fixed_lambda,
                      "Fixed LASSO penalty for the side-by-side table");
  add_forest_flags(compare, config);

  CLI11_PARSE(app, argc, argv);

  try {
    config.design = fpls::design_from_name(design_name);
    config.estimator = fpls::estimator_from_name(estimator_name);
    if (simulate->parsed()) {
      config.command = "simulate";
      fpls::cmd_simulate(config);
    } else if (analyze->parsed()) {
      config.command = "analyze";
      fpls::cmd_analyze(config);
    } else if (compare->parsed()) {
      config.command = "compare";
      fpls::cmd_compare(config);
    }
  } catch (const fpls::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const fpls::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const fpls::EstimationError& e) {
    std::fprintf(stderr, "estimation error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
