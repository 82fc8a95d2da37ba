#include "fpls/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "fpls/errors.hpp"
#include "fpls/stats.hpp"

namespace fpls {

namespace {

const std::vector<std::string> kFeatureNames = {"X1", "X2", "X3", "X4"};
const double kFeatureMeans[4] = {-1.0, 1.0, 2.0, 0.0};

// Features are drawn row-major: unit 0's four coordinates, then unit 1's,
// and so on. Every design starts with this block, which keeps the X draws
// identical across designs for a given seed.
Eigen::MatrixXd draw_features(int n, Rng& rng) {
  Eigen::MatrixXd x(n, 4);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 4; ++j) {
      x(i, j) = kFeatureMeans[j] + rng.normal();
    }
  }
  return x;
}

// Cuts a continuous policy at its sample median; above goes to 1.
Eigen::VectorXi binarize_at_median(const Eigen::VectorXd& raw) {
  std::vector<double> values(raw.data(), raw.data() + raw.size());
  std::sort(values.begin(), values.end());
  const double median = quantile_sorted(values, 0.5);
  Eigen::VectorXi policy(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    policy[i] = raw[i] > median ? 1 : 0;
  }
  return policy;
}

SimulatedDataset generate_rct_like(const SimulationSpec& spec, bool product_term) {
  Rng rng(spec.seed);
  const int n = spec.n;
  Eigen::MatrixXd x = draw_features(n, rng);
  Eigen::VectorXi policy(n);
  for (int i = 0; i < n; ++i) policy[i] = rng.bernoulli(0.5) ? 1 : 0;

  Eigen::VectorXd effects(n), y(n);
  for (int i = 0; i < n; ++i) {
    effects[i] = product_term
                     ? x(i, 2) * x(i, 0)
                     : x(i, 2) + 0.1 * x(i, 3) + 0.2 * x(i, 2) * x(i, 3);
    y[i] = 100.0 * x(i, 0) + 100.0 * x(i, 1) + policy[i] * effects[i] + rng.normal();
  }

  SimulatedDataset out;
  out.design = spec.design;
  out.true_effects = std::move(effects);
  out.dataset = Dataset(std::move(x), std::move(y), std::move(policy), kFeatureNames);
  return out;
}

SimulatedDataset generate_iv(const SimulationSpec& spec) {
  Rng rng(spec.seed);
  const int n = spec.n;
  Eigen::MatrixXd x = draw_features(n, rng);

  // Confounder, instruments and both noise terms, each a block of n draws.
  Eigen::VectorXd u(n), z1(n), z2(n), e1(n), e2(n);
  for (int i = 0; i < n; ++i) u[i] = rng.normal();
  for (int i = 0; i < n; ++i) z1[i] = rng.normal();
  for (int i = 0; i < n; ++i) z2[i] = rng.normal();
  for (int i = 0; i < n; ++i) e1[i] = rng.normal();
  for (int i = 0; i < n; ++i) e2[i] = rng.normal();

  Eigen::VectorXd raw_policy = z1 - z2 + 0.5 * u + e1;
  Eigen::VectorXd effects(n), y(n);
  for (int i = 0; i < n; ++i) {
    effects[i] = 0.5 * x(i, 0);
    y[i] = 0.5 * raw_policy[i] * x(i, 0) - 3.0 * u[i] + e2[i];
  }

  SimulatedDataset out;
  out.design = spec.design;
  out.policy_binarized = true;
  out.true_effects = std::move(effects);
  Eigen::VectorXi policy = binarize_at_median(raw_policy);
  out.raw_policy = std::move(raw_policy);
  out.dataset = Dataset(std::move(x), std::move(y), std::move(policy), kFeatureNames);
  return out;
}

SimulatedDataset generate_dose(const SimulationSpec& spec) {
  Rng rng(spec.seed);
  const int n = spec.n;
  Eigen::MatrixXd x = draw_features(n, rng);

  Eigen::VectorXd dose(n);
  for (int i = 0; i < n; ++i) {
    dose[i] = x(i, 0) - x(i, 1) + 2.0 * x(i, 2) + rng.normal();
  }
  Eigen::VectorXd effects(n), y(n);
  for (int i = 0; i < n; ++i) {
    effects[i] = 3.0 * x(i, 0);
    y[i] = 100.0 * x(i, 0) + 100.0 * x(i, 1) - 100.0 * x(i, 2) +
           3.0 * dose[i] * x(i, 0) + rng.normal();
  }

  SimulatedDataset out;
  out.design = spec.design;
  out.policy_binarized = true;
  out.true_effects = std::move(effects);
  Eigen::VectorXi policy = binarize_at_median(dose);
  out.raw_policy = std::move(dose);
  out.dataset = Dataset(std::move(x), std::move(y), std::move(policy), kFeatureNames);
  return out;
}

}  // namespace

const char* design_name(Design design) {
  switch (design) {
    case Design::Rct: return "rct";
    case Design::Iv: return "iv";
    case Design::Product: return "product";
    case Design::Dose: return "dose";
  }
  return "rct";
}

Design design_from_name(const std::string& name) {
  if (name == "rct") return Design::Rct;
  if (name == "iv") return Design::Iv;
  if (name == "product") return Design::Product;
  if (name == "dose") return Design::Dose;
  throw ConfigError("unknown design '" + name + "' (rct, iv, product, dose)");
}

const char* estimator_name(Estimator estimator) {
  return estimator == Estimator::ForestPls ? "forest_pls" : "causal_forest";
}

Estimator estimator_from_name(const std::string& name) {
  if (name == "forest_pls") return Estimator::ForestPls;
  if (name == "causal_forest") return Estimator::CausalForest;
  throw ConfigError("unknown estimator '" + name +
                    "' (forest_pls, causal_forest)");
}

SimulatedDataset generate(const SimulationSpec& spec) {
  if (spec.n < 4) throw ConfigError("simulation: need n >= 4");
  switch (spec.design) {
    case Design::Rct: return generate_rct_like(spec, false);
    case Design::Product: return generate_rct_like(spec, true);
    case Design::Iv: return generate_iv(spec);
    case Design::Dose: return generate_dose(spec);
  }
  throw ConfigError("simulation: unhandled design");
}

double silverman_bandwidth(const Eigen::VectorXd& values) {
  if (values.size() < 2) throw PointMassError("bandwidth: need at least 2 values");
  const double sd = sample_sd(values);
  if (sd <= 0.0) {
    throw PointMassError("bandwidth: sample has zero spread");
  }
  return 1.06 * sd * std::pow(static_cast<double>(values.size()), -0.2);
}

Eigen::VectorXd kde_grid(double lo, double hi, double bandwidth, int points) {
  if (points < 2) throw ConfigError("kde grid: need at least 2 points");
  if (!(bandwidth > 0.0)) throw PointMassError("kde grid: bandwidth must be positive");
  if (hi < lo) throw ConfigError("kde grid: hi < lo");
  return Eigen::VectorXd::LinSpaced(points, lo - 3.0 * bandwidth,
                                    hi + 3.0 * bandwidth);
}

Eigen::VectorXd kde(const Eigen::VectorXd& values, const Eigen::VectorXd& grid,
                    double bandwidth) {
  if (values.size() < 2) throw PointMassError("kde: need at least 2 values");
  if (!(bandwidth > 0.0)) throw PointMassError("kde: bandwidth must be positive");
  const double norm =
      1.0 / (static_cast<double>(values.size()) * bandwidth * std::sqrt(2.0 * M_PI));
  Eigen::VectorXd density(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double z = grid[g];
    double sum = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      const double t = (z - values[i]) / bandwidth;
      sum += std::exp(-0.5 * t * t);
    }
    density[g] = norm * sum;
  }
  return density;
}

double trapezoid_mass(const Eigen::VectorXd& grid, const Eigen::VectorXd& density) {
  if (grid.size() != density.size() || grid.size() < 2) {
    throw ShapeError("trapezoid: grid/density mismatch");
  }
  double mass = 0.0;
  for (Eigen::Index i = 0; i + 1 < grid.size(); ++i) {
    mass += 0.5 * (density[i] + density[i + 1]) * (grid[i + 1] - grid[i]);
  }
  return mass;
}

ReplicationSummary run_replications_with(const ReplicationConfig& config,
                                         const EffectFit& fit) {
  if (config.replications < 1) {
    throw ConfigError("replications: need at least 1");
  }

  ReplicationSummary summary;
  summary.design = config.design;
  summary.n = config.n;
  summary.estimator = config.estimator;

  std::vector<Eigen::VectorXd> true_draws, estimated_draws;
  true_draws.reserve(static_cast<std::size_t>(config.replications));
  estimated_draws.reserve(static_cast<std::size_t>(config.replications));

  for (int r = 0; r < config.replications; ++r) {
    SimulationSpec spec;
    spec.design = config.design;
    spec.n = config.n;
    spec.seed = Rng::derive(config.seed, static_cast<std::uint64_t>(r));
    const SimulatedDataset sim = generate(spec);
    if (sim.policy_binarized && r == 0) {
      summary.warnings.push_back(
          std::string("design '") + design_name(config.design) +
          "' has a continuous policy; it was binarized at the sample median "
          "before estimation");
    }

    int selected = 0;
    Eigen::VectorXd estimated;
    try {
      estimated =
          fit(sim, Rng::derive(config.seed, static_cast<std::uint64_t>(r), 1),
              selected);
    } catch (const EstimationError& e) {
      throw EstimationError("replication " + std::to_string(r) + " (data seed " +
                            std::to_string(spec.seed) + "): " + e.what());
    }
    if (estimated.size() != sim.dataset.n_rows()) {
      throw ShapeError("replication " + std::to_string(r) +
                       ": estimator returned wrong length");
    }

    ReplicationMoments m;
    m.replication = r;
    m.true_mean = sim.true_effects.mean();
    m.true_variance = sample_variance(sim.true_effects);
    m.estimated_mean = estimated.mean();
    m.estimated_variance = sample_variance(estimated);
    m.selected_components = selected;
    summary.moments.push_back(m);

    true_draws.push_back(sim.true_effects);
    estimated_draws.push_back(std::move(estimated));
  }

  // Shared grid: pooled range of every drawn series, padded by the largest
  // per-series bandwidth, so each per-replication density keeps its mass.
  double lo = true_draws[0].minCoeff();
  double hi = true_draws[0].maxCoeff();
  double h = 0.0;
  for (int r = 0; r < config.replications; ++r) {
    for (const Eigen::VectorXd* v : {&true_draws[static_cast<std::size_t>(r)],
                                     &estimated_draws[static_cast<std::size_t>(r)]}) {
      lo = std::min(lo, v->minCoeff());
      hi = std::max(hi, v->maxCoeff());
      h = std::max(h, silverman_bandwidth(*v));
    }
  }
  summary.grid = kde_grid(lo, hi, h, config.grid_points);

  summary.density_true = Eigen::VectorXd::Zero(summary.grid.size());
  summary.density_estimated = Eigen::VectorXd::Zero(summary.grid.size());
  for (int r = 0; r < config.replications; ++r) {
    const auto& t = true_draws[static_cast<std::size_t>(r)];
    const auto& e = estimated_draws[static_cast<std::size_t>(r)];
    summary.density_true += kde(t, summary.grid, silverman_bandwidth(t));
    summary.density_estimated += kde(e, summary.grid, silverman_bandwidth(e));
  }
  summary.density_true /= static_cast<double>(config.replications);
  summary.density_estimated /= static_cast<double>(config.replications);
  return summary;
}

ReplicationSummary run_replications(const ReplicationConfig& config) {
  const PipelineConfig pipeline = shrink_for_small_n(config.pipeline, config.n);
  const bool shrunk = pipeline.forest.tree.k != config.pipeline.forest.tree.k ||
                      pipeline.forest.tree.min_arm != config.pipeline.forest.tree.min_arm;

  EffectFit fit;
  if (config.estimator == Estimator::ForestPls) {
    fit = [&pipeline](const SimulatedDataset& sim, std::uint64_t seed,
                      int& selected) {
      const PipelineFit f = fit_forest_pls(sim.dataset, pipeline, seed);
      selected = f.selected_components;
      return f.effects;
    };
  } else {
    fit = [&pipeline](const SimulatedDataset& sim, std::uint64_t seed,
                      int& selected) {
      const PipelineFit f = fit_causal_forest(sim.dataset, pipeline, seed);
      selected = f.selected_components;
      return f.effects;
    };
  }

  ReplicationSummary summary = run_replications_with(config, fit);
  if (shrunk) {
    summary.warnings.push_back(
        "small-sample settings in effect: k = 5, min_arm = 2 (n < 100)");
  }
  return summary;
}

}  // namespace fpls
