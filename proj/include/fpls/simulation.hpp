#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fpls/data.hpp"
#include "fpls/pipeline.hpp"

namespace fpls {

// Synthetic designs. All draw four features X ~ N(mu, I), mu = (-1, 1, 2, 0),
// except `iv` which adds instruments and an unobserved confounder.
//   rct:     Y = 100 X1 + 100 X2 + P (X3 + 0.1 X4 + 0.2 X3 X4) + e,
//            P ~ Bern(1/2); effect X3 + 0.1 X4 + 0.2 X3 X4 (mean 2).
//   iv:      P* = Z1 - Z2 + 0.5 U + e1, Y = 0.5 P* X1 - 3 U + e2;
//            effect 0.5 X1 (mean -0.5); P* is binarized at its median.
//   product: Y = 100 X1 + 100 X2 + P (X3 X1) + e; effect X3 X1 (mean -2).
//   dose:    D = X1 - X2 + 2 X3 + e_d, Y = 100 X1 + 100 X2 - 100 X3 + 3 D X1
//            + e; effect 3 X1 (mean -3); D is binarized at its median.
enum class Design { Rct, Iv, Product, Dose };

const char* design_name(Design design);
Design design_from_name(const std::string& name);

struct SimulationSpec {
  Design design = Design::Rct;
  int n = 1000;
  std::uint64_t seed = 1;
};

struct SimulatedDataset {
  Dataset dataset;
  Eigen::VectorXd true_effects;
  Design design = Design::Rct;
  // Set when the design's policy is continuous and was cut at the sample
  // median before estimation; raw_policy keeps the pre-cut values.
  bool policy_binarized = false;
  Eigen::VectorXd raw_policy;
};

SimulatedDataset generate(const SimulationSpec& spec);

// Gaussian-kernel density estimate. Bandwidth is Silverman's rule,
// 1.06 * sd * n^(-1/5); a zero-spread sample raises PointMassError.
double silverman_bandwidth(const Eigen::VectorXd& values);

// Evenly spaced grid covering [min - 3h, max + 3h].
Eigen::VectorXd kde_grid(double lo, double hi, double bandwidth, int points = 512);

Eigen::VectorXd kde(const Eigen::VectorXd& values, const Eigen::VectorXd& grid,
                    double bandwidth);

// Trapezoid mass of a density sampled on an increasing grid.
double trapezoid_mass(const Eigen::VectorXd& grid, const Eigen::VectorXd& density);

enum class Estimator { ForestPls, CausalForest };

const char* estimator_name(Estimator estimator);
Estimator estimator_from_name(const std::string& name);

struct ReplicationConfig {
  Design design = Design::Rct;
  int n = 1000;
  int replications = 50;
  std::uint64_t seed = 1;
  Estimator estimator = Estimator::ForestPls;
  PipelineConfig pipeline;
  int grid_points = 512;
};

struct ReplicationMoments {
  int replication = 0;
  double true_mean = 0.0;
  double true_variance = 0.0;
  double estimated_mean = 0.0;
  double estimated_variance = 0.0;
  int selected_components = 0;
};

struct ReplicationSummary {
  Design design = Design::Rct;
  int n = 0;
  Estimator estimator = Estimator::ForestPls;
  // Shared grid across replications; densities are averages of per-
  // replication kernel estimates on it.
  Eigen::VectorXd grid;
  Eigen::VectorXd density_true;
  Eigen::VectorXd density_estimated;
  std::vector<ReplicationMoments> moments;
  std::vector<std::string> warnings;
};

// Per-replication effect estimator: receives the generated data and a
// replication-specific seed, reports the selected component count through
// the out-parameter, and returns one effect estimate per row.
using EffectFit = std::function<Eigen::VectorXd(const SimulatedDataset& sim,
                                                std::uint64_t seed,
                                                int& selected_components)>;

// Core runner with an injectable estimator; replication r uses data seed
// derive(seed, r) and estimator seed derive(seed, r, 1). An estimator
// failure is rethrown with the replication index and seed attached.
ReplicationSummary run_replications_with(const ReplicationConfig& config,
                                         const EffectFit& fit);

// Standard runner for the two shipped estimators. Below 100 rows the forest
// switches to the small-sample settings (see shrink_for_small_n).
ReplicationSummary run_replications(const ReplicationConfig& config);

}  // namespace fpls
