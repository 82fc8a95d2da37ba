#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fpls/data.hpp"

namespace fpls {

struct TreeParams {
  double alpha = 0.2;  // each child keeps at least ceil(alpha * parent) rows
  int k = 10;          // nodes with fewer than 2k training rows become leaves
  double pi = 0.8;     // per-coordinate eligibility probability at each node
  int min_arm = 3;     // minimum treated and control rows per child and leaf
};

struct SplitRule {
  int coordinate = -1;
  double threshold = 0.0;  // left: value <= threshold
};

struct TreeNode {
  int left = -1;  // child slots; -1 marks a leaf
  int right = -1;
  SplitRule rule;
  // Leaf payload, computed on the estimation half only.
  double treated_mean = 0.0;
  double control_mean = 0.0;
  int n_treated = 0;
  int n_control = 0;
  int n_train = 0;  // training rows routed through this node
  // Leaf bookkeeping: merged = an estimation-side arm shortage collapsed the
  // split below; exhausted = no eligible coordinate admitted a valid split.
  bool merged = false;
  bool exhausted = false;

  bool is_leaf() const { return left < 0; }
  double effect() const { return treated_mean - control_mean; }
};

// A single honest tree. Split geometry comes from the training half, leaf
// effects from the estimation half; the two index lists refer to rows of the
// matrix the tree was built on.
struct CausalTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<int> train_indices;
  std::vector<int> estimation_indices;
  std::uint64_t seed = 0;
  int n_coordinates = 0;

  int leaf_for(const Eigen::VectorXd& point) const;
  double predict(const Eigen::VectorXd& point) const;
};

// Difference of arm means. Both arms must be present.
double leaf_effect(const Eigen::VectorXd& outcomes, const Eigen::VectorXi& policy,
                   const std::vector<int>& rows);

// Best admissible split of `node_rows` over `candidate_coords` (must be
// sorted ascending): maximizes sum over children of n_child * effect^2, with
// children no smaller than max(k, ceil(alpha * m)) rows and min_arm per arm.
// Thresholds are midpoints of consecutive distinct sorted values. Exact
// criterion ties resolve to the lowest coordinate, then lowest threshold.
// Returns nullopt when no admissible split exists (including m < 2k).
std::optional<SplitRule> best_split(const Eigen::MatrixXd& coordinates,
                                    const Eigen::VectorXd& outcomes,
                                    const Eigen::VectorXi& policy,
                                    const std::vector<int>& node_rows,
                                    const std::vector<int>& candidate_coords,
                                    const TreeParams& params);

// Grows one honest tree. Splits are chosen on the training half with
// per-node random coordinate eligibility (each coordinate kept with
// probability pi, redrawn while empty); leaves are then filled from the
// estimation half. A leaf whose estimation rows violate min_arm collapses
// its parent split (recursively); if the root itself fails,
// TreeDegenerateError is thrown.
CausalTree build_tree(const Eigen::MatrixXd& coordinates,
                      const Eigen::VectorXd& outcomes,
                      const Eigen::VectorXi& policy, const HonestSplit& honest,
                      const TreeParams& params, std::uint64_t seed);

struct ForestConfig {
  int n_trees = 1000;
  double beta = 0.8;  // subsample size s = ceil(n^beta), capped at n - 1
  int subsample_override = 0;  // > 0 forces s (may equal n)
  TreeParams tree;
  double honest_fraction = 0.5;
  std::uint64_t seed = 0;
  int max_tree_retries = 10;  // fresh subsamples after a degenerate draw
  double ci_level = 0.95;
};

struct EffectEstimate {
  double point = 0.0;
  double variance = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool variance_clamped = false;  // bias correction pushed the estimate below 0
};

struct CausalForest {
  std::vector<CausalTree> trees;
  std::vector<std::vector<int>> subsamples;  // sorted row ids, one per tree
  int subsample_size = 0;
  int n_rows = 0;
  int n_coordinates = 0;
  ForestConfig config;

  double predict(const Eigen::VectorXd& point) const;
  // Point estimate with jackknife variance and a normal CI.
  EffectEstimate estimate(const Eigen::VectorXd& point) const;
};

// Subsampled honest forest. Tree g draws its subsample and seed from
// derive(seed, g, attempt), independent of build order, so results are
// identical for any thread count.
CausalForest build_forest(const Eigen::MatrixXd& coordinates,
                          const Eigen::VectorXd& outcomes,
                          const Eigen::VectorXi& policy,
                          const ForestConfig& config);

// Infinitesimal-jackknife variance with the finite-B bias correction:
// sum_i cov_i^2 - (n / B^2) * sum_g (theta_g - mean)^2, where cov_i averages
// tree deviations over the trees whose subsample contains row i. Negative
// corrected values clamp to zero with the flag set.
EffectEstimate jackknife_estimate(const CausalForest& forest,
                                  const Eigen::VectorXd& point);

// Versioned JSON round-trip; loading a serialized forest reproduces
// predictions exactly.
std::string forest_to_json(const CausalForest& forest);
CausalForest forest_from_json(const std::string& text);
void save_forest(const CausalForest& forest, const std::string& path);
CausalForest load_forest(const std::string& path);

// Per-leaf estimation-side composition, for overlap diagnostics.
struct LeafSummary {
  int tree = 0;
  int node = 0;
  int n_treated = 0;
  int n_control = 0;
  double treated_fraction = 0.0;
};

std::vector<LeafSummary> leaf_summaries(const CausalForest& forest);

// Structural checks on a built tree: child sizes respect alpha and k, leaf
// training counts sit in [k, 2k-1] unless flagged merged/exhausted, leaf
// estimation arms respect min_arm, and child row counts add up. Returns
// human-readable violations; empty means the tree is sound.
std::vector<std::string> audit_tree(const CausalTree& tree, const TreeParams& params);

}  // namespace fpls
