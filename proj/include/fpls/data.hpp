#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fpls/random.hpp"

namespace fpls {

// Rectangular estimation sample. Construction validates shape, finiteness and
// the 0/1 policy coding; a Dataset in hand is safe to compute on.
struct Dataset {
  Eigen::MatrixXd features;  // n x p
  Eigen::VectorXd outcome;   // n
  Eigen::VectorXi policy;    // n, values in {0, 1}
  std::vector<std::string> feature_names;

  Dataset() = default;
  Dataset(Eigen::MatrixXd x, Eigen::VectorXd y, Eigen::VectorXi p,
          std::vector<std::string> names);

  Eigen::Index n_rows() const { return features.rows(); }
  Eigen::Index n_features() const { return features.cols(); }
  int n_treated() const { return policy.sum(); }
  int n_control() const { return static_cast<int>(policy.size()) - policy.sum(); }
};

// Centering (and optional unit-variance scaling) statistics, kept so that new
// points can be mapped into the fitted frame and predictions mapped back.
struct CenteringStats {
  Eigen::VectorXd feature_means;
  Eigen::VectorXd feature_scales;  // all ones when scaling is off
  double outcome_mean = 0.0;
  bool scaled = false;
};

// Returns a centered copy plus the statistics. With scale=true each feature
// is divided by its sample standard deviation; a zero-variance column raises
// DegenerateColumnError (load_csv drops those before this point).
std::pair<Dataset, CenteringStats> center(const Dataset& data, bool scale);

// Maps new rows into a fitted centering frame: (x - mean) / scale.
Eigen::MatrixXd apply_centering(const CenteringStats& stats,
                                const Eigen::MatrixXd& x);

// Inverts apply_centering.
Eigen::MatrixXd undo_centering(const CenteringStats& stats,
                               const Eigen::MatrixXd& x);

// Disjoint exhaustive split into a train half (splits are chosen on it) and
// an estimation half (leaf effects are computed on it). Both halves contain
// both policy arms; index lists are sorted.
struct HonestSplit {
  std::vector<int> train_indices;
  std::vector<int> estimation_indices;
};

// Split over an explicit policy vector; used directly by the forest on
// subsamples. Reshuffles until both arms land on both sides, then gives up
// with SplitInfeasibleError after max_retries.
HonestSplit honest_split_policy(const Eigen::VectorXi& policy, Rng& rng,
                                double train_fraction = 0.5,
                                int max_retries = 200);

HonestSplit honest_split(const Dataset& data, std::uint64_t seed,
                         double train_fraction = 0.5);

// Column mapping from a raw table to a Dataset.
struct ColumnSchema {
  std::string outcome_column;
  std::string policy_column;
  // Empty means "every column that is not the outcome or the policy".
  std::vector<std::string> feature_columns;
  // Rows whose value in `column` is not in `keep` are dropped before anything
  // else. Applied in order.
  struct Filter {
    std::string column;
    std::vector<double> keep;
  };
  std::vector<Filter> filters;
  // Raw policy values mapped to 1; the rest map to 0. Empty means the column
  // must already be coded 0/1.
  std::vector<double> policy_one_values;
  bool log_outcome = false;  // y -> log(max(y, 1))
};

// Preset for the Pennsylvania reemployment bonus experiment file: keeps the
// control group and the high-bonus / long-qualification arm (tg in {0, 4}),
// codes tg==4 as treated, and models log duration, log(max(inuidur1, 1)).
ColumnSchema penn_schema();

// Schema from a JSON file: {"outcome": ..., "policy": ..., "features":
// [...] or "rest", "filter": {col: value or [values]}, "policy_one_values":
// [...], "log_outcome": bool}. Unknown keys are rejected.
ColumnSchema schema_from_json(const std::string& path);

struct LoadReport {
  Dataset dataset;
  std::vector<std::string> dropped_constant_columns;
  std::vector<std::string> warnings;
};

// Loads a delimited file through a schema. Constant feature columns are
// dropped with a warning rather than poisoning downstream scaling; schema
// violations (missing columns, non-numeric cells, empty result, single-arm
// policy) raise the matching DataError subtype.
LoadReport load_csv(const std::string& path, const ColumnSchema& schema);

}  // namespace fpls
