#include "fpls/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "fpls/csv.hpp"
#include "fpls/errors.hpp"
#include "fpls/stats.hpp"

namespace fpls {

Dataset::Dataset(Eigen::MatrixXd x, Eigen::VectorXd y, Eigen::VectorXi p,
                 std::vector<std::string> names)
    : features(std::move(x)),
      outcome(std::move(y)),
      policy(std::move(p)),
      feature_names(std::move(names)) {
  const Eigen::Index n = features.rows();
  if (n < 2) throw EmptyDataError("dataset: need at least 2 rows");
  if (features.cols() < 1) throw ShapeError("dataset: need at least 1 feature");
  if (outcome.size() != n || policy.size() != n) {
    throw ShapeError("dataset: outcome/policy length does not match feature rows");
  }
  if (feature_names.size() != static_cast<std::size_t>(features.cols())) {
    throw ShapeError("dataset: feature name count does not match columns");
  }
  if (!features.allFinite() || !outcome.allFinite()) {
    throw DataError("dataset: non-finite value");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (policy[i] != 0 && policy[i] != 1) {
      throw DataError("dataset: policy must be coded 0/1, found " +
                      std::to_string(policy[i]));
    }
  }
}

std::pair<Dataset, CenteringStats> center(const Dataset& data, bool scale) {
  CenteringStats stats;
  stats.scaled = scale;
  stats.feature_means = data.features.colwise().mean();
  stats.outcome_mean = data.outcome.mean();
  stats.feature_scales = Eigen::VectorXd::Ones(data.n_features());
  if (scale) {
    for (Eigen::Index j = 0; j < data.n_features(); ++j) {
      const double sd = sample_sd(data.features.col(j));
      if (sd <= 0.0) {
        throw DegenerateColumnError("center: zero-variance column '" +
                                    data.feature_names[j] + "'");
      }
      stats.feature_scales[j] = sd;
    }
  }
  Dataset out = data;
  out.features = apply_centering(stats, data.features);
  out.outcome = data.outcome.array() - stats.outcome_mean;
  return {std::move(out), std::move(stats)};
}

Eigen::MatrixXd apply_centering(const CenteringStats& stats,
                                const Eigen::MatrixXd& x) {
  if (x.cols() != stats.feature_means.size()) {
    throw ShapeError("apply_centering: column count mismatch");
  }
  Eigen::MatrixXd out = x.rowwise() - stats.feature_means.transpose();
  out.array().rowwise() /= stats.feature_scales.transpose().array();
  return out;
}

Eigen::MatrixXd undo_centering(const CenteringStats& stats,
                               const Eigen::MatrixXd& x) {
  if (x.cols() != stats.feature_means.size()) {
    throw ShapeError("undo_centering: column count mismatch");
  }
  Eigen::MatrixXd out = x.array().rowwise() * stats.feature_scales.transpose().array();
  out.rowwise() += stats.feature_means.transpose();
  return out;
}

HonestSplit honest_split_policy(const Eigen::VectorXi& policy, Rng& rng,
                                double train_fraction, int max_retries) {
  const int n = static_cast<int>(policy.size());
  if (n < 4) throw SplitInfeasibleError("honest split: need at least 4 rows");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("honest split: train_fraction outside (0, 1)");
  }
  const int treated = policy.sum();
  if (treated < 2 || n - treated < 2) {
    throw SplitInfeasibleError(
        "honest split: need at least 2 rows per policy arm, have " +
        std::to_string(treated) + " treated / " + std::to_string(n - treated) +
        " control");
  }
  int n_train = static_cast<int>(std::lround(train_fraction * n));
  n_train = std::clamp(n_train, 1, n - 1);

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  for (int attempt = 0; attempt < max_retries; ++attempt) {
    rng.shuffle(order);
    int train_treated = 0, est_treated = 0;
    for (int i = 0; i < n; ++i) {
      if (policy[order[static_cast<std::size_t>(i)]] == 1) {
        (i < n_train ? train_treated : est_treated) += 1;
      }
    }
    const int train_control = n_train - train_treated;
    const int est_control = (n - n_train) - est_treated;
    if (train_treated > 0 && train_control > 0 && est_treated > 0 && est_control > 0) {
      HonestSplit split;
      split.train_indices.assign(order.begin(), order.begin() + n_train);
      split.estimation_indices.assign(order.begin() + n_train, order.end());
      std::sort(split.train_indices.begin(), split.train_indices.end());
      std::sort(split.estimation_indices.begin(), split.estimation_indices.end());
      return split;
    }
  }
  throw SplitInfeasibleError("honest split: no arm-balanced split found in " +
                             std::to_string(max_retries) + " shuffles");
}

HonestSplit honest_split(const Dataset& data, std::uint64_t seed,
                         double train_fraction) {
  Rng rng(seed);
  return honest_split_policy(data.policy, rng, train_fraction);
}

ColumnSchema penn_schema() {
  ColumnSchema schema;
  schema.outcome_column = "inuidur1";
  schema.policy_column = "tg";
  schema.filters.push_back({"tg", {0.0, 4.0}});
  schema.policy_one_values = {4.0};
  schema.log_outcome = true;
  schema.feature_columns = {"abdt",   "female", "black",      "hispanic",
                            "othrace", "dep",    "q1",         "q2",
                            "q3",      "q4",     "q5",         "q6",
                            "recall",  "agelt35", "agegt54",   "durable",
                            "nondurable", "lusd", "husd",      "muld"};
  return schema;
}

ColumnSchema schema_from_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("schema file " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw SchemaError(path + ": schema must be a JSON object");

  static const std::set<std::string> known = {
      "outcome", "policy", "features", "filter", "policy_one_values", "log_outcome"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.count(key)) throw SchemaError(path + ": unknown schema key '" + key + "'");
  }

  ColumnSchema schema;
  try {
    schema.outcome_column = doc.at("outcome").get<std::string>();
    schema.policy_column = doc.at("policy").get<std::string>();
    if (doc.contains("features") && !(doc["features"].is_string() &&
                                      doc["features"] == "rest")) {
      schema.feature_columns = doc["features"].get<std::vector<std::string>>();
    }
    if (doc.contains("filter")) {
      for (const auto& [col, val] : doc["filter"].items()) {
        ColumnSchema::Filter f;
        f.column = col;
        if (val.is_array()) {
          f.keep = val.get<std::vector<double>>();
        } else {
          f.keep = {val.get<double>()};
        }
        schema.filters.push_back(std::move(f));
      }
    }
    if (doc.contains("policy_one_values")) {
      schema.policy_one_values = doc["policy_one_values"].get<std::vector<double>>();
    }
    if (doc.contains("log_outcome")) {
      schema.log_outcome = doc["log_outcome"].get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  if (schema.outcome_column.empty() || schema.policy_column.empty()) {
    throw SchemaError(path + ": outcome and policy must be non-empty");
  }
  return schema;
}

LoadReport load_csv(const std::string& path, const ColumnSchema& schema) {
  const CsvTable table = read_delimited(path);
  if (table.rows.empty()) throw EmptyDataError(path + ": no data rows");

  std::map<std::string, std::size_t> column_index;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (!column_index.emplace(table.header[j], j).second) {
      throw SchemaError(path + ": duplicate column '" + table.header[j] + "'");
    }
  }
  auto require = [&](const std::string& name) -> std::size_t {
    auto it = column_index.find(name);
    if (it == column_index.end()) {
      throw SchemaError(path + ": missing column '" + name + "'");
    }
    return it->second;
  };

  const std::size_t y_col = require(schema.outcome_column);
  const std::size_t p_col = require(schema.policy_column);

  std::vector<std::string> feature_names = schema.feature_columns;
  if (feature_names.empty()) {
    for (const auto& name : table.header) {
      if (name != schema.outcome_column && name != schema.policy_column) {
        feature_names.push_back(name);
      }
    }
  }
  if (feature_names.empty()) throw SchemaError(path + ": no feature columns");
  std::vector<std::size_t> feature_cols;
  for (const auto& name : feature_names) feature_cols.push_back(require(name));

  std::vector<std::size_t> filter_cols;
  for (const auto& f : schema.filters) filter_cols.push_back(require(f.column));

  // Row filter pass.
  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string context = path + ": row " + std::to_string(r + 2);
    bool keep = true;
    for (std::size_t f = 0; f < schema.filters.size(); ++f) {
      const double v = parse_double(row[filter_cols[f]], context);
      const auto& allowed = schema.filters[f].keep;
      if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(r);
  }
  if (kept.size() < 2) {
    throw EmptyDataError(path + ": fewer than 2 rows remain after filtering");
  }

  const Eigen::Index n = static_cast<Eigen::Index>(kept.size());
  const Eigen::Index p = static_cast<Eigen::Index>(feature_cols.size());
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  Eigen::VectorXi policy(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[kept[static_cast<std::size_t>(i)]];
    const std::string context =
        path + ": row " + std::to_string(kept[static_cast<std::size_t>(i)] + 2);
    for (Eigen::Index j = 0; j < p; ++j) {
      x(i, j) = parse_double(row[feature_cols[static_cast<std::size_t>(j)]], context);
    }
    double yv = parse_double(row[y_col], context);
    if (schema.log_outcome) yv = std::log(std::max(yv, 1.0));
    y[i] = yv;

    const double pv = parse_double(row[p_col], context);
    if (schema.policy_one_values.empty()) {
      if (pv != 0.0 && pv != 1.0) {
        throw DataError(context + ": policy value " + format_double(pv) +
                        " is not 0/1 and no policy_one_values mapping given");
      }
      policy[i] = pv == 1.0 ? 1 : 0;
    } else {
      const auto& ones = schema.policy_one_values;
      policy[i] = std::find(ones.begin(), ones.end(), pv) != ones.end() ? 1 : 0;
    }
  }

  LoadReport report;

  // Constant columns cannot be scaled and carry no signal; drop with a note.
  std::vector<Eigen::Index> live;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double lo = x.col(j).minCoeff();
    const double hi = x.col(j).maxCoeff();
    if (lo == hi) {
      report.dropped_constant_columns.push_back(feature_names[static_cast<std::size_t>(j)]);
      report.warnings.push_back("dropped constant feature column '" +
                                feature_names[static_cast<std::size_t>(j)] + "'");
    } else {
      live.push_back(j);
    }
  }
  if (live.empty()) throw DegenerateColumnError(path + ": all feature columns constant");

  Eigen::MatrixXd x_live(n, static_cast<Eigen::Index>(live.size()));
  std::vector<std::string> names_live;
  for (std::size_t j = 0; j < live.size(); ++j) {
    x_live.col(static_cast<Eigen::Index>(j)) = x.col(live[j]);
    names_live.push_back(feature_names[static_cast<std::size_t>(live[j])]);
  }

  const int treated = policy.sum();
  if (treated == 0 || treated == static_cast<int>(n)) {
    throw DataError(path + ": policy has a single arm after filtering");
  }

  report.dataset = Dataset(std::move(x_live), std::move(y), std::move(policy),
                           std::move(names_live));
  return report;
}

}  // namespace fpls
