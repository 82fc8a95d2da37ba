#include "fpls/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fpls/errors.hpp"
#include "fpls/parallel.hpp"
#include "fpls/stats.hpp"

namespace fpls {

namespace {

constexpr const char* kForestFormat = "fpls.forest/1";
constexpr int kMaxEligibilityRedraws = 256;

void check_params(const TreeParams& params) {
  if (!(params.alpha > 0.0 && params.alpha < 1.0)) {
    throw ConfigError("tree params: alpha outside (0, 1)");
  }
  if (params.k < 1) throw ConfigError("tree params: k must be >= 1");
  if (!(params.pi > 0.0 && params.pi <= 1.0)) {
    throw ConfigError("tree params: pi outside (0, 1]");
  }
  if (params.min_arm < 1) throw ConfigError("tree params: min_arm must be >= 1");
}

int min_child_size(const TreeParams& params, std::size_t parent_size) {
  const int alpha_floor =
      static_cast<int>(std::ceil(params.alpha * static_cast<double>(parent_size)));
  return std::max(params.k, alpha_floor);
}

}  // namespace

int CausalTree::leaf_for(const Eigen::VectorXd& point) const {
  if (point.size() != n_coordinates) {
    throw ShapeError("tree predict: point has " + std::to_string(point.size()) +
                     " coordinates, tree expects " + std::to_string(n_coordinates));
  }
  int idx = 0;
  while (!nodes[static_cast<std::size_t>(idx)].is_leaf()) {
    const TreeNode& node = nodes[static_cast<std::size_t>(idx)];
    idx = point[node.rule.coordinate] <= node.rule.threshold ? node.left : node.right;
  }
  return idx;
}

double CausalTree::predict(const Eigen::VectorXd& point) const {
  return nodes[static_cast<std::size_t>(leaf_for(point))].effect();
}

double leaf_effect(const Eigen::VectorXd& outcomes, const Eigen::VectorXi& policy,
                   const std::vector<int>& rows) {
  double treated_sum = 0.0, control_sum = 0.0;
  int treated_n = 0, control_n = 0;
  for (int r : rows) {
    if (policy[r] == 1) {
      treated_sum += outcomes[r];
      ++treated_n;
    } else {
      control_sum += outcomes[r];
      ++control_n;
    }
  }
  if (treated_n == 0 || control_n == 0) {
    throw EstimationError("leaf effect: a policy arm is empty");
  }
  return treated_sum / treated_n - control_sum / control_n;
}

std::optional<SplitRule> best_split(const Eigen::MatrixXd& coordinates,
                                    const Eigen::VectorXd& outcomes,
                                    const Eigen::VectorXi& policy,
                                    const std::vector<int>& node_rows,
                                    const std::vector<int>& candidate_coords,
                                    const TreeParams& params) {
  const std::size_t m = node_rows.size();
  if (m < 2 * static_cast<std::size_t>(params.k)) return std::nullopt;
  const std::size_t need = static_cast<std::size_t>(min_child_size(params, m));

  double total_treated_sum = 0.0, total_control_sum = 0.0;
  std::size_t total_treated = 0;
  for (int r : node_rows) {
    if (policy[r] == 1) {
      total_treated_sum += outcomes[r];
      ++total_treated;
    } else {
      total_control_sum += outcomes[r];
    }
  }

  bool found = false;
  double best_value = 0.0;
  SplitRule best;

  std::vector<int> sorted(node_rows);
  for (int c : candidate_coords) {
    std::sort(sorted.begin(), sorted.end(), [&](int a, int b) {
      return coordinates(a, c) < coordinates(b, c);
    });

    double left_treated_sum = 0.0, left_control_sum = 0.0;
    std::size_t left_treated = 0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const int row = sorted[i];
      if (policy[row] == 1) {
        left_treated_sum += outcomes[row];
        ++left_treated;
      } else {
        left_control_sum += outcomes[row];
      }
      const double lo = coordinates(row, c);
      const double hi = coordinates(sorted[i + 1], c);
      if (lo == hi) continue;

      const std::size_t left_n = i + 1;
      const std::size_t right_n = m - left_n;
      if (left_n < need || right_n < need) continue;

      const std::size_t left_control = left_n - left_treated;
      const std::size_t right_treated = total_treated - left_treated;
      const std::size_t right_control = right_n - right_treated;
      const std::size_t arm_floor = static_cast<std::size_t>(params.min_arm);
      if (left_treated < arm_floor || left_control < arm_floor ||
          right_treated < arm_floor || right_control < arm_floor) {
        continue;
      }

      const double theta_left = left_treated_sum / left_treated -
                                left_control_sum / left_control;
      const double theta_right =
          (total_treated_sum - left_treated_sum) / right_treated -
          (total_control_sum - left_control_sum) / right_control;
      const double value = static_cast<double>(left_n) * theta_left * theta_left +
                           static_cast<double>(right_n) * theta_right * theta_right;

      // Strict improvement keeps exact ties at the lowest coordinate and
      // threshold (coordinates ascend, thresholds ascend within one).
      if (!found || value > best_value) {
        double mid = lo + 0.5 * (hi - lo);
        if (!(mid < hi)) mid = lo;  // adjacent floats: keep the boundary routable
        found = true;
        best_value = value;
        best.coordinate = c;
        best.threshold = mid;
      }
    }
  }
  return found ? std::optional<SplitRule>(best) : std::nullopt;
}

namespace {

struct TreeBuilder {
  const Eigen::MatrixXd& coordinates;
  const Eigen::VectorXd& outcomes;
  const Eigen::VectorXi& policy;
  const TreeParams& params;
  Rng rng;
  std::vector<TreeNode> nodes;

  std::vector<int> draw_eligible() {
    const int q = static_cast<int>(coordinates.cols());
    std::vector<int> eligible;
    for (int attempt = 0; attempt < kMaxEligibilityRedraws; ++attempt) {
      eligible.clear();
      for (int j = 0; j < q; ++j) {
        if (rng.bernoulli(params.pi)) eligible.push_back(j);
      }
      if (!eligible.empty()) return eligible;
    }
    eligible.resize(static_cast<std::size_t>(q));
    std::iota(eligible.begin(), eligible.end(), 0);
    return eligible;
  }

  int grow(const std::vector<int>& rows) {
    const int idx = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[static_cast<std::size_t>(idx)].n_train = static_cast<int>(rows.size());

    if (rows.size() < 2 * static_cast<std::size_t>(params.k)) return idx;

    const std::vector<int> eligible = draw_eligible();
    const auto rule = best_split(coordinates, outcomes, policy, rows, eligible, params);
    if (!rule) {
      nodes[static_cast<std::size_t>(idx)].exhausted = true;
      return idx;
    }

    std::vector<int> left_rows, right_rows;
    for (int r : rows) {
      (coordinates(r, rule->coordinate) <= rule->threshold ? left_rows : right_rows)
          .push_back(r);
    }
    nodes[static_cast<std::size_t>(idx)].rule = *rule;
    const int left = grow(left_rows);
    nodes[static_cast<std::size_t>(idx)].left = left;
    const int right = grow(right_rows);
    nodes[static_cast<std::size_t>(idx)].right = right;
    return idx;
  }

  // Fills leaf payloads from the estimation half; a leaf short of min_arm in
  // either arm reports failure upward and the parent collapses its split.
  bool populate(int idx, const std::vector<int>& rows) {
    TreeNode& node = nodes[static_cast<std::size_t>(idx)];
    if (!node.is_leaf()) {
      std::vector<int> left_rows, right_rows;
      for (int r : rows) {
        (coordinates(r, node.rule.coordinate) <= node.rule.threshold ? left_rows
                                                                     : right_rows)
            .push_back(r);
      }
      const bool ok_left = populate(node.left, left_rows);
      const bool ok_right = populate(node.right, right_rows);
      if (ok_left && ok_right) return true;
      node.left = -1;
      node.right = -1;
      node.merged = true;
      // Fall through: refill this node as a leaf over all its rows.
    }
    double treated_sum = 0.0, control_sum = 0.0;
    int treated_n = 0, control_n = 0;
    for (int r : rows) {
      if (policy[r] == 1) {
        treated_sum += outcomes[r];
        ++treated_n;
      } else {
        control_sum += outcomes[r];
        ++control_n;
      }
    }
    node.n_treated = treated_n;
    node.n_control = control_n;
    node.treated_mean = treated_n > 0 ? treated_sum / treated_n : 0.0;
    node.control_mean = control_n > 0 ? control_sum / control_n : 0.0;
    return treated_n >= params.min_arm && control_n >= params.min_arm;
  }

  // Drops nodes orphaned by merges; indices are remapped depth-first,
  // preserving the left-before-right layout.
  std::vector<TreeNode> compact() const {
    std::vector<TreeNode> kept;
    std::function<int(int)> copy = [&](int old_idx) {
      const TreeNode& node = nodes[static_cast<std::size_t>(old_idx)];
      const int new_idx = static_cast<int>(kept.size());
      kept.push_back(node);
      if (!node.is_leaf()) {
        const int left = copy(node.left);
        kept[static_cast<std::size_t>(new_idx)].left = left;
        const int right = copy(node.right);
        kept[static_cast<std::size_t>(new_idx)].right = right;
      }
      return new_idx;
    };
    copy(0);
    return kept;
  }
};

}  // namespace

CausalTree build_tree(const Eigen::MatrixXd& coordinates,
                      const Eigen::VectorXd& outcomes,
                      const Eigen::VectorXi& policy, const HonestSplit& honest,
                      const TreeParams& params, std::uint64_t seed) {
  check_params(params);
  const Eigen::Index n = coordinates.rows();
  if (outcomes.size() != n || policy.size() != n) {
    throw ShapeError("build_tree: outcome/policy length mismatch");
  }
  if (honest.train_indices.empty() || honest.estimation_indices.empty()) {
    throw TreeDegenerateError("build_tree: an honest half is empty");
  }
  int train_treated = 0;
  for (int r : honest.train_indices) train_treated += policy[r];
  if (train_treated == 0 ||
      train_treated == static_cast<int>(honest.train_indices.size())) {
    throw TreeDegenerateError("build_tree: training half lacks a policy arm");
  }

  TreeBuilder builder{coordinates, outcomes, policy, params, Rng(seed), {}};
  builder.grow(honest.train_indices);
  if (!builder.populate(0, honest.estimation_indices)) {
    throw TreeDegenerateError(
        "build_tree: estimation half cannot satisfy min_arm even at the root");
  }

  CausalTree tree;
  tree.nodes = builder.compact();
  tree.train_indices = honest.train_indices;
  tree.estimation_indices = honest.estimation_indices;
  tree.seed = seed;
  tree.n_coordinates = static_cast<int>(coordinates.cols());
  return tree;
}

CausalForest build_forest(const Eigen::MatrixXd& coordinates,
                          const Eigen::VectorXd& outcomes,
                          const Eigen::VectorXi& policy,
                          const ForestConfig& config) {
  check_params(config.tree);
  const int n = static_cast<int>(coordinates.rows());
  if (outcomes.size() != n || policy.size() != n) {
    throw ShapeError("build_forest: outcome/policy length mismatch");
  }
  if (config.n_trees < 1) throw ConfigError("build_forest: need at least 1 tree");
  if (!(config.beta > 0.0 && config.beta <= 1.0)) {
    throw ConfigError("build_forest: beta outside (0, 1]");
  }
  if (!(config.honest_fraction > 0.0 && config.honest_fraction < 1.0)) {
    throw ConfigError("build_forest: honest_fraction outside (0, 1)");
  }
  if (!(config.ci_level > 0.0 && config.ci_level < 1.0)) {
    throw ConfigError("build_forest: ci_level outside (0, 1)");
  }
  if (n < 4 * config.tree.k) {
    throw DataError("build_forest: need at least 4k rows, have " +
                    std::to_string(n));
  }

  int s;
  if (config.subsample_override > 0) {
    s = std::min(config.subsample_override, n);
  } else {
    s = static_cast<int>(std::ceil(
        std::pow(static_cast<double>(n), config.beta)));
    s = std::min(s, n - 1);  // genuine subsampling unless overridden
  }
  s = std::max(s, 4);

  CausalForest forest;
  forest.config = config;
  forest.n_rows = n;
  forest.n_coordinates = static_cast<int>(coordinates.cols());
  forest.subsample_size = s;
  forest.trees.resize(static_cast<std::size_t>(config.n_trees));
  forest.subsamples.resize(static_cast<std::size_t>(config.n_trees));

  parallel_for(static_cast<std::size_t>(config.n_trees), [&](std::size_t g) {
    for (int attempt = 0;; ++attempt) {
      const std::uint64_t draw_seed =
          Rng::derive(config.seed, g, 2 * static_cast<std::uint64_t>(attempt));
      const std::uint64_t tree_seed =
          Rng::derive(config.seed, g, 2 * static_cast<std::uint64_t>(attempt) + 1);
      try {
        Rng rng(draw_seed);
        std::vector<int> subsample = rng.sample_without_replacement(n, s);
        std::sort(subsample.begin(), subsample.end());

        Eigen::VectorXi sub_policy(s);
        for (int i = 0; i < s; ++i) sub_policy[i] = policy[subsample[static_cast<std::size_t>(i)]];
        const HonestSplit positions =
            honest_split_policy(sub_policy, rng, config.honest_fraction);

        HonestSplit honest;
        for (int pos : positions.train_indices) {
          honest.train_indices.push_back(subsample[static_cast<std::size_t>(pos)]);
        }
        for (int pos : positions.estimation_indices) {
          honest.estimation_indices.push_back(subsample[static_cast<std::size_t>(pos)]);
        }

        forest.trees[g] =
            build_tree(coordinates, outcomes, policy, honest, config.tree, tree_seed);
        forest.subsamples[g] = std::move(subsample);
        return;
      } catch (const EstimationError& e) {
        if (attempt >= config.max_tree_retries) {
          throw EstimationError("build_forest: tree " + std::to_string(g) +
                                " failed after " + std::to_string(attempt + 1) +
                                " subsample draws: " + e.what());
        }
      }
    }
  });
  return forest;
}

double CausalForest::predict(const Eigen::VectorXd& point) const {
  double sum = 0.0;
  for (const auto& tree : trees) sum += tree.predict(point);
  return sum / static_cast<double>(trees.size());
}

EffectEstimate CausalForest::estimate(const Eigen::VectorXd& point) const {
  return jackknife_estimate(*this, point);
}

EffectEstimate jackknife_estimate(const CausalForest& forest,
                                  const Eigen::VectorXd& point) {
  const std::size_t n_trees = forest.trees.size();
  if (n_trees < 2) {
    throw EstimationError("jackknife: need at least 2 trees");
  }
  const double b = static_cast<double>(n_trees);

  Eigen::VectorXd theta(static_cast<Eigen::Index>(n_trees));
  for (std::size_t g = 0; g < n_trees; ++g) {
    theta[static_cast<Eigen::Index>(g)] = forest.trees[g].predict(point);
  }
  const double theta_bar = theta.mean();

  Eigen::VectorXd cov_sum = Eigen::VectorXd::Zero(forest.n_rows);
  double dev_sq = 0.0;
  for (std::size_t g = 0; g < n_trees; ++g) {
    const double dev = theta[static_cast<Eigen::Index>(g)] - theta_bar;
    dev_sq += dev * dev;
    for (int i : forest.subsamples[g]) cov_sum[i] += dev;
  }

  double raw = (cov_sum / b).squaredNorm();
  raw -= static_cast<double>(forest.n_rows) / (b * b) * dev_sq;

  EffectEstimate out;
  out.point = theta_bar;
  out.variance_clamped = raw < 0.0;
  out.variance = std::max(raw, 0.0);
  const double z = normal_quantile(0.5 + 0.5 * forest.config.ci_level);
  const double half = z * std::sqrt(out.variance);
  out.ci_low = theta_bar - half;
  out.ci_high = theta_bar + half;
  return out;
}

namespace {

nlohmann::json node_to_json(const TreeNode& node) {
  return nlohmann::json::array(
      {node.left, node.right, node.rule.coordinate, node.rule.threshold,
       node.treated_mean, node.control_mean, node.n_treated, node.n_control,
       node.n_train, node.merged, node.exhausted});
}

TreeNode node_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 11) {
    throw SchemaError("forest json: node record must have 11 fields");
  }
  TreeNode node;
  node.left = j[0].get<int>();
  node.right = j[1].get<int>();
  node.rule.coordinate = j[2].get<int>();
  node.rule.threshold = j[3].get<double>();
  node.treated_mean = j[4].get<double>();
  node.control_mean = j[5].get<double>();
  node.n_treated = j[6].get<int>();
  node.n_control = j[7].get<int>();
  node.n_train = j[8].get<int>();
  node.merged = j[9].get<bool>();
  node.exhausted = j[10].get<bool>();
  return node;
}

}  // namespace

std::string forest_to_json(const CausalForest& forest) {
  nlohmann::json doc;
  doc["format"] = kForestFormat;
  doc["n_rows"] = forest.n_rows;
  doc["n_coordinates"] = forest.n_coordinates;
  doc["subsample_size"] = forest.subsample_size;
  doc["config"] = {{"n_trees", forest.config.n_trees},
                   {"beta", forest.config.beta},
                   {"subsample_override", forest.config.subsample_override},
                   {"honest_fraction", forest.config.honest_fraction},
                   {"seed", forest.config.seed},
                   {"max_tree_retries", forest.config.max_tree_retries},
                   {"ci_level", forest.config.ci_level},
                   {"alpha", forest.config.tree.alpha},
                   {"k", forest.config.tree.k},
                   {"pi", forest.config.tree.pi},
                   {"min_arm", forest.config.tree.min_arm}};
  doc["subsamples"] = forest.subsamples;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : forest.trees) {
    nlohmann::json t;
    t["seed"] = tree.seed;
    t["n_coordinates"] = tree.n_coordinates;
    t["train"] = tree.train_indices;
    t["estimation"] = tree.estimation_indices;
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : tree.nodes) nodes.push_back(node_to_json(node));
    t["nodes"] = std::move(nodes);
    trees.push_back(std::move(t));
  }
  doc["trees"] = std::move(trees);
  return doc.dump();
}

CausalForest forest_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("forest json: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kForestFormat) {
      throw SchemaError("forest json: unsupported format '" +
                        doc["format"].get<std::string>() + "'");
    }
    CausalForest forest;
    forest.n_rows = doc.at("n_rows").get<int>();
    forest.n_coordinates = doc.at("n_coordinates").get<int>();
    forest.subsample_size = doc.at("subsample_size").get<int>();
    const auto& cfg = doc.at("config");
    forest.config.n_trees = cfg.at("n_trees").get<int>();
    forest.config.beta = cfg.at("beta").get<double>();
    forest.config.subsample_override = cfg.at("subsample_override").get<int>();
    forest.config.honest_fraction = cfg.at("honest_fraction").get<double>();
    forest.config.seed = cfg.at("seed").get<std::uint64_t>();
    forest.config.max_tree_retries = cfg.at("max_tree_retries").get<int>();
    forest.config.ci_level = cfg.at("ci_level").get<double>();
    forest.config.tree.alpha = cfg.at("alpha").get<double>();
    forest.config.tree.k = cfg.at("k").get<int>();
    forest.config.tree.pi = cfg.at("pi").get<double>();
    forest.config.tree.min_arm = cfg.at("min_arm").get<int>();
    forest.subsamples = doc.at("subsamples").get<std::vector<std::vector<int>>>();
    for (const auto& t : doc.at("trees")) {
      CausalTree tree;
      tree.seed = t.at("seed").get<std::uint64_t>();
      tree.n_coordinates = t.at("n_coordinates").get<int>();
      tree.train_indices = t.at("train").get<std::vector<int>>();
      tree.estimation_indices = t.at("estimation").get<std::vector<int>>();
      for (const auto& nj : t.at("nodes")) tree.nodes.push_back(node_from_json(nj));
      if (tree.nodes.empty()) throw SchemaError("forest json: tree with no nodes");
      for (const auto& node : tree.nodes) {
        const int count = static_cast<int>(tree.nodes.size());
        if (!node.is_leaf() &&
            (node.left < 0 || node.left >= count || node.right < 0 ||
             node.right >= count)) {
          throw SchemaError("forest json: child index out of range");
        }
      }
      forest.trees.push_back(std::move(tree));
    }
    if (forest.trees.size() != forest.subsamples.size()) {
      throw SchemaError("forest json: tree/subsample count mismatch");
    }
    return forest;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("forest json: ") + e.what());
  }
}

void save_forest(const CausalForest& forest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write forest file: " + path);
  out << forest_to_json(forest);
  if (!out) throw DataError("forest write failed: " + path);
}

CausalForest load_forest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open forest file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return forest_from_json(buf.str());
}

std::vector<LeafSummary> leaf_summaries(const CausalForest& forest) {
  std::vector<LeafSummary> out;
  for (std::size_t g = 0; g < forest.trees.size(); ++g) {
    const auto& nodes = forest.trees[g].nodes;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i].is_leaf()) continue;
      LeafSummary s;
      s.tree = static_cast<int>(g);
      s.node = static_cast<int>(i);
      s.n_treated = nodes[i].n_treated;
      s.n_control = nodes[i].n_control;
      const int total = s.n_treated + s.n_control;
      s.treated_fraction =
          total > 0 ? static_cast<double>(s.n_treated) / total : 0.0;
      out.push_back(s);
    }
  }
  return out;
}

std::vector<std::string> audit_tree(const CausalTree& tree,
                                    const TreeParams& params) {
  std::vector<std::string> violations;
  auto note = [&](int idx, const std::string& what) {
    violations.push_back("node " + std::to_string(idx) + ": " + what);
  };
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& node = tree.nodes[i];
    const int idx = static_cast<int>(i);
    if (node.is_leaf()) {
      if (node.n_train >= 2 * params.k && !node.merged && !node.exhausted) {
        note(idx, "unsplit leaf with " + std::to_string(node.n_train) +
                      " training rows and no merge/exhaustion flag");
      }
      if (idx != 0 && node.n_train < params.k && !node.merged) {
        note(idx, "leaf below k training rows");
      }
      if (node.n_treated < params.min_arm || node.n_control < params.min_arm) {
        note(idx, "leaf violates min_arm on the estimation half");
      }
    } else {
      const TreeNode& left = tree.nodes[static_cast<std::size_t>(node.left)];
      const TreeNode& right = tree.nodes[static_cast<std::size_t>(node.right)];
      if (left.n_train + right.n_train != node.n_train) {
        note(idx, "children training counts do not add up");
      }
      const int need = min_child_size(params, static_cast<std::size_t>(node.n_train));
      if (left.n_train < need || right.n_train < need) {
        note(idx, "child below max(k, ceil(alpha * parent)) training rows");
      }
      if (node.rule.coordinate < 0 || node.rule.coordinate >= tree.n_coordinates) {
        note(idx, "split coordinate out of range");
      }
    }
  }
  return violations;
}

}  // namespace fpls
