#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaclust/matrix.hpp"

namespace metaclust {

/// Flat array-of-nodes regression tree. Internal nodes route x to `left` when
/// x[feature] <= threshold. `count` is the number of (bootstrap) training
/// samples that reached the node; it doubles as the cover used by TreeSHAP.
struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean target of the samples at the node
  double count = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  /// Index of the leaf reached by x.
  int leaf_index(std::span<const double> x) const;
  int depth() const;
};

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 0;           // 0 = unlimited
  int min_leaf = 2;
  int features_per_split = 0;  // 0 = ceil(p / 3)
  bool bootstrap = true;

  void validate() const;
};

nlohmann::json to_json(const ForestConfig& c);
ForestConfig forest_config_from_json(const nlohmann::json& j);

struct Forest {
  std::vector<RegressionTree> trees;
  ForestConfig config;
  std::uint64_t seed = 0;
  std::size_t n_features = 0;
  double phi0_base = 0.0;  // mean training target
  /// Column names, in input order (meta-features then pipeline columns).
  std::vector<std::string> columns;

  /// Mean of the per-tree predictions. Throws WidthMismatchError.
  double predict(std::span<const double> x) const;
};

/// Bagged CART with variance-reduction splits. Deterministic per seed; trees
/// are grown in parallel on up to `workers` threads from independent child
/// seeds.
Forest fit_forest(const Matrix& x, std::span<const double> y, const ForestConfig& config,
                  std::uint64_t seed, unsigned workers = 1,
                  std::vector<std::string> columns = {});

/// One CART tree on the given rows (with multiplicity), `mtry` candidate
/// features per node.
RegressionTree fit_tree(const Matrix& x, std::span<const double> y,
                        std::span<const std::size_t> rows, const ForestConfig& config,
                        std::size_t mtry, std::uint64_t seed);

/// Variance reduction of splitting `rows` on feature <= threshold, i.e.
/// SSE(parent) - SSE(left) - SSE(right). Exposed for exhaustive-split tests.
double split_gain(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                  std::size_t feature, double threshold);

nlohmann::json to_json(const Forest& f);
Forest forest_from_json(const nlohmann::json& j);

}  // namespace metaclust
