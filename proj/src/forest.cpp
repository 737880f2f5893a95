#include "metaclust/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metaclust/error.hpp"
#include "metaclust/parallel.hpp"
#include "metaclust/seed.hpp"

namespace metaclust {

int RegressionTree::leaf_index(std::span<const double> x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return i;
}

double RegressionTree::predict(std::span<const double> x) const {
  return nodes[static_cast<std::size_t>(leaf_index(x))].value;
}

int RegressionTree::depth() const {
  std::vector<int> depth(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, depth[i]);
    if (!nodes[i].is_leaf()) {
      depth[static_cast<std::size_t>(nodes[i].left)] = depth[i] + 1;
      depth[static_cast<std::size_t>(nodes[i].right)] = depth[i] + 1;
    }
  }
  return best;
}

void ForestConfig::validate() const {
  if (n_trees < 1) throw ValidationError("n_trees", "must be >= 1");
  if (max_depth < 0) throw ValidationError("max_depth", "must be >= 0 (0 = unlimited)");
  if (min_leaf < 1) throw ValidationError("min_leaf", "must be >= 1");
  if (features_per_split < 0) throw ValidationError("features_per_split", "must be >= 0");
}

nlohmann::json to_json(const ForestConfig& c) {
  return {{"n_trees", c.n_trees},
          {"max_depth", c.max_depth},
          {"min_leaf", c.min_leaf},
          {"features_per_split", c.features_per_split},
          {"bootstrap", c.bootstrap}};
}

ForestConfig forest_config_from_json(const nlohmann::json& j) {
  ForestConfig c;
  c.n_trees = j.value("n_trees", c.n_trees);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.min_leaf = j.value("min_leaf", c.min_leaf);
  c.features_per_split = j.value("features_per_split", c.features_per_split);
  c.bootstrap = j.value("bootstrap", c.bootstrap);
  c.validate();
  return c;
}

double Forest::predict(std::span<const double> x) const {
  if (x.size() != n_features) throw WidthMismatchError(n_features, x.size(), "forest input");
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(x);
  return s / static_cast<double>(trees.size());
}

double split_gain(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                  std::size_t feature, double threshold) {
  double sl = 0, sr = 0, nl = 0, nr = 0;
  for (std::size_t r : rows) {
    if (x(r, feature) <= threshold) {
      sl += y[r];
      nl += 1;
    } else {
      sr += y[r];
      nr += 1;
    }
  }
  const double s = sl + sr, n = nl + nr;
  double gain = -s * s / n;
  if (nl > 0) gain += sl * sl / nl;
  if (nr > 0) gain += sr * sr / nr;
  return gain;
}

namespace {

struct BestSplit {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

struct Pending {
  std::size_t begin, end;
  int node;
  int depth;
};

}  // namespace

RegressionTree fit_tree(const Matrix& x, std::span<const double> y,
                        std::span<const std::size_t> rows, const ForestConfig& config,
                        std::size_t mtry, std::uint64_t seed) {
  if (rows.empty()) throw ValidationError("rows", "cannot fit a tree on zero rows");
  const std::size_t p = x.cols(), m = rows.size();
  const auto min_leaf = static_cast<std::size_t>(config.min_leaf);
  Rng rng(seed);

  // Sample slots (rows with multiplicity), one value column per feature and one
  // slot order per feature sorted by value. Every node owns the same [begin, end)
  // range in all orders; splitting stable-partitions each order.
  std::vector<double> ys(m);
  for (std::size_t s = 0; s < m; ++s) ys[s] = y[rows[s]];
  std::vector<std::vector<double>> xs(p, std::vector<double>(m));
  std::vector<std::vector<std::uint32_t>> order(p, std::vector<std::uint32_t>(m));
  for (std::size_t f = 0; f < p; ++f) {
    for (std::size_t s = 0; s < m; ++s) xs[f][s] = x(rows[s], f);
    std::iota(order[f].begin(), order[f].end(), 0U);
    const auto& col = xs[f];
    std::stable_sort(order[f].begin(), order[f].end(),
                     [&](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
  }
  std::vector<char> goes_left(m);
  std::vector<std::uint32_t> buffer(m);

  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<Pending> stack{{0, m, 0, 0}};
  std::vector<std::size_t> features(p);

  while (!stack.empty()) {
    const Pending job = stack.back();
    stack.pop_back();
    const std::size_t count = job.end - job.begin;
    const auto& any = order[0];

    double sum = 0.0;
    const double y0 = ys[any[job.begin]];
    bool constant_y = true;
    for (std::size_t i = job.begin; i < job.end; ++i) {
      const double v = ys[any[i]];
      sum += v;
      constant_y = constant_y && v == y0;
    }
    TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
    node.count = static_cast<double>(count);
    node.value = constant_y ? y0 : sum / static_cast<double>(count);

    const bool depth_capped = config.max_depth > 0 && job.depth >= config.max_depth;
    if (constant_y || depth_capped || count < 2 * min_leaf) continue;

    // Visit features in a random order until `mtry` non-constant ones have been scored.
    std::iota(features.begin(), features.end(), 0);
    std::shuffle(features.begin(), features.end(), rng);
    const double parent_term = sum * sum / static_cast<double>(count);
    BestSplit best;
    std::size_t scored = 0;
    for (std::size_t f : features) {
      if (scored >= mtry) break;
      const auto& ord = order[f];
      const auto& col = xs[f];
      if (col[ord[job.begin]] == col[ord[job.end - 1]]) continue;
      ++scored;
      double left_sum = 0.0;
      for (std::size_t i = job.begin; i + 1 < job.end; ++i) {
        left_sum += ys[ord[i]];
        const double a = col[ord[i]], b = col[ord[i + 1]];
        if (a == b) continue;
        const std::size_t nl = i + 1 - job.begin, nr = count - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) - parent_term;
        if (gain > best.gain) {
          double thr = a + (b - a) / 2.0;
          if (!(thr < b)) thr = a;
          best = {static_cast<int>(f), thr, gain};
        }
      }
    }
    if (best.feature < 0) continue;

    const auto& split_col = xs[static_cast<std::size_t>(best.feature)];
    std::size_t n_left = 0;
    for (std::size_t i = job.begin; i < job.end; ++i) {
      const std::uint32_t s = any[i];
      goes_left[s] = split_col[s] <= best.threshold;
      n_left += static_cast<std::size_t>(goes_left[s]);
    }
    for (auto& ord : order) {
      std::size_t l = job.begin, r = 0;
      for (std::size_t i = job.begin; i < job.end; ++i) {
        const std::uint32_t s = ord[i];
        if (goes_left[s])
          ord[l++] = s;
        else
          buffer[r++] = s;
      }
      std::copy(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(r),
                ord.begin() + static_cast<std::ptrdiff_t>(l));
    }

    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& parent = tree.nodes[static_cast<std::size_t>(job.node)];
    parent.feature = best.feature;
    parent.threshold = best.threshold;
    parent.left = left_id;
    parent.right = left_id + 1;
    const std::size_t mid = job.begin + n_left;
    // Right is pushed first so the left subtree is expanded first.
    stack.push_back({mid, job.end, left_id + 1, job.depth + 1});
    stack.push_back({job.begin, mid, left_id, job.depth + 1});
  }
  return tree;
}

Forest fit_forest(const Matrix& x, std::span<const double> y, const ForestConfig& config,
                  std::uint64_t seed, unsigned workers, std::vector<std::string> columns) {
  config.validate();
  const std::size_t n = x.rows(), p = x.cols();
  if (n == 0 || p == 0) throw ValidationError("meta_dataset", "cannot fit a forest on empty data");
  if (y.size() != n) throw WidthMismatchError(n, y.size(), "target length");
  if (!columns.empty() && columns.size() != p) throw WidthMismatchError(p, columns.size(), "column names");

  const std::size_t mtry = config.features_per_split > 0
                               ? std::min<std::size_t>(static_cast<std::size_t>(config.features_per_split), p)
                               : std::max<std::size_t>(1, (p + 2) / 3);
  Forest forest;
  forest.config = config;
  forest.seed = seed;
  forest.n_features = p;
  forest.columns = std::move(columns);
  forest.phi0_base = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  forest.trees.resize(static_cast<std::size_t>(config.n_trees));

  parallel_for(forest.trees.size(), workers, [&](std::size_t t) {
    std::vector<std::size_t> rows(n);
    if (config.bootstrap) {
      Rng rng(derive_seed(seed, "forest.bootstrap", t));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    forest.trees[t] = fit_tree(x, y, rows, config, mtry, derive_seed(seed, "forest.split", t));
  });
  return forest;
}

nlohmann::json to_json(const Forest& f) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : f.trees) {
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(),
                   value = nlohmann::json::array(), count = nlohmann::json::array();
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
      count.push_back(static_cast<std::int64_t>(n.count));
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"value", value},
                     {"count", count}});
  }
  return {{"format", "metaclust-forest/1"},
          {"config", to_json(f.config)},
          {"seed", f.seed},
          {"n_features", f.n_features},
          {"phi0_base", f.phi0_base},
          {"columns", f.columns},
          {"trees", trees}};
}

Forest forest_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "metaclust-forest/1")
    throw ValidationError("forest", "unrecognized forest format");
  Forest f;
  f.config = forest_config_from_json(j.at("config"));
  f.seed = j.at("seed").get<std::uint64_t>();
  f.n_features = j.at("n_features").get<std::size_t>();
  f.phi0_base = j.at("phi0_base").get<double>();
  f.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& jt : j.at("trees")) {
    RegressionTree t;
    const auto& feature = jt.at("feature");
    const std::size_t size = feature.size();
    t.nodes.resize(size);
    for (std::size_t i = 0; i < size; ++i) {
      TreeNode& n = t.nodes[i];
      n.feature = feature[i].get<int>();
      n.threshold = jt.at("threshold")[i].get<double>();
      n.left = jt.at("left")[i].get<int>();
      n.right = jt.at("right")[i].get<int>();
      n.value = jt.at("value")[i].get<double>();
      n.count = static_cast<double>(jt.at("count")[i].get<std::int64_t>());
      if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || static_cast<std::size_t>(n.left) >= size ||
                           static_cast<std::size_t>(n.right) >= size ||
                           static_cast<std::size_t>(n.feature) >= f.n_features))
        throw ValidationError("forest", "malformed tree node");
    }
    f.trees.push_back(std::move(t));
  }
  if (f.trees.empty()) throw ValidationError("forest", "forest has no trees");
  return f;
}

}  // namespace metaclust
