#include "metaclust/shap.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "metaclust/error.hpp"
#include "metaclust/io_util.hpp"

namespace metaclust {

namespace {

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

using Path = std::vector<PathElement>;

void extend_path(Path& path, double zero_fraction, double one_fraction, int feature) {
  const std::size_t depth = path.size();
  path.push_back({feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0});
  const double d1 = static_cast<double>(depth + 1);
  for (std::size_t k = depth; k-- > 0;) {
    path[k + 1].pweight += one_fraction * path[k].pweight * static_cast<double>(k + 1) / d1;
    path[k].pweight = zero_fraction * path[k].pweight * static_cast<double>(depth - k) / d1;
  }
}

void unwind_path(Path& path, std::size_t index) {
  const std::size_t depth = path.size() - 1;
  const double one = path[index].one_fraction, zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next = path[depth].pweight;
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[k].pweight;
      path[k].pweight = next * d1 / (static_cast<double>(k + 1) * one);
      next = tmp - path[k].pweight * zero * static_cast<double>(depth - k) / d1;
    } else {
      path[k].pweight = path[k].pweight * d1 / (zero * static_cast<double>(depth - k));
    }
  }
  for (std::size_t k = index; k < depth; ++k) {
    path[k].feature = path[k + 1].feature;
    path[k].zero_fraction = path[k + 1].zero_fraction;
    path[k].one_fraction = path[k + 1].one_fraction;
  }
  path.pop_back();
}

double unwound_path_sum(const Path& path, std::size_t index) {
  const std::size_t depth = path.size() - 1;
  const double one = path[index].one_fraction, zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next = path[depth].pweight;
  double total = 0.0;
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0.0) {
      const double tmp = next * d1 / (static_cast<double>(k + 1) * one);
      total += tmp;
      next = path[k].pweight - tmp * zero * static_cast<double>(depth - k) / d1;
    } else if (zero != 0.0) {
      total += path[k].pweight / zero / (static_cast<double>(depth - k) / d1);
    }
  }
  return total;
}

void recurse(const RegressionTree& tree, std::span<const double> x, std::vector<double>& phi, int node,
             Path path, double zero_fraction, double one_fraction, int feature) {
  extend_path(path, zero_fraction, one_fraction, feature);
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) {
    for (std::size_t k = 1; k < path.size(); ++k) {
      const double w = unwound_path_sum(path, k);
      phi[static_cast<std::size_t>(path[k].feature)] +=
          w * (path[k].one_fraction - path[k].zero_fraction) * n.value;
    }
    return;
  }
  const bool go_left = x[static_cast<std::size_t>(n.feature)] <= n.threshold;
  const int hot = go_left ? n.left : n.right;
  const int cold = go_left ? n.right : n.left;
  const double hot_zero = tree.nodes[static_cast<std::size_t>(hot)].count / n.count;
  const double cold_zero = tree.nodes[static_cast<std::size_t>(cold)].count / n.count;
  double incoming_zero = 1.0, incoming_one = 1.0;
  // A feature already on the path is unwound so the split can be redone here.
  for (std::size_t k = 1; k < path.size(); ++k) {
    if (path[k].feature == n.feature) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, k);
      break;
    }
  }
  recurse(tree, x, phi, hot, path, hot_zero * incoming_zero, incoming_one, n.feature);
  recurse(tree, x, phi, cold, path, cold_zero * incoming_zero, 0.0, n.feature);
}

int max_feature(const RegressionTree& tree) {
  int m = -1;
  for (const auto& n : tree.nodes) m = std::max(m, n.feature);
  return m;
}

// Conditional expectation of the tree output given that only the features in
// `known` take their values from x.
double conditional_value(const RegressionTree& tree, std::span<const double> x, const std::vector<bool>& known,
                         int node) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) return n.value;
  const auto f = static_cast<std::size_t>(n.feature);
  if (known[f]) return conditional_value(tree, x, known, x[f] <= n.threshold ? n.left : n.right);
  const TreeNode& l = tree.nodes[static_cast<std::size_t>(n.left)];
  const TreeNode& r = tree.nodes[static_cast<std::size_t>(n.right)];
  return (l.count * conditional_value(tree, x, known, n.left) +
          r.count * conditional_value(tree, x, known, n.right)) /
         n.count;
}

}  // namespace

double tree_expectation(const RegressionTree& tree) {
  double sum = 0.0;
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) sum += n.count * n.value;
  }
  return sum / tree.nodes.front().count;
}

std::vector<double> tree_shap(const RegressionTree& tree, std::span<const double> x, double* phi0) {
  if (static_cast<int>(x.size()) <= max_feature(tree))
    throw WidthMismatchError(static_cast<std::size_t>(max_feature(tree) + 1), x.size(), "SHAP input");
  std::vector<double> phi(x.size(), 0.0);
  if (phi0) *phi0 = tree_expectation(tree);
  recurse(tree, x, phi, 0, {}, 1.0, 1.0, -1);
  return phi;
}

ShapExplanation forest_shap(const Forest& forest, std::span<const double> x, std::string instance_id) {
  if (x.size() != forest.n_features) throw WidthMismatchError(forest.n_features, x.size(), "SHAP input");
  ShapExplanation e;
  e.instance_id = std::move(instance_id);
  e.phi.assign(x.size(), 0.0);
  e.x.assign(x.begin(), x.end());
  e.feature_names = forest.columns;
  for (const auto& tree : forest.trees) {
    double base = 0.0;
    const auto phi = tree_shap(tree, x, &base);
    e.phi0 += base;
    for (std::size_t j = 0; j < phi.size(); ++j) e.phi[j] += phi[j];
  }
  const double t = static_cast<double>(forest.trees.size());
  e.phi0 /= t;
  for (auto& v : e.phi) v /= t;
  e.fx = forest.predict(x);
  return e;
}

std::vector<double> brute_force_shapley(const Forest& forest, std::span<const double> x, std::size_t max_features) {
  if (x.size() != forest.n_features) throw WidthMismatchError(forest.n_features, x.size(), "SHAP input");
  std::set<int> used;
  for (const auto& tree : forest.trees)
    for (const auto& n : tree.nodes)
      if (!n.is_leaf()) used.insert(n.feature);
  const std::vector<int> active(used.begin(), used.end());
  const std::size_t m = active.size();
  if (m > max_features)
    throw ValidationError("max_features", std::to_string(m) + " active features exceed the oracle limit of " +
                                              std::to_string(max_features));

  const std::size_t subsets = std::size_t{1} << m;
  std::vector<double> value(subsets, 0.0);
  std::vector<bool> known(x.size(), false);
  for (std::size_t s = 0; s < subsets; ++s) {
    for (std::size_t i = 0; i < m; ++i) known[static_cast<std::size_t>(active[i])] = (s >> i) & 1U;
    double sum = 0.0;
    for (const auto& tree : forest.trees) sum += conditional_value(tree, x, known, 0);
    value[s] = sum / static_cast<double>(forest.trees.size());
  }
  // Shapley weight |S|! (m - |S| - 1)! / m!
  std::vector<double> weight(m + 1, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    double w = 1.0 / static_cast<double>(m);
    for (std::size_t i = 1; i <= k; ++i) w *= static_cast<double>(i) / static_cast<double>(m - i);
    weight[k] = w;
  }
  std::vector<double> phi(x.size(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double total = 0.0;
    for (std::size_t s = 0; s < subsets; ++s) {
      if ((s >> i) & 1U) continue;
      const auto size = static_cast<std::size_t>(__builtin_popcountll(s));
      total += weight[size] * (value[s | (std::size_t{1} << i)] - value[s]);
    }
    phi[static_cast<std::size_t>(active[i])] = total;
  }
  return phi;
}

CohortSummary cohort_summary(std::vector<ShapExplanation> explanations) {
  if (explanations.empty()) throw ValidationError("explanations", "need at least one explanation");
  const std::size_t p = explanations.front().phi.size();
  CohortSummary s;
  for (std::size_t j = 0; j < p; ++j) {
    CohortFeature f;
    f.feature = j;
    const auto& names = explanations.front().feature_names;
    f.name = j < names.size() ? names[j] : "x" + std::to_string(j);
    for (const auto& e : explanations) {
      if (e.phi.size() != p) throw WidthMismatchError(p, e.phi.size(), "explanation width");
      f.mean_abs_phi += std::abs(e.phi[j]);
      f.mean_phi += e.phi[j];
    }
    f.mean_abs_phi /= static_cast<double>(explanations.size());
    f.mean_phi /= static_cast<double>(explanations.size());
    s.ranking.push_back(f);
  }
  std::stable_sort(s.ranking.begin(), s.ranking.end(), [](const CohortFeature& a, const CohortFeature& b) {
    return a.mean_abs_phi > b.mean_abs_phi;
  });
  s.explanations = std::move(explanations);
  return s;
}

nlohmann::json to_json(const ShapExplanation& e) {
  nlohmann::json phi = nlohmann::json::object();
  for (std::size_t j = 0; j < e.phi.size(); ++j) {
    phi[j < e.feature_names.size() ? e.feature_names[j] : "x" + std::to_string(j)] = e.phi[j];
  }
  return {{"instance_id", e.instance_id}, {"phi0", e.phi0}, {"fx", e.fx}, {"phi", phi}};
}

std::string cohort_csv(const CohortSummary& summary, std::uint64_t master_seed) {
  std::ostringstream out;
  out << provenance_line(master_seed) << "\nfeature,value,phi\n";
  for (const auto& f : summary.ranking) {
    for (const auto& e : summary.explanations) {
      out << f.name << ',' << format_double(e.x[f.feature]) << ',' << format_double(e.phi[f.feature]) << '\n';
    }
  }
  return out.str();
}

}  // namespace metaclust
