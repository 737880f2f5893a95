#include "metaclust/dpg.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

#include "metaclust/error.hpp"
#include "metaclust/io_util.hpp"
#include "metaclust/metafeatures.hpp"
#include "metaclust/parallel.hpp"

namespace metaclust {

std::string to_string(const Predicate& p, const std::string& feature_name) {
  return feature_name + (p.op == PredicateOp::LessEqual ? " <= " : " > ") + format_double(p.threshold);
}

std::size_t DPGraph::predicate_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const DpgNode& n) { return !n.terminal; }));
}

std::string column_family(const std::string& column) {
  if (column.rfind("mf_", 0) == 0) return to_string(find_descriptor(column.substr(3)).family);
  return "pipeline";
}

std::string display_name(const std::string& column) {
  return column.rfind("mf_", 0) == 0 ? column.substr(3) : column;
}

namespace {

using Key = std::tuple<int, int, int>;  // (feature, op, bin); terminals use feature INT_MAX

struct ThresholdBins {
  std::vector<double> sorted;
  std::vector<double> representative;  // per bin
  int bins = 1;

  int bin_of(double t) const {
    const auto pos = static_cast<long long>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
    const long long b = pos * bins / static_cast<long long>(sorted.size());
    return static_cast<int>(std::min<long long>(b, bins - 1));
  }
};

}  // namespace

DPGraph build_dpg(const Forest& forest, const Matrix& sample, int bins_per_feature, unsigned workers) {
  if (forest.trees.empty()) throw ValidationError("forest", "forest has no trees");
  if (sample.rows() == 0) throw ValidationError("sample", "no traversal rows");
  if (bins_per_feature < 1) throw ValidationError("bins_per_feature", "must be >= 1");
  if (sample.cols() != forest.n_features) throw WidthMismatchError(forest.n_features, sample.cols(), "DPG sample");

  const std::size_t p = forest.n_features;
  std::vector<ThresholdBins> bins(p);
  double leaf_lo = std::numeric_limits<double>::infinity(), leaf_hi = -leaf_lo;
  for (const auto& tree : forest.trees) {
    for (const auto& n : tree.nodes) {
      if (n.is_leaf()) {
        leaf_lo = std::min(leaf_lo, n.value);
        leaf_hi = std::max(leaf_hi, n.value);
      } else {
        bins[static_cast<std::size_t>(n.feature)].sorted.push_back(n.threshold);
      }
    }
  }
  for (auto& b : bins) {
    std::sort(b.sorted.begin(), b.sorted.end());
    b.bins = bins_per_feature;
    b.representative.assign(static_cast<std::size_t>(bins_per_feature), 0.0);
    std::vector<std::vector<double>> members(static_cast<std::size_t>(bins_per_feature));
    for (double t : b.sorted) members[static_cast<std::size_t>(b.bin_of(t))].push_back(t);
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (!members[k].empty()) b.representative[k] = stats::median(members[k]);
    }
  }
  const double leaf_width = (leaf_hi - leaf_lo) / kTerminalBins;
  auto leaf_bin = [&](double v) {
    if (!(leaf_width > 0.0)) return 0;
    return std::clamp(static_cast<int>(std::floor((v - leaf_lo) / leaf_width)), 0, kTerminalBins - 1);
  };

  // Key paths per (tree, sample), filled in parallel and merged in index order.
  const std::size_t rows = sample.rows();
  std::vector<std::vector<std::vector<Key>>> paths(forest.trees.size());
  parallel_for(forest.trees.size(), workers, [&](std::size_t t) {
    const auto& nodes = forest.trees[t].nodes;
    auto& out = paths[t];
    out.resize(rows);
    for (std::size_t s = 0; s < rows; ++s) {
      auto x = sample.row(s);
      int i = 0;
      while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const TreeNode& n = nodes[static_cast<std::size_t>(i)];
        const auto f = static_cast<std::size_t>(n.feature);
        const bool left = x[f] <= n.threshold;
        out[s].emplace_back(n.feature, left ? 0 : 1, bins[f].bin_of(n.threshold));
        i = left ? n.left : n.right;
      }
      out[s].emplace_back(INT_MAX, 0, leaf_bin(nodes[static_cast<std::size_t>(i)].value));
    }
  });

  std::set<Key> keys;
  for (const auto& tree_paths : paths)
    for (const auto& path : tree_paths) keys.insert(path.begin(), path.end());

  DPGraph g;
  g.sample_count = rows;
  g.n_trees = forest.trees.size();
  g.feature_names = forest.columns;
  if (g.feature_names.empty()) {
    for (std::size_t f = 0; f < p; ++f) g.feature_names.push_back("x" + std::to_string(f));
  }
  std::map<Key, int> id;
  for (const Key& k : keys) {
    const auto [feature, op, bin] = k;
    DpgNode node;
    node.bin = bin;
    if (feature == INT_MAX) {
      node.terminal = true;
      node.leaf_lo = leaf_lo + bin * leaf_width;
      node.leaf_hi = bin == kTerminalBins - 1 || !(leaf_width > 0.0) ? leaf_hi : leaf_lo + (bin + 1) * leaf_width;
      node.label = "leaf in [" + format_double(node.leaf_lo) + " .. " + format_double(node.leaf_hi) + "]";
    } else {
      node.predicate = {feature, op == 0 ? PredicateOp::LessEqual : PredicateOp::Greater,
                        bins[static_cast<std::size_t>(feature)].representative[static_cast<std::size_t>(bin)]};
      node.label = to_string(node.predicate, display_name(g.feature_names[static_cast<std::size_t>(feature)]));
    }
    id.emplace(k, static_cast<int>(g.nodes.size()));
    g.nodes.push_back(std::move(node));
  }

  std::map<std::pair<int, int>, double> weights;
  for (const auto& tree_paths : paths) {
    for (const auto& path : tree_paths) {
      std::vector<int> ids;
      ids.reserve(path.size());
      for (const Key& k : path) ids.push_back(id.at(k));
      for (std::size_t i = 0; i + 1 < ids.size(); ++i) weights[{ids[i], ids[i + 1]}] += 1.0;
      g.traversals.push_back(std::move(ids));
    }
  }
  for (const auto& [e, w] : weights) g.edges.push_back({e.first, e.second, w});
  return g;
}

std::vector<LrcEntry> lrc(const DPGraph& g) {
  const std::size_t n = g.nodes.size();
  std::vector<LrcEntry> table(n);
  for (std::size_t v = 0; v < n; ++v) table[v].node = static_cast<int>(v);

  for (const auto& path : g.traversals) {
    std::vector<int> seen(path);
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (int v : seen) table[static_cast<std::size_t>(v)].lrc_path += 1.0;
  }
  if (n < 2 || g.edges.empty()) return table;

  double total = 0.0;
  std::vector<std::vector<std::pair<int, double>>> out(n);
  for (const auto& e : g.edges) {
    total += e.weight;
    out[static_cast<std::size_t>(e.src)].emplace_back(e.dst, e.weight);
  }
  const double mean_weight = total / static_cast<double>(g.edges.size());

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n), weight_sum(n);
  std::vector<int> hops(n);
  for (std::size_t src = 0; src < n; ++src) {
    // Dijkstra with length total / w; only strictly shorter paths replace a
    // settled route, so ties keep the first route found.
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(weight_sum.begin(), weight_sum.end(), 0.0);
    std::fill(hops.begin(), hops.end(), 0);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[src] = 0.0;
    queue.emplace(0.0, static_cast<int>(src));
    while (!queue.empty()) {
      const auto [d, u] = queue.top();
      queue.pop();
      const auto uu = static_cast<std::size_t>(u);
      if (d > dist[uu]) continue;
      for (const auto& [v, w] : out[uu]) {
        const auto vv = static_cast<std::size_t>(v);
        const double nd = d + total / w;
        if (nd < dist[vv]) {
          dist[vv] = nd;
          weight_sum[vv] = weight_sum[uu] + w;
          hops[vv] = hops[uu] + 1;
          queue.emplace(nd, v);
        }
      }
    }
    double sum = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      if (v != src && hops[v] > 0) sum += weight_sum[v] / hops[v];
    }
    table[src].lrc_graph = sum / mean_weight / static_cast<double>(n - 1);
  }
  double max_value = 0.0;
  for (const auto& e : table) max_value = std::max(max_value, e.lrc_graph);
  if (max_value > 0.0) {
    for (auto& e : table) e.lrc_normalized = e.lrc_graph / max_value;
  }
  return table;
}

RankedPredicates rank_predicates(const DPGraph& g, const std::vector<LrcEntry>& table, std::size_t n) {
  if (n == 0) throw ValidationError("n", "must be >= 1");
  std::vector<LrcEntry> preds;
  for (const auto& e : table) {
    if (!g.nodes[static_cast<std::size_t>(e.node)].terminal) preds.push_back(e);
  }
  std::sort(preds.begin(), preds.end(), [&](const LrcEntry& a, const LrcEntry& b) {
    if (a.lrc_graph != b.lrc_graph) return a.lrc_graph > b.lrc_graph;
    if (a.lrc_path != b.lrc_path) return a.lrc_path > b.lrc_path;
    return g.nodes[static_cast<std::size_t>(a.node)].label < g.nodes[static_cast<std::size_t>(b.node)].label;
  });
  RankedPredicates r;
  r.top.assign(preds.begin(), preds.begin() + static_cast<std::ptrdiff_t>(std::min(n, preds.size())));
  r.bottom.assign(preds.rbegin(), preds.rbegin() + static_cast<std::ptrdiff_t>(std::min(n, preds.size())));
  return r;
}

std::vector<double> feature_lrc(const DPGraph& g, const std::vector<LrcEntry>& table) {
  const std::size_t p = g.feature_names.size();
  std::vector<double> sum(p, 0.0), count(p, 0.0);
  for (const auto& e : table) {
    const DpgNode& node = g.nodes[static_cast<std::size_t>(e.node)];
    if (node.terminal) continue;
    const auto f = static_cast<std::size_t>(node.predicate.feature);
    sum[f] += e.lrc_graph;
    count[f] += 1.0;
  }
  for (std::size_t f = 0; f < p; ++f) sum[f] = count[f] > 0.0 ? sum[f] / count[f] : 0.0;
  return sum;
}

namespace {

std::string node_family(const DPGraph& g, const DpgNode& node) {
  if (node.terminal) return "terminal";
  return column_family(g.feature_names[static_cast<std::size_t>(node.predicate.feature)]);
}

}  // namespace

std::string dpg_nodes_csv(const DPGraph& g, const std::vector<LrcEntry>& table, std::uint64_t master_seed) {
  std::ostringstream out;
  out << provenance_line(master_seed) << "\nid,predicate,family,lrc_graph,lrc_path,lrc_normalized\n";
  for (const auto& e : table) {
    const DpgNode& node = g.nodes[static_cast<std::size_t>(e.node)];
    out << e.node << ',' << node.label << ',' << node_family(g, node) << ',' << format_double(e.lrc_graph)
        << ',' << format_double(e.lrc_path) << ',' << format_double(e.lrc_normalized) << '\n';
  }
  return out.str();
}

std::string dpg_edges_csv(const DPGraph& g, std::uint64_t master_seed) {
  std::ostringstream out;
  out << provenance_line(master_seed) << "\nsrc,dst,weight\n";
  for (const auto& e : g.edges) out << e.src << ',' << e.dst << ',' << format_double(e.weight) << '\n';
  return out.str();
}

std::string ranked_predicates_csv(const DPGraph& g, const std::vector<LrcEntry>& entries,
                                  std::uint64_t master_seed) {
  std::ostringstream out;
  out << provenance_line(master_seed) << "\nrank,predicate,family,lrc,lrc_normalized,lrc_path\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const DpgNode& node = g.nodes[static_cast<std::size_t>(e.node)];
    out << i + 1 << ',' << node.label << ',' << node_family(g, node) << ',' << format_double(e.lrc_graph)
        << ',' << format_double(e.lrc_normalized) << ',' << format_double(e.lrc_path) << '\n';
  }
  return out.str();
}

std::string feature_lrc_csv(const DPGraph& g, const std::vector<double>& values, std::uint64_t master_seed) {
  std::ostringstream out;
  out << provenance_line(master_seed) << "\nfeature,family,lrc\n";
  for (std::size_t f = 0; f < values.size(); ++f) {
    out << display_name(g.feature_names[f]) << ',' << column_family(g.feature_names[f]) << ','
        << format_double(values[f]) << '\n';
  }
  return out.str();
}

}  // namespace metaclust
