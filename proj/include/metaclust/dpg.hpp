#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metaclust/forest.hpp"
#include "metaclust/matrix.hpp"

namespace metaclust {

enum class PredicateOp { LessEqual, Greater };

struct Predicate {
  int feature = 0;
  PredicateOp op = PredicateOp::LessEqual;
  double threshold = 0.0;  // representative of the merged threshold bin
};

/// "name <= t" / "name > t" with the shortest round-trip threshold text.
std::string to_string(const Predicate& p, const std::string& feature_name);

struct DpgNode {
  bool terminal = false;
  Predicate predicate;     // predicate nodes
  int bin = 0;             // threshold bin, or leaf-value bin for terminals
  double leaf_lo = 0.0;    // terminal value range
  double leaf_hi = 0.0;
  std::string label;
};

struct DpgEdge {
  int src = 0;
  int dst = 0;
  double weight = 0.0;
};

/// Predicates merged across the forest. Node ids order predicate nodes by
/// (feature, op, bin) and put the terminal leaf-value bins last.
struct DPGraph {
  std::vector<DpgNode> nodes;
  std::vector<DpgEdge> edges;  // sorted by (src, dst)
  std::vector<std::string> feature_names;
  std::size_t sample_count = 0;
  std::size_t n_trees = 0;
  /// Node-id sequence of every recorded traversal, ordered by (tree, sample).
  std::vector<std::vector<int>> traversals;

  std::size_t predicate_count() const;
};

inline constexpr int kTerminalBins = 5;

/// Records the root-to-leaf path of every (tree, sample row) pair. Thresholds
/// of one feature fall into `bins_per_feature` equal-frequency bins over all of
/// that feature's split thresholds in the forest; a bin is represented by the
/// median of its members. Leaf values map to kTerminalBins equal-width bins.
DPGraph build_dpg(const Forest& forest, const Matrix& sample, int bins_per_feature = 5,
                  unsigned workers = 1);

struct LrcEntry {
  int node = 0;
  double lrc_graph = 0.0;
  double lrc_path = 0.0;
  double lrc_normalized = 0.0;
};

/// One entry per node, in node-id order. lrc_graph is weighted local reaching
/// centrality (edge weights read as lengths total_weight / w; each reachable
/// node adds the mean edge weight of its shortest path, divided by the mean
/// edge weight of the graph, all over N - 1). lrc_path counts traversals that
/// contain the node.
std::vector<LrcEntry> lrc(const DPGraph& g);

struct RankedPredicates {
  std::vector<LrcEntry> top;
  std::vector<LrcEntry> bottom;
};

/// Predicate nodes only. Top: lrc_graph descending, then lrc_path descending,
/// then label ascending. Bottom: the reverse of that order.
RankedPredicates rank_predicates(const DPGraph& g, const std::vector<LrcEntry>& table, std::size_t n);

/// Mean lrc_graph over each feature's predicate nodes, indexed like the
/// forest columns; 0 for features without predicates.
std::vector<double> feature_lrc(const DPGraph& g, const std::vector<LrcEntry>& table);

/// Descriptor family of a forest column ("pipeline" for pipe_* columns).
std::string column_family(const std::string& column);
/// Column name without the "mf_" prefix.
std::string display_name(const std::string& column);

std::string dpg_nodes_csv(const DPGraph& g, const std::vector<LrcEntry>& table, std::uint64_t master_seed);
std::string dpg_edges_csv(const DPGraph& g, std::uint64_t master_seed);
std::string ranked_predicates_csv(const DPGraph& g, const std::vector<LrcEntry>& entries,
                                  std::uint64_t master_seed);
std::string feature_lrc_csv(const DPGraph& g, const std::vector<double>& values, std::uint64_t master_seed);

}  // namespace metaclust
