#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaclust/dataset.hpp"
#include "metaclust/matrix.hpp"

namespace metaclust {

enum class Algorithm { KMeans, Dbscan, Agglomerative };
enum class Linkage { Single, Average, Complete };

std::string to_string(Algorithm a);
std::string to_string(Linkage l);
Algorithm algorithm_from_string(const std::string& s);
Linkage linkage_from_string(const std::string& s);

/// A clustering algorithm with its hyperparameters. Only the fields relevant
/// to `algorithm` are meaningful; validate() enforces ranges.
struct PipelineConfig {
  Algorithm algorithm = Algorithm::KMeans;
  int k = 2;
  int max_iter = 100;
  double eps = 0.5;
  int min_samples = 5;
  Linkage linkage = Linkage::Average;

  static PipelineConfig make_kmeans(int k, int max_iter = 100);
  static PipelineConfig make_dbscan(double eps, int min_samples);
  static PipelineConfig make_agglomerative(int k, Linkage linkage);

  void validate() const;
  /// Short stable label, e.g. "dbscan(eps=0.3,min_samples=5)".
  std::string label() const;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

nlohmann::json to_json(const PipelineConfig& c);
PipelineConfig pipeline_from_json(const nlohmann::json& j);

/// Assignments use -1 for noise; other labels are contiguous 0..n_clusters-1
/// in order of first appearance.
struct Partition {
  std::vector<int> assignments;
  int n_clusters = 0;

  // Diagnostics; only the ones belonging to the producing algorithm are set.
  double inertia = 0.0;
  std::vector<double> inertia_history;
  std::vector<std::vector<double>> centroids;
  int iterations = 0;
  std::vector<double> merge_heights;
  std::vector<bool> core;
};

/// Relabels non-noise ids to 0.. by first appearance.
int canonicalize_partition(std::vector<int>& assignments);

/// Lloyd iterations from k-means++ seeding drawn from `seed`.
Partition kmeans(const Matrix& x, int k, std::uint64_t seed, int max_iter = 100);

/// Neighborhoods include the point itself and use distance <= eps. Border
/// points join the cluster of their lowest-index core neighbor.
Partition dbscan(const Matrix& x, double eps, int min_samples);

/// Full bottom-up dendrogram (n-1 merge heights recorded), cut at k clusters.
/// Equal distances merge the lexicographically smallest slot pair first.
Partition agglomerative(const Matrix& x, int k, Linkage linkage);

struct OpticsSummary {
  double max_reachability = 0.0;
  double max_core_distance = 0.0;
};

/// OPTICS with eps = infinity; min_samples counts the point itself.
OpticsSummary optics_scan(const Matrix& x, int min_samples);

/// Runs `config` on the points as given (callers standardize beforehand).
Partition run_pipeline(const Matrix& x, const PipelineConfig& config, std::uint64_t seed);
Partition run_pipeline(const Dataset& dataset, const PipelineConfig& config, std::uint64_t seed);

}  // namespace metaclust
