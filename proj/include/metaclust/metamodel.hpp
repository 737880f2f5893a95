#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaclust/clustering.hpp"
#include "metaclust/dataset.hpp"
#include "metaclust/forest.hpp"
#include "metaclust/metafeatures.hpp"

namespace metaclust {

/// Names of the pipeline encoding columns: algorithm one-hot, numeric
/// hyperparameters, linkage one-hot. Parameters an algorithm does not use are 0.
const std::vector<std::string>& pipeline_columns();
std::vector<double> encode_pipeline(const PipelineConfig& config);

/// ARI of every (dataset, config) pair against the ground truth. Pipelines run
/// on the z-scored points.
struct PipelineScores {
  std::vector<std::string> dataset_names;
  std::vector<PipelineConfig> grid;
  std::vector<std::vector<double>> y;                   // [dataset][config]
  std::vector<std::vector<bool>> undefined_partition;   // all-noise results, scored 0
};

PipelineScores evaluate_pipelines(const std::vector<Dataset>& datasets,
                                  const std::vector<PipelineConfig>& grid,
                                  std::uint64_t master_seed, unsigned workers = 1);

struct MetaDataset {
  FeatureSet feature_set;
  Matrix x;                    // meta-feature columns then pipeline columns
  std::vector<double> y;
  std::vector<std::string> dataset_names;  // per row
  std::vector<PipelineConfig> configs;     // per row
  std::vector<bool> undefined_partition;   // per row

  std::size_t rows() const noexcept { return y.size(); }
  /// "mf_<id>" for each descriptor followed by the pipeline columns.
  std::vector<std::string> columns() const;
  void validate() const;
};

/// One row per (dataset, config), datasets outer. `features[i]` must belong
/// to `scores.dataset_names[i]`.
MetaDataset assemble_meta_dataset(const std::vector<MetaFeatureVector>& features,
                                  const PipelineScores& scores);

/// Extraction + pipeline evaluation in one call. Unlabeled datasets throw.
MetaDataset build_meta_dataset(const std::vector<Dataset>& datasets,
                               const std::vector<PipelineConfig>& grid,
                               const FeatureSet& feature_set, std::uint64_t master_seed,
                               unsigned workers = 1);

std::string meta_dataset_to_csv(const MetaDataset& md, std::uint64_t master_seed);
nlohmann::json meta_dataset_provenance(const MetaDataset& md, std::uint64_t master_seed);
MetaDataset read_meta_dataset(const std::filesystem::path& csv,
                              const std::filesystem::path& provenance);

Forest fit_forest(const MetaDataset& md, const ForestConfig& config, std::uint64_t seed,
                  unsigned workers = 1);

struct Recommendation {
  PipelineConfig config;
  double score = 0.0;
};

/// Scores every grid entry with the forest; descending score, ties in grid
/// order; the first K are returned.
std::vector<Recommendation> recommend_predict(const Forest& forest,
                                              std::span<const double> meta_features,
                                              const std::vector<PipelineConfig>& grid,
                                              std::size_t k);

/// Nearest stored datasets by Euclidean distance on meta-features z-scored
/// with the store's statistics; their configs are ranked by stored ARI, then
/// neighbor rank, then grid order. Each config appears once.
std::vector<Recommendation> recommend_similar(const MetaDataset& store,
                                              std::span<const double> meta_features,
                                              std::size_t k, std::size_t neighbors);

struct RegressionMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  std::vector<double> fold_rmse, fold_mae, fold_r2;
};

/// r2 is 1 - SSE/SST; when SST is 0 it is 1 for an exact fit and 0 otherwise.
RegressionMetrics regression_metrics(std::span<const double> y, std::span<const double> predicted);

struct CvResult {
  RegressionMetrics metrics;
  std::vector<double> predictions;  // out-of-fold, per row
  FoldPlan group_plan;              // over base datasets, first-appearance order
};

/// Grouped F-fold CV: every row of a base dataset lands in the same fold.
/// The fold plan depends only on the dataset names and `seed`.
CvResult cross_validate(const MetaDataset& md, std::size_t folds, const ForestConfig& config,
                        std::uint64_t seed, unsigned workers = 1);

}  // namespace metaclust
