#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaclust/clustering.hpp"
#include "metaclust/dataset.hpp"
#include "metaclust/forest.hpp"
#include "metaclust/metafeatures.hpp"

namespace metaclust {

struct SelectedSets {
  FeatureSet full, dpg, core;
  double dpg_threshold = 0.0;
};

/// `lrc` is aligned with full.ids. dpg keeps ids whose score exceeds
/// `dpg_min_lrc`; by default zeros and the bottom decile of the positive
/// scores are dropped (a set of identical scores is kept whole). core is the
/// top `core_k` by score, ties in `full` order, and is always merged into dpg.
SelectedSets select_sets(const std::vector<double>& lrc, const FeatureSet& full, std::size_t core_k,
                         std::optional<double> dpg_min_lrc = std::nullopt);

struct AblationRow {
  FeatureSet set;
  double extraction_time_total = 0.0;  // wall clock, seconds
  double extraction_cpu_time = 0.0;    // sum of per-descriptor timings
  double rmse = 0.0, mae = 0.0, r2 = 0.0;
  std::vector<double> fold_rmse, fold_mae, fold_r2;
  std::size_t n_rows = 0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::uint64_t master_seed = 0;
  std::size_t corpus_size = 0;
  std::size_t grid_size = 0;
  std::size_t folds = 0;
  unsigned workers = 1;
  ForestConfig forest;
  nlohmann::json corpus;  // generator descriptor, copied into the report
};

/// Pipelines are scored once; every set is then extracted (timed), turned into
/// a meta-dataset and cross-validated on the same grouped fold plan.
AblationReport run_ablation(const std::vector<Dataset>& corpus, const std::vector<PipelineConfig>& grid,
                            const std::vector<FeatureSet>& sets, std::size_t folds,
                            const ForestConfig& forest, std::uint64_t master_seed, unsigned workers = 1,
                            nlohmann::json corpus_descriptor = {});

nlohmann::json to_json(const AblationReport& report);
/// Long format: set,metric,value.
std::string ablation_long_csv(const AblationReport& report);
/// One row per set: set,n_features,rmse,mae,r2,extraction_time_s.
std::string ablation_table_csv(const AblationReport& report);

}  // namespace metaclust
