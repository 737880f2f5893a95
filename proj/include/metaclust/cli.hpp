#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaclust/clustering.hpp"
#include "metaclust/dataset.hpp"
#include "metaclust/forest.hpp"
#include "metaclust/metafeatures.hpp"

namespace metaclust {

struct CorpusConfig {
  std::size_t count = 300;
  std::vector<GeneratorKind> kinds = {GeneratorKind::Blobs, GeneratorKind::Moons, GeneratorKind::Circles};
  std::size_t n_min = 100, n_max = 500;
  std::size_t d_min = 2, d_max = 10;
  /// When set, `gen` imports labeled CSVs from this directory instead of generating.
  std::optional<std::filesystem::path> csv_dir;
  std::string label_column = "label";
};

/// The 12-entry grid: k-means k in {2,3,4,6}; dbscan (eps, min_samples) in
/// {(0.15,5), (0.3,5), (0.5,10), (0.8,10)}; agglomerative (single,2),
/// (average,2), (average,4), (complete,3).
std::vector<PipelineConfig> default_grid();

struct RunConfig {
  std::optional<std::uint64_t> master_seed;
  CorpusConfig corpus;
  std::vector<PipelineConfig> grid = default_grid();
  FeatureSet feature_set = FeatureSet::full();
  ForestConfig forest;
  std::size_t folds = 10;
  std::filesystem::path out_dir = "run";
  unsigned workers = 1;
  int dpg_bins = 5;
  std::size_t dpg_sample = 0;  // rows of the meta-dataset traced by the DPG; 0 = all
  std::size_t top_n = 20;
  std::size_t core_k = 10;
  std::optional<double> dpg_min_lrc;

  /// Throws ValidationError("master_seed") when no seed was given.
  std::uint64_t seed() const;
  void validate() const;
};

/// Keys mirror the RunConfig fields; absent keys keep the values of `base`.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json to_json(const RunConfig& c);
/// Named set ("full", a family name) or {"name": ..., "ids": [...]} or a list of ids.
FeatureSet feature_set_from_json(const nlohmann::json& j);

/// Per-dataset generator specs drawn from derive_seed(master, "corpus", i).
std::vector<std::pair<std::string, GeneratorSpec>> plan_corpus(const CorpusConfig& c, std::uint64_t master_seed);

/// Fixed artifact names inside the run directory.
namespace artifact {
inline constexpr const char* kManifest = "datasets/manifest.json";
inline constexpr const char* kMetaFeatures = "metafeatures.csv";
inline constexpr const char* kTimings = "metafeature_timings.csv";
inline constexpr const char* kMetaDataset = "meta_dataset.csv";
inline constexpr const char* kMetaProvenance = "meta_dataset.provenance.json";
inline constexpr const char* kForest = "forest.json";
inline constexpr const char* kRecommendation = "recommendation.json";
inline constexpr const char* kDpgNodes = "dpg_nodes.csv";
inline constexpr const char* kDpgEdges = "dpg_edges.csv";
inline constexpr const char* kTopPredicates = "predicates_top.csv";
inline constexpr const char* kBottomPredicates = "predicates_bottom.csv";
inline constexpr const char* kFeatureLrc = "feature_lrc.csv";
inline constexpr const char* kExplanation = "explanation.json";
inline constexpr const char* kCohortCsv = "shap_cohort.csv";
inline constexpr const char* kCohortJson = "shap_cohort.json";
inline constexpr const char* kAblationJson = "ablation.json";
inline constexpr const char* kAblationCsv = "ablation.csv";
inline constexpr const char* kAblationTable = "ablation_table.csv";
inline constexpr const char* kAblationSets = "ablation_sets.json";
inline constexpr const char* kSummary = "report/summary.json";
}  // namespace artifact

/// Loads the corpus listed in the manifest.
std::vector<Dataset> load_corpus(const std::filesystem::path& run_dir);
/// A CSV path (a "label" column, if present, becomes the ground truth) or the
/// name of a corpus dataset.
Dataset resolve_dataset(const RunConfig& c, const std::string& ref);

std::string metafeatures_csv(const std::vector<MetaFeatureVector>& batch, std::uint64_t master_seed, bool timings);
std::vector<MetaFeatureVector> read_metafeatures_csv(const std::filesystem::path& path);

struct RecommendArgs {
  std::string dataset;
  std::string mode = "predict";  // or "similar"
  std::size_t k = 3;
  std::size_t neighbors = 5;
};

struct ExplainLocalArgs {
  std::string dataset;
  std::string pipeline = "top";  // a grid label, or "top" for the best predicted config
  bool cohort = false;
};

// Every command writes into c.out_dir and returns a short JSON summary.
nlohmann::json cmd_gen(const RunConfig& c);
nlohmann::json cmd_extract(const RunConfig& c);
nlohmann::json cmd_build_meta(const RunConfig& c);
nlohmann::json cmd_train(const RunConfig& c);
nlohmann::json cmd_recommend(const RunConfig& c, const RecommendArgs& args);
nlohmann::json cmd_explain_global(const RunConfig& c);
nlohmann::json cmd_explain_local(const RunConfig& c, const ExplainLocalArgs& args);
nlohmann::json cmd_ablate(const RunConfig& c);
nlohmann::json cmd_report(const RunConfig& c);

/// {"error": {"kind": ..., "message": ...}}
nlohmann::json error_json(const std::exception& e);

}  // namespace metaclust
