#include "metaclust/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <sstream>

#include "metaclust/error.hpp"
#include "metaclust/io_util.hpp"
#include "metaclust/metamodel.hpp"

namespace metaclust {

SelectedSets select_sets(const std::vector<double>& lrc, const FeatureSet& full, std::size_t core_k,
                         std::optional<double> dpg_min_lrc) {
  full.validate();
  if (lrc.size() != full.ids.size()) throw WidthMismatchError(full.ids.size(), lrc.size(), "feature LRC");
  if (core_k == 0) throw ValidationError("core_k", "must be >= 1");
  if (core_k > full.ids.size())
    throw ValidationError("core_k", "exceeds the size of the full set (" + std::to_string(full.ids.size()) + ")");

  SelectedSets out;
  out.full = full;
  out.full.name = "full";

  double threshold;
  if (dpg_min_lrc) {
    threshold = *dpg_min_lrc;
  } else {
    std::vector<double> positive;
    for (double v : lrc)
      if (v > 0.0) positive.push_back(v);
    std::sort(positive.begin(), positive.end());
    const bool all_equal = std::adjacent_find(lrc.begin(), lrc.end(), std::not_equal_to<>()) == lrc.end();
    if (all_equal) {
      threshold = lrc.front() - 1.0;
    } else {
      // Everything at or below the decile cut goes, except when that cut is the
      // smallest positive score: then only the zeros are dropped.
      const double cut = stats::quantile_sorted(positive, 0.1);
      threshold = cut > positive.front() ? cut : 0.0;
    }
  }
  out.dpg_threshold = threshold;

  std::vector<std::size_t> order(full.ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lrc[a] > lrc[b]; });
  std::vector<bool> in_core(full.ids.size(), false);
  out.core.name = "core";
  for (std::size_t i = 0; i < core_k; ++i) {
    in_core[order[i]] = true;
    out.core.ids.push_back(full.ids[order[i]]);
  }
  out.dpg.name = "dpg";
  for (std::size_t i = 0; i < full.ids.size(); ++i) {
    if (lrc[i] > threshold || in_core[i]) out.dpg.ids.push_back(full.ids[i]);
  }
  return out;
}

AblationReport run_ablation(const std::vector<Dataset>& corpus, const std::vector<PipelineConfig>& grid,
                            const std::vector<FeatureSet>& sets, std::size_t folds,
                            const ForestConfig& forest, std::uint64_t master_seed, unsigned workers,
                            nlohmann::json corpus_descriptor) {
  if (sets.empty()) throw ValidationError("sets", "no feature sets to compare");
  for (const auto& s : sets) s.validate();
  forest.validate();

  AblationReport report;
  report.master_seed = master_seed;
  report.corpus_size = corpus.size();
  report.grid_size = grid.size();
  report.folds = folds;
  report.workers = workers;
  report.forest = forest;
  report.corpus = std::move(corpus_descriptor);

  const PipelineScores scores = evaluate_pipelines(corpus, grid, master_seed, workers);
  for (const auto& set : sets) {
    AblationRow row;
    row.set = set;
    const auto start = std::chrono::steady_clock::now();
    auto features = extract_batch(corpus, set, master_seed, workers);
    row.extraction_time_total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& v : features) row.extraction_cpu_time += v.total_time();

    MetaDataset md = assemble_meta_dataset(features, scores);
    md.feature_set = set;
    const CvResult cv = cross_validate(md, folds, forest, master_seed, workers);
    row.rmse = cv.metrics.rmse;
    row.mae = cv.metrics.mae;
    row.r2 = cv.metrics.r2;
    row.fold_rmse = cv.metrics.fold_rmse;
    row.fold_mae = cv.metrics.fold_mae;
    row.fold_r2 = cv.metrics.fold_r2;
    row.n_rows = md.rows();
    report.rows.push_back(std::move(row));
  }
  return report;
}

nlohmann::json to_json(const AblationReport& report) {
  nlohmann::json sets = nlohmann::json::array();
  for (const auto& r : report.rows) {
    sets.push_back({{"name", r.set.name},
                    {"ids", r.set.ids},
                    {"n_features", r.set.ids.size()},
                    {"n_rows", r.n_rows},
                    {"rmse", r.rmse},
                    {"mae", r.mae},
                    {"r2", r.r2},
                    {"fold_rmse", r.fold_rmse},
                    {"fold_mae", r.fold_mae},
                    {"fold_r2", r.fold_r2},
                    {"extraction_time_total", r.extraction_time_total},
                    {"extraction_cpu_time", r.extraction_cpu_time}});
  }
  return {{"provenance", {{"tool", kToolName}, {"version", kToolVersion}, {"master_seed", report.master_seed}}},
          {"corpus", {{"count", report.corpus_size}, {"descriptor", report.corpus}}},
          {"grid_size", report.grid_size},
          {"folds", report.folds},
          {"grouped_by", "dataset"},
          {"forest", to_json(report.forest)},
          {"workers", report.workers},
          {"sets", sets}};
}

std::string ablation_long_csv(const AblationReport& report) {
  std::ostringstream out;
  out << provenance_line(report.master_seed) << "\nset,metric,value\n";
  for (const auto& r : report.rows) {
    out << r.set.name << ",n_features," << r.set.ids.size() << '\n';
    out << r.set.name << ",rmse," << format_double(r.rmse) << '\n';
    out << r.set.name << ",mae," << format_double(r.mae) << '\n';
    out << r.set.name << ",r2," << format_double(r.r2) << '\n';
    out << r.set.name << ",extraction_time_s," << format_double(r.extraction_time_total) << '\n';
  }
  return out.str();
}

std::string ablation_table_csv(const AblationReport& report) {
  std::ostringstream out;
  out << provenance_line(report.master_seed) << "\nset,n_features,rmse,mae,r2,extraction_time_s\n";
  for (const auto& r : report.rows) {
    out << r.set.name << ',' << r.set.ids.size() << ',' << format_double(r.rmse) << ',' << format_double(r.mae)
        << ',' << format_double(r.r2) << ',' << format_double(r.extraction_time_total) << '\n';
  }
  return out.str();
}

}  // namespace metaclust
