#include "metaclust/metamodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "metaclust/cvi.hpp"
#include "metaclust/error.hpp"
#include "metaclust/io_util.hpp"
#include "metaclust/parallel.hpp"
#include "metaclust/seed.hpp"

namespace metaclust {

const std::vector<std::string>& pipeline_columns() {
  static const std::vector<std::string> cols = {
      "pipe_kmeans", "pipe_dbscan",         "pipe_agglomerative",   "pipe_k",
      "pipe_max_iter", "pipe_eps",          "pipe_min_samples",     "pipe_linkage_single",
      "pipe_linkage_average", "pipe_linkage_complete"};
  return cols;
}

std::vector<double> encode_pipeline(const PipelineConfig& c) {
  std::vector<double> v(pipeline_columns().size(), 0.0);
  switch (c.algorithm) {
    case Algorithm::KMeans:
      v[0] = 1;
      v[3] = c.k;
      v[4] = c.max_iter;
      break;
    case Algorithm::Dbscan:
      v[1] = 1;
      v[5] = c.eps;
      v[6] = c.min_samples;
      break;
    case Algorithm::Agglomerative:
      v[2] = 1;
      v[3] = c.k;
      v[7 + static_cast<int>(c.linkage)] = 1;
      break;
  }
  return v;
}

PipelineScores evaluate_pipelines(const std::vector<Dataset>& datasets,
                                  const std::vector<PipelineConfig>& grid,
                                  std::uint64_t master_seed, unsigned workers) {
  if (grid.empty()) throw ValidationError("pipeline_grid", "grid is empty");
  for (const auto& c : grid) c.validate();
  for (const auto& ds : datasets) {
    if (!ds.labels) throw ValidationError("labels", "dataset '" + ds.name + "' has no ground truth");
  }
  PipelineScores s;
  s.grid = grid;
  s.y.assign(datasets.size(), std::vector<double>(grid.size(), 0.0));
  s.undefined_partition.assign(datasets.size(), std::vector<bool>(grid.size(), false));
  for (const auto& ds : datasets) s.dataset_names.push_back(ds.name);

  parallel_for(datasets.size(), workers, [&](std::size_t i) {
    const Dataset& ds = datasets[i];
    const Matrix z = zscore(ds.points);
    std::vector<bool> flags(grid.size(), false);
    for (std::size_t c = 0; c < grid.size(); ++c) {
      const std::uint64_t seed = derive_seed(derive_seed(master_seed, "pipeline", c), ds.name, 0);
      const Partition p = run_pipeline(z, grid[c], seed);
      if (p.n_clusters == 0) {
        flags[c] = true;
        continue;
      }
      s.y[i][c] = ari(*ds.labels, p.assignments);
    }
    s.undefined_partition[i] = std::move(flags);
  });
  return s;
}

std::vector<std::string> MetaDataset::columns() const {
  std::vector<std::string> cols;
  for (const auto& id : feature_set.ids) cols.push_back("mf_" + id);
  for (const auto& c : pipeline_columns()) cols.push_back(c);
  return cols;
}

void MetaDataset::validate() const {
  feature_set.validate();
  const std::size_t width = feature_set.ids.size() + pipeline_columns().size();
  if (x.cols() != width) throw WidthMismatchError(width, x.cols(), "meta-dataset row");
  if (x.rows() != y.size() || dataset_names.size() != y.size() || configs.size() != y.size() ||
      undefined_partition.size() != y.size())
    throw ValidationError("meta_dataset", "row bookkeeping is inconsistent");
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw ValidationError("meta_dataset", "non-finite feature value");
  }
  for (double v : y) {
    if (!std::isfinite(v) || v < -0.5 - 1e-12 || v > 1.0 + 1e-12)
      throw ValidationError("y", "target outside the ARI range");
  }
}

MetaDataset assemble_meta_dataset(const std::vector<MetaFeatureVector>& features,
                                  const PipelineScores& scores) {
  if (features.size() != scores.dataset_names.size())
    throw WidthMismatchError(scores.dataset_names.size(), features.size(), "meta-feature batch");
  MetaDataset md;
  if (!features.empty()) md.feature_set = {"custom", features.front().ids};
  const std::size_t p = md.feature_set.ids.size(), q = pipeline_columns().size();
  const std::size_t rows = features.size() * scores.grid.size();
  md.x = Matrix(rows, p + q);
  std::size_t r = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].ids != md.feature_set.ids)
      throw ValidationError("meta_features", "vectors in a batch must share one id list");
    if (features[i].dataset_name != scores.dataset_names[i])
      throw ValidationError("meta_features", "batch order differs from the scored datasets");
    for (std::size_t c = 0; c < scores.grid.size(); ++c, ++r) {
      auto row = md.x.row(r);
      std::copy(features[i].values.begin(), features[i].values.end(), row.begin());
      const auto enc = encode_pipeline(scores.grid[c]);
      std::copy(enc.begin(), enc.end(), row.begin() + static_cast<std::ptrdiff_t>(p));
      md.y.push_back(scores.y[i][c]);
      md.dataset_names.push_back(scores.dataset_names[i]);
      md.configs.push_back(scores.grid[c]);
      md.undefined_partition.push_back(scores.undefined_partition[i][c]);
    }
  }
  md.validate();
  return md;
}

MetaDataset build_meta_dataset(const std::vector<Dataset>& datasets,
                               const std::vector<PipelineConfig>& grid,
                               const FeatureSet& feature_set, std::uint64_t master_seed,
                               unsigned workers) {
  const PipelineScores scores = evaluate_pipelines(datasets, grid, master_seed, workers);
  MetaDataset md =
      assemble_meta_dataset(extract_batch(datasets, feature_set, master_seed, workers), scores);
  md.feature_set = feature_set;
  return md;
}

std::string meta_dataset_to_csv(const MetaDataset& md, std::uint64_t master_seed) {
  std::ostringstream out;
  out << provenance_line(master_seed) << '\n';
  for (const auto& c : md.columns()) out << c << ',';
  out << "y\n";
  for (std::size_t r = 0; r < md.rows(); ++r) {
    for (double v : md.x.row(r)) out << format_double(v) << ',';
    out << format_double(md.y[r]) << '\n';
  }
  return out.str();
}

nlohmann::json meta_dataset_provenance(const MetaDataset& md, std::uint64_t master_seed) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < md.rows(); ++r) {
    rows.push_back({{"dataset", md.dataset_names[r]},
                    {"pipeline", to_json(md.configs[r])},
                    {"undefined_partition", static_cast<bool>(md.undefined_partition[r])}});
  }
  return {{"provenance", {{"tool", kToolName}, {"version", kToolVersion}, {"master_seed", master_seed}}},
          {"feature_set", {{"name", md.feature_set.name}, {"ids", md.feature_set.ids}}},
          {"pipeline_columns", pipeline_columns()},
          {"target", "ari"},
          {"rows", rows}};
}

MetaDataset read_meta_dataset(const std::filesystem::path& csv,
                              const std::filesystem::path& provenance) {
  if (!std::filesystem::exists(csv)) throw StageDependencyError(csv.string());
  if (!std::filesystem::exists(provenance)) throw StageDependencyError(provenance.string());
  const auto side = nlohmann::json::parse(read_text_file(provenance));
  MetaDataset md;
  md.feature_set.name = side.at("feature_set").at("name").get<std::string>();
  md.feature_set.ids = side.at("feature_set").at("ids").get<std::vector<std::string>>();
  for (const auto& row : side.at("rows")) {
    md.dataset_names.push_back(row.at("dataset").get<std::string>());
    md.configs.push_back(pipeline_from_json(row.at("pipeline")));
    md.undefined_partition.push_back(row.at("undefined_partition").get<bool>());
  }

  std::istringstream in(read_text_file(csv));
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::vector<double> data;
  const auto expected = md.columns();
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fields = split(line, ',');
    if (header.empty()) {
      header = fields;
      if (header.size() != expected.size() + 1)
        throw WidthMismatchError(expected.size() + 1, header.size(), "meta-dataset header");
      for (std::size_t c = 0; c < expected.size(); ++c) {
        if (header[c] != expected[c]) throw ParseError(line_no, header[c], "expected column " + expected[c]);
      }
      if (header.back() != "y") throw ParseError(line_no, header.back(), "expected target column y");
      continue;
    }
    if (fields.size() != header.size()) throw ParseError(line_no, "-", "ragged row");
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      if (!parse_double(fields[c], v)) throw ParseError(line_no, header[c], "not a finite number");
      if (c + 1 == fields.size())
        md.y.push_back(v);
      else
        data.push_back(v);
    }
  }
  if (header.empty()) throw ParseError(1, "-", "missing header");
  md.x = Matrix(md.y.size(), expected.size(), std::move(data));
  md.validate();
  return md;
}

Forest fit_forest(const MetaDataset& md, const ForestConfig& config, std::uint64_t seed,
                  unsigned workers) {
  if (md.rows() == 0) throw ValidationError("meta_dataset", "no rows to train on");
  return fit_forest(md.x, md.y, config, seed, workers, md.columns());
}

std::vector<Recommendation> recommend_predict(const Forest& forest,
                                              std::span<const double> meta_features,
                                              const std::vector<PipelineConfig>& grid,
                                              std::size_t k) {
  if (grid.empty()) throw ValidationError("pipeline_grid", "grid is empty");
  if (k == 0) throw ValidationError("k", "must be >= 1");
  const std::size_t q = pipeline_columns().size();
  if (meta_features.size() + q != forest.n_features)
    throw WidthMismatchError(forest.n_features - std::min(forest.n_features, q), meta_features.size(),
                             "meta-feature vector");
  std::vector<Recommendation> out;
  std::vector<double> x(meta_features.begin(), meta_features.end());
  x.resize(forest.n_features);
  for (const auto& c : grid) {
    const auto enc = encode_pipeline(c);
    std::copy(enc.begin(), enc.end(), x.begin() + static_cast<std::ptrdiff_t>(meta_features.size()));
    out.push_back({c, forest.predict(x)});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Recommendation& a, const Recommendation& b) { return a.score > b.score; });
  out.resize(std::min(k, out.size()));
  return out;
}

std::vector<Recommendation> recommend_similar(const MetaDataset& store,
                                              std::span<const double> meta_features,
                                              std::size_t k, std::size_t neighbors) {
  if (store.rows() == 0) throw ValidationError("meta_store", "store is empty");
  if (k == 0) throw ValidationError("k", "must be >= 1");
  if (neighbors == 0) throw ValidationError("neighbors", "must be >= 1");
  const std::size_t p = store.feature_set.ids.size();
  if (meta_features.size() != p) throw WidthMismatchError(p, meta_features.size(), "meta-feature vector");

  // One meta-feature vector per base dataset, in first-appearance order.
  std::vector<std::string> names;
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> first_row;
  std::vector<PipelineConfig> grid;
  for (std::size_t r = 0; r < store.rows(); ++r) {
    if (index.try_emplace(store.dataset_names[r], names.size()).second) {
      names.push_back(store.dataset_names[r]);
      first_row.push_back(r);
    }
    if (std::find(grid.begin(), grid.end(), store.configs[r]) == grid.end()) grid.push_back(store.configs[r]);
  }
  Matrix raw(names.size(), p);
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto src = store.x.row(first_row[i]);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(p), raw.row(i).begin());
  }
  std::vector<double> query(meta_features.begin(), meta_features.end());
  for (std::size_t j = 0; j < p; ++j) {
    const auto col = raw.column(j);
    const double mu = stats::mean(col), sd = stats::sd(col);
    const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mu)));
    for (std::size_t i = 0; i < names.size(); ++i) raw(i, j) = constant ? 0.0 : (raw(i, j) - mu) / sd;
    query[j] = constant ? 0.0 : (query[j] - mu) / sd;
  }
  std::vector<std::size_t> order(names.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> dist(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) dist[i] = squared_distance(raw.row(i), query);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  order.resize(std::min(neighbors, order.size()));

  struct Candidate {
    std::size_t grid_index, neighbor_rank;
    double y;
  };
  std::vector<Candidate> cands;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const std::string& name = names[order[rank]];
    for (std::size_t r = 0; r < store.rows(); ++r) {
      if (store.dataset_names[r] != name) continue;
      const auto g = static_cast<std::size_t>(
          std::find(grid.begin(), grid.end(), store.configs[r]) - grid.begin());
      cands.push_back({g, rank, store.y[r]});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.y != b.y) return a.y > b.y;
    if (a.neighbor_rank != b.neighbor_rank) return a.neighbor_rank < b.neighbor_rank;
    return a.grid_index < b.grid_index;
  });
  std::vector<Recommendation> out;
  std::vector<bool> taken(grid.size(), false);
  for (const auto& c : cands) {
    if (taken[c.grid_index]) continue;
    taken[c.grid_index] = true;
    out.push_back({grid[c.grid_index], c.y});
    if (out.size() == k) break;
  }
  return out;
}

namespace {

void fill_metrics(std::span<const double> y, std::span<const double> yhat, double& rmse, double& mae,
                  double& r2) {
  const double n = static_cast<double>(y.size());
  double sse = 0.0, sae = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    sse += e * e;
    sae += std::abs(e);
    mean += y[i];
  }
  mean /= n;
  double sst = 0.0;
  for (double v : y) sst += (v - mean) * (v - mean);
  rmse = std::sqrt(sse / n);
  mae = sae / n;
  r2 = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);
}

}  // namespace

RegressionMetrics regression_metrics(std::span<const double> y, std::span<const double> predicted) {
  if (y.size() != predicted.size()) throw WidthMismatchError(y.size(), predicted.size(), "predictions");
  if (y.empty()) throw ValidationError("y", "no values to score");
  RegressionMetrics m;
  fill_metrics(y, predicted, m.rmse, m.mae, m.r2);
  return m;
}

CvResult cross_validate(const MetaDataset& md, std::size_t folds, const ForestConfig& config,
                        std::uint64_t seed, unsigned workers) {
  if (md.rows() < folds) throw ValidationError("folds", "fewer rows than folds");
  std::vector<std::string> groups;
  std::map<std::string, std::size_t> group_of;
  std::vector<std::size_t> row_group(md.rows());
  for (std::size_t r = 0; r < md.rows(); ++r) {
    auto [it, inserted] = group_of.try_emplace(md.dataset_names[r], groups.size());
    if (inserted) groups.push_back(md.dataset_names[r]);
    row_group[r] = it->second;
  }
  if (groups.size() < folds)
    throw ValidationError("folds", "fewer base datasets than folds (folds are grouped by dataset)");

  CvResult result;
  result.group_plan = make_folds(groups.size(), folds, seed);
  result.predictions.assign(md.rows(), 0.0);
  const std::size_t width = md.x.cols();

  parallel_for(folds, workers, [&](std::size_t f) {
    std::vector<double> train, train_y;
    std::vector<std::size_t> test;
    for (std::size_t r = 0; r < md.rows(); ++r) {
      if (static_cast<std::size_t>(result.group_plan.fold_assignments[row_group[r]]) == f) {
        test.push_back(r);
      } else {
        auto row = md.x.row(r);
        train.insert(train.end(), row.begin(), row.end());
        train_y.push_back(md.y[r]);
      }
    }
    const Matrix xt(train_y.size(), width, std::move(train));
    const Forest forest = fit_forest(xt, train_y, config, derive_seed(seed, "cv.forest", f), 1);
    for (std::size_t r : test) result.predictions[r] = forest.predict(md.x.row(r));
  });

  fill_metrics(md.y, result.predictions, result.metrics.rmse, result.metrics.mae, result.metrics.r2);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<double> y, yhat;
    for (std::size_t r = 0; r < md.rows(); ++r) {
      if (static_cast<std::size_t>(result.group_plan.fold_assignments[row_group[r]]) != f) continue;
      y.push_back(md.y[r]);
      yhat.push_back(result.predictions[r]);
    }
    double rmse, mae, r2;
    fill_metrics(y, yhat, rmse, mae, r2);
    result.metrics.fold_rmse.push_back(rmse);
    result.metrics.fold_mae.push_back(mae);
    result.metrics.fold_r2.push_back(r2);
  }
  return result;
}

}  // namespace metaclust
