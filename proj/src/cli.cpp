#include "metaclust/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "metaclust/ablation.hpp"
#include "metaclust/dpg.hpp"
#include "metaclust/error.hpp"
#include "metaclust/io_util.hpp"
#include "metaclust/metamodel.hpp"
#include "metaclust/parallel.hpp"
#include "metaclust/seed.hpp"
#include "metaclust/shap.hpp"

namespace fs = std::filesystem;

namespace metaclust {

std::vector<PipelineConfig> default_grid() {
  return {PipelineConfig::make_kmeans(2),
          PipelineConfig::make_kmeans(3),
          PipelineConfig::make_kmeans(4),
          PipelineConfig::make_kmeans(6),
          PipelineConfig::make_dbscan(0.15, 5),
          PipelineConfig::make_dbscan(0.3, 5),
          PipelineConfig::make_dbscan(0.5, 10),
          PipelineConfig::make_dbscan(0.8, 10),
          PipelineConfig::make_agglomerative(2, Linkage::Single),
          PipelineConfig::make_agglomerative(2, Linkage::Average),
          PipelineConfig::make_agglomerative(4, Linkage::Average),
          PipelineConfig::make_agglomerative(3, Linkage::Complete)};
}

std::uint64_t RunConfig::seed() const {
  if (!master_seed) throw ValidationError("master_seed", "no seed given (flag, config key or METACLUST_SEED)");
  return *master_seed;
}

void RunConfig::validate() const {
  seed();
  if (!corpus.csv_dir) {
    if (corpus.count == 0) throw ValidationError("corpus.count", "must be >= 1");
    if (corpus.kinds.empty()) throw ValidationError("corpus.kinds", "no generator kinds");
    if (corpus.n_min < 10 || corpus.n_min > corpus.n_max) throw ValidationError("corpus.n_min", "need 10 <= n_min <= n_max");
    if (corpus.d_min < 2 || corpus.d_min > corpus.d_max) throw ValidationError("corpus.d_min", "need 2 <= d_min <= d_max");
  } else if (!fs::is_directory(*corpus.csv_dir)) {
    throw ValidationError("corpus.csv_dir", "not a directory: " + corpus.csv_dir->string());
  }
  if (grid.empty()) throw ValidationError("grid", "pipeline grid is empty");
  for (const auto& g : grid) g.validate();
  feature_set.validate();
  if (feature_set.ids.empty()) throw ValidationError("feature_set", "no descriptors selected");
  forest.validate();
  if (folds < 2) throw ValidationError("folds", "must be >= 2");
  if (workers < 1) throw ValidationError("workers", "must be >= 1");
  if (dpg_bins < 1) throw ValidationError("dpg_bins", "must be >= 1");
  if (top_n < 1) throw ValidationError("top_n", "must be >= 1");
  if (core_k < 1) throw ValidationError("core_k", "must be >= 1");
}

FeatureSet feature_set_from_json(const nlohmann::json& j) {
  FeatureSet s;
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "full") return FeatureSet::full();
    for (Family f : {Family::Simple, Family::Statistical, Family::InfoTheoretic, Family::Landmarker,
                     Family::ModelBased, Family::Complexity}) {
      if (to_string(f) == name) return FeatureSet::of_family(f);
    }
    throw ValidationError("feature_set", "unknown set name '" + name + "'");
  }
  if (j.is_array()) {
    s = {"custom", j.get<std::vector<std::string>>()};
  } else if (j.is_object()) {
    s = {j.value("name", std::string("custom")), j.at("ids").get<std::vector<std::string>>()};
  } else {
    throw ValidationError("feature_set", "expected a name, an id list or an object");
  }
  s.validate();
  return s;
}

RunConfig config_from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw ValidationError("config", "top level must be an object");
  static const std::vector<std::string> known = {"master_seed", "corpus",   "grid",        "feature_set",
                                                 "forest",      "folds",    "out_dir",     "workers",
                                                 "dpg_bins",    "dpg_sample", "top_n",     "core_k",
                                                 "dpg_min_lrc"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ValidationError(key, "unknown config key");
  }
  try {
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("corpus")) {
      const auto& cj = j.at("corpus");
      c.corpus.count = cj.value("count", c.corpus.count);
      c.corpus.n_min = cj.value("n_min", c.corpus.n_min);
      c.corpus.n_max = cj.value("n_max", c.corpus.n_max);
      c.corpus.d_min = cj.value("d_min", c.corpus.d_min);
      c.corpus.d_max = cj.value("d_max", c.corpus.d_max);
      c.corpus.label_column = cj.value("label_column", c.corpus.label_column);
      if (cj.contains("csv_dir")) c.corpus.csv_dir = cj.at("csv_dir").get<std::string>();
      if (cj.contains("kinds")) {
        c.corpus.kinds.clear();
        for (const auto& k : cj.at("kinds")) c.corpus.kinds.push_back(generator_kind_from_string(k.get<std::string>()));
      }
    }
    if (j.contains("grid")) {
      c.grid.clear();
      for (const auto& g : j.at("grid")) c.grid.push_back(pipeline_from_json(g));
    }
    if (j.contains("feature_set")) c.feature_set = feature_set_from_json(j.at("feature_set"));
    if (j.contains("forest")) c.forest = forest_config_from_json(j.at("forest"));
    c.folds = j.value("folds", c.folds);
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    c.workers = j.value("workers", c.workers);
    c.dpg_bins = j.value("dpg_bins", c.dpg_bins);
    c.dpg_sample = j.value("dpg_sample", c.dpg_sample);
    c.top_n = j.value("top_n", c.top_n);
    c.core_k = j.value("core_k", c.core_k);
    if (j.contains("dpg_min_lrc")) c.dpg_min_lrc = j.at("dpg_min_lrc").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config", e.what());
  }
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json kinds = nlohmann::json::array();
  for (auto k : c.corpus.kinds) kinds.push_back(to_string(k));
  nlohmann::json corpus = {{"count", c.corpus.count}, {"kinds", kinds},         {"n_min", c.corpus.n_min},
                           {"n_max", c.corpus.n_max}, {"d_min", c.corpus.d_min}, {"d_max", c.corpus.d_max},
                           {"label_column", c.corpus.label_column}};
  if (c.corpus.csv_dir) corpus["csv_dir"] = c.corpus.csv_dir->string();
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& g : c.grid) grid.push_back(to_json(g));
  nlohmann::json j = {{"corpus", corpus},
                      {"grid", grid},
                      {"feature_set", {{"name", c.feature_set.name}, {"ids", c.feature_set.ids}}},
                      {"forest", to_json(c.forest)},
                      {"folds", c.folds},
                      {"dpg_bins", c.dpg_bins},
                      {"dpg_sample", c.dpg_sample},
                      {"top_n", c.top_n},
                      {"core_k", c.core_k}};
  if (c.master_seed) j["master_seed"] = *c.master_seed;
  if (c.dpg_min_lrc) j["dpg_min_lrc"] = *c.dpg_min_lrc;
  return j;
}

std::vector<std::pair<std::string, GeneratorSpec>> plan_corpus(const CorpusConfig& c, std::uint64_t master_seed) {
  std::vector<std::pair<std::string, GeneratorSpec>> out;
  for (std::size_t i = 0; i < c.count; ++i) {
    Rng rng(derive_seed(master_seed, "corpus", i));
    GeneratorSpec s;
    s.kind = c.kinds[i % c.kinds.size()];
    s.n = std::uniform_int_distribution<std::size_t>(c.n_min, c.n_max)(rng);
    switch (s.kind) {
      case GeneratorKind::Blobs:
      case GeneratorKind::AnisotropicGaussian:
        s.d = std::uniform_int_distribution<std::size_t>(c.d_min, c.d_max)(rng);
        s.k = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
        s.noise = std::uniform_real_distribution<double>(0.5, 2.5)(rng);
        break;
      case GeneratorKind::Moons:
      case GeneratorKind::Circles: {
        const bool planar = std::bernoulli_distribution(0.5)(rng);
        s.d = planar ? 2 : std::uniform_int_distribution<std::size_t>(std::max<std::size_t>(3, c.d_min),
                                                                      std::max<std::size_t>(3, c.d_max))(rng);
        s.k = 2;
        s.noise = s.kind == GeneratorKind::Moons ? std::uniform_real_distribution<double>(0.03, 0.2)(rng)
                                                 : std::uniform_real_distribution<double>(0.02, 0.12)(rng);
        break;
      }
    }
    s.k = std::min(s.k, s.n);
    s.seed = derive_seed(master_seed, "corpus.generator", i);
    std::string index = std::to_string(i);
    index.insert(0, index.size() < 4 ? 4 - index.size() : 0, '0');
    out.emplace_back(to_string(s.kind) + "_" + index, s);
  }
  return out;
}

namespace {

nlohmann::json provenance(std::uint64_t seed) {
  return {{"tool", kToolName}, {"version", kToolVersion}, {"master_seed", seed}};
}

fs::path at(const RunConfig& c, const char* name) { return c.out_dir / name; }

fs::path require(const RunConfig& c, const char* name) {
  fs::path p = at(c, name);
  if (!fs::exists(p)) throw StageDependencyError(p.string());
  return p;
}

void write_json(const fs::path& p, const nlohmann::json& j) { write_text_file(p, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_text_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, "-", p.string() + ": " + e.what());
  }
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(const fs::path& p) {
  std::istringstream in(read_text_file(p));
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fields = split(line, ',');
    if (t.header.empty())
      t.header = std::move(fields);
    else
      t.rows.push_back(std::move(fields));
  }
  return t;
}

Forest load_forest(const RunConfig& c) { return forest_from_json(read_json(require(c, artifact::kForest))); }

MetaDataset load_meta(const RunConfig& c) {
  const fs::path csv = require(c, artifact::kMetaDataset);
  return read_meta_dataset(csv, require(c, artifact::kMetaProvenance));
}

/// Meta-feature ids the forest was trained on, in column order.
FeatureSet forest_feature_set(const Forest& forest) {
  FeatureSet s{"forest", {}};
  const auto& pipe = pipeline_columns();
  if (forest.columns.size() < pipe.size())
    throw WidthMismatchError(pipe.size(), forest.columns.size(), "forest columns");
  const std::size_t p = forest.columns.size() - pipe.size();
  for (std::size_t j = 0; j < p; ++j) {
    const auto& col = forest.columns[j];
    if (col.rfind("mf_", 0) != 0) throw ValidationError("forest", "unexpected column '" + col + "'");
    s.ids.push_back(col.substr(3));
  }
  for (std::size_t j = 0; j < pipe.size(); ++j) {
    if (forest.columns[p + j] != pipe[j]) throw ValidationError("forest", "pipeline columns do not match");
  }
  s.validate();
  return s;
}

const PipelineConfig& find_in_grid(const std::vector<PipelineConfig>& grid, const std::string& label) {
  for (const auto& g : grid)
    if (g.label() == label) return g;
  throw ValidationError("pipeline", "'" + label + "' is not in the pipeline grid");
}

}  // namespace

std::vector<Dataset> load_corpus(const fs::path& run_dir) {
  const fs::path manifest = run_dir / artifact::kManifest;
  if (!fs::exists(manifest)) throw StageDependencyError(manifest.string());
  const auto j = read_json(manifest);
  std::vector<Dataset> out;
  for (const auto& entry : j.at("datasets")) {
    const fs::path file = run_dir / entry.at("file").get<std::string>();
    if (!fs::exists(file)) throw StageDependencyError(file.string());
    Dataset ds = load_csv(file, std::string("label"));
    ds.name = entry.at("name").get<std::string>();
    out.push_back(std::move(ds));
  }
  return out;
}

Dataset resolve_dataset(const RunConfig& c, const std::string& ref) {
  if (ref.empty()) throw ValidationError("dataset", "no dataset given");
  fs::path p = ref;
  if (!fs::is_regular_file(p)) {
    p = c.out_dir / "datasets" / (ref + ".csv");
    if (!fs::is_regular_file(p)) throw ValidationError("dataset", "'" + ref + "' is neither a file nor a corpus dataset");
  }
  const Table t = read_table(p);
  const bool labeled = std::find(t.header.begin(), t.header.end(), "label") != t.header.end();
  Dataset ds = load_csv(p, labeled ? std::optional<std::string>("label") : std::nullopt);
  return ds;
}

std::string metafeatures_csv(const std::vector<MetaFeatureVector>& batch, std::uint64_t master_seed, bool timings) {
  std::ostringstream out;
  out << provenance_line(master_seed) << "\ndataset";
  if (!batch.empty())
    for (const auto& id : batch.front().ids) out << ',' << id;
  out << '\n';
  for (const auto& v : batch) {
    out << v.dataset_name;
    for (double x : timings ? v.timings : v.values) out << ',' << format_double(x);
    out << '\n';
  }
  return out.str();
}

std::vector<MetaFeatureVector> read_metafeatures_csv(const fs::path& path) {
  if (!fs::exists(path)) throw StageDependencyError(path.string());
  const Table t = read_table(path);
  if (t.header.empty() || t.header.front() != "dataset") throw ParseError(2, "dataset", "missing header");
  const std::vector<std::string> ids(t.header.begin() + 1, t.header.end());
  FeatureSet{"file", ids}.validate();
  std::vector<MetaFeatureVector> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size()) throw ParseError(r + 3, "-", "ragged row");
    MetaFeatureVector v;
    v.dataset_name = row.front();
    v.ids = ids;
    for (std::size_t c = 1; c < row.size(); ++c) {
      double x = 0.0;
      if (!parse_double(row[c], x)) throw ParseError(r + 3, t.header[c], "not a finite number");
      v.values.push_back(x);
    }
    v.timings.assign(ids.size(), 0.0);
    v.imputed.assign(ids.size(), false);
    out.push_back(std::move(v));
  }
  return out;
}

nlohmann::json cmd_gen(const RunConfig& c) {
  c.validate();
  const std::uint64_t seed = c.seed();
  nlohmann::json entries = nlohmann::json::array();
  nlohmann::json descriptor;
  if (c.corpus.csv_dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(*c.corpus.csv_dir))
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValidationError("corpus.csv_dir", "no .csv files found");
    for (const auto& f : files) {
      Dataset ds = load_csv(f, c.corpus.label_column);
      const std::string rel = "datasets/" + ds.name + ".csv";
      save_csv(ds, c.out_dir / rel, provenance_line(seed));
      entries.push_back({{"name", ds.name}, {"file", rel}, {"source", f.filename().string()}, {"n", ds.n()}, {"d", ds.d()}});
    }
    descriptor = {{"source", "csv_dir"}, {"count", files.size()}};
  } else {
    const auto plan = plan_corpus(c.corpus, seed);
    std::vector<Dataset> made(plan.size());
    parallel_for(plan.size(), c.workers, [&](std::size_t i) { made[i] = generate_synthetic(plan[i].second, plan[i].first); });
    for (std::size_t i = 0; i < plan.size(); ++i) {
      const auto& [name, s] = plan[i];
      const std::string rel = "datasets/" + name + ".csv";
      save_csv(made[i], c.out_dir / rel, provenance_line(seed));
      entries.push_back({{"name", name}, {"file", rel}, {"kind", to_string(s.kind)}, {"n", s.n}, {"d", s.d},
                         {"k", s.k}, {"noise", s.noise}, {"seed", s.seed}});
    }
    nlohmann::json kinds = nlohmann::json::array();
    for (auto k : c.corpus.kinds) kinds.push_back(to_string(k));
    descriptor = {{"source", "synthetic"}, {"count", c.corpus.count}, {"kinds", kinds},
                  {"n_range", {c.corpus.n_min, c.corpus.n_max}}, {"d_range", {c.corpus.d_min, c.corpus.d_max}}};
  }
  write_json(at(c, artifact::kManifest),
             {{"provenance", provenance(seed)}, {"corpus", descriptor}, {"datasets", entries}});
  return {{"command", "gen"}, {"datasets", entries.size()}};
}

nlohmann::json cmd_extract(const RunConfig& c) {
  c.validate();
  const auto corpus = load_corpus(c.out_dir);
  const auto start = std::chrono::steady_clock::now();
  const auto batch = extract_batch(corpus, c.feature_set, c.seed(), c.workers);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text_file(at(c, artifact::kMetaFeatures), metafeatures_csv(batch, c.seed(), false));
  write_text_file(at(c, artifact::kTimings), metafeatures_csv(batch, c.seed(), true));
  std::size_t imputed = 0;
  for (const auto& v : batch) imputed += static_cast<std::size_t>(std::count(v.imputed.begin(), v.imputed.end(), true));
  return {{"command", "extract"}, {"datasets", batch.size()}, {"features", c.feature_set.ids.size()},
          {"imputed_values", imputed}, {"seconds", seconds}};
}

nlohmann::json cmd_build_meta(const RunConfig& c) {
  c.validate();
  const auto corpus = load_corpus(c.out_dir);
  auto batch = read_metafeatures_csv(require(c, artifact::kMetaFeatures));
  if (batch.size() != corpus.size()) throw WidthMismatchError(corpus.size(), batch.size(), "meta-feature rows");
  const PipelineScores scores = evaluate_pipelines(corpus, c.grid, c.seed(), c.workers);
  MetaDataset md = assemble_meta_dataset(batch, scores);
  md.feature_set.name = md.feature_set.ids == c.feature_set.ids ? c.feature_set.name : "custom";
  write_text_file(at(c, artifact::kMetaDataset), meta_dataset_to_csv(md, c.seed()));
  write_json(at(c, artifact::kMetaProvenance), meta_dataset_provenance(md, c.seed()));
  const auto undefined = std::count(md.undefined_partition.begin(), md.undefined_partition.end(), true);
  return {{"command", "build-meta"}, {"rows", md.rows()}, {"columns", md.x.cols() + 1},
          {"undefined_partitions", undefined},
          {"mean_y", std::accumulate(md.y.begin(), md.y.end(), 0.0) / static_cast<double>(md.rows())}};
}

nlohmann::json cmd_train(const RunConfig& c) {
  c.validate();
  const MetaDataset md = load_meta(c);
  const Forest forest = fit_forest(md, c.forest, derive_seed(c.seed(), "train"), c.workers);
  nlohmann::json j = to_json(forest);
  j["provenance"] = provenance(c.seed());
  write_text_file(at(c, artifact::kForest), j.dump() + "\n");
  std::vector<double> fitted(md.rows());
  for (std::size_t r = 0; r < md.rows(); ++r) fitted[r] = forest.predict(md.x.row(r));
  const auto m = regression_metrics(md.y, fitted);
  return {{"command", "train"}, {"trees", forest.trees.size()}, {"rows", md.rows()},
          {"train_rmse", m.rmse}, {"train_r2", m.r2}};
}

nlohmann::json cmd_recommend(const RunConfig& c, const RecommendArgs& args) {
  c.validate();
  if (args.k == 0) throw ValidationError("k", "must be >= 1");
  const Dataset ds = resolve_dataset(c, args.dataset);
  std::vector<Recommendation> recs;
  MetaFeatureVector mf;
  if (args.mode == "predict") {
    const Forest forest = load_forest(c);
    mf = extract(ds, forest_feature_set(forest), c.seed());
    recs = recommend_predict(forest, mf.values, c.grid, args.k);
  } else if (args.mode == "similar") {
    const MetaDataset md = load_meta(c);
    mf = extract(ds, md.feature_set, c.seed());
    recs = recommend_similar(md, mf.values, args.k, args.neighbors);
  } else {
    throw ValidationError("mode", "expected 'predict' or 'similar'");
  }
  nlohmann::json features = nlohmann::json::object();
  for (std::size_t j = 0; j < mf.ids.size(); ++j) features[mf.ids[j]] = mf.values[j];
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    list.push_back({{"rank", i + 1}, {"label", recs[i].config.label()}, {"pipeline", to_json(recs[i].config)},
                    {"score", recs[i].score}});
  }
  const nlohmann::json out = {{"provenance", provenance(c.seed())},
                              {"mode", args.mode},
                              {"dataset", ds.name},
                              {"k", args.k},
                              {"score", args.mode == "predict" ? "predicted_ari" : "historical_ari"},
                              {"meta_features", features},
                              {"recommendations", list}};
  write_json(at(c, artifact::kRecommendation), out);
  return out;
}

nlohmann::json cmd_explain_global(const RunConfig& c) {
  c.validate();
  const Forest forest = load_forest(c);
  const MetaDataset md = load_meta(c);
  if (md.x.cols() != forest.n_features) throw WidthMismatchError(forest.n_features, md.x.cols(), "meta-dataset vs forest");
  std::vector<std::size_t> rows(md.rows());
  std::iota(rows.begin(), rows.end(), 0);
  if (c.dpg_sample > 0 && c.dpg_sample < rows.size()) {
    Rng rng(derive_seed(c.seed(), "dpg.sample"));
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(c.dpg_sample);
    std::sort(rows.begin(), rows.end());
  }
  Matrix sample(rows.size(), md.x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = md.x.row(rows[i]);
    std::copy(src.begin(), src.end(), sample.row(i).begin());
  }
  const DPGraph g = build_dpg(forest, sample, c.dpg_bins, c.workers);
  const auto table = lrc(g);
  const auto ranked = rank_predicates(g, table, c.top_n);
  const auto flrc = feature_lrc(g, table);
  write_text_file(at(c, artifact::kDpgNodes), dpg_nodes_csv(g, table, c.seed()));
  write_text_file(at(c, artifact::kDpgEdges), dpg_edges_csv(g, c.seed()));
  write_text_file(at(c, artifact::kTopPredicates), ranked_predicates_csv(g, ranked.top, c.seed()));
  write_text_file(at(c, artifact::kBottomPredicates), ranked_predicates_csv(g, ranked.bottom, c.seed()));
  write_text_file(at(c, artifact::kFeatureLrc), feature_lrc_csv(g, flrc, c.seed()));
  nlohmann::json top = nlohmann::json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(5, ranked.top.size()); ++i)
    top.push_back(g.nodes[static_cast<std::size_t>(ranked.top[i].node)].label);
  return {{"command", "explain-global"}, {"nodes", g.nodes.size()}, {"edges", g.edges.size()},
          {"traversals", g.traversals.size()}, {"top_predicates", top}};
}

nlohmann::json cmd_explain_local(const RunConfig& c, const ExplainLocalArgs& args) {
  c.validate();
  const Forest forest = load_forest(c);
  const FeatureSet fset = forest_feature_set(forest);
  const Dataset ds = resolve_dataset(c, args.dataset);
  const MetaFeatureVector mf = extract(ds, fset, c.seed());
  const PipelineConfig config = args.pipeline == "top" ? recommend_predict(forest, mf.values, c.grid, 1).front().config
                                                       : find_in_grid(c.grid, args.pipeline);
  std::vector<double> x = mf.values;
  const auto enc = encode_pipeline(config);
  x.insert(x.end(), enc.begin(), enc.end());
  const ShapExplanation e = forest_shap(forest, x, ds.name + " | " + config.label());

  std::vector<std::size_t> order(e.phi.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(e.phi[a]) > std::abs(e.phi[b]); });
  nlohmann::json ranked = nlohmann::json::array(), ranked_mf = nlohmann::json::array();
  for (std::size_t j : order) {
    const nlohmann::json item = {{"feature", display_name(forest.columns[j])},
                                 {"family", column_family(forest.columns[j])},
                                 {"value", x[j]},
                                 {"phi", e.phi[j]}};
    ranked.push_back(item);
    if (j < fset.ids.size()) ranked_mf.push_back(item);
  }
  const double sum = std::accumulate(e.phi.begin(), e.phi.end(), e.phi0);
  nlohmann::json out = to_json(e);
  out["provenance"] = provenance(c.seed());
  out["dataset"] = ds.name;
  out["pipeline"] = to_json(config);
  out["local_accuracy_error"] = std::abs(sum - e.fx);
  out["ranked"] = ranked;
  out["ranked_meta_features"] = ranked_mf;
  write_json(at(c, artifact::kExplanation), out);

  if (args.cohort) {
    const MetaDataset md = load_meta(c);
    if (md.x.cols() != forest.n_features) throw WidthMismatchError(forest.n_features, md.x.cols(), "meta-dataset vs forest");
    std::vector<ShapExplanation> all(md.rows());
    parallel_for(md.rows(), c.workers, [&](std::size_t r) {
      all[r] = forest_shap(forest, md.x.row(r), md.dataset_names[r] + " | " + md.configs[r].label());
    });
    const CohortSummary summary = cohort_summary(std::move(all));
    write_text_file(at(c, artifact::kCohortCsv), cohort_csv(summary, c.seed()));
    nlohmann::json rank = nlohmann::json::array();
    for (const auto& f : summary.ranking) {
      rank.push_back({{"feature", display_name(f.name)}, {"family", column_family(f.name)},
                      {"mean_abs_phi", f.mean_abs_phi}, {"mean_phi", f.mean_phi}});
    }
    write_json(at(c, artifact::kCohortJson),
               {{"provenance", provenance(c.seed())}, {"instances", summary.explanations.size()}, {"ranking", rank}});
  }
  return out;
}

nlohmann::json cmd_ablate(const RunConfig& c) {
  c.validate();
  const fs::path lrc_path = require(c, artifact::kFeatureLrc);
  const auto corpus = load_corpus(c.out_dir);
  const Table t = read_table(lrc_path);
  if (t.header.size() != 3 || t.header[0] != "feature" || t.header[2] != "lrc")
    throw ParseError(2, "-", "unexpected feature LRC header");
  std::map<std::string, double> by_id;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    double v = 0.0;
    if (t.rows[r].size() != 3 || !parse_double(t.rows[r][2], v)) throw ParseError(r + 3, "lrc", "bad row");
    by_id[t.rows[r][0]] = v;
  }
  std::vector<double> lrc_values;
  for (const auto& id : c.feature_set.ids) {
    auto it = by_id.find(id);
    lrc_values.push_back(it == by_id.end() ? 0.0 : it->second);
  }
  const SelectedSets sets = select_sets(lrc_values, c.feature_set, c.core_k, c.dpg_min_lrc);
  const auto manifest = read_json(require(c, artifact::kManifest));
  const AblationReport report = run_ablation(corpus, c.grid, {sets.full, sets.dpg, sets.core}, c.folds, c.forest,
                                             c.seed(), c.workers, manifest.at("corpus"));
  write_json(at(c, artifact::kAblationJson), to_json(report));
  write_text_file(at(c, artifact::kAblationCsv), ablation_long_csv(report));
  write_text_file(at(c, artifact::kAblationTable), ablation_table_csv(report));
  auto set_json = [&](const FeatureSet& s) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& id : s.ids) {
      const auto pos = static_cast<std::size_t>(std::find(c.feature_set.ids.begin(), c.feature_set.ids.end(), id) -
                                                c.feature_set.ids.begin());
      items.push_back({{"id", id}, {"family", to_string(find_descriptor(id).family)}, {"lrc", lrc_values[pos]}});
    }
    return nlohmann::json{{"name", s.name}, {"size", s.ids.size()}, {"features", items}};
  };
  write_json(at(c, artifact::kAblationSets),
             {{"provenance", provenance(c.seed())},
              {"dpg_threshold", sets.dpg_threshold},
              {"core_k", c.core_k},
              {"sets", {set_json(sets.full), set_json(sets.dpg), set_json(sets.core)}}});
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"set", r.set.name}, {"n_features", r.set.ids.size()}, {"rmse", r.rmse}, {"mae", r.mae},
                    {"r2", r.r2}, {"extraction_time_s", r.extraction_time_total}});
  }
  return {{"command", "ablate"}, {"sets", rows}};
}

nlohmann::json cmd_report(const RunConfig& c) {
  c.validate();
  if (!fs::is_directory(c.out_dir)) throw StageDependencyError(c.out_dir.string());
  nlohmann::json summary = {{"provenance", provenance(c.seed())}};
  nlohmann::json present = nlohmann::json::array();
  for (const char* name : {artifact::kManifest, artifact::kMetaFeatures, artifact::kTimings, artifact::kMetaDataset,
                           artifact::kMetaProvenance, artifact::kForest, artifact::kRecommendation,
                           artifact::kDpgNodes, artifact::kDpgEdges, artifact::kTopPredicates,
                           artifact::kBottomPredicates, artifact::kFeatureLrc, artifact::kExplanation,
                           artifact::kCohortCsv, artifact::kAblationJson, artifact::kAblationCsv,
                           artifact::kAblationTable, artifact::kAblationSets}) {
    if (fs::exists(at(c, name))) present.push_back(name);
  }
  if (present.empty()) throw StageDependencyError((c.out_dir / artifact::kManifest).string());
  summary["artifacts"] = present;

  if (fs::exists(at(c, artifact::kManifest)))
    summary["corpus"] = read_json(at(c, artifact::kManifest)).at("corpus");
  if (fs::exists(at(c, artifact::kRecommendation))) {
    const auto r = read_json(at(c, artifact::kRecommendation));
    summary["recommendation"] = {{"dataset", r.at("dataset")}, {"mode", r.at("mode")},
                                 {"recommendations", r.at("recommendations")}};
  }
  if (fs::exists(at(c, artifact::kTopPredicates))) {
    const Table t = read_table(at(c, artifact::kTopPredicates));
    nlohmann::json top = nlohmann::json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(10, t.rows.size()); ++i)
      top.push_back({{"predicate", t.rows[i][1]}, {"family", t.rows[i][2]}, {"lrc", t.rows[i][3]},
                     {"lrc_normalized", t.rows[i][4]}});
    summary["top_predicates"] = top;
  }
  if (fs::exists(at(c, artifact::kFeatureLrc))) {
    Table t = read_table(at(c, artifact::kFeatureLrc));
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      double v = 0.0;
      parse_double(t.rows[i][2], v);
      order.emplace_back(-v, i);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::ostringstream csv;
    csv << provenance_line(c.seed()) << "\nrank,feature,family,lrc\n";
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& row = t.rows[order[k].second];
      csv << k + 1 << ',' << row[0] << ',' << row[1] << ',' << row[2] << '\n';
    }
    write_text_file(c.out_dir / "report" / "feature_lrc_ranked.csv", csv.str());
  }
  if (fs::exists(at(c, artifact::kExplanation))) {
    const auto e = read_json(at(c, artifact::kExplanation));
    nlohmann::json top = nlohmann::json::array();
    const auto& ranked = e.at("ranked_meta_features");
    for (std::size_t i = 0; i < std::min<std::size_t>(5, ranked.size()); ++i) top.push_back(ranked[i]);
    summary["local_explanation"] = {{"instance_id", e.at("instance_id")}, {"phi0", e.at("phi0")},
                                    {"fx", e.at("fx")}, {"top_meta_features", top}};
  }
  if (fs::exists(at(c, artifact::kAblationJson))) {
    const auto a = read_json(at(c, artifact::kAblationJson));
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : a.at("sets")) {
      rows.push_back({{"set", s.at("name")}, {"n_features", s.at("n_features")}, {"rmse", s.at("rmse")},
                      {"mae", s.at("mae")}, {"r2", s.at("r2")},
                      {"extraction_time_s", s.at("extraction_time_total")}});
    }
    summary["ablation"] = rows;
    write_text_file(c.out_dir / "report" / "ablation_table.csv", read_text_file(at(c, artifact::kAblationTable)));
  }
  write_json(at(c, artifact::kSummary), summary);
  return {{"command", "report"}, {"artifacts", present.size()}};
}

nlohmann::json error_json(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  return {{"error", {{"kind", err ? err->kind() : std::string("internal")}, {"message", e.what()}}}};
}

}  // namespace metaclust
