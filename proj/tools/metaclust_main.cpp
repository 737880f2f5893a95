// metaclust command-line entry point.
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "metaclust/cli.hpp"
#include "metaclust/error.hpp"
#include "metaclust/io_util.hpp"

using namespace metaclust;

namespace {

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> workers;
  std::optional<std::size_t> corpus_size;
  std::optional<std::string> csv_dir;
  std::optional<std::size_t> folds;
  std::optional<int> trees;
  std::optional<std::string> feature_set;
  std::optional<std::size_t> core_k;
  std::optional<double> dpg_min_lrc;
  std::optional<int> dpg_bins;
  std::optional<std::size_t> dpg_sample;
  std::optional<std::size_t> top_n;
};

// Precedence: flags > config file > METACLUST_SEED (seed only) > defaults.
RunConfig resolve(const GlobalFlags& f) {
  RunConfig c;
  if (const char* env = std::getenv("METACLUST_SEED")) {
    try {
      c.master_seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ValidationError("METACLUST_SEED", "not an unsigned integer");
    }
  }
  if (!f.config_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(f.config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(1, "-", f.config_path + ": " + e.what());
    }
    c = config_from_json(j, c);
  }
  if (f.seed) c.master_seed = *f.seed;
  if (f.out_dir) c.out_dir = *f.out_dir;
  if (f.workers) c.workers = *f.workers;
  if (f.corpus_size) c.corpus.count = *f.corpus_size;
  if (f.csv_dir) c.corpus.csv_dir = *f.csv_dir;
  if (f.folds) c.folds = *f.folds;
  if (f.trees) c.forest.n_trees = *f.trees;
  if (f.feature_set) c.feature_set = feature_set_from_json(*f.feature_set);
  if (f.core_k) c.core_k = *f.core_k;
  if (f.dpg_min_lrc) c.dpg_min_lrc = *f.dpg_min_lrc;
  if (f.dpg_bins) c.dpg_bins = *f.dpg_bins;
  if (f.dpg_sample) c.dpg_sample = *f.dpg_sample;
  if (f.top_n) c.top_n = *f.top_n;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learning recommender for clustering pipelines, with DPG and SHAP explanations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  GlobalFlags g;
  app.add_option("-c,--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("-s,--seed", g.seed, "master seed (falls back to METACLUST_SEED)");
  app.add_option("-o,--out", g.out_dir, "run directory");
  app.add_option("-w,--workers", g.workers, "worker threads");
  app.add_option("--corpus-size", g.corpus_size, "number of synthetic datasets");
  app.add_option("--csv-dir", g.csv_dir, "import labeled CSV datasets instead of generating");
  app.add_option("--folds", g.folds, "cross-validation folds");
  app.add_option("--trees", g.trees, "trees per forest");
  app.add_option("--feature-set", g.feature_set, "full or a family name");
  app.add_option("--core-k", g.core_k, "size of the core feature set");
  app.add_option("--dpg-min-lrc", g.dpg_min_lrc, "explicit LRC threshold for the dpg set");
  app.add_option("--dpg-bins", g.dpg_bins, "threshold bins per feature in the DPG");
  app.add_option("--dpg-sample", g.dpg_sample, "meta-dataset rows traced by the DPG (0 = all)");
  app.add_option("--top", g.top_n, "rows in the ranked predicate tables");

  auto* gen = app.add_subcommand("gen", "generate or import the dataset corpus");
  auto* extract = app.add_subcommand("extract", "compute meta-features for the corpus");
  auto* build = app.add_subcommand("build-meta", "score the pipeline grid and write the meta-dataset");
  auto* train = app.add_subcommand("train", "fit the random-forest meta-model");

  RecommendArgs rec;
  auto* recommend = app.add_subcommand("recommend", "rank pipelines for a dataset");
  recommend->add_option("-d,--dataset", rec.dataset, "CSV path or corpus dataset name")->required();
  recommend->add_option("-m,--mode", rec.mode, "predict or similar")->check(CLI::IsMember({"predict", "similar"}));
  recommend->add_option("-k", rec.k, "number of recommendations");
  recommend->add_option("--neighbors", rec.neighbors, "neighbors used by similar mode");

  auto* global = app.add_subcommand("explain-global", "decision predicate graph and LRC tables");

  ExplainLocalArgs local;
  auto* explain_local = app.add_subcommand("explain-local", "SHAP attribution for one (dataset, pipeline)");
  explain_local->add_option("-d,--dataset", local.dataset, "CSV path or corpus dataset name")->required();
  explain_local->add_option("-p,--pipeline", local.pipeline, "grid label, or 'top'");
  explain_local->add_flag("--cohort", local.cohort, "also explain every meta-dataset row");

  auto* ablate = app.add_subcommand("ablate", "full / dpg / core feature-set comparison");
  auto* report = app.add_subcommand("report", "consolidated summary of a run directory");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const RunConfig c = resolve(g);
    nlohmann::json out;
    if (gen->parsed()) out = cmd_gen(c);
    else if (extract->parsed()) out = cmd_extract(c);
    else if (build->parsed()) out = cmd_build_meta(c);
    else if (train->parsed()) out = cmd_train(c);
    else if (recommend->parsed()) out = cmd_recommend(c, rec);
    else if (global->parsed()) out = cmd_explain_global(c);
    else if (explain_local->parsed()) out = cmd_explain_local(c, local);
    else if (ablate->parsed()) out = cmd_ablate(c);
    else if (report->parsed()) out = cmd_report(c);
    std::cout << out.dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << error_json(e).dump() << '\n';
    return dynamic_cast<const Error*>(&e) ? 2 : 1;
  }
}
