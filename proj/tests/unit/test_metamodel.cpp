#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "metaclust/error.hpp"
#include "metaclust/io_util.hpp"
#include "metaclust/metamodel.hpp"

using namespace metaclust;
namespace fs = std::filesystem;

namespace {

Dataset two_blobs(std::uint64_t seed, std::string name) {
  GeneratorSpec s;
  s.n = 40;
  s.k = 2;
  s.noise = 0.2;
  s.seed = seed;
  s.centers = std::vector<std::vector<double>>{{0, 0}, {20, 20}};
  return generate_synthetic(s, std::move(name));
}

const std::vector<PipelineConfig> kGrid = {PipelineConfig::make_kmeans(2),
                                           PipelineConfig::make_dbscan(1e-6, 10),
                                           PipelineConfig::make_agglomerative(2, Linkage::Single)};

// A store built by hand: meta-features (a, b), one row per (dataset, config).
MetaDataset hand_store(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& datasets) {
  MetaDataset md;
  md.feature_set = {"custom", {"nr_inst", "nr_attr"}};
  const std::size_t p = 2, q = pipeline_columns().size();
  std::vector<double> data;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (std::size_t c = 0; c < kGrid.size(); ++c) {
      data.insert(data.end(), datasets[d].first.begin(), datasets[d].first.end());
      const auto enc = encode_pipeline(kGrid[c]);
      data.insert(data.end(), enc.begin(), enc.end());
      md.y.push_back(datasets[d].second[c]);
      md.dataset_names.push_back("d" + std::to_string(d));
      md.configs.push_back(kGrid[c]);
      md.undefined_partition.push_back(false);
    }
  }
  md.x = Matrix(md.y.size(), p + q, data);
  return md;
}

}  // namespace

TEST_CASE("pipeline encoding") {
  CHECK(pipeline_columns().size() == 10);
  const auto e = encode_pipeline(PipelineConfig::make_dbscan(0.3, 5));
  CHECK(e[0] == 0.0);
  CHECK(e[1] == 1.0);
  CHECK(e[3] == 0.0);  // k unused
  CHECK(std::count(e.begin(), e.end(), 0.3) == 1);
  CHECK(std::count(e.begin(), e.end(), 5.0) == 1);
}

TEST_CASE("meta-dataset shape, targets and all-noise rows") {
  const std::vector<Dataset> corpus = {two_blobs(1, "a"), two_blobs(2, "b")};
  const FeatureSet fs_ = FeatureSet::of_family(Family::Simple);
  const MetaDataset md = build_meta_dataset(corpus, kGrid, fs_, 3, 2);
  CHECK(md.rows() == 6);
  CHECK(md.x.cols() == fs_.ids.size() + pipeline_columns().size());
  CHECK(md.columns().front() == "mf_nr_inst");
  CHECK(md.columns().back() == "pipe_linkage_complete");
  CHECK(md.y[0] == 1.0);  // k-means recovers far blobs
  CHECK(md.y[2] == 1.0);  // single linkage too
  CHECK(md.y[1] == 0.0);  // dbscan with tiny eps: all noise
  CHECK(md.undefined_partition[1]);
  CHECK(!md.undefined_partition[0]);
  CHECK(md.dataset_names == std::vector<std::string>{"a", "a", "a", "b", "b", "b"});
  for (double y : md.y) {
    CHECK(y >= -0.5);
    CHECK(y <= 1.0);
  }
  md.validate();
  const MetaDataset serial = build_meta_dataset(corpus, kGrid, fs_, 3, 1);
  CHECK(serial.x == md.x);
  CHECK(serial.y == md.y);

  Dataset unlabeled = corpus[0];
  unlabeled.labels.reset();
  CHECK_THROWS_AS(build_meta_dataset({unlabeled}, kGrid, fs_, 3), ValidationError);
}

TEST_CASE("meta-dataset CSV and provenance round trip") {
  const std::vector<Dataset> corpus = {two_blobs(4, "a"), two_blobs(5, "b")};
  const MetaDataset md = build_meta_dataset(corpus, kGrid, FeatureSet::of_family(Family::Landmarker), 9);
  const fs::path dir = fs::temp_directory_path() / "metaclust_test_meta";
  fs::create_directories(dir);
  write_text_file(dir / "m.csv", meta_dataset_to_csv(md, 9));
  write_text_file(dir / "m.json", meta_dataset_provenance(md, 9).dump());
  CHECK(read_text_file(dir / "m.csv").rfind(provenance_line(9) + "\nmf_SIL,mf_DBS,mf_CH,pipe_kmeans", 0) == 0);
  const MetaDataset back = read_meta_dataset(dir / "m.csv", dir / "m.json");
  CHECK(back.x == md.x);
  CHECK(back.y == md.y);
  CHECK(back.configs == md.configs);
  CHECK(back.dataset_names == md.dataset_names);
  CHECK(back.undefined_partition == md.undefined_partition);
  CHECK(back.feature_set.ids == md.feature_set.ids);
  CHECK_THROWS_AS(read_meta_dataset(dir / "missing.csv", dir / "m.json"), Error);
}

TEST_CASE("recommend_predict ranks the grid") {
  // Stump on pipe_kmeans: k-means rows score 0.9, everything else 0.2.
  const std::size_t width = 2 + pipeline_columns().size();
  RegressionTree t;
  t.nodes = {{2, 0.5, 1, 2, 0.5, 10}, {-1, 0, -1, -1, 0.2, 5}, {-1, 0, -1, -1, 0.9, 5}};
  Forest f;
  f.trees = {t, t};
  f.n_features = width;
  const std::vector<double> mf = {100, 2};
  const auto all = recommend_predict(f, mf, kGrid, kGrid.size());
  REQUIRE(all.size() == 3);
  CHECK(all[0].config == kGrid[0]);
  CHECK(all[0].score == 0.9);
  // Ties keep grid order.
  CHECK(all[1].config == kGrid[1]);
  CHECK(all[2].config == kGrid[2]);
  CHECK(recommend_predict(f, mf, kGrid, 1).size() == 1);
  CHECK_THROWS_AS(recommend_predict(f, mf, {}, 1), ValidationError);
  CHECK_THROWS_AS(recommend_predict(f, std::vector<double>{1.0}, kGrid, 1), WidthMismatchError);
}

TEST_CASE("recommend_similar follows the nearest stored dataset") {
  const MetaDataset store = hand_store({{{0, 0}, {0.9, 0.1, 0.5}}, {{10, 10}, {0.1, 0.8, 0.3}}});
  const auto near_a = recommend_similar(store, std::vector<double>{1, 1}, 3, 1);
  CHECK(near_a[0].config == kGrid[0]);
  CHECK(near_a[0].score == 0.9);
  CHECK(near_a.size() == 3);
  const auto at_b = recommend_similar(store, std::vector<double>{10, 10}, 1, 1);
  CHECK(at_b[0].config == kGrid[1]);

  // Each config appears once even when several neighbors contribute.
  const auto both = recommend_similar(store, std::vector<double>{1, 1}, 3, 2);
  std::set<std::string> labels;
  for (const auto& r : both) labels.insert(r.config.label());
  CHECK(labels.size() == 3);
  CHECK(both[0].score == 0.9);
  CHECK(both[1].score == 0.8);

  CHECK_THROWS_AS(recommend_similar(MetaDataset{}, std::vector<double>{}, 1, 1), ValidationError);
}

TEST_CASE("recommend_similar ignores the scale of a meta-feature") {
  std::mt19937_64 rng(3);
  std::vector<std::pair<std::vector<double>, std::vector<double>>> ds;
  for (int i = 0; i < 12; ++i) {
    std::uniform_real_distribution<double> u(0, 1);
    ds.push_back({{u(rng), u(rng)}, {u(rng), u(rng), u(rng)}});
  }
  auto scaled = ds;
  for (auto& d : scaled) d.first[0] *= 1000.0;
  const MetaDataset a = hand_store(ds), b = hand_store(scaled);
  for (int q = 0; q < 20; ++q) {
    std::uniform_real_distribution<double> u(0, 1);
    const std::vector<double> x = {u(rng), u(rng)}, xs = {x[0] * 1000.0, x[1]};
    const auto ra = recommend_similar(a, x, 3, 3), rb = recommend_similar(b, xs, 3, 3);
    REQUIRE(ra.size() == rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) CHECK(ra[i].config == rb[i].config);
  }
}

TEST_CASE("regression metrics") {
  const std::vector<double> y = {0.1, 0.5, 0.9, 0.3};
  const auto perfect = regression_metrics(y, y);
  CHECK(perfect.rmse == 0.0);
  CHECK(perfect.mae == 0.0);
  CHECK(perfect.r2 == 1.0);
  const std::vector<double> mean(4, 0.45);
  CHECK(regression_metrics(y, mean).r2 == doctest::Approx(0.0).epsilon(1e-12));
  const std::vector<double> off = {0.2, 0.4, 1.0, 0.1};
  const auto m = regression_metrics(y, off);
  CHECK(m.rmse == doctest::Approx(std::sqrt((0.01 + 0.01 + 0.01 + 0.04) / 4)));
  CHECK(m.mae == doctest::Approx(0.125));
  const std::vector<double> flat(4, 0.3);
  CHECK(regression_metrics(flat, flat).r2 == 1.0);
  CHECK(regression_metrics(flat, y).r2 == 0.0);
}

TEST_CASE("grouped cross-validation cannot memorize datasets") {
  // Every base dataset gets a random target shared by all its rows and a
  // unique id column. Row-level folds would let the forest look the id up;
  // grouped folds must not.
  std::mt19937_64 rng(12);
  const std::size_t datasets = 40, per = 5;
  MetaDataset md;
  md.feature_set = {"custom", {"nr_inst"}};
  std::vector<double> data;
  for (std::size_t d = 0; d < datasets; ++d) {
    const double y = std::uniform_real_distribution<double>(0, 1)(rng);
    for (std::size_t c = 0; c < per; ++c) {
      data.push_back(static_cast<double>(d));
      const auto enc = encode_pipeline(PipelineConfig::make_kmeans(static_cast<int>(c) + 2));
      data.insert(data.end(), enc.begin(), enc.end());
      md.y.push_back(y);
      md.dataset_names.push_back("ds" + std::to_string(d));
      md.configs.push_back(PipelineConfig::make_kmeans(static_cast<int>(c) + 2));
      md.undefined_partition.push_back(false);
    }
  }
  md.x = Matrix(md.y.size(), 1 + pipeline_columns().size(), data);
  ForestConfig cfg;
  cfg.n_trees = 30;
  const auto cv = cross_validate(md, 5, cfg, 4, 2);
  CHECK(cv.metrics.r2 < 0.3);
  CHECK(cv.metrics.fold_r2.size() == 5);
  CHECK(cv.group_plan.fold_assignments.size() == datasets);
  CHECK(cv.predictions.size() == md.rows());

  // Worker count does not change the out-of-fold predictions.
  const auto again = cross_validate(md, 5, cfg, 4, 1);
  CHECK(again.predictions == cv.predictions);

  const Forest full = fit_forest(md, cfg, 4);
  std::vector<double> fitted;
  for (std::size_t r = 0; r < md.rows(); ++r) fitted.push_back(full.predict(md.x.row(r)));
  CHECK(regression_metrics(md.y, fitted).r2 >= cv.metrics.r2);
  CHECK_THROWS_AS(cross_validate(md, 41, cfg, 4), ValidationError);
}

TEST_CASE("cross-validation on a learnable target") {
  std::mt19937_64 rng(2);
  MetaDataset md;
  md.feature_set = {"custom", {"nr_inst"}};
  std::vector<double> data;
  for (std::size_t d = 0; d < 60; ++d) {
    const double f = std::uniform_real_distribution<double>(0, 1)(rng);
    for (int c = 0; c < 2; ++c) {
      const auto cfg = PipelineConfig::make_kmeans(2 + c);
      data.push_back(f);
      const auto enc = encode_pipeline(cfg);
      data.insert(data.end(), enc.begin(), enc.end());
      md.y.push_back(c == 0 ? f : 1.0 - f);
      md.dataset_names.push_back("ds" + std::to_string(d));
      md.configs.push_back(cfg);
      md.undefined_partition.push_back(false);
    }
  }
  md.x = Matrix(md.y.size(), 1 + pipeline_columns().size(), data);
  ForestConfig cfg;
  cfg.n_trees = 40;
  const auto cv = cross_validate(md, 10, cfg, 8, 2);
  CHECK(cv.metrics.r2 > 0.8);
  CHECK(cv.metrics.r2 <= 1.0);
  CHECK(cv.metrics.rmse >= 0.0);
  CHECK(cv.metrics.mae >= 0.0);
  // Rows of a dataset share a fold.
  std::map<std::string, int> fold_of;
  for (std::size_t i = 0; i < cv.group_plan.fold_assignments.size(); ++i)
    fold_of["ds" + std::to_string(i)] = cv.group_plan.fold_assignments[i];
  CHECK(fold_of.size() == 60);
}
