#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "../support/oracles.hpp"
#include "metaclust/error.hpp"
#include "metaclust/metafeatures.hpp"

using namespace metaclust;

namespace {

// --- reference statistics, written from the textbook definitions ----------

double r_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double r_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = r_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// numpy's default "linear" quantile.
double r_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const double lo = v[static_cast<std::size_t>(std::floor(h))];
  const double hi = v[static_cast<std::size_t>(std::ceil(h))];
  return lo + (h - std::floor(h)) * (hi - lo);
}

double r_median(const std::vector<double>& v) { return r_quantile(v, 0.5); }

double r_skew(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size()), m = r_mean(v);
  double m2 = 0, m3 = 0;
  for (double x : v) {
    m2 += std::pow(x - m, 2) / n;
    m3 += std::pow(x - m, 3) / n;
  }
  if (m2 == 0.0 || n < 3) return 0.0;
  return std::sqrt(n * (n - 1)) / (n - 2) * m3 / std::pow(m2, 1.5);
}

double r_kurt(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size()), m = r_mean(v);
  double m2 = 0, m4 = 0;
  for (double x : v) {
    m2 += std::pow(x - m, 2) / n;
    m4 += std::pow(x - m, 4) / n;
  }
  if (m2 == 0.0) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

double r_cov(const Matrix& x, std::size_t a, std::size_t b) {
  const auto ca = x.column(a), cb = x.column(b);
  const double ma = r_mean(ca), mb = r_mean(cb);
  double s = 0.0;
  for (std::size_t i = 0; i < ca.size(); ++i) s += (ca[i] - ma) * (cb[i] - mb);
  return s / static_cast<double>(ca.size());
}

// Leading eigenvector by power iteration, sign fixed so the largest-magnitude
// component is positive.
std::vector<double> r_pc1(const Matrix& x) {
  const std::size_t d = x.cols();
  std::vector<double> v(d, 1.0), w(d);
  for (int it = 0; it < 5000; ++it) {
    for (std::size_t a = 0; a < d; ++a) {
      w[a] = 0.0;
      for (std::size_t b = 0; b < d; ++b) w[a] += r_cov(x, a, b) * v[b];
    }
    double norm = 0.0;
    for (double e : w) norm += e * e;
    norm = std::sqrt(norm);
    for (std::size_t a = 0; a < d; ++a) v[a] = w[a] / norm;
  }
  std::size_t big = 0;
  for (std::size_t a = 1; a < d; ++a)
    if (std::abs(v[a]) > std::abs(v[big])) big = a;
  if (v[big] < 0)
    for (auto& e : v) e = -e;
  return v;
}

std::vector<double> col_stat(const Matrix& x, double (*fn)(const std::vector<double>&)) {
  std::vector<double> out;
  for (std::size_t j = 0; j < x.cols(); ++j) out.push_back(fn(x.column(j)));
  return out;
}

double r_iqr(const std::vector<double>& c) { return r_quantile(c, 0.75) - r_quantile(c, 0.25); }
double r_min(const std::vector<double>& c) { return *std::min_element(c.begin(), c.end()); }
double r_max(const std::vector<double>& c) { return *std::max_element(c.begin(), c.end()); }
double r_var(const std::vector<double>& c) { return r_sd(c) * r_sd(c); }
double r_mad(const std::vector<double>& c) {
  const double med = r_median(c);
  std::vector<double> dev;
  for (double v : c) dev.push_back(std::abs(v - med));
  return r_median(dev);
}
double r_sparsity(const std::vector<double>& c) {
  return 1.0 - static_cast<double>(std::set<double>(c.begin(), c.end()).size()) / static_cast<double>(c.size());
}
double r_tmean(const std::vector<double>& c) {
  std::vector<double> s = c;
  std::sort(s.begin(), s.end());
  const std::size_t cut = s.size() / 5;
  return r_mean(std::vector<double>(s.begin() + static_cast<std::ptrdiff_t>(cut), s.end() - static_cast<std::ptrdiff_t>(cut)));
}

std::map<std::string, double> reference_statistical(const Matrix& x) {
  const std::size_t d = x.cols(), n = x.rows();
  std::map<std::string, double> r;
  r["mean.sd"] = r_sd(col_stat(x, r_mean));
  r["var.sd"] = r_sd(col_stat(x, r_var));
  r["sd.sd"] = r_sd(col_stat(x, r_sd));
  r["median.sd"] = r_sd(col_stat(x, r_median));
  r["mad.mean"] = r_mean(col_stat(x, r_mad));
  r["iq_range.mean"] = r_mean(col_stat(x, r_iqr));
  r["iq_range.sd"] = r_sd(col_stat(x, r_iqr));
  r["min.mean"] = r_mean(col_stat(x, r_min));
  r["max.mean"] = r_mean(col_stat(x, r_max));
  r["skewness.mean"] = r_mean(col_stat(x, r_skew));
  r["skewness.sd"] = r_sd(col_stat(x, r_skew));
  r["kurtosis.mean"] = r_mean(col_stat(x, r_kurt));
  r["kurtosis.sd"] = r_sd(col_stat(x, r_kurt));
  std::vector<double> cors, covs;
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    trace += r_cov(x, a, a);
    for (std::size_t b = a + 1; b < d; ++b) {
      covs.push_back(r_cov(x, a, b));
      cors.push_back(r_cov(x, a, b) / std::sqrt(r_cov(x, a, a) * r_cov(x, b, b)));
    }
  }
  r["cor.sd"] = r_sd(cors);
  r["cov.sd"] = r_sd(covs);
  r["eigenvalues.mean"] = trace / static_cast<double>(d);
  const auto pc = r_pc1(x);
  std::vector<double> proj(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) proj[i] += (x(i, j) - r_mean(x.column(j))) * pc[j];
  r["pc1_skewness"] = r_skew(proj);
  r["pc1_kurtosis"] = r_kurt(proj);
  r["sparsity.mean"] = r_mean(col_stat(x, r_sparsity));
  r["sparsity.sd"] = r_sd(col_stat(x, r_sparsity));
  r["t_mean.sd"] = r_sd(col_stat(x, r_tmean));
  return r;
}

// Columns on very different scales so the leading eigenvalue is well separated.
Dataset random_dataset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = std::uniform_int_distribution<std::size_t>(10, 80)(rng);
  const std::size_t d = std::uniform_int_distribution<std::size_t>(2, 5)(rng);
  Dataset ds;
  ds.name = "r" + std::to_string(seed);
  ds.points = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double shared = std::normal_distribution<double>()(rng);
    for (std::size_t j = 0; j < d; ++j) {
      double v = std::pow(3.0, static_cast<double>(d - j)) * std::normal_distribution<double>()(rng) + 0.3 * shared;
      if (j == 1) v = std::round(v);  // repeated values exercise sparsity
      ds.points(i, j) = v + static_cast<double>(j);
    }
  }
  return ds;
}

Dataset blobs(std::size_t k, double noise, std::uint64_t seed, std::size_t n = 300, std::size_t d = 2) {
  GeneratorSpec s;
  s.k = k;
  s.n = n;
  s.d = d;
  s.noise = noise;
  s.seed = seed;
  return generate_synthetic(s, "b");
}

FeatureSet only(std::vector<std::string> ids) { return {"custom", std::move(ids)}; }

}  // namespace

TEST_CASE("registry is fixed and families partition it") {
  const auto& reg = registry();
  CHECK(reg.size() == 45);
  std::set<std::string> ids;
  for (const auto& d : reg) ids.insert(d.id);
  CHECK(ids.size() == reg.size());
  std::size_t total = 0;
  for (Family f : {Family::Simple, Family::Statistical, Family::InfoTheoretic, Family::Landmarker,
                   Family::ModelBased, Family::Complexity})
    total += family_ids(f).size();
  CHECK(total == reg.size());
  CHECK(find_descriptor("iq_range.sd").family == Family::Statistical);
  CHECK(find_descriptor("hopkins").family == Family::InfoTheoretic);
  CHECK(find_descriptor("SIL").family == Family::Landmarker);
  CHECK(find_descriptor("optics_max_reachability").family == Family::ModelBased);
  CHECK(find_descriptor("fisher_ratio_probe").family == Family::Complexity);
  CHECK_THROWS_AS(find_descriptor("cji"), ValidationError);
  CHECK(FeatureSet::full().ids.size() == 45);
}

TEST_CASE("simple descriptors") {
  Dataset ds;
  ds.points = Matrix(100, 5, 1.0);
  const auto v = extract_simple(ds);
  CHECK(v.value("nr_inst") == 100);
  CHECK(v.value("nr_attr") == 5);
  CHECK(v.value("inst_to_attr") == 20);
  CHECK(v.value("log_nr_inst") == std::log(100.0));
  CHECK(v.value("log_inst_to_attr") == std::log(20.0));
  ds.points = Matrix(30, 1, 0.0);
  CHECK(extract_simple(ds).value("inst_to_attr") == 30);
}

TEST_CASE("statistical descriptors match direct recomputation") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Dataset ds = random_dataset(s);
    const auto got = extract_statistical(ds);
    const auto want = reference_statistical(ds.points);
    for (const auto& [id, value] : want) {
      INFO(id << " seed " << s);
      CHECK(std::abs(got.value(id) - value) <= 1e-9 * std::max(1.0, std::abs(value)));
    }
    // pca_var95 from the Jacobi spectrum, checked by reconstruction.
    const Matrix cov = stats::covariance(ds.points);
    const auto eig = stats::jacobi_eigen(cov);
    const std::size_t d = ds.d();
    double frobenius = 0.0;
    for (double c : cov.data()) frobenius += c * c;
    frobenius = std::sqrt(frobenius);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) {
        double r = 0.0;
        for (std::size_t k = 0; k < d; ++k) r += eig.vectors[k][a] * eig.values[k] * eig.vectors[k][b];
        CHECK(std::abs(r - cov(a, b)) <= 1e-9 * frobenius);
      }
    double total = std::accumulate(eig.values.begin(), eig.values.end(), 0.0), acc = 0.0;
    std::size_t m = 0;
    while (acc < 0.95 * total) acc += eig.values[m++];
    CHECK(got.value("pca_var95") == doctest::Approx(static_cast<double>(m) / static_cast<double>(d)));
    // Simple family, same datasets.
    const auto simple = extract_simple(ds);
    CHECK(simple.value("nr_inst") == static_cast<double>(ds.n()));
    CHECK(simple.value("log_nr_attr") == std::log(static_cast<double>(ds.d())));
  }
}

TEST_CASE("degenerate statistical inputs stay finite") {
  Dataset constant;
  constant.points = Matrix(20, 3, 4.0);
  const auto v = extract_statistical(constant);
  for (const char* id : {"mean.sd", "var.sd", "sd.sd", "iq_range.mean", "mad.mean", "skewness.mean",
                         "kurtosis.mean", "cor.sd", "cov.sd", "pc1_skewness"})
    CHECK(v.value(id) == 0.0);
  Dataset line;
  line.points = Matrix(50, 2);
  for (std::size_t i = 0; i < 50; ++i) {
    line.points(i, 0) = static_cast<double>(i);
    line.points(i, 1) = 2.0 * static_cast<double>(i) + 1.0;
  }
  CHECK(extract_statistical(line).value("cor.sd") == 0.0);
  for (double value : extract(line, FeatureSet::full(), 1).values) CHECK(std::isfinite(value));
}

TEST_CASE("standard normal sample has excess kurtosis near zero") {
  std::mt19937_64 rng(5);
  Dataset ds;
  ds.points = Matrix(5000, 3);
  for (auto& v : ds.points.data()) v = std::normal_distribution<double>()(rng);
  CHECK(std::abs(extract_statistical(ds).value("kurtosis.mean")) < 0.2);
}

TEST_CASE("entropy of a balanced binary column is one bit") {
  Dataset ds;
  ds.points = Matrix(10, 1);
  for (std::size_t i = 0; i < 10; ++i) ds.points(i, 0) = i < 5 ? 0.0 : 1.0;
  CHECK(extract_info_theoretic(ds).value("attr_entropy.mean") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(extract_info_theoretic(ds).value("attr_conc.mean") == 0.0);
}

TEST_CASE("hopkins statistic: uniform near 0.5, clustered near 1") {
  std::vector<double> values;
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::mt19937_64 rng(s);
    Dataset ds;
    ds.points = Matrix(300, 3);
    for (auto& v : ds.points.data()) v = std::uniform_real_distribution<double>()(rng);
    values.push_back(extract_info_theoretic(ds, s).value("hopkins"));
  }
  CHECK(std::abs(r_mean(values) - 0.5) < 0.1);
  CHECK(extract_info_theoretic(blobs(3, 0.2, 1), 1).value("hopkins") > 0.75);
}

TEST_CASE("distance descriptors against brute force") {
  const Dataset ds = random_dataset(77);
  const auto v = extract_info_theoretic(ds, 3);
  std::vector<double> d;
  double knn = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    std::vector<double> row;
    for (std::size_t j = 0; j < ds.n(); ++j) {
      if (j > i) d.push_back(oracle::dist(ds.points, i, j));
      if (j != i) row.push_back(oracle::dist(ds.points, i, j));
    }
    std::sort(row.begin(), row.end());
    knn += row[0] + row[1] + row[2] + row[3] + row[4];
  }
  CHECK(v.value("wg_dist.mean") == doctest::Approx(r_mean(d)).epsilon(1e-12));
  CHECK(v.value("wg_dist.sd") == doctest::Approx(r_sd(d)).epsilon(1e-12));
  CHECK(v.value("cohesiveness.mean") == doctest::Approx(knn / static_cast<double>(ds.n())).epsilon(1e-12));
}

TEST_CASE("landmarkers separate structure from noise") {
  // n = 8 gives a two-cluster probe.
  GeneratorSpec two;
  two.n = 8;
  two.k = 2;
  two.noise = 0.3;
  two.seed = 4;
  two.centers = std::vector<std::vector<double>>{{-5, -5}, {5, 5}};
  const Dataset far = generate_synthetic(two);
  CHECK(extract_landmarkers(far, 1).value("SIL") > 0.8);
  CHECK(extract_landmarkers(far, 1).value("SIL") ==
        doctest::Approx(*oracle::silhouette(zscore(far.points), *far.labels)).epsilon(1e-12));
  std::mt19937_64 rng(9);
  Dataset one;
  one.points = Matrix(400, 2);
  for (auto& v : one.points.data()) v = std::normal_distribution<double>()(rng);
  const auto lm = extract_landmarkers(one, 1);
  CHECK(lm.value("SIL") < 0.45);
  CHECK(lm.value("SIL") < extract_landmarkers(blobs(2, 0.3, 4), 1).value("SIL"));
}

TEST_CASE("model-based probes") {
  Dataset dup;
  dup.points = Matrix(6, 2, 3.0);
  CHECK(extract_model_based(dup).value("optics_max_core_dist") == 0.0);
  const auto mb = extract_model_based(blobs(3, 0.2, 8), 2);
  for (double v : mb.values) CHECK(std::isfinite(v));
  CHECK(mb.value("agglo_merge_height_max") > 0.0);
}

TEST_CASE("complexity probes") {
  Dataset two;
  two.points = Matrix(40, 1);
  std::mt19937_64 rng(2);
  for (std::size_t i = 0; i < 40; ++i)
    two.points(i, 0) = (i < 20 ? 0.0 : 100.0) + std::normal_distribution<double>()(rng);
  const auto c = extract_complexity(two, 1);
  CHECK(c.value("overlap_probe") == 0.0);
  CHECK(c.value("fisher_ratio_probe") > 100.0);

  std::vector<double> overlaps;
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::mt19937_64 r(s);
    Dataset blob;
    blob.points = Matrix(300, 2);
    for (auto& v : blob.points.data()) v = std::normal_distribution<double>()(r);
    overlaps.push_back(extract_complexity(blob, s).value("overlap_probe"));
  }
  // A k-means cut through one blob leaves most nearest neighbors on the same side.
  CHECK(r_mean(overlaps) < 0.5);

  // Scale invariance from the z-score precondition.
  Dataset scaled = blobs(2, 0.5, 3);
  const double before = extract_complexity(scaled, 1).value("fisher_ratio_probe");
  for (auto& v : scaled.points.data()) v *= 7.0;
  CHECK(extract_complexity(scaled, 1).value("fisher_ratio_probe") == doctest::Approx(before).epsilon(1e-9));
}

TEST_CASE("extraction returns exactly the requested ids, deterministically") {
  const Dataset ds = blobs(3, 0.5, 6);
  const auto one = extract(ds, only({"nr_inst"}), 1);
  CHECK(one.ids == std::vector<std::string>{"nr_inst"});
  CHECK(one.values.size() == 1);
  const auto a = extract(ds, FeatureSet::full(), 4), b = extract(ds, FeatureSet::full(), 4);
  CHECK(a.values == b.values);
  CHECK(a.ids == FeatureSet::full().ids);
  const auto sub = extract(ds, only({"SIL", "hopkins"}), 4);
  CHECK(sub.value("SIL") == a.value("SIL"));
  CHECK(sub.value("hopkins") == a.value("hopkins"));
  CHECK_THROWS_AS(extract(ds, only({"nr_inst", "nope"}), 1), ValidationError);
  CHECK_THROWS_AS(extract(ds, only({"nr_inst", "nr_inst"}), 1), ValidationError);
}

TEST_CASE("timings add up to the extraction time") {
  const Dataset ds = blobs(4, 0.5, 2, 600, 4);
  const auto start = std::chrono::steady_clock::now();
  const auto v = extract_raw(ds, FeatureSet::full(), 1);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(v.timings.size() == v.ids.size());
  for (double t : v.timings) CHECK(t >= 0.0);
  CHECK(std::abs(wall - v.total_time()) <= 0.05 * wall);
}

TEST_CASE("batch imputation uses the per-descriptor median") {
  std::vector<MetaFeatureVector> batch(4);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<std::vector<double>> cols = {{1, nan}, {5, nan}, {nan, nan}, {3, nan}};
  for (std::size_t i = 0; i < 4; ++i) {
    batch[i].ids = {"a", "b"};
    batch[i].values = cols[i];
    batch[i].imputed = {false, false};
  }
  impute_batch(batch);
  CHECK(batch[2].values[0] == 3.0);
  CHECK(batch[2].imputed[0]);
  CHECK(!batch[0].imputed[0]);
  for (const auto& v : batch) CHECK(v.values[1] == 0.0);

  std::vector<MetaFeatureVector> single(1);
  single[0].ids = {"a"};
  single[0].values = {nan};
  single[0].imputed = {false};
  impute_batch(single);
  CHECK(single[0].values[0] == 0.0);
}

TEST_CASE("batch extraction does not depend on the worker count") {
  std::vector<Dataset> corpus;
  for (std::uint64_t s = 0; s < 6; ++s) corpus.push_back(blobs(2 + s % 3, 0.4, s, 80));
  corpus.push_back(Dataset{Matrix(3, 2, std::vector<double>{0, 1, 2, 3, 4, 6}), std::nullopt, "tiny", std::nullopt});
  const auto a = extract_batch(corpus, FeatureSet::full(), 7, 1);
  const auto b = extract_batch(corpus, FeatureSet::full(), 7, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].values == b[i].values);
    for (double v : a[i].values) CHECK(std::isfinite(v));
  }
  // The tiny dataset cannot host the probes; its landmarkers are imputed.
  CHECK(a.back().imputed[static_cast<std::size_t>(
      std::find(a.back().ids.begin(), a.back().ids.end(), "SIL") - a.back().ids.begin())]);
}

TEST_CASE("stats helpers") {
  CHECK(stats::quantile_sorted({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
  CHECK(stats::median({3, 1, 2}) == 2.0);
  CHECK(stats::trimmed_mean({1, 2, 3, 4, 100}) == doctest::Approx(3.0));
  CHECK(stats::skewness({1, 1, 1}) == 0.0);
  CHECK(stats::kurtosis({2, 2, 2, 2}) == 0.0);
}
