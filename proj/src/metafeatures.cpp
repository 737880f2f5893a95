#include "metaclust/metafeatures.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

#include "metaclust/clustering.hpp"
#include "metaclust/cvi.hpp"
#include "metaclust/error.hpp"
#include "metaclust/parallel.hpp"
#include "metaclust/seed.hpp"

namespace metaclust {

std::string to_string(Family f) {
  switch (f) {
    case Family::Simple: return "simple";
    case Family::Statistical: return "statistical";
    case Family::InfoTheoretic: return "info_theoretic";
    case Family::Landmarker: return "landmarker";
    case Family::ModelBased: return "model_based";
    case Family::Complexity: return "complexity";
  }
  return "?";
}

std::string to_string(CostClass c) {
  switch (c) {
    case CostClass::Cheap: return "cheap";
    case CostClass::Moderate: return "moderate";
    case CostClass::Expensive: return "expensive";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Statistics helpers

namespace stats {

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

namespace {
// Central moments m2, m3, m4; zero spread reported as m2 == 0.
std::array<double, 3> central_moments(const std::vector<double>& v) {
  const double m = mean(v);
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : v) {
    const double d = x - m;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  const double n = static_cast<double>(v.size());
  m2 /= n;
  m3 /= n;
  m4 /= n;
  // Relative guard against rounding noise on constant columns.
  if (!(m2 > 1e-24 * std::max(1.0, m * m))) m2 = 0.0;
  return {m2, m3, m4};
}
}  // namespace

double skewness(const std::vector<double>& v) {
  if (v.size() < 3) return 0.0;
  const auto [m2, m3, m4] = central_moments(v);
  if (m2 == 0.0) return 0.0;
  const double n = static_cast<double>(v.size());
  const double g1 = m3 / std::pow(m2, 1.5);
  return g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0);
}

double kurtosis(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const auto [m2, m3, m4] = central_moments(v);
  if (m2 == 0.0) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

double trimmed_mean(std::vector<double> v, double proportion) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto cut = static_cast<std::size_t>(std::floor(proportion * static_cast<double>(v.size())));
  double s = 0.0;
  for (std::size_t i = cut; i < v.size() - cut; ++i) s += v[i];
  return s / static_cast<double>(v.size() - 2 * cut);
}

Matrix covariance(const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mu(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mu[j] += x(i, j);
  for (auto& m : mu) m /= static_cast<double>(n);
  Matrix c(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (x(i, a) - mu[a]) * (x(i, b) - mu[b]);
      c(a, b) = c(b, a) = s / static_cast<double>(n);
    }
  }
  return c;
}

Eigen jacobi_eigen(const Matrix& symmetric, double tol, int max_sweeps) {
  const std::size_t d = symmetric.rows();
  Matrix a = symmetric;
  Matrix v(d, d);
  for (std::size_t i = 0; i < d; ++i) v(i, i) = 1.0;

  double scale = 0.0;
  for (double x : a.data()) scale += x * x;
  scale = std::sqrt(scale);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * std::max(scale, 1e-300)) break;

    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < d; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return a(l, l) > a(r, r); });
  Eigen out;
  for (std::size_t idx : order) {
    out.values.push_back(a(idx, idx));
    std::vector<double> vec(d);
    for (std::size_t k = 0; k < d; ++k) vec[k] = v(k, idx);
    // Sign convention: largest-magnitude component positive.
    std::size_t big = 0;
    for (std::size_t k = 1; k < d; ++k)
      if (std::abs(vec[k]) > std::abs(vec[big])) big = k;
    if (vec[big] < 0.0)
      for (auto& x : vec) x = -x;
    out.vectors.push_back(std::move(vec));
  }
  return out;
}

}  // namespace stats

// ---------------------------------------------------------------------------
// Descriptor implementations

namespace {

constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

struct Context {
  const Dataset& ds;
  std::uint64_t seed;
  std::optional<Matrix> z;

  const Matrix& raw() const { return ds.points; }
  const Matrix& standardized() {
    if (!z) z = zscore(ds.points);
    return *z;
  }
};

template <typename Fn>
std::vector<double> per_column(const Matrix& x, Fn fn) {
  std::vector<double> out(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) out[j] = fn(x.column(j));
  return out;
}

double column_var(const std::vector<double>& c) {
  const double s = stats::sd(c);
  return s * s;
}

double column_mad(const std::vector<double>& c) {
  const double med = stats::median(c);
  std::vector<double> dev(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) dev[i] = std::abs(c[i] - med);
  return stats::median(std::move(dev));
}

double column_iqr(std::vector<double> c) {
  std::sort(c.begin(), c.end());
  return stats::quantile_sorted(c, 0.75) - stats::quantile_sorted(c, 0.25);
}

double column_min(const std::vector<double>& c) { return *std::min_element(c.begin(), c.end()); }
double column_max(const std::vector<double>& c) { return *std::max_element(c.begin(), c.end()); }

double column_sparsity(std::vector<double> c) {
  std::sort(c.begin(), c.end());
  const auto distinct = static_cast<double>(std::unique(c.begin(), c.end()) - c.begin());
  return 1.0 - distinct / static_cast<double>(c.size());
}

/// Upper-triangle pairwise values of a d x d matrix.
std::vector<double> upper_triangle(const Matrix& m) {
  std::vector<double> out;
  for (std::size_t a = 0; a < m.rows(); ++a)
    for (std::size_t b = a + 1; b < m.cols(); ++b) out.push_back(m(a, b));
  return out;
}

std::vector<double> correlations(const Matrix& x) {
  const Matrix cov = stats::covariance(x);
  std::vector<double> out;
  for (std::size_t a = 0; a < cov.rows(); ++a) {
    for (std::size_t b = a + 1; b < cov.cols(); ++b) {
      const double denom = std::sqrt(cov(a, a) * cov(b, b));
      out.push_back(denom > 0.0 ? std::clamp(cov(a, b) / denom, -1.0, 1.0) : 0.0);
    }
  }
  return out;
}

stats::Eigen covariance_eigen(const Matrix& x) { return stats::jacobi_eigen(stats::covariance(x)); }

double pca_var95(const Matrix& x) {
  const auto eig = covariance_eigen(x);
  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);
  if (!(total > 0.0)) return 0.0;
  double acc = 0.0;
  for (std::size_t m = 0; m < eig.values.size(); ++m) {
    acc += std::max(eig.values[m], 0.0);
    if (acc >= 0.95 * total * (1.0 - 1e-12))
      return static_cast<double>(m + 1) / static_cast<double>(x.cols());
  }
  return 1.0;
}

std::vector<double> pc1_projection(const Matrix& x) {
  const auto eig = covariance_eigen(x);
  const auto& axis = eig.vectors.front();
  std::vector<double> mu(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) mu[j] += x(i, j);
  for (auto& m : mu) m /= static_cast<double>(x.rows());
  std::vector<double> proj(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) proj[i] += (x(i, j) - mu[j]) * axis[j];
  return proj;
}

constexpr int kBins = 10;

std::vector<int> discretize(const std::vector<double>& c) {
  const double lo = column_min(c), hi = column_max(c);
  std::vector<int> out(c.size(), 0);
  if (!(hi > lo)) return out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const int b = static_cast<int>(std::floor((c[i] - lo) / (hi - lo) * kBins));
    out[i] = std::clamp(b, 0, kBins - 1);
  }
  return out;
}

double entropy_bits(const std::vector<int>& bins) {
  std::array<double, kBins> counts{};
  for (int b : bins) counts[static_cast<std::size_t>(b)] += 1.0;
  const double n = static_cast<double>(bins.size());
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / n) * std::log2(c / n);
  return h;
}

/// Goodman-Kruskal tau for predicting `y` from `x`.
double concentration(const std::vector<int>& x, const std::vector<int>& y) {
  const double n = static_cast<double>(x.size());
  std::array<std::array<double, kBins>, kBins> joint{};
  std::array<double, kBins> px{}, py{};
  for (std::size_t i = 0; i < x.size(); ++i) {
    joint[static_cast<std::size_t>(x[i])][static_cast<std::size_t>(y[i])] += 1.0 / n;
    px[static_cast<std::size_t>(x[i])] += 1.0 / n;
    py[static_cast<std::size_t>(y[i])] += 1.0 / n;
  }
  double sum_py2 = 0.0;
  for (double p : py) sum_py2 += p * p;
  const double denom = 1.0 - sum_py2;
  if (!(denom > 1e-12)) return 0.0;
  double num = 0.0;
  for (std::size_t a = 0; a < kBins; ++a) {
    if (px[a] <= 0.0) continue;
    for (std::size_t b = 0; b < kBins; ++b) num += joint[a][b] * joint[a][b] / px[a];
  }
  return (num - sum_py2) / denom;
}

std::vector<double> concentrations(const Matrix& x) {
  std::vector<std::vector<int>> bins;
  for (std::size_t j = 0; j < x.cols(); ++j) bins.push_back(discretize(x.column(j)));
  std::vector<double> out;
  for (std::size_t a = 0; a < x.cols(); ++a)
    for (std::size_t b = 0; b < x.cols(); ++b)
      if (a != b) out.push_back(concentration(bins[a], bins[b]));
  return out;
}

double hopkins(const Matrix& x, std::uint64_t seed) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 2) return kUndefined;
  std::size_t m = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  m = std::clamp<std::size_t>(m, 10, 200);
  m = std::min(m, n);

  Rng rng(derive_seed(seed, "mf.hopkins"));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<double> lo(d), hi(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto c = x.column(j);
    lo[j] = column_min(c);
    hi[j] = column_max(c);
  }

  double sum_w = 0.0, sum_u = 0.0;
  std::vector<double> probe(d);
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t p = idx[s];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      if (i != p) best = std::min(best, squared_distance(x.row(p), x.row(i)));
    sum_w += std::sqrt(best);

    for (std::size_t j = 0; j < d; ++j) {
      std::uniform_real_distribution<double> coord(lo[j], std::nextafter(hi[j], hi[j] + 1.0));
      probe[j] = hi[j] > lo[j] ? coord(rng) : lo[j];
    }
    best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) best = std::min(best, squared_distance(probe, x.row(i)));
    sum_u += std::sqrt(best);
  }
  if (!(sum_u + sum_w > 0.0)) return 0.5;
  return sum_u / (sum_u + sum_w);
}

std::vector<double> subsample_distances(const Matrix& x, std::uint64_t seed) {
  constexpr std::size_t kCap = 500;
  const std::size_t n = x.rows();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n > kCap) {
    Rng rng(derive_seed(seed, "mf.wg_dist"));
    for (std::size_t i = 0; i < kCap; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(kCap);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<double> out;
  out.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) out.push_back(euclidean(x.row(idx[a]), x.row(idx[b])));
  return out;
}

double cohesiveness(const Matrix& x) {
  const std::size_t n = x.rows();
  if (n < 2) return kUndefined;
  const std::size_t k = std::min<std::size_t>(5, n - 1);
  std::vector<double> dist(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dist[m++] = euclidean(x.row(i), x.row(j));
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k),
                      dist.begin() + static_cast<std::ptrdiff_t>(m));
    for (std::size_t t = 0; t < k; ++t) total += dist[t];
  }
  return total / static_cast<double>(n);
}

int probe_k(std::size_t n) {
  const auto k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n) / 2.0)));
  return std::min(std::clamp(k, 2, 15), static_cast<int>(n));
}

Partition landmark_probe(Context& ctx) {
  const Matrix& z = ctx.standardized();
  return kmeans(z, probe_k(z.rows()), derive_seed(ctx.seed, "mf.probe"), 100);
}

Partition two_cluster_probe(Context& ctx) {
  return kmeans(ctx.standardized(), 2, derive_seed(ctx.seed, "mf.probe2"), 100);
}

double score_or_undefined(const CviScore& s) { return s.defined ? s.value : kUndefined; }

using Extractor = std::function<double(Context&)>;

struct Entry {
  Descriptor descriptor;
  Extractor fn;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    using F = Family;
    using C = CostClass;
    std::vector<Entry> t;
    auto add = [&](std::string id, F f, C c, Extractor fn) {
      t.push_back({{std::move(id), f, c}, std::move(fn)});
    };
    auto n_of = [](Context& c) { return static_cast<double>(c.raw().rows()); };
    auto d_of = [](Context& c) { return static_cast<double>(c.raw().cols()); };

    // simple
    add("nr_inst", F::Simple, C::Cheap, n_of);
    add("log_nr_inst", F::Simple, C::Cheap, [=](Context& c) { return std::log(n_of(c)); });
    add("nr_attr", F::Simple, C::Cheap, d_of);
    add("log_nr_attr", F::Simple, C::Cheap, [=](Context& c) { return std::log(d_of(c)); });
    add("inst_to_attr", F::Simple, C::Cheap, [=](Context& c) { return n_of(c) / d_of(c); });
    add("log_inst_to_attr", F::Simple, C::Cheap,
        [=](Context& c) { return std::log(n_of(c) / d_of(c)); });

    // statistical
    auto sd_of_cols = [](auto fn) {
      return [fn](Context& c) { return stats::sd(per_column(c.raw(), fn)); };
    };
    auto mean_of_cols = [](auto fn) {
      return [fn](Context& c) { return stats::mean(per_column(c.raw(), fn)); };
    };
    add("mean.sd", F::Statistical, C::Cheap, sd_of_cols([](const auto& v) { return stats::mean(v); }));
    add("var.sd", F::Statistical, C::Cheap, sd_of_cols(column_var));
    add("sd.sd", F::Statistical, C::Cheap, sd_of_cols([](const auto& v) { return stats::sd(v); }));
    add("median.sd", F::Statistical, C::Cheap, sd_of_cols([](const auto& v) { return stats::median(v); }));
    add("mad.mean", F::Statistical, C::Cheap, mean_of_cols(column_mad));
    add("iq_range.mean", F::Statistical, C::Cheap, mean_of_cols(column_iqr));
    add("iq_range.sd", F::Statistical, C::Cheap, sd_of_cols(column_iqr));
    add("min.mean", F::Statistical, C::Cheap, mean_of_cols(column_min));
    add("max.mean", F::Statistical, C::Cheap, mean_of_cols(column_max));
    add("skewness.mean", F::Statistical, C::Cheap, mean_of_cols([](const auto& v) { return stats::skewness(v); }));
    add("skewness.sd", F::Statistical, C::Cheap, sd_of_cols([](const auto& v) { return stats::skewness(v); }));
    add("kurtosis.mean", F::Statistical, C::Cheap, mean_of_cols([](const auto& v) { return stats::kurtosis(v); }));
    add("kurtosis.sd", F::Statistical, C::Cheap, sd_of_cols([](const auto& v) { return stats::kurtosis(v); }));
    add("cor.sd", F::Statistical, C::Cheap, [](Context& c) { return stats::sd(correlations(c.raw())); });
    add("cov.sd", F::Statistical, C::Cheap,
        [](Context& c) { return stats::sd(upper_triangle(stats::covariance(c.raw()))); });
    add("eigenvalues.mean", F::Statistical, C::Cheap,
        [](Context& c) { return stats::mean(covariance_eigen(c.raw()).values); });
    add("pca_var95", F::Statistical, C::Cheap, [](Context& c) { return pca_var95(c.raw()); });
    add("pc1_skewness", F::Statistical, C::Cheap,
        [](Context& c) { return stats::skewness(pc1_projection(c.raw())); });
    add("pc1_kurtosis", F::Statistical, C::Cheap,
        [](Context& c) { return stats::kurtosis(pc1_projection(c.raw())); });
    add("sparsity.mean", F::Statistical, C::Cheap, mean_of_cols(column_sparsity));
    add("sparsity.sd", F::Statistical, C::Cheap, sd_of_cols(column_sparsity));
    add("t_mean.sd", F::Statistical, C::Cheap,
        sd_of_cols([](const auto& v) { return stats::trimmed_mean(v); }));

    // information-theoretic
    auto entropies = [](Context& c) {
      return per_column(c.raw(), [](const auto& v) { return entropy_bits(discretize(v)); });
    };
    add("attr_entropy.mean", F::InfoTheoretic, C::Cheap, [=](Context& c) { return stats::mean(entropies(c)); });
    add("attr_entropy.sd", F::InfoTheoretic, C::Cheap, [=](Context& c) { return stats::sd(entropies(c)); });
    add("attr_conc.mean", F::InfoTheoretic, C::Moderate,
        [](Context& c) { return stats::mean(concentrations(c.raw())); });
    add("attr_conc.sd", F::InfoTheoretic, C::Moderate,
        [](Context& c) { return stats::sd(concentrations(c.raw())); });
    add("hopkins", F::InfoTheoretic, C::Moderate, [](Context& c) { return hopkins(c.raw(), c.seed); });
    add("wg_dist.mean", F::InfoTheoretic, C::Expensive, [](Context& c) {
      return c.raw().rows() < 2 ? kUndefined : stats::mean(subsample_distances(c.raw(), c.seed));
    });
    add("wg_dist.sd", F::InfoTheoretic, C::Expensive, [](Context& c) {
      return c.raw().rows() < 2 ? kUndefined : stats::sd(subsample_distances(c.raw(), c.seed));
    });
    add("cohesiveness.mean", F::InfoTheoretic, C::Expensive, [](Context& c) { return cohesiveness(c.raw()); });

    // landmarkers: CVIs of the probe k-means partition
    auto landmark = [](auto index_fn) {
      return [index_fn](Context& c) {
        if (c.raw().rows() < 4) return kUndefined;
        const Partition p = landmark_probe(c);
        return score_or_undefined(index_fn(c.standardized(), p.assignments));
      };
    };
    add("SIL", F::Landmarker, C::Expensive, landmark([](const Matrix& x, const std::vector<int>& l) { return silhouette(x, l); }));
    add("DBS", F::Landmarker, C::Moderate, landmark([](const Matrix& x, const std::vector<int>& l) { return davies_bouldin(x, l); }));
    add("CH", F::Landmarker, C::Moderate, landmark([](const Matrix& x, const std::vector<int>& l) { return calinski_harabasz(x, l); }));

    // model-based
    add("kmeans_min_center_dist", F::ModelBased, C::Moderate, [](Context& c) {
      if (c.raw().rows() < 4) return kUndefined;
      const Partition p = landmark_probe(c);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < p.centroids.size(); ++a)
        for (std::size_t b = a + 1; b < p.centroids.size(); ++b)
          best = std::min(best, euclidean(p.centroids[a], p.centroids[b]));
      return std::isfinite(best) ? best : kUndefined;
    });
    add("agglo_merge_height_max", F::ModelBased, C::Expensive, [](Context& c) {
      if (c.raw().rows() < 4) return kUndefined;
      const Partition p = agglomerative(c.standardized(), 1, Linkage::Average);
      return *std::max_element(p.merge_heights.begin(), p.merge_heights.end());
    });
    auto optics_min_samples = [](std::size_t n) { return static_cast<int>(std::min<std::size_t>(5, n)); };
    add("optics_max_reachability", F::ModelBased, C::Expensive, [=](Context& c) {
      if (c.raw().rows() < 4) return kUndefined;
      const auto& z = c.standardized();
      return optics_scan(z, optics_min_samples(z.rows())).max_reachability;
    });
    add("optics_max_core_dist", F::ModelBased, C::Expensive, [=](Context& c) {
      if (c.raw().rows() < 4) return kUndefined;
      const auto& z = c.standardized();
      return optics_scan(z, optics_min_samples(z.rows())).max_core_distance;
    });

    // complexity: two-cluster probe
    add("fisher_ratio_probe", F::Complexity, C::Moderate, [](Context& c) {
      if (c.raw().rows() < 4) return kUndefined;
      const Partition p = two_cluster_probe(c);
      const Matrix& z = c.standardized();
      double best = 0.0;
      for (std::size_t j = 0; j < z.cols(); ++j) {
        std::array<std::vector<double>, 2> groups;
        for (std::size_t i = 0; i < z.rows(); ++i)
          groups[static_cast<std::size_t>(p.assignments[i])].push_back(z(i, j));
        const double diff = stats::mean(groups[0]) - stats::mean(groups[1]);
        const double s0 = stats::sd(groups[0]), s1 = stats::sd(groups[1]);
        const double denom = s0 * s0 + s1 * s1;
        if (denom > 0.0) {
          best = std::max(best, diff * diff / denom);
        } else if (diff != 0.0) {
          return kUndefined;  // perfectly separated, zero spread
        }
      }
      return best;
    });
    add("overlap_probe", F::Complexity, C::Expensive, [](Context& c) {
      if (c.raw().rows() < 4) return kUndefined;
      const Partition p = two_cluster_probe(c);
      const Matrix& z = c.standardized();
      const std::size_t n = z.rows();
      std::size_t crossing = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = i;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          const double v = squared_distance(z.row(i), z.row(j));
          if (v < best) {
            best = v;
            arg = j;
          }
        }
        if (p.assignments[arg] != p.assignments[i]) ++crossing;
      }
      return static_cast<double>(crossing) / static_cast<double>(n);
    });
    return t;
  }();
  return table;
}

const Entry& find_entry(const std::string& id) {
  static const std::map<std::string, std::size_t> index = [] {
    std::map<std::string, std::size_t> m;
    const auto& e = entries();
    for (std::size_t i = 0; i < e.size(); ++i) m.emplace(e[i].descriptor.id, i);
    return m;
  }();
  auto it = index.find(id);
  if (it == index.end()) throw ValidationError("feature_set", "unknown descriptor id '" + id + "'");
  return entries()[it->second];
}

}  // namespace

const std::vector<Descriptor>& registry() {
  static const std::vector<Descriptor> reg = [] {
    std::vector<Descriptor> r;
    for (const auto& e : entries()) r.push_back(e.descriptor);
    return r;
  }();
  return reg;
}

const Descriptor& find_descriptor(const std::string& id) { return find_entry(id).descriptor; }

std::vector<std::string> family_ids(Family f) {
  std::vector<std::string> ids;
  for (const auto& d : registry())
    if (d.family == f) ids.push_back(d.id);
  return ids;
}

FeatureSet FeatureSet::full() {
  FeatureSet s{"full", {}};
  for (const auto& d : registry()) s.ids.push_back(d.id);
  return s;
}

FeatureSet FeatureSet::of_family(Family f) { return {to_string(f), family_ids(f)}; }

void FeatureSet::validate() const {
  std::vector<std::string> seen;
  for (const auto& id : ids) {
    find_entry(id);
    if (std::find(seen.begin(), seen.end(), id) != seen.end())
      throw ValidationError("feature_set", "duplicate descriptor id '" + id + "'");
    seen.push_back(id);
  }
}

double MetaFeatureVector::value(const std::string& id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw ValidationError("feature", "descriptor '" + id + "' not in vector");
  return values[static_cast<std::size_t>(it - ids.begin())];
}

double MetaFeatureVector::total_time() const {
  return std::accumulate(timings.begin(), timings.end(), 0.0);
}

MetaFeatureVector extract_raw(const Dataset& ds, const FeatureSet& set, std::uint64_t master_seed) {
  set.validate();
  ds.validate();
  std::vector<const Entry*> plan;
  for (const auto& id : set.ids) plan.push_back(&find_entry(id));

  Context ctx{ds, master_seed, std::nullopt};
  MetaFeatureVector out;
  out.dataset_name = ds.name;
  out.ids = set.ids;
  out.values.reserve(plan.size());
  out.timings.reserve(plan.size());
  out.imputed.assign(plan.size(), false);
  for (const Entry* e : plan) {
    const auto start = std::chrono::steady_clock::now();
    double v = e->fn(ctx);
    const auto stop = std::chrono::steady_clock::now();
    if (!std::isfinite(v)) v = kUndefined;
    out.values.push_back(v);
    out.timings.push_back(std::chrono::duration<double>(stop - start).count());
  }
  return out;
}

MetaFeatureVector extract(const Dataset& ds, const FeatureSet& set, std::uint64_t master_seed) {
  std::vector<MetaFeatureVector> batch{extract_raw(ds, set, master_seed)};
  impute_batch(batch);
  return std::move(batch.front());
}

void impute_batch(std::vector<MetaFeatureVector>& batch) {
  if (batch.empty()) return;
  const std::size_t width = batch.front().values.size();
  for (std::size_t j = 0; j < width; ++j) {
    std::vector<double> defined;
    for (const auto& v : batch)
      if (std::isfinite(v.values[j])) defined.push_back(v.values[j]);
    const double fill = (batch.size() > 1 && !defined.empty()) ? stats::median(defined) : 0.0;
    for (auto& v : batch) {
      if (!std::isfinite(v.values[j])) {
        v.values[j] = fill;
        v.imputed[j] = true;
      }
    }
  }
}

std::vector<MetaFeatureVector> extract_batch(const std::vector<Dataset>& datasets,
                                             const FeatureSet& set, std::uint64_t master_seed,
                                             unsigned workers) {
  set.validate();
  std::vector<MetaFeatureVector> out(datasets.size());
  parallel_for(datasets.size(), workers,
               [&](std::size_t i) { out[i] = extract_raw(datasets[i], set, master_seed); });
  impute_batch(out);
  return out;
}

namespace {
MetaFeatureVector extract_family(const Dataset& ds, Family f, std::uint64_t seed) {
  return extract_raw(ds, FeatureSet::of_family(f), seed);
}
}  // namespace

MetaFeatureVector extract_simple(const Dataset& ds, std::uint64_t s) { return extract_family(ds, Family::Simple, s); }
MetaFeatureVector extract_statistical(const Dataset& ds, std::uint64_t s) { return extract_family(ds, Family::Statistical, s); }
MetaFeatureVector extract_info_theoretic(const Dataset& ds, std::uint64_t s) { return extract_family(ds, Family::InfoTheoretic, s); }
MetaFeatureVector extract_landmarkers(const Dataset& ds, std::uint64_t s) { return extract_family(ds, Family::Landmarker, s); }
MetaFeatureVector extract_model_based(const Dataset& ds, std::uint64_t s) { return extract_family(ds, Family::ModelBased, s); }
MetaFeatureVector extract_complexity(const Dataset& ds, std::uint64_t s) { return extract_family(ds, Family::Complexity, s); }

}  // namespace metaclust
