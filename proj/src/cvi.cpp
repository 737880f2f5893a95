#include "metaclust/cvi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "metaclust/error.hpp"

namespace metaclust {

std::string to_string(CviIndex index) {
  switch (index) {
    case CviIndex::Silhouette: return "SIL";
    case CviIndex::DaviesBouldin: return "DBS";
    case CviIndex::CalinskiHarabasz: return "CH";
    case CviIndex::Dunn: return "DUNN";
    case CviIndex::Cop: return "COP";
    case CviIndex::CIndex: return "CINDEX";
  }
  return "?";
}

namespace {

// Noise-free view of a labelled point set with labels compacted to 0..k-1.
struct Clustered {
  Matrix x;
  std::vector<int> labels;
  std::vector<std::size_t> sizes;
  std::size_t k = 0;
};

Clustered prepare(const Matrix& x, std::span<const int> labels) {
  if (labels.size() != x.rows())
    throw WidthMismatchError(x.rows(), labels.size(), "partition length");
  Clustered c;
  std::map<int, int> remap;
  std::vector<double> kept;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    auto [it, inserted] = remap.try_emplace(labels[i], static_cast<int>(remap.size()));
    c.labels.push_back(it->second);
    auto row = x.row(i);
    kept.insert(kept.end(), row.begin(), row.end());
  }
  c.x = Matrix(c.labels.size(), x.cols(), std::move(kept));
  c.k = remap.size();
  c.sizes.assign(c.k, 0);
  for (int l : c.labels) ++c.sizes[static_cast<std::size_t>(l)];
  return c;
}

std::vector<std::vector<double>> centroids_of(const Clustered& c) {
  std::vector<std::vector<double>> cent(c.k, std::vector<double>(c.x.cols(), 0.0));
  for (std::size_t i = 0; i < c.x.rows(); ++i) {
    auto& ce = cent[static_cast<std::size_t>(c.labels[i])];
    for (std::size_t j = 0; j < c.x.cols(); ++j) ce[j] += c.x(i, j);
  }
  for (std::size_t k = 0; k < c.k; ++k)
    for (auto& v : cent[k]) v /= static_cast<double>(c.sizes[k]);
  return cent;
}

CviScore undefined(CviIndex index) { return {index, 0.0, false}; }

}  // namespace

CviScore silhouette(const Matrix& x, std::span<const int> labels) {
  const Clustered c = prepare(x, labels);
  if (c.k < 2) return undefined(CviIndex::Silhouette);
  const std::size_t n = c.x.rows();
  std::vector<double> sums(c.k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(c.labels[i]);
    if (c.sizes[own] == 1) continue;  // s = 0
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sums[static_cast<std::size_t>(c.labels[j])] += euclidean(c.x.row(i), c.x.row(j));
    }
    const double a = sums[own] / static_cast<double>(c.sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c.k; ++k) {
      if (k != own) b = std::min(b, sums[k] / static_cast<double>(c.sizes[k]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return {CviIndex::Silhouette, total / static_cast<double>(n), true};
}

CviScore davies_bouldin(const Matrix& x, std::span<const int> labels) {
  const Clustered c = prepare(x, labels);
  if (c.k < 2) return undefined(CviIndex::DaviesBouldin);
  const auto cent = centroids_of(c);
  std::vector<double> scatter(c.k, 0.0);
  for (std::size_t i = 0; i < c.x.rows(); ++i) {
    const auto l = static_cast<std::size_t>(c.labels[i]);
    scatter[l] += euclidean(c.x.row(i), cent[l]);
  }
  for (std::size_t k = 0; k < c.k; ++k) scatter[k] /= static_cast<double>(c.sizes[k]);

  double sum = 0.0;
  for (std::size_t i = 0; i < c.k; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < c.k; ++j) {
      if (i == j) continue;
      const double m = euclidean(cent[i], cent[j]);
      if (!(m > 0.0)) return undefined(CviIndex::DaviesBouldin);
      worst = std::max(worst, (scatter[i] + scatter[j]) / m);
    }
    sum += worst;
  }
  return {CviIndex::DaviesBouldin, sum / static_cast<double>(c.k), true};
}

CviScore calinski_harabasz(const Matrix& x, std::span<const int> labels) {
  const Clustered c = prepare(x, labels);
  const std::size_t n = c.x.rows();
  if (c.k < 2 || n <= c.k) return undefined(CviIndex::CalinskiHarabasz);
  const auto cent = centroids_of(c);
  std::vector<double> grand(c.x.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c.x.cols(); ++j) grand[j] += c.x(i, j);
  for (auto& v : grand) v /= static_cast<double>(n);

  double between = 0.0, within = 0.0;
  for (std::size_t k = 0; k < c.k; ++k)
    between += static_cast<double>(c.sizes[k]) * squared_distance(cent[k], grand);
  for (std::size_t i = 0; i < n; ++i)
    within += squared_distance(c.x.row(i), cent[static_cast<std::size_t>(c.labels[i])]);
  if (!(within > 0.0)) return undefined(CviIndex::CalinskiHarabasz);
  const double value = (between / static_cast<double>(c.k - 1)) /
                       (within / static_cast<double>(n - c.k));
  return {CviIndex::CalinskiHarabasz, value, true};
}

CviScore dunn(const Matrix& x, std::span<const int> labels) {
  const Clustered c = prepare(x, labels);
  if (c.k < 2) return undefined(CviIndex::Dunn);
  const std::size_t n = c.x.rows();
  double min_between = std::numeric_limits<double>::infinity();
  double max_diameter = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dij = euclidean(c.x.row(i), c.x.row(j));
      if (c.labels[i] == c.labels[j])
        max_diameter = std::max(max_diameter, dij);
      else
        min_between = std::min(min_between, dij);
    }
  }
  if (!(max_diameter > 0.0)) return undefined(CviIndex::Dunn);
  return {CviIndex::Dunn, min_between / max_diameter, true};
}

CviScore c_index(const Matrix& x, std::span<const int> labels) {
  const Clustered c = prepare(x, labels);
  if (c.k < 2) return undefined(CviIndex::CIndex);
  const std::size_t n = c.x.rows();
  std::vector<double> all;
  all.reserve(n * (n - 1) / 2);
  double within_sum = 0.0;
  std::size_t within_pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dij = euclidean(c.x.row(i), c.x.row(j));
      all.push_back(dij);
      if (c.labels[i] == c.labels[j]) {
        within_sum += dij;
        ++within_pairs;
      }
    }
  }
  if (within_pairs == 0) return undefined(CviIndex::CIndex);
  std::sort(all.begin(), all.end());
  double s_min = 0.0, s_max = 0.0;
  for (std::size_t i = 0; i < within_pairs; ++i) {
    s_min += all[i];
    s_max += all[all.size() - 1 - i];
  }
  if (!(s_max - s_min > 0.0)) return undefined(CviIndex::CIndex);
  return {CviIndex::CIndex, (within_sum - s_min) / (s_max - s_min), true};
}

CviScore cop(const Matrix& x, std::span<const int> labels) {
  const Clustered c = prepare(x, labels);
  if (c.k < 2) return undefined(CviIndex::Cop);
  const std::size_t n = c.x.rows();
  const auto cent = centroids_of(c);
  std::vector<double> intra(c.k, 0.0);
  std::vector<double> sep(c.k, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const auto li = static_cast<std::size_t>(c.labels[i]);
    intra[li] += euclidean(c.x.row(i), cent[li]);
    for (std::size_t j = 0; j < n; ++j) {
      if (c.labels[j] != c.labels[i]) sep[li] = std::min(sep[li], euclidean(c.x.row(i), c.x.row(j)));
    }
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < c.k; ++k) {
    if (!(sep[k] > 0.0)) return undefined(CviIndex::Cop);
    sum += (intra[k] / static_cast<double>(c.sizes[k])) / sep[k];
  }
  return {CviIndex::Cop, sum / static_cast<double>(c.k), true};
}

namespace {

struct Contingency {
  std::vector<std::vector<double>> table;
  std::vector<double> rows, cols;
  double n = 0.0;
};

Contingency contingency(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw WidthMismatchError(a.size(), b.size(), "label vector length");
  if (a.size() < 2) throw ValidationError("labels", "need at least two labels");
  std::map<int, std::size_t> ia, ib;
  for (int v : a) ia.try_emplace(v, ia.size());
  for (int v : b) ib.try_emplace(v, ib.size());
  Contingency c;
  c.table.assign(ia.size(), std::vector<double>(ib.size(), 0.0));
  c.rows.assign(ia.size(), 0.0);
  c.cols.assign(ib.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto r = ia[a[i]], s = ib[b[i]];
    c.table[r][s] += 1.0;
    c.rows[r] += 1.0;
    c.cols[s] += 1.0;
  }
  c.n = static_cast<double>(a.size());
  return c;
}

double comb2(double v) { return v * (v - 1.0) / 2.0; }

}  // namespace

double ari(std::span<const int> a, std::span<const int> b) {
  const Contingency c = contingency(a, b);
  double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& r : c.table)
    for (double v : r) sum_cells += comb2(v);
  for (double v : c.rows) sum_rows += comb2(v);
  for (double v : c.cols) sum_cols += comb2(v);
  const double expected = sum_rows * sum_cols / comb2(c.n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both partitions trivial and identical in shape
  return (sum_cells - expected) / (max_index - expected);
}

double nmi(std::span<const int> a, std::span<const int> b) {
  const Contingency c = contingency(a, b);
  auto entropy = [&](const std::vector<double>& counts) {
    double h = 0.0;
    for (double v : counts) {
      if (v > 0.0) h -= (v / c.n) * std::log(v / c.n);
    }
    return h;
  };
  const double ha = entropy(c.rows), hb = entropy(c.cols);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  double mi = 0.0;
  for (std::size_t r = 0; r < c.rows.size(); ++r) {
    for (std::size_t s = 0; s < c.cols.size(); ++s) {
      const double v = c.table[r][s];
      if (v > 0.0) mi += (v / c.n) * std::log(v * c.n / (c.rows[r] * c.cols[s]));
    }
  }
  const double denom = 0.5 * (ha + hb);
  return std::clamp(mi / denom, 0.0, 1.0);
}

}  // namespace metaclust
