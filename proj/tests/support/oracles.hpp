#pragma once

// Direct-definition reference implementations for clustering and validity
// indices. Deliberately naive: clusters are member lists, every quantity is
// recomputed from raw point distances.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "metaclust/matrix.hpp"

namespace oracle {

using metaclust::Matrix;

inline double dist(const Matrix& x, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < x.cols(); ++c) s += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
  return std::sqrt(s);
}

// Member lists of the non-noise clusters, in ascending label order.
inline std::vector<std::vector<std::size_t>> groups(const std::vector<int>& labels) {
  std::map<int, std::vector<std::size_t>> m;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) m[labels[i]].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [k, v] : m) out.push_back(v);
  return out;
}

inline std::vector<double> centroid(const Matrix& x, const std::vector<std::size_t>& members) {
  std::vector<double> c(x.cols(), 0.0);
  for (auto i : members)
    for (std::size_t j = 0; j < x.cols(); ++j) c[j] += x(i, j) / static_cast<double>(members.size());
  return c;
}

inline double to_point(const Matrix& x, std::size_t i, const std::vector<double>& c) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j) s += (x(i, j) - c[j]) * (x(i, j) - c[j]);
  return std::sqrt(s);
}

inline std::optional<double> silhouette(const Matrix& x, const std::vector<int>& labels) {
  const auto g = groups(labels);
  if (g.size() < 2) return std::nullopt;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t a = 0; a < g.size(); ++a) {
    for (auto i : g[a]) {
      ++count;
      if (g[a].size() == 1) continue;
      double own = 0.0;
      for (auto j : g[a])
        if (j != i) own += dist(x, i, j);
      own /= static_cast<double>(g[a].size() - 1);
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < g.size(); ++b) {
        if (b == a) continue;
        double other = 0.0;
        for (auto j : g[b]) other += dist(x, i, j);
        nearest = std::min(nearest, other / static_cast<double>(g[b].size()));
      }
      const double m = std::max(own, nearest);
      if (m > 0) total += (nearest - own) / m;
    }
  }
  return total / static_cast<double>(count);
}

inline std::optional<double> davies_bouldin(const Matrix& x, const std::vector<int>& labels) {
  const auto g = groups(labels);
  if (g.size() < 2) return std::nullopt;
  std::vector<std::vector<double>> c;
  std::vector<double> s;
  for (const auto& m : g) {
    c.push_back(centroid(x, m));
    double acc = 0.0;
    for (auto i : m) acc += to_point(x, i, c.back());
    s.push_back(acc / static_cast<double>(m.size()));
  }
  double total = 0.0;
  for (std::size_t a = 0; a < g.size(); ++a) {
    double worst = -1.0;
    for (std::size_t b = 0; b < g.size(); ++b) {
      if (a == b) continue;
      double sep = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) sep += (c[a][j] - c[b][j]) * (c[a][j] - c[b][j]);
      sep = std::sqrt(sep);
      if (sep == 0.0) return std::nullopt;
      worst = std::max(worst, (s[a] + s[b]) / sep);
    }
    total += worst;
  }
  return total / static_cast<double>(g.size());
}

// Between-group dispersion as total minus within scatter.
inline std::optional<double> calinski_harabasz(const Matrix& x, const std::vector<int>& labels) {
  const auto g = groups(labels);
  std::vector<std::size_t> all;
  for (const auto& m : g) all.insert(all.end(), m.begin(), m.end());
  const double n = static_cast<double>(all.size()), k = static_cast<double>(g.size());
  if (g.size() < 2 || n <= k) return std::nullopt;
  const auto grand = centroid(x, all);
  double total = 0.0, within = 0.0;
  for (auto i : all) total += std::pow(to_point(x, i, grand), 2);
  for (const auto& m : g) {
    const auto c = centroid(x, m);
    for (auto i : m) within += std::pow(to_point(x, i, c), 2);
  }
  if (within == 0.0) return std::nullopt;
  return ((total - within) / (k - 1)) / (within / (n - k));
}

inline std::optional<double> dunn(const Matrix& x, const std::vector<int>& labels) {
  const auto g = groups(labels);
  if (g.size() < 2) return std::nullopt;
  double min_sep = std::numeric_limits<double>::infinity(), max_diam = 0.0;
  for (std::size_t a = 0; a < g.size(); ++a) {
    for (auto i : g[a])
      for (auto j : g[a]) max_diam = std::max(max_diam, dist(x, i, j));
    for (std::size_t b = a + 1; b < g.size(); ++b)
      for (auto i : g[a])
        for (auto j : g[b]) min_sep = std::min(min_sep, dist(x, i, j));
  }
  if (max_diam == 0.0) return std::nullopt;
  return min_sep / max_diam;
}

inline std::optional<double> c_index(const Matrix& x, const std::vector<int>& labels) {
  const auto g = groups(labels);
  if (g.size() < 2) return std::nullopt;
  std::vector<std::size_t> all;
  for (const auto& m : g) all.insert(all.end(), m.begin(), m.end());
  std::vector<double> d;
  for (std::size_t a = 0; a < all.size(); ++a)
    for (std::size_t b = a + 1; b < all.size(); ++b) d.push_back(dist(x, all[a], all[b]));
  double s = 0.0;
  std::size_t w = 0;
  for (const auto& m : g)
    for (std::size_t a = 0; a < m.size(); ++a)
      for (std::size_t b = a + 1; b < m.size(); ++b) {
        s += dist(x, m[a], m[b]);
        ++w;
      }
  if (w == 0) return std::nullopt;
  std::vector<double> asc = d, desc = d;
  std::sort(asc.begin(), asc.end());
  std::sort(desc.begin(), desc.end(), std::greater<>());
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    lo += asc[i];
    hi += desc[i];
  }
  if (hi == lo) return std::nullopt;
  return (s - lo) / (hi - lo);
}

inline std::optional<double> cop(const Matrix& x, const std::vector<int>& labels) {
  const auto g = groups(labels);
  if (g.size() < 2) return std::nullopt;
  double total = 0.0;
  for (std::size_t a = 0; a < g.size(); ++a) {
    const auto c = centroid(x, g[a]);
    double intra = 0.0;
    for (auto i : g[a]) intra += to_point(x, i, c);
    intra /= static_cast<double>(g[a].size());
    double sep = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < g.size(); ++b) {
      if (b == a) continue;
      for (auto i : g[a])
        for (auto j : g[b]) sep = std::min(sep, dist(x, i, j));
    }
    if (sep == 0.0) return std::nullopt;
    total += intra / sep;
  }
  return total / static_cast<double>(g.size());
}

// Pair-counting form of the adjusted Rand index.
inline double ari(const std::vector<int>& a, const std::vector<int>& b) {
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      if (sa && sb) ++n11;
      else if (sa) ++n10;
      else if (sb) ++n01;
      else ++n00;
    }
  const double den = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
  if (den == 0.0) return 1.0;
  return 2.0 * (n00 * n11 - n01 * n10) / den;
}

inline double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  std::map<int, double> pa, pb;
  std::map<std::pair<int, int>, double> pab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1 / n;
    pb[b[i]] += 1 / n;
    pab[{a[i], b[i]}] += 1 / n;
  }
  double ha = 0, hb = 0, mi = 0;
  for (auto& [k, p] : pa) ha -= p * std::log(p);
  for (auto& [k, p] : pb) hb -= p * std::log(p);
  for (auto& [k, p] : pab) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
  if (ha == 0.0 && hb == 0.0) return 1.0;
  return mi / ((ha + hb) / 2);
}

}  // namespace oracle
