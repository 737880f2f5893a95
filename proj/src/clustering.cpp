#include "metaclust/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "metaclust/error.hpp"
#include "metaclust/io_util.hpp"
#include "metaclust/seed.hpp"

namespace metaclust {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::KMeans: return "kmeans";
    case Algorithm::Dbscan: return "dbscan";
    case Algorithm::Agglomerative: return "agglomerative";
  }
  return "kmeans";
}

std::string to_string(Linkage l) {
  switch (l) {
    case Linkage::Single: return "single";
    case Linkage::Average: return "average";
    case Linkage::Complete: return "complete";
  }
  return "average";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "kmeans") return Algorithm::KMeans;
  if (s == "dbscan") return Algorithm::Dbscan;
  if (s == "agglomerative") return Algorithm::Agglomerative;
  throw ValidationError("algorithm", "unknown algorithm '" + s + "'");
}

Linkage linkage_from_string(const std::string& s) {
  if (s == "single") return Linkage::Single;
  if (s == "average") return Linkage::Average;
  if (s == "complete") return Linkage::Complete;
  throw ValidationError("linkage", "unknown linkage '" + s + "'");
}

PipelineConfig PipelineConfig::make_kmeans(int k, int max_iter) {
  PipelineConfig c;
  c.algorithm = Algorithm::KMeans;
  c.k = k;
  c.max_iter = max_iter;
  return c;
}

PipelineConfig PipelineConfig::make_dbscan(double eps, int min_samples) {
  PipelineConfig c;
  c.algorithm = Algorithm::Dbscan;
  c.eps = eps;
  c.min_samples = min_samples;
  return c;
}

PipelineConfig PipelineConfig::make_agglomerative(int k, Linkage linkage) {
  PipelineConfig c;
  c.algorithm = Algorithm::Agglomerative;
  c.k = k;
  c.linkage = linkage;
  return c;
}

void PipelineConfig::validate() const {
  switch (algorithm) {
    case Algorithm::KMeans:
      if (k < 1) throw ValidationError("k", "must be >= 1");
      if (max_iter < 1) throw ValidationError("max_iter", "must be >= 1");
      break;
    case Algorithm::Dbscan:
      if (!(eps > 0.0)) throw ValidationError("eps", "must be > 0");
      if (min_samples < 1) throw ValidationError("min_samples", "must be >= 1");
      break;
    case Algorithm::Agglomerative:
      if (k < 1) throw ValidationError("k", "must be >= 1");
      break;
  }
}

std::string PipelineConfig::label() const {
  std::ostringstream os;
  os << to_string(algorithm) << '(';
  switch (algorithm) {
    case Algorithm::KMeans: os << "k=" << k << ",max_iter=" << max_iter; break;
    case Algorithm::Dbscan: os << "eps=" << format_double(eps) << ",min_samples=" << min_samples; break;
    case Algorithm::Agglomerative: os << "k=" << k << ",linkage=" << to_string(linkage); break;
  }
  os << ')';
  return os.str();
}

nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json params = nlohmann::json::object();
  switch (c.algorithm) {
    case Algorithm::KMeans:
      params["k"] = c.k;
      params["max_iter"] = c.max_iter;
      break;
    case Algorithm::Dbscan:
      params["eps"] = c.eps;
      params["min_samples"] = c.min_samples;
      break;
    case Algorithm::Agglomerative:
      params["k"] = c.k;
      params["linkage"] = to_string(c.linkage);
      break;
  }
  return {{"algorithm", to_string(c.algorithm)}, {"params", params}};
}

PipelineConfig pipeline_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("algorithm"))
    throw ValidationError("pipeline", "expected {\"algorithm\": ..., \"params\": {...}}");
  const auto algo = algorithm_from_string(j.at("algorithm").get<std::string>());
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!params.contains(key))
      throw ValidationError(key, "missing parameter for " + to_string(algo));
    return params.at(key);
  };
  PipelineConfig c;
  switch (algo) {
    case Algorithm::KMeans:
      c = PipelineConfig::make_kmeans(need("k").get<int>(), params.value("max_iter", 100));
      break;
    case Algorithm::Dbscan:
      c = PipelineConfig::make_dbscan(need("eps").get<double>(), need("min_samples").get<int>());
      break;
    case Algorithm::Agglomerative:
      c = PipelineConfig::make_agglomerative(need("k").get<int>(),
                                             linkage_from_string(need("linkage").get<std::string>()));
      break;
  }
  c.validate();
  return c;
}

int canonicalize_partition(std::vector<int>& assignments) {
  std::vector<int> remap;
  int next = 0;
  for (int& a : assignments) {
    if (a < 0) {
      a = -1;
      continue;
    }
    if (static_cast<std::size_t>(a) >= remap.size()) remap.resize(static_cast<std::size_t>(a) + 1, -1);
    if (remap[static_cast<std::size_t>(a)] < 0) remap[static_cast<std::size_t>(a)] = next++;
    a = remap[static_cast<std::size_t>(a)];
  }
  return next;
}

// ---------------------------------------------------------------------------
// k-means

namespace {

std::vector<std::vector<double>> kmeanspp_seeds(const Matrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  std::vector<std::vector<double>> centers;
  std::vector<bool> chosen(n, false);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t idx = first(rng);
  chosen[idx] = true;
  centers.emplace_back(x.row(idx).begin(), x.row(idx).end());

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), x.row(idx));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centers.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = unit(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > r && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Only duplicates of chosen centers remain.
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    chosen[pick] = true;
    centers.emplace_back(x.row(pick).begin(), x.row(pick).end());
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(x.row(i), x.row(pick)));
  }
  return centers;
}

}  // namespace

Partition kmeans(const Matrix& x, int k, std::uint64_t seed, int max_iter) {
  const std::size_t n = x.rows(), d = x.cols();
  if (k < 1) throw ValidationError("k", "must be >= 1");
  if (static_cast<std::size_t>(k) > n) throw ValidationError("k", "k exceeds the number of points");
  if (max_iter < 1) throw ValidationError("max_iter", "must be >= 1");
  const std::size_t kk = static_cast<std::size_t>(k);

  Rng rng(derive_seed(seed, "kmeans.init", kk));
  auto centers = kmeanspp_seeds(x, kk, rng);

  std::vector<int> labels(n, -1), previous;
  std::vector<double> point_d2(n);
  Partition out;
  for (int iter = 0; iter < max_iter; ++iter) {
    previous = labels;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (std::size_t c = 0; c < kk; ++c) {
        const double v = squared_distance(x.row(i), centers[c]);
        if (v < best) {
          best = v;
          arg = static_cast<int>(c);
        }
      }
      labels[i] = arg;
      point_d2[i] = best;
    }

    // Empty-cluster repair: move the point farthest from its centroid (within
    // a cluster that can spare it) into the empty cluster.
    std::vector<std::size_t> sizes(kk, 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < kk; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[static_cast<std::size_t>(labels[i])] > 1 && point_d2[i] > far_d) {
          far_d = point_d2[i];
          far = i;
        }
      }
      --sizes[static_cast<std::size_t>(labels[far])];
      labels[far] = static_cast<int>(c);
      sizes[c] = 1;
      point_d2[far] = 0.0;
      centers[c].assign(x.row(far).begin(), x.row(far).end());
    }

    for (auto& c : centers) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = centers[static_cast<std::size_t>(labels[i])];
      for (std::size_t j = 0; j < d; ++j) c[j] += x(i, j);
    }
    for (std::size_t c = 0; c < kk; ++c)
      for (auto& v : centers[c]) v /= static_cast<double>(sizes[c]);

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      inertia += squared_distance(x.row(i), centers[static_cast<std::size_t>(labels[i])]);
    out.inertia_history.push_back(inertia);
    out.iterations = iter + 1;
    if (labels == previous) break;
  }

  // Canonical relabeling, carrying centroids along.
  std::vector<int> canon = labels;
  out.n_clusters = canonicalize_partition(canon);
  out.centroids.assign(kk, {});
  for (std::size_t i = 0; i < n; ++i)
    out.centroids[static_cast<std::size_t>(canon[i])] = centers[static_cast<std::size_t>(labels[i])];
  out.assignments = std::move(canon);
  out.inertia = out.inertia_history.back();
  return out;
}

// ---------------------------------------------------------------------------
// DBSCAN

Partition dbscan(const Matrix& x, double eps, int min_samples) {
  if (!(eps > 0.0)) throw ValidationError("eps", "must be > 0");
  if (min_samples < 1) throw ValidationError("min_samples", "must be >= 1");
  const std::size_t n = x.rows();
  const double eps2 = eps * eps;

  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    neighbors[i].push_back(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (squared_distance(x.row(i), x.row(j)) <= eps2) {
        neighbors[i].push_back(j);
        neighbors[j].push_back(i);
      }
    }
  }
  for (auto& nb : neighbors) std::sort(nb.begin(), nb.end());

  Partition out;
  out.core.assign(n, false);
  for (std::size_t i = 0; i < n; ++i)
    out.core[i] = neighbors[i].size() >= static_cast<std::size_t>(min_samples);

  std::vector<int> labels(n, -1);
  int cluster = 0;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!out.core[seed] || labels[seed] >= 0) continue;
    std::deque<std::size_t> queue{seed};
    labels[seed] = cluster;
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      for (std::size_t q : neighbors[p]) {
        if (out.core[q] && labels[q] < 0) {
          labels[q] = cluster;
          queue.push_back(q);
        }
      }
    }
    ++cluster;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (out.core[i]) continue;
    for (std::size_t q : neighbors[i]) {  // ascending, so the first core hit is the lowest index
      if (out.core[q]) {
        labels[i] = labels[q];
        break;
      }
    }
  }
  out.n_clusters = canonicalize_partition(labels);
  out.assignments = std::move(labels);
  return out;
}

// ---------------------------------------------------------------------------
// Agglomerative

Partition agglomerative(const Matrix& x, int k, Linkage linkage) {
  const std::size_t n = x.rows();
  if (k < 1) throw ValidationError("k", "must be >= 1");
  if (static_cast<std::size_t>(k) > n) throw ValidationError("k", "k exceeds the number of points");

  Matrix dist = pairwise_distances(x);
  std::vector<bool> active(n, true);
  std::vector<std::size_t> size(n, 1);
  std::vector<int> slot(n);
  for (std::size_t i = 0; i < n; ++i) slot[i] = static_cast<int>(i);

  // nn[i]: nearest active slot with a larger index (smallest such index on ties).
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> nn(n, kNone);
  std::vector<double> nnd(n, std::numeric_limits<double>::infinity());
  auto rescan = [&](std::size_t i) {
    nn[i] = kNone;
    nnd[i] = std::numeric_limits<double>::infinity();
    for (std::size_t j = i + 1; j < n; ++j) {
      if (active[j] && dist(i, j) < nnd[i]) {
        nnd[i] = dist(i, j);
        nn[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) rescan(i);

  Partition out;
  std::vector<int> cut;
  if (static_cast<std::size_t>(k) == n) cut = slot;
  std::size_t remaining = n;

  while (remaining > 1) {
    std::size_t a = kNone;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i] && nn[i] != kNone && nnd[i] < best) {
        best = nnd[i];
        a = i;
      }
    }
    const std::size_t b = nn[a];
    out.merge_heights.push_back(best);

    for (std::size_t m = 0; m < n; ++m) {
      if (!active[m] || m == a || m == b) continue;
      const double da = dist(a, m), db = dist(b, m);
      double merged = 0.0;
      switch (linkage) {
        case Linkage::Single: merged = std::min(da, db); break;
        case Linkage::Complete: merged = std::max(da, db); break;
        case Linkage::Average:
          merged = (static_cast<double>(size[a]) * da + static_cast<double>(size[b]) * db) /
                   static_cast<double>(size[a] + size[b]);
          break;
      }
      dist(a, m) = merged;
      dist(m, a) = merged;
    }
    size[a] += size[b];
    active[b] = false;
    for (auto& s : slot)
      if (s == static_cast<int>(b)) s = static_cast<int>(a);
    --remaining;
    if (remaining == static_cast<std::size_t>(k)) cut = slot;

    for (std::size_t m = 0; m < n; ++m) {
      if (!active[m] || m == a) continue;
      if (m < a) {
        if (nn[m] == a || nn[m] == b) {
          rescan(m);
        } else if (dist(m, a) < nnd[m] || (dist(m, a) == nnd[m] && a < nn[m])) {
          nn[m] = a;
          nnd[m] = dist(m, a);
        }
      } else if (m < b && nn[m] == b) {
        rescan(m);
      }
    }
    rescan(a);
  }
  if (cut.empty()) cut = slot;  // n == 1

  out.n_clusters = canonicalize_partition(cut);
  out.assignments = std::move(cut);
  return out;
}

// ---------------------------------------------------------------------------
// OPTICS

OpticsSummary optics_scan(const Matrix& x, int min_samples) {
  const std::size_t n = x.rows();
  if (min_samples < 1) throw ValidationError("min_samples", "must be >= 1");
  if (static_cast<std::size_t>(min_samples) > n)
    throw ValidationError("min_samples", "exceeds the number of points");

  const Matrix dist = pairwise_distances(x);
  std::vector<double> core(n);
  std::vector<double> buf(n);
  const std::size_t kth = static_cast<std::size_t>(min_samples) - 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) buf[j] = dist(i, j);
    std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(kth), buf.end());
    core[i] = buf[kth];
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> reach(n, inf);
  std::vector<bool> done(n, false);
  OpticsSummary out;
  out.max_core_distance = *std::max_element(core.begin(), core.end());

  // Start and tie-breaks depend on point values only, never on row order:
  // lowest (reachability, core distance, coordinates) goes next.
  auto before = [&](std::size_t a, std::size_t b) {
    if (reach[a] != reach[b]) return reach[a] < reach[b];
    if (core[a] != core[b]) return core[a] < core[b];
    const auto ra = x.row(a), rb = x.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t p = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!done[i] && (p == n || before(i, p))) p = i;
    }
    if (step > 0) out.max_reachability = std::max(out.max_reachability, reach[p]);
    done[p] = true;
    for (std::size_t o = 0; o < n; ++o) {
      if (done[o]) continue;
      reach[o] = std::min(reach[o], std::max(core[p], dist(p, o)));
    }
  }
  return out;
}

Partition run_pipeline(const Matrix& x, const PipelineConfig& config, std::uint64_t seed) {
  config.validate();
  switch (config.algorithm) {
    case Algorithm::KMeans: return kmeans(x, config.k, seed, config.max_iter);
    case Algorithm::Dbscan: return dbscan(x, config.eps, config.min_samples);
    case Algorithm::Agglomerative: return agglomerative(x, config.k, config.linkage);
  }
  throw ValidationError("algorithm", "unhandled algorithm");
}

Partition run_pipeline(const Dataset& dataset, const PipelineConfig& config, std::uint64_t seed) {
  return run_pipeline(zscore(dataset.points), config, seed);
}

}  // namespace metaclust
