#include "metaclust/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "metaclust/error.hpp"
#include "metaclust/io_util.hpp"
#include "metaclust/seed.hpp"

namespace metaclust {

void Dataset::validate() const {
  if (points.rows() < 1) throw ValidationError("points", "dataset needs at least one row");
  if (points.cols() < 1) throw ValidationError("points", "dataset needs at least one column");
  for (double v : points.data()) {
    if (!std::isfinite(v)) throw ValidationError("points", "non-finite value");
  }
  if (labels) {
    if (labels->size() != points.rows())
      throw ValidationError("labels", "length differs from row count");
    int max_label = -1;
    for (int l : *labels) {
      if (l < 0) throw ValidationError("labels", "negative label");
      max_label = std::max(max_label, l);
    }
    std::vector<bool> seen(static_cast<std::size_t>(max_label + 1), false);
    for (int l : *labels) seen[static_cast<std::size_t>(l)] = true;
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
      throw ValidationError("labels", "labels are not contiguous 0..K-1");
  }
}

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::Blobs: return "blobs";
    case GeneratorKind::Moons: return "moons";
    case GeneratorKind::Circles: return "circles";
    case GeneratorKind::AnisotropicGaussian: return "anisotropic-gaussian";
  }
  return "blobs";
}

GeneratorKind generator_kind_from_string(const std::string& text) {
  if (text == "blobs") return GeneratorKind::Blobs;
  if (text == "moons") return GeneratorKind::Moons;
  if (text == "circles") return GeneratorKind::Circles;
  if (text == "anisotropic-gaussian" || text == "anisotropic")
    return GeneratorKind::AnisotropicGaussian;
  throw ValidationError("kind", "unknown generator kind '" + text + "'");
}

void GeneratorSpec::validate() const {
  if (n < 1) throw ValidationError("n", "must be >= 1");
  if (d < 1) throw ValidationError("d", "must be >= 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ValidationError("noise", "must be >= 0");
  const bool two_arc = kind == GeneratorKind::Moons || kind == GeneratorKind::Circles;
  if (two_arc) {
    if (d < 2) throw ValidationError("d", "moons/circles need d >= 2");
    if (n < 2) throw ValidationError("n", "moons/circles need n >= 2");
  } else {
    if (k < 1) throw ValidationError("k", "must be >= 1");
    if (k > n) throw ValidationError("k", "cluster count exceeds instance count");
    if (centers) {
      if (centers->size() != k) throw ValidationError("centers", "need exactly k centers");
      for (const auto& c : *centers) {
        if (c.size() != d) throw ValidationError("centers", "center width differs from d");
      }
    }
  }
}

namespace {

Matrix blob_points(const GeneratorSpec& spec, Rng& rng, std::vector<int>& labels) {
  const std::size_t n = spec.n, d = spec.d, k = spec.k;
  std::vector<std::vector<double>> centers;
  if (spec.centers) {
    centers = *spec.centers;
  } else {
    std::uniform_real_distribution<double> box(-10.0, 10.0);
    centers.assign(k, std::vector<double>(d));
    for (auto& c : centers)
      for (auto& v : c) v = box(rng);
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(n, d);
  labels.assign(n, 0);
  std::size_t row = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t size = n / k + (c < n % k ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i, ++row) {
      labels[row] = static_cast<int>(c);
      for (std::size_t j = 0; j < d; ++j) x(row, j) = centers[c][j] + spec.noise * gauss(rng);
    }
  }
  return x;
}

Matrix two_arc_points(const GeneratorSpec& spec, Rng& rng, std::vector<int>& labels) {
  const std::size_t n = spec.n, d = spec.d;
  const std::size_t n_outer = n / 2;
  const bool moons = spec.kind == GeneratorKind::Moons;
  std::uniform_real_distribution<double> angle(0.0, moons ? std::numbers::pi : 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(n, d);
  labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool outer = i < n_outer;
    const double t = angle(rng);
    double px = 0.0, py = 0.0;
    if (moons) {
      px = outer ? std::cos(t) : 1.0 - std::cos(t);
      py = outer ? std::sin(t) : 0.5 - std::sin(t);
    } else {
      const double r = outer ? 1.0 : 0.5;
      px = r * std::cos(t);
      py = r * std::sin(t);
    }
    labels[i] = outer ? 0 : 1;
    x(i, 0) = px + spec.noise * gauss(rng);
    x(i, 1) = py + spec.noise * gauss(rng);
    for (std::size_t j = 2; j < d; ++j) x(i, j) = spec.noise * gauss(rng);
  }
  return x;
}

}  // namespace

Dataset generate_synthetic(const GeneratorSpec& spec, std::string name) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "generator." + to_string(spec.kind)));
  std::vector<int> labels;
  Matrix x;
  switch (spec.kind) {
    case GeneratorKind::Blobs:
      x = blob_points(spec, rng, labels);
      break;
    case GeneratorKind::Moons:
    case GeneratorKind::Circles:
      x = two_arc_points(spec, rng, labels);
      break;
    case GeneratorKind::AnisotropicGaussian: {
      x = blob_points(spec, rng, labels);
      // Shear by I + U(-0.8, 0.8).
      std::uniform_real_distribution<double> entry(-0.8, 0.8);
      Matrix shear(spec.d, spec.d);
      for (std::size_t a = 0; a < spec.d; ++a)
        for (std::size_t b = 0; b < spec.d; ++b) shear(a, b) = (a == b ? 1.0 : 0.0) + entry(rng);
      Matrix y(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t b = 0; b < spec.d; ++b) {
          double s = 0.0;
          for (std::size_t a = 0; a < spec.d; ++a) s += x(i, a) * shear(a, b);
          y(i, b) = s;
        }
      x = std::move(y);
      break;
    }
  }
  Dataset ds{std::move(x), std::move(labels), name.empty() ? to_string(spec.kind) : name, spec.seed};
  return ds;
}

std::vector<int> canonicalize_labels(const std::vector<double>& raw) {
  std::vector<double> distinct = raw;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), raw[i]) -
                              distinct.begin());
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const std::optional<std::string>& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open dataset: " + path.string());

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("#", 0) == 0) continue;
    header = split(line, ',');
    break;
  }
  if (header.empty()) throw ParseError(line_no, "-", "missing header row");

  std::optional<std::size_t> label_index;
  if (label_column) {
    auto it = std::find(header.begin(), header.end(), *label_column);
    if (it == header.end())
      throw ParseError(line_no, *label_column, "label column not found in header");
    label_index = static_cast<std::size_t>(it - header.begin());
  }
  const std::size_t width = header.size();
  const std::size_t d = width - (label_index ? 1 : 0);
  if (d == 0) throw ParseError(line_no, "-", "no attribute columns");

  std::vector<double> values;
  std::vector<double> raw_labels;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != width)
      throw ParseError(line_no, "-", "expected " + std::to_string(width) + " cells, got " +
                                         std::to_string(cells.size()));
    for (std::size_t c = 0; c < width; ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) throw ParseError(line_no, header[c], "non-numeric cell '" + cells[c] + "'");
      if (label_index && c == *label_index)
        raw_labels.push_back(v);
      else
        values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(line_no, "-", "no data rows");

  Dataset ds;
  ds.points = Matrix(rows, d, std::move(values));
  if (label_index) ds.labels = canonicalize_labels(raw_labels);
  ds.name = path.stem().string();
  ds.validate();
  return ds;
}

std::string dataset_to_csv(const Dataset& ds, const std::optional<std::string>& header_comment) {
  std::string out;
  if (header_comment) out += *header_comment + "\n";
  for (std::size_t j = 0; j < ds.d(); ++j) {
    if (j) out += ',';
    out += "x" + std::to_string(j);
  }
  if (ds.labels) out += ",label";
  out += '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t j = 0; j < ds.d(); ++j) {
      if (j) out += ',';
      out += format_double(ds.points(i, j));
    }
    if (ds.labels) out += "," + std::to_string((*ds.labels)[i]);
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path,
              const std::optional<std::string>& header_comment) {
  write_text_file(path, dataset_to_csv(ds, header_comment));
}

Matrix zscore(const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  Matrix out(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    // Relative guard: a column whose spread is pure rounding noise is constant.
    const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
    for (std::size_t i = 0; i < n; ++i) out(i, j) = constant ? 0.0 : (x(i, j) - mean) / sd;
  }
  return out;
}

Dataset zscore(const Dataset& ds) {
  Dataset out = ds;
  out.points = zscore(ds.points);
  return out;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
  std::vector<std::size_t> sizes(folds, 0);
  for (int f : fold_assignments) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

FoldPlan make_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("folds", "need at least 2 folds");
  if (n < folds) throw ValidationError("folds", "fewer items than folds");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "folds", n));
  std::shuffle(order.begin(), order.end(), rng);
  FoldPlan plan;
  plan.folds = folds;
  plan.seed = seed;
  plan.fold_assignments.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) plan.fold_assignments[order[i]] = static_cast<int>(i % folds);
  return plan;
}

}  // namespace metaclust
