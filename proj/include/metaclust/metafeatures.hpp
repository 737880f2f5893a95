#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metaclust/dataset.hpp"

namespace metaclust {

enum class Family { Simple, Statistical, InfoTheoretic, Landmarker, ModelBased, Complexity };
enum class CostClass { Cheap, Moderate, Expensive };

std::string to_string(Family f);
std::string to_string(CostClass c);

struct Descriptor {
  std::string id;
  Family family;
  CostClass cost;
};

/// The fixed descriptor registry, in canonical order.
const std::vector<Descriptor>& registry();
/// Throws ValidationError for unknown ids.
const Descriptor& find_descriptor(const std::string& id);
std::vector<std::string> family_ids(Family f);

/// Ordered descriptor ids; the order defines meta-dataset column order.
struct FeatureSet {
  std::string name;
  std::vector<std::string> ids;

  static FeatureSet full();
  static FeatureSet of_family(Family f);
  void validate() const;
};

/// Values aligned with `ids`. Before imputation an undefined descriptor holds
/// NaN; after impute_batch every value is finite.
struct MetaFeatureVector {
  std::string dataset_name;
  std::vector<std::string> ids;
  std::vector<double> values;
  std::vector<double> timings;  // seconds, per descriptor
  std::vector<bool> imputed;

  double value(const std::string& id) const;
  double total_time() const;
};

// Family extractors (raw values, NaN where undefined). Landmarker, model-based
// and complexity descriptors work on the z-scored points.
MetaFeatureVector extract_simple(const Dataset& ds, std::uint64_t master_seed = 0);
MetaFeatureVector extract_statistical(const Dataset& ds, std::uint64_t master_seed = 0);
MetaFeatureVector extract_info_theoretic(const Dataset& ds, std::uint64_t master_seed = 0);
MetaFeatureVector extract_landmarkers(const Dataset& ds, std::uint64_t master_seed = 0);
MetaFeatureVector extract_model_based(const Dataset& ds, std::uint64_t master_seed = 0);
MetaFeatureVector extract_complexity(const Dataset& ds, std::uint64_t master_seed = 0);

/// Computes exactly the ids of `set`, each timed separately. Descriptors are
/// computed independently of each other, so a set's cost is the sum of its
/// members' costs. Unknown ids fail before any work. Undefined values are
/// left as NaN; see impute_batch.
MetaFeatureVector extract_raw(const Dataset& ds, const FeatureSet& set, std::uint64_t master_seed);

/// Single-dataset extraction: undefined values become 0.
MetaFeatureVector extract(const Dataset& ds, const FeatureSet& set, std::uint64_t master_seed);

/// Replaces NaN entries with the per-descriptor median of the defined values
/// in the batch (0 if none are defined, or if the batch has one vector).
void impute_batch(std::vector<MetaFeatureVector>& batch);

/// extract_raw over the corpus on `workers` threads, then impute_batch.
std::vector<MetaFeatureVector> extract_batch(const std::vector<Dataset>& datasets,
                                             const FeatureSet& set, std::uint64_t master_seed,
                                             unsigned workers);

// Building blocks shared with tests.
namespace stats {
double mean(const std::vector<double>& v);
double sd(const std::vector<double>& v);  // population
double median(std::vector<double> v);
/// Linear-interpolation quantile on a sorted vector.
double quantile_sorted(const std::vector<double>& sorted, double q);
/// Adjusted Fisher-Pearson skewness; 0 for constant input or n < 3.
double skewness(const std::vector<double>& v);
/// Excess kurtosis m4/m2^2 - 3; 0 for constant input.
double kurtosis(const std::vector<double>& v);
/// Mean after cutting floor(0.2 n) values from each end.
double trimmed_mean(std::vector<double> v, double proportion = 0.2);

struct Eigen {
  std::vector<double> values;               // descending
  std::vector<std::vector<double>> vectors;  // vectors[i] pairs with values[i]
};
/// Cyclic Jacobi sweeps on a symmetric matrix.
Eigen jacobi_eigen(const Matrix& symmetric, double tol = 1e-10, int max_sweeps = 100);
Matrix covariance(const Matrix& x);  // population
}  // namespace stats

}  // namespace metaclust
