#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaclust/forest.hpp"

namespace metaclust {

/// Path-dependent TreeSHAP for one tree: phi has one slot per input feature.
/// `phi0` receives the cover-weighted mean leaf value.
std::vector<double> tree_shap(const RegressionTree& tree, std::span<const double> x, double* phi0 = nullptr);

/// Cover-weighted expectation of the tree output (the empty-coalition value).
double tree_expectation(const RegressionTree& tree);

struct ShapExplanation {
  std::string instance_id;
  double phi0 = 0.0;
  double fx = 0.0;
  std::vector<double> phi;
  std::vector<double> x;
  std::vector<std::string> feature_names;
};

/// Per-tree values averaged over the forest. Throws WidthMismatchError.
ShapExplanation forest_shap(const Forest& forest, std::span<const double> x, std::string instance_id = {});

/// Exact Shapley values by enumerating every coalition of the forest's active
/// features, with the same cover-weighted conditional expectation. Throws
/// ValidationError when more than `max_features` features are active.
std::vector<double> brute_force_shapley(const Forest& forest, std::span<const double> x,
                                        std::size_t max_features = 12);

struct CohortFeature {
  std::size_t feature = 0;
  std::string name;
  double mean_abs_phi = 0.0;
  double mean_phi = 0.0;
};

struct CohortSummary {
  std::vector<CohortFeature> ranking;  // mean |phi| descending, ties by feature index
  std::vector<ShapExplanation> explanations;
};

CohortSummary cohort_summary(std::vector<ShapExplanation> explanations);

nlohmann::json to_json(const ShapExplanation& e);
/// Beeswarm data: one (feature, value, phi) row per feature and explanation,
/// features in ranking order.
std::string cohort_csv(const CohortSummary& summary, std::uint64_t master_seed);

}  // namespace metaclust
