#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metaclust/matrix.hpp"

namespace metaclust {

/// n x d numeric points with optional ground-truth labels. Labels, when
/// present, are canonical: contiguous 0..K-1.
struct Dataset {
  Matrix points;
  std::optional<std::vector<int>> labels;
  std::string name;
  std::optional<std::uint64_t> seed;

  std::size_t n() const noexcept { return points.rows(); }
  std::size_t d() const noexcept { return points.cols(); }

  /// Throws ValidationError if any invariant is broken.
  void validate() const;
};

enum class GeneratorKind { Blobs, Moons, Circles, AnisotropicGaussian };

std::string to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(const std::string& text);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::Blobs;
  std::size_t n = 100;
  std::size_t d = 2;
  std::size_t k = 3;      // blobs / anisotropic only
  double noise = 0.1;     // sd of additive Gaussian noise
  std::uint64_t seed = 0;
  /// Optional fixed centers for blobs (k rows of length d). When absent they
  /// are drawn uniformly from [-10, 10]^d.
  std::optional<std::vector<std::vector<double>>> centers;

  void validate() const;
};

/// Deterministic in the spec, seed included. Moons and circles occupy the
/// first two columns; columns beyond that are pure noise dimensions.
Dataset generate_synthetic(const GeneratorSpec& spec, std::string name = {});

/// Maps arbitrary label values onto 0..K-1 by ascending value.
std::vector<int> canonicalize_labels(const std::vector<double>& raw);

/// Comma-separated numeric table with a header row. Leading lines starting
/// with '#' are skipped.
Dataset load_csv(const std::filesystem::path& path,
                 const std::optional<std::string>& label_column = std::nullopt);

/// Writes columns x0..x{d-1} (+ "label"). Values use shortest round-trip
/// formatting so load_csv(save_csv(ds)) reproduces the points exactly.
std::string dataset_to_csv(const Dataset& ds, const std::optional<std::string>& header_comment);
void save_csv(const Dataset& ds, const std::filesystem::path& path,
              const std::optional<std::string>& header_comment = std::nullopt);

/// Column-wise standardization with the population sd. Constant columns
/// become all zeros.
Dataset zscore(const Dataset& ds);
Matrix zscore(const Matrix& x);

struct FoldPlan {
  std::vector<int> fold_assignments;
  std::size_t folds = 0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> fold_sizes() const;
};

/// Seeded shuffle, then round-robin assignment: sizes differ by at most one.
FoldPlan make_folds(std::size_t n, std::size_t folds, std::uint64_t seed);

}  // namespace metaclust
