#pragma once

#include <span>
#include <string>
#include <vector>

#include "metaclust/matrix.hpp"

namespace metaclust {

enum class CviIndex { Silhouette, DaviesBouldin, CalinskiHarabasz, Dunn, Cop, CIndex };

std::string to_string(CviIndex index);

/// A validity index value; `defined` is false when the partition makes the
/// index meaningless (fewer than two clusters, zero denominators, ...).
struct CviScore {
  CviIndex index;
  double value = 0.0;
  bool defined = false;
};

// Internal indices. Points labelled -1 (noise) are dropped before scoring;
// fewer than two remaining clusters gives defined == false.

/// Rousseeuw's mean silhouette; members of singleton clusters contribute 0.
CviScore silhouette(const Matrix& x, std::span<const int> labels);
CviScore davies_bouldin(const Matrix& x, std::span<const int> labels);
CviScore calinski_harabasz(const Matrix& x, std::span<const int> labels);
/// Minimum between-cluster point distance over maximum cluster diameter.
CviScore dunn(const Matrix& x, std::span<const int> labels);
/// (S - S_min) / (S_max - S_min) over the within-cluster pair count.
CviScore c_index(const Matrix& x, std::span<const int> labels);
/// Mean over clusters of (mean member-to-centroid distance) divided by the
/// smallest distance between a member and a non-member.
CviScore cop(const Matrix& x, std::span<const int> labels);

// External agreement. Labels are compared as-is; -1 is an ordinary label.
double ari(std::span<const int> a, std::span<const int> b);
/// Mutual information over the arithmetic mean of the two entropies.
double nmi(std::span<const int> a, std::span<const int> b);

}  // namespace metaclust
