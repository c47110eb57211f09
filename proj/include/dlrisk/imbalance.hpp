#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dlrisk/core.hpp"

/// SMOTE oversampling of the minority class.
namespace dlrisk::imbalance {

struct SmoteConfig {
  int k_neighbors = 5;
  /// Minority rows after oversampling = round(target_ratio * majority rows).
  double target_ratio = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SmoteResult {
  /// Original rows first, unchanged, then the synthetic rows.
  Matrix x;
  IntVector y;
  /// Provenance flag per row.
  std::vector<bool> synthetic;
  /// Parents (original row indices) of each synthetic row, in order.
  std::vector<std::pair<int, int>> parents;
  int minority_class = 1;

  long synthetic_count() const;
};

/// Each synthetic row is a + u (b - a) with a a minority row (taken in a
/// shuffled round robin), b one of its k nearest minority neighbours
/// (Euclidean) and u ~ U(0, 1). Labels are class indices 0/1.
SmoteResult smote(const Matrix& x, const IntVector& y, const SmoteConfig& config);

/// Indices of the k nearest rows of `x` to row i (excluding i), nearest first.
std::vector<std::vector<int>> nearest_neighbours(const Matrix& x, int k);

}  // namespace dlrisk::imbalance
