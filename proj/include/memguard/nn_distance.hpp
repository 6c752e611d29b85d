#pragma once

#include "memguard/embedding_set.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memguard {

enum class Metric { cosine, euclidean };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view text);

/// Pairwise distance evaluated in double precision, accumulating over
/// coordinates in index order.
///
/// cosine: 1 - <u,v> / (|u| |v|), clamped to [0, 2]; both norms must be > 0.
/// euclidean: |u - v|_2.
///
/// This is the reference value every nearest-neighbor result reports; the
/// blocked search only uses matrix products to shortlist candidates.
double metric_distance(std::span<const float> u, std::span<const float> v, Metric metric);

struct SearchOptions {
  // 0 picks a thread count from the problem size and hardware.
  std::size_t threads = 0;
};

struct NeighborList {
  std::vector<double> distances;
  std::vector<std::size_t> indices;
};

/// Exact nearest neighbor of every query row among the reference rows.
/// Ties resolve to the lowest reference index. With `exclude_self`, query
/// and reference must be the same matrix and row i never matches itself.
NeighborList nn_search(const RowMatrixF& query, const RowMatrixF& reference, Metric metric, bool exclude_self = false,
                       const SearchOptions& options = {});

struct DistanceSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct HistogramBin {
  double left = 0.0;
  std::size_t count = 0;
};

struct DistanceProfile {
  std::vector<double> distances;
  std::vector<std::size_t> nn_indices;
  std::string query_name;
  std::string reference_name;

  std::size_t size() const noexcept { return distances.size(); }
  DistanceSummary summary() const;
};

DistanceProfile nn_distance(const EmbeddingSet& query, const EmbeddingSet& reference, Metric metric,
                            const SearchOptions& options = {});

/// Mean over rows of the distance to the nearest *other* row (self excluded
/// by index, so duplicated rows match each other at distance 0).
double loo_mean_distance(const EmbeddingSet& train, Metric metric, const SearchOptions& options = {});

/// Bins anchored at 0 with the given width; the last bin covers the maximum.
std::vector<HistogramBin> histogram(const DistanceProfile& profile, double bin_width);

std::string profile_to_csv(const DistanceProfile& profile);
std::string histogram_to_csv(const std::vector<HistogramBin>& bins);

}  // namespace memguard
