#pragma once

#include "memguard/embedding_set.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string_view>

namespace memguard::gan {

enum class DatasetKind { ring8, grid25, two_moons };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view text);

// Mixture component centers (rows); empty for two_moons.
Eigen::MatrixXd component_centers(DatasetKind kind);

/// Samples a 2-D toy distribution.
///
/// ring8 and grid25 are isotropic Gaussian mixtures (ring8: 8 centers on the
/// unit circle at angles 2*pi*k/8; grid25: centers on {-2,...,2}^2). Rows are
/// stratified: row i belongs to component i mod C, and carries it as label.
/// two_moons draws each row from one of the two interleaved half circles
/// (label = moon) with Gaussian noise of scale `sigma`.
EmbeddingSet sample_toy(DatasetKind kind, std::size_t n, double sigma, std::mt19937_64& rng, std::string name);

struct ToyDataset {
  DatasetKind kind = DatasetKind::ring8;
  EmbeddingSet train;
  EmbeddingSet test;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kDefaultTrainSize = 256;
inline constexpr std::size_t kDefaultTestSize = 4096;
inline constexpr double kDefaultSigma = 0.2;

/// Train and test are drawn from independent streams derived from `seed`.
ToyDataset make_dataset(DatasetKind kind, std::size_t n_train, std::size_t n_test, double sigma, std::uint64_t seed);

// Label each row with its nearest mixture component (Euclidean); two_moons
// has no centers and is returned unchanged.
EmbeddingSet label_by_nearest_component(const EmbeddingSet& points, DatasetKind kind);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace memguard::gan
