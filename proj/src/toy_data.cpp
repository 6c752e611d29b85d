#include "memguard/toy_data.hpp"

#include "memguard/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace memguard::gan {

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::ring8: return "ring8";
    case DatasetKind::grid25: return "grid25";
    case DatasetKind::two_moons: return "two_moons";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view text) {
  if (text == "ring8") return DatasetKind::ring8;
  if (text == "grid25") return DatasetKind::grid25;
  if (text == "two_moons") return DatasetKind::two_moons;
  throw UsageError("unknown dataset '" + std::string(text) + "' (expected ring8, grid25 or two_moons)");
}

Eigen::MatrixXd component_centers(DatasetKind kind) {
  if (kind == DatasetKind::ring8) {
    Eigen::MatrixXd c(8, 2);
    for (int k = 0; k < 8; ++k) {
      const double angle = 2.0 * std::numbers::pi * k / 8.0;
      c(k, 0) = std::cos(angle);
      c(k, 1) = std::sin(angle);
    }
    return c;
  }
  if (kind == DatasetKind::grid25) {
    Eigen::MatrixXd c(25, 2);
    for (int k = 0; k < 25; ++k) {
      c(k, 0) = static_cast<double>(k / 5 - 2);
      c(k, 1) = static_cast<double>(k % 5 - 2);
    }
    return c;
  }
  return Eigen::MatrixXd(0, 2);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over the combined words
  std::uint64_t x = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

EmbeddingSet sample_toy(DatasetKind kind, std::size_t n, double sigma, std::mt19937_64& rng, std::string name) {
  if (n < 1) throw UsageError("toy sample size must be positive");
  if (!(sigma > 0.0)) throw UsageError("toy sigma must be positive");
  std::normal_distribution<double> noise(0.0, sigma);
  RowMatrixF points(static_cast<Eigen::Index>(n), 2);
  std::vector<Label> labels(n);

  if (kind == DatasetKind::two_moons) {
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::bernoulli_distribution which(0.5);
    for (std::size_t i = 0; i < n; ++i) {
      const bool lower = which(rng);
      const double t = angle(rng);
      double x = lower ? 1.0 - std::cos(t) : std::cos(t);
      double y = lower ? 0.5 - std::sin(t) : std::sin(t);
      x += noise(rng);
      y += noise(rng);
      points(static_cast<Eigen::Index>(i), 0) = static_cast<float>(x);
      points(static_cast<Eigen::Index>(i), 1) = static_cast<float>(y);
      labels[i] = lower ? 1 : 0;
    }
    return EmbeddingSet(std::move(name), std::move(points), std::move(labels));
  }

  const Eigen::MatrixXd centers = component_centers(kind);
  const auto n_comp = static_cast<std::size_t>(centers.rows());
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(i % n_comp);
    const double x = centers(c, 0) + noise(rng);
    const double y = centers(c, 1) + noise(rng);
    points(static_cast<Eigen::Index>(i), 0) = static_cast<float>(x);
    points(static_cast<Eigen::Index>(i), 1) = static_cast<float>(y);
    labels[i] = static_cast<Label>(c);
  }
  return EmbeddingSet(std::move(name), std::move(points), std::move(labels));
}

ToyDataset make_dataset(DatasetKind kind, std::size_t n_train, std::size_t n_test, double sigma, std::uint64_t seed) {
  if (n_train < 2 || n_test < 2) throw UsageError("toy datasets need at least two train and two test rows");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw UsageError("toy sigma must be positive");
  std::mt19937_64 train_rng(derive_seed(seed, 1));
  std::mt19937_64 test_rng(derive_seed(seed, 2));
  EmbeddingSet train = sample_toy(kind, n_train, sigma, train_rng, "train");
  EmbeddingSet test = sample_toy(kind, n_test, sigma, test_rng, "test");
  return ToyDataset{kind, std::move(train), std::move(test), sigma, seed};
}

EmbeddingSet label_by_nearest_component(const EmbeddingSet& points, DatasetKind kind) {
  const Eigen::MatrixXd centers = component_centers(kind);
  if (centers.rows() == 0) return points;
  std::vector<Label> labels(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto r = points.row(i);
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
      const double dx = r[0] - centers(c, 0);
      const double dy = r[1] - centers(c, 1);
      const double d = dx * dx + dy * dy;
      if (d < best) {
        best = d;
        labels[i] = static_cast<Label>(c);
      }
    }
  }
  return EmbeddingSet(points.name(), points.vectors(), std::move(labels));
}

}  // namespace memguard::gan
