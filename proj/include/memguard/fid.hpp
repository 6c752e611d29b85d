#pragma once

#include "memguard/embedding_set.hpp"

#include <Eigen/Core>

#include <string>

namespace memguard {

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // unbiased, divisor n - 1
  std::size_t n = 0;
  std::string name;
};

struct FidReport {
  double fid = 0.0;
  double mean_term = 0.0;   // |mu_a - mu_b|^2
  double trace_term = 0.0;  // Tr(S_a + S_b - 2 (S_a S_b)^{1/2})
  std::string set_a;
  std::string set_b;
};

// Eigenvalues above this negative threshold are treated as rounding noise and clamped to zero.
inline constexpr double kPsdTolerance = 1e-8;

GaussianStats gaussian_stats(const EmbeddingSet& set);

/// Frechet distance between two Gaussians.
///
/// The trace of (S_a S_b)^{1/2} is taken from the symmetric matrix
/// S_a^{1/2} S_b S_a^{1/2}, which has the same eigenvalues as S_a S_b.
/// Throws NumericalError when either covariance (or the symmetrized product)
/// has an eigenvalue below -kPsdTolerance.
FidReport frechet_distance(const GaussianStats& a, const GaussianStats& b);

inline FidReport fid(const EmbeddingSet& a, const EmbeddingSet& b) {
  return frechet_distance(gaussian_stats(a), gaussian_stats(b));
}

}  // namespace memguard
