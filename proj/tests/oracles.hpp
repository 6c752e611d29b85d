#pragma once

// Slow reference implementations used only by tests. None of these call into
// the library code paths they check.

#include "memguard/embedding_set.hpp"
#include "memguard/mlp.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using memguard::RowMatrixF;

inline double euclidean(const RowMatrixF& a, Eigen::Index i, const RowMatrixF& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double d = static_cast<double>(a(i, k)) - static_cast<double>(b(j, k));
    s += d * d;
  }
  return std::sqrt(s);
}

inline double cosine(const RowMatrixF& a, Eigen::Index i, const RowMatrixF& b, Eigen::Index j) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double x = a(i, k);
    const double y = b(j, k);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  return std::clamp(1.0 - dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 2.0);
}

struct BruteNN {
  std::vector<double> distances;
  std::vector<std::size_t> indices;
};

// O(M*N*K) double loop; strict < keeps the lowest index on ties.
inline BruteNN brute_nn(const RowMatrixF& query, const RowMatrixF& ref, bool use_cosine, bool exclude_self = false) {
  BruteNN out;
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    for (Eigen::Index j = 0; j < ref.rows(); ++j) {
      if (exclude_self && i == j) continue;
      const double d = use_cosine ? cosine(query, i, ref, j) : euclidean(query, i, ref, j);
      if (d < best) {
        best = d;
        best_j = static_cast<std::size_t>(j);
      }
    }
    out.distances.push_back(best);
    out.indices.push_back(best_j);
  }
  return out;
}

// U = #(a_i > b_j) + 0.5 #(a_i == b_j) by direct pair enumeration.
inline double pair_count_u(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double x : a)
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  return u;
}

// Textbook two-pass covariance with divisor n-1.
inline Eigen::MatrixXd two_pass_covariance(const RowMatrixF& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k = x.cols();
  std::vector<double> mean(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) mean[static_cast<std::size_t>(j)] += x(i, j);
  for (auto& m : mean) m /= static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b)
        cov(a, b) += (x(i, a) - mean[static_cast<std::size_t>(a)]) * (x(i, b) - mean[static_cast<std::size_t>(b)]);
  return cov / static_cast<double>(n - 1);
}

// Frechet distance via the eigenvalues of the non-symmetric product S_a S_b.
inline double frechet_general_eigen(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& s_a, const Eigen::VectorXd& mu_b,
                                    const Eigen::MatrixXd& s_b) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(s_a * s_b, false);
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr_sqrt += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  return (mu_a - mu_b).squaredNorm() + s_a.trace() + s_b.trace() - 2.0 * tr_sqrt;
}

inline Eigen::MatrixXd random_psd(Eigen::Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(k, k + 2);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = n(rng);
  return a * a.transpose() / static_cast<double>(k);
}

// Central differences of `loss` with respect to every parameter of `net`.
inline memguard::gan::MlpParams finite_difference(memguard::gan::MlpParams net,
                                                  const std::function<double(const memguard::gan::MlpParams&)>& loss,
                                                  double eps = 1e-4) {
  memguard::gan::MlpParams g = net.zeros_like();
  auto probe = [&](double& slot, double& out) {
    const double saved = slot;
    slot = saved + eps;
    const double up = loss(net);
    slot = saved - eps;
    const double down = loss(net);
    slot = saved;
    out = (up - down) / (2.0 * eps);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (Eigen::Index i = 0; i < net.layers[l].weight.size(); ++i) probe(net.layers[l].weight.data()[i], g.layers[l].weight.data()[i]);
    for (Eigen::Index i = 0; i < net.layers[l].bias.size(); ++i) probe(net.layers[l].bias.data()[i], g.layers[l].bias.data()[i]);
  }
  return g;
}

// Smallest |pre-activation| over hidden units for inputs `x` (one sample per
// column). Central differences are only valid when no unit sits within reach
// of a leaky-ReLU kink.
inline double min_hidden_preactivation(const memguard::gan::MlpParams& net, Eigen::MatrixXd x) {
  double smallest = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
    Eigen::MatrixXd pre = net.layers[l].weight * x;
    for (Eigen::Index j = 0; j < pre.cols(); ++j) pre.col(j) += net.layers[l].bias;
    smallest = std::min(smallest, pre.cwiseAbs().minCoeff());
    x = pre.unaryExpr([](double v) { return v > 0.0 ? v : 0.2 * v; });
  }
  return smallest;
}

// Max over entries of |a-b| / max(|a|, |b|, floor).
inline double max_relative_error(const memguard::gan::MlpParams& a, const memguard::gan::MlpParams& b, double floor = 1e-6) {
  double worst = 0.0;
  auto cmp = [&](const double* x, const double* y, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double denom = std::max({std::abs(x[i]), std::abs(y[i]), floor});
      worst = std::max(worst, std::abs(x[i] - y[i]) / denom);
    }
  };
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    cmp(a.layers[l].weight.data(), b.layers[l].weight.data(), a.layers[l].weight.size());
    cmp(a.layers[l].bias.data(), b.layers[l].bias.data(), a.layers[l].bias.size());
  }
  return worst;
}

inline RowMatrixF random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<float> n(0.0f, static_cast<float>(scale));
  RowMatrixF m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace oracle
