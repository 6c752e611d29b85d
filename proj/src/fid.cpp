#include "memguard/fid.hpp"

#include "memguard/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace memguard {

namespace {

Eigen::VectorXd clamped_eigenvalues(const Eigen::VectorXd& values, const char* what) {
  Eigen::VectorXd out = values;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out(i) < -kPsdTolerance) {
      throw NumericalError(std::string(what) + " is not positive semidefinite (eigenvalue " + std::to_string(out(i)) + ")");
    }
    out(i) = std::max(out(i), 0.0);
  }
  return out;
}

Eigen::MatrixXd symmetric(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

GaussianStats gaussian_stats(const EmbeddingSet& set) {
  const auto n = static_cast<Eigen::Index>(set.rows());
  if (n < 2) throw UsageError("Gaussian statistics need at least two rows in '" + set.name() + "'");
  const Eigen::MatrixXd x = set.vectors().cast<double>();
  GaussianStats s;
  s.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
  s.covariance = symmetric(centered.transpose() * centered) / static_cast<double>(n - 1);
  s.n = static_cast<std::size_t>(n);
  s.name = set.name();
  return s;
}

FidReport frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size()) {
    throw UsageError("Gaussian statistics differ in dimension (" + std::to_string(a.mean.size()) + " vs " +
                     std::to_string(b.mean.size()) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_a(symmetric(a.covariance));
  const Eigen::VectorXd lambda_a = clamped_eigenvalues(eig_a.eigenvalues(), "covariance of the first set");
  const Eigen::MatrixXd sqrt_a =
      eig_a.eigenvectors() * lambda_a.cwiseSqrt().asDiagonal() * eig_a.eigenvectors().transpose();
  // b must be PSD too; its eigenvalues are otherwise unused.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_b(symmetric(b.covariance), Eigen::EigenvaluesOnly);
  clamped_eigenvalues(eig_b.eigenvalues(), "covariance of the second set");

  double tr_sqrt = 0.0;
  if (a.covariance == b.covariance) {
    // Equal PSD covariances: the square root of S*S is S itself.
    tr_sqrt = a.covariance.trace();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_m(symmetric(sqrt_a * b.covariance * sqrt_a), Eigen::EigenvaluesOnly);
    tr_sqrt = clamped_eigenvalues(eig_m.eigenvalues(), "covariance product").cwiseSqrt().sum();
  }

  FidReport r;
  r.mean_term = (a.mean - b.mean).squaredNorm();
  r.trace_term = a.covariance.trace() + b.covariance.trace() - 2.0 * tr_sqrt;
  r.fid = r.mean_term + r.trace_term;
  if (r.fid < 0.0) {
    if (r.fid < -1e-6) throw NumericalError("Frechet distance is negative beyond rounding: " + std::to_string(r.fid));
    r.fid = 0.0;
  }
  r.set_a = a.name;
  r.set_b = b.name;
  return r;
}

}  // namespace memguard
