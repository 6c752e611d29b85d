#include "memguard/nn_distance.hpp"

#include "memguard/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace memguard {

namespace {

using RowMatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr Eigen::Index kQueryBlock = 64;
constexpr Eigen::Index kReferenceBlock = 512;
constexpr double kEps = std::numeric_limits<double>::epsilon();

std::span<const float> row_of(const RowMatrixF& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

void require_nonzero_rows(const RowMatrixF& m, const char* which) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    bool all_zero = true;
    for (Eigen::Index j = 0; j < m.cols() && all_zero; ++j) all_zero = m(i, j) == 0.0f;
    if (all_zero) throw ValidationError(std::string("zero-norm ") + which + " row under cosine metric", static_cast<std::size_t>(i));
  }
}

// Converts rows [begin, begin+count) to double; for cosine the rows are also
// normalized. `sq_norms` receives squared norms of the unnormalized rows.
RowMatrixD to_double_block(const RowMatrixF& m, Eigen::Index begin, Eigen::Index count, Metric metric,
                           Eigen::VectorXd& sq_norms) {
  RowMatrixD out = m.middleRows(begin, count).cast<double>();
  sq_norms = out.rowwise().squaredNorm();
  if (metric == Metric::cosine) {
    for (Eigen::Index i = 0; i < count; ++i) out.row(i) /= std::sqrt(sq_norms(i));
  }
  return out;
}

struct Candidate {
  double lower;
  Eigen::Index index;
};

// Exact search for query rows [q_begin, q_end).
void search_range(const RowMatrixF& query, const RowMatrixF& reference, Metric metric, bool exclude_self,
                  Eigen::Index q_begin, Eigen::Index q_end, NeighborList& out) {
  const Eigen::Index n_ref = reference.rows();
  const double k = static_cast<double>(query.cols());
  // Screening error bounds relative to metric_distance; both are generous
  // multiples of the worst-case rounding of a length-K dot product.
  const double cosine_tol = 8.0 * (k + 8.0) * kEps;
  const double euclid_rel_tol = 8.0 * (k + 4.0) * kEps;

  std::vector<std::vector<Candidate>> candidates(static_cast<std::size_t>(kQueryBlock));
  std::vector<double> best_upper(static_cast<std::size_t>(kQueryBlock));
  std::vector<std::size_t> last_prune_size(static_cast<std::size_t>(kQueryBlock));

  for (Eigen::Index qb = q_begin; qb < q_end; qb += kQueryBlock) {
    const Eigen::Index nq = std::min(kQueryBlock, q_end - qb);
    Eigen::VectorXd q_sq;
    RowMatrixD q = to_double_block(query, qb, nq, metric, q_sq);
    for (Eigen::Index i = 0; i < nq; ++i) {
      candidates[static_cast<std::size_t>(i)].clear();
      best_upper[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();
      last_prune_size[static_cast<std::size_t>(i)] = 0;
    }

    for (Eigen::Index rb = 0; rb < n_ref; rb += kReferenceBlock) {
      const Eigen::Index nr = std::min(kReferenceBlock, n_ref - rb);
      Eigen::VectorXd r_sq;
      RowMatrixD r = to_double_block(reference, rb, nr, metric, r_sq);
      const Eigen::MatrixXd dots = q * r.transpose();

      for (Eigen::Index i = 0; i < nq; ++i) {
        const Eigen::Index qi = qb + i;
        auto& cand = candidates[static_cast<std::size_t>(i)];
        double& upper = best_upper[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < nr; ++j) {
          const Eigen::Index rj = rb + j;
          if (exclude_self && rj == qi) continue;
          double approx, tol;
          if (metric == Metric::cosine) {
            approx = 1.0 - dots(i, j);
            tol = cosine_tol;
          } else {
            approx = q_sq(i) + r_sq(j) - 2.0 * dots(i, j);
            tol = euclid_rel_tol * (q_sq(i) + r_sq(j));
          }
          const double lower = approx - tol;
          if (lower > upper) continue;
          upper = std::min(upper, approx + tol);
          cand.push_back({lower, rj});
        }
        auto& pruned_at = last_prune_size[static_cast<std::size_t>(i)];
        if (cand.size() > 2 * pruned_at + 64) {
          std::erase_if(cand, [upper](const Candidate& c) { return c.lower > upper; });
          pruned_at = cand.size();
        }
      }
    }

    for (Eigen::Index i = 0; i < nq; ++i) {
      const Eigen::Index qi = qb + i;
      const auto& cand = candidates[static_cast<std::size_t>(i)];
      const double upper = best_upper[static_cast<std::size_t>(i)];
      double best = std::numeric_limits<double>::infinity();
      Eigen::Index best_idx = -1;
      const auto qrow = row_of(query, qi);
      for (const auto& c : cand) {
        if (c.lower > upper) continue;
        const double d = metric_distance(qrow, row_of(reference, c.index), metric);
        if (d < best || (d == best && c.index < best_idx)) {
          best = d;
          best_idx = c.index;
        }
      }
      out.distances[static_cast<std::size_t>(qi)] = best;
      out.indices[static_cast<std::size_t>(qi)] = static_cast<std::size_t>(best_idx);
    }
  }
}

std::size_t pick_threads(const SearchOptions& options, Eigen::Index m, Eigen::Index n, Eigen::Index k) {
  const Eigen::Index blocks = (m + kQueryBlock - 1) / kQueryBlock;
  std::size_t threads = options.threads;
  if (threads == 0) {
    const double work = static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(k);
    threads = work < 4e7 ? 1 : std::max(1u, std::thread::hardware_concurrency());
  }
  return std::clamp<std::size_t>(threads, 1, static_cast<std::size_t>(std::max<Eigen::Index>(blocks, 1)));
}

}  // namespace

std::string_view to_string(Metric metric) { return metric == Metric::cosine ? "cosine" : "euclidean"; }

Metric parse_metric(std::string_view text) {
  if (text == "cosine") return Metric::cosine;
  if (text == "euclidean") return Metric::euclidean;
  throw UsageError("unknown metric '" + std::string(text) + "' (expected cosine or euclidean)");
}

double metric_distance(std::span<const float> u, std::span<const float> v, Metric metric) {
  const std::size_t k = std::min(u.size(), v.size());
  if (metric == Metric::euclidean) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double d = static_cast<double>(u[j]) - static_cast<double>(v[j]);
      s += d * d;
    }
    return std::sqrt(s);
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double a = u[j];
    const double b = v[j];
    dot += a * b;
    nu += a * a;
    nv += b * b;
  }
  const double d = 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(d, 0.0, 2.0);
}

NeighborList nn_search(const RowMatrixF& query, const RowMatrixF& reference, Metric metric, bool exclude_self,
                       const SearchOptions& options) {
  if (query.cols() != reference.cols()) {
    throw UsageError("dimension mismatch: query has " + std::to_string(query.cols()) + " columns, reference has " +
                     std::to_string(reference.cols()));
  }
  if (query.rows() < 1 || reference.rows() < 1) throw UsageError("nearest-neighbor search needs non-empty sets");
  if (exclude_self && (query.rows() != reference.rows() || reference.rows() < 2)) {
    throw UsageError("self-excluding search needs one set with at least two rows");
  }
  if (metric == Metric::cosine) {
    require_nonzero_rows(query, "query");
    if (!exclude_self) require_nonzero_rows(reference, "reference");
  }

  const Eigen::Index m = query.rows();
  NeighborList out;
  out.distances.resize(static_cast<std::size_t>(m));
  out.indices.resize(static_cast<std::size_t>(m));

  const std::size_t threads = pick_threads(options, m, reference.rows(), query.cols());
  if (threads == 1) {
    search_range(query, reference, metric, exclude_self, 0, m, out);
    return out;
  }
  // Split on query-block boundaries; each row is computed independently, so
  // results do not depend on the thread count.
  const Eigen::Index blocks = (m + kQueryBlock - 1) / kQueryBlock;
  const Eigen::Index per_thread = (blocks + static_cast<Eigen::Index>(threads) - 1) / static_cast<Eigen::Index>(threads);
  std::vector<std::jthread> workers;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    const Eigen::Index begin = static_cast<Eigen::Index>(t) * per_thread * kQueryBlock;
    const Eigen::Index end = std::min(m, begin + per_thread * kQueryBlock);
    if (begin >= end) break;
    workers.emplace_back([&, begin, end, t] {
      try {
        search_range(query, reference, metric, exclude_self, begin, end, out);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  workers.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

DistanceSummary DistanceProfile::summary() const {
  DistanceSummary s;
  s.count = distances.size();
  if (distances.empty()) return s;
  std::vector<double> sorted = distances;
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.mean = std::accumulate(distances.begin(), distances.end(), 0.0) / static_cast<double>(s.count);
  const std::size_t mid = s.count / 2;
  s.median = s.count % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return s;
}

DistanceProfile nn_distance(const EmbeddingSet& query, const EmbeddingSet& reference, Metric metric,
                            const SearchOptions& options) {
  NeighborList nn = nn_search(query.vectors(), reference.vectors(), metric, false, options);
  return DistanceProfile{std::move(nn.distances), std::move(nn.indices), query.name(), reference.name()};
}

double loo_mean_distance(const EmbeddingSet& train, Metric metric, const SearchOptions& options) {
  if (train.rows() < 2) throw UsageError("leave-one-out mean distance needs at least two rows");
  NeighborList nn = nn_search(train.vectors(), train.vectors(), metric, true, options);
  double sum = 0.0;
  for (double d : nn.distances) sum += d;
  return sum / static_cast<double>(nn.distances.size());
}

std::vector<HistogramBin> histogram(const DistanceProfile& profile, double bin_width) {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw UsageError("histogram bin width must be positive");
  if (profile.distances.empty()) return {};
  const double max = *std::max_element(profile.distances.begin(), profile.distances.end());
  const auto n_bins = static_cast<std::size_t>(std::floor(max / bin_width)) + 1;
  std::vector<HistogramBin> bins(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) bins[b].left = static_cast<double>(b) * bin_width;
  for (double d : profile.distances) {
    auto b = static_cast<std::size_t>(std::floor(d / bin_width));
    bins[std::min(b, n_bins - 1)].count++;
  }
  return bins;
}

std::string profile_to_csv(const DistanceProfile& profile) {
  std::string out = "query_index,nn_index,distance\n";
  char buf[96];
  for (std::size_t i = 0; i < profile.distances.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g\n", i, profile.nn_indices[i], profile.distances[i]);
    out += buf;
  }
  return out;
}

std::string histogram_to_csv(const std::vector<HistogramBin>& bins) {
  std::string out = "bin_left,count\n";
  char buf[96];
  for (const auto& b : bins) {
    std::snprintf(buf, sizeof(buf), "%.10g,%zu\n", b.left, b.count);
    out += buf;
  }
  return out;
}

}  // namespace memguard
