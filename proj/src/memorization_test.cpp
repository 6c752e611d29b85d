#include "memguard/memorization_test.hpp"

#include "memguard/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace memguard {

namespace {

std::size_t nearest_centroid(const EmbeddingSet& set, std::size_t row, const Eigen::MatrixXd& centroids) {
  const auto r = set.row(row);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    double d = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double diff = static_cast<double>(r[j]) - centroids(c, static_cast<Eigen::Index>(j));
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

CellPartition kmeans_partition(const EmbeddingSet& test, const EmbeddingSet& gen, const KMeans& spec) {
  const std::size_t n = test.rows();
  if (spec.k < 1 || spec.k > n) {
    throw UsageError("k-means needs 1 <= k <= test rows (k=" + std::to_string(spec.k) + ", rows=" + std::to_string(n) + ")");
  }
  const auto k = static_cast<Eigen::Index>(spec.k);
  const auto dims = static_cast<Eigen::Index>(test.dims());

  std::mt19937_64 rng(spec.seed);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> init;
  std::sample(all.begin(), all.end(), std::back_inserter(init), spec.k, rng);

  Eigen::MatrixXd centroids(k, dims);
  for (Eigen::Index c = 0; c < k; ++c) {
    centroids.row(c) = test.vectors().row(static_cast<Eigen::Index>(init[static_cast<std::size_t>(c)])).cast<double>();
  }

  std::vector<std::size_t> assign(n, spec.k);
  for (int iter = 0; iter < kKMeansMaxIterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest_centroid(test, i, centroids);
      changed |= c != assign[i];
      assign[i] = c;
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, dims);
    std::vector<std::size_t> counts(spec.k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(assign[i])) += test.vectors().row(static_cast<Eigen::Index>(i)).cast<double>();
      counts[assign[i]]++;
    }
    // An emptied cluster keeps its previous centroid.
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
  }

  CellPartition p;
  p.kind = CellPartition::Kind::kmeans;
  p.num_cells = spec.k;
  p.cell_of_test = std::move(assign);
  p.cell_of_gen.resize(gen.rows());
  for (std::size_t i = 0; i < gen.rows(); ++i) p.cell_of_gen[i] = nearest_centroid(gen, i, centroids);
  p.centroids = std::move(centroids);
  return p;
}

CellPartition label_partition(const EmbeddingSet& test, const EmbeddingSet& gen) {
  if (!test.has_labels() || !gen.has_labels()) {
    throw UsageError("label cells need labeled test and generated sets; use kmeans:K for unlabeled data");
  }
  CellPartition p;
  p.kind = CellPartition::Kind::by_label;
  Label max_label = 0;
  for (Label l : *test.labels()) max_label = std::max(max_label, l);
  for (Label l : *gen.labels()) max_label = std::max(max_label, l);
  p.num_cells = static_cast<std::size_t>(max_label) + 1;
  p.cell_of_test.assign(test.labels()->begin(), test.labels()->end());
  p.cell_of_gen.assign(gen.labels()->begin(), gen.labels()->end());
  return p;
}

}  // namespace

MannWhitneyResult mann_whitney_z(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw UsageError("Mann-Whitney test needs two non-empty samples");
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;

  // Pooled values tagged with their origin; midranks handle ties.
  std::vector<std::pair<double, bool>> pooled;
  pooled.reserve(n);
  for (double v : a) pooled.emplace_back(v, true);
  for (double v : b) pooled.emplace_back(v, false);
  std::sort(pooled.begin(), pooled.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

  double rank_sum_a = 0.0;
  double tie_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t a_in_group = 0;
    while (j < n && pooled[j].first == pooled[i].first) {
      a_in_group += pooled[j].second ? 1 : 0;
      ++j;
    }
    const double t = static_cast<double>(j - i);
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum_a += midrank * static_cast<double>(a_in_group);
    tie_sum += t * t * t - t;
    i = j;
  }

  const double dna = static_cast<double>(na);
  const double dnb = static_cast<double>(nb);
  const double dn = static_cast<double>(n);
  // Counts pairs with a_i > b_j (ties as one half).
  MannWhitneyResult r;
  r.u = rank_sum_a - dna * (dna + 1.0) / 2.0;
  const double mu = dna * dnb / 2.0;
  const double var = n > 1 ? dna * dnb / 12.0 * ((dn + 1.0) - tie_sum / (dn * (dn - 1.0))) : 0.0;
  if (var <= 0.0) {
    r.degenerate_variance = true;
    r.z = 0.0;
  } else {
    r.z = (r.u - mu) / std::sqrt(var);
  }
  return r;
}

PartitionSpec parse_partition_spec(std::string_view text, std::uint64_t seed) {
  if (text == "labels") return ByLabel{};
  constexpr std::string_view prefix = "kmeans:";
  if (text.starts_with(prefix)) {
    auto digits = text.substr(prefix.size());
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc() && ptr == digits.data() + digits.size() && k >= 1) return KMeans{k, seed};
  }
  throw UsageError("invalid cell specification '" + std::string(text) + "' (expected labels or kmeans:K)");
}

CellPartition partition(const EmbeddingSet& test, const EmbeddingSet& gen, const PartitionSpec& spec) {
  if (test.dims() != gen.dims()) throw UsageError("test and generated sets differ in dimension");
  if (std::holds_alternative<ByLabel>(spec)) return label_partition(test, gen);
  return kmeans_partition(test, gen, std::get<KMeans>(spec));
}

CtReport ct_from_distances(std::span<const double> test_distances, std::span<const double> gen_distances,
                           const CellPartition& cells) {
  if (test_distances.size() != cells.cell_of_test.size() || gen_distances.size() != cells.cell_of_gen.size()) {
    throw UsageError("distance lists do not match the partition sizes");
  }
  std::vector<std::vector<double>> test_by_cell(cells.num_cells), gen_by_cell(cells.num_cells);
  for (std::size_t i = 0; i < test_distances.size(); ++i) test_by_cell.at(cells.cell_of_test[i]).push_back(test_distances[i]);
  for (std::size_t i = 0; i < gen_distances.size(); ++i) gen_by_cell.at(cells.cell_of_gen[i]).push_back(gen_distances[i]);

  CtReport report;
  std::size_t surviving_test_rows = 0;
  for (std::size_t c = 0; c < cells.num_cells; ++c) {
    const auto& t = test_by_cell[c];
    const auto& g = gen_by_cell[c];
    if (t.empty() && g.empty()) continue;
    if (t.empty() || g.empty()) {
      report.dropped_cells.push_back(c);
      report.warnings.push_back("cell " + std::to_string(c) + " dropped: " + std::to_string(t.size()) + " test rows, " +
                                std::to_string(g.size()) + " generated rows");
      continue;
    }
    const auto mw = mann_whitney_z(g, t);
    report.per_cell.push_back({c, g.size(), t.size(), mw.u, mw.z, 0.0, mw.degenerate_variance});
    surviving_test_rows += t.size();
  }
  if (report.per_cell.empty()) throw UsageError("no cell has both test and generated rows");

  for (auto& cell : report.per_cell) {
    cell.weight = static_cast<double>(cell.n_test) / static_cast<double>(surviving_test_rows);
    report.ct += cell.weight * cell.z;
  }
  return report;
}

CtReport ct_score(const EmbeddingSet& train, const EmbeddingSet& test, const EmbeddingSet& gen, Metric metric,
                  const PartitionSpec& spec, const SearchOptions& options) {
  if (train.dims() != test.dims() || train.dims() != gen.dims()) {
    throw UsageError("train, test and generated sets must share the embedding dimension");
  }
  const CellPartition cells = partition(test, gen, spec);
  const DistanceProfile test_profile = nn_distance(test, train, metric, options);
  const DistanceProfile gen_profile = nn_distance(gen, train, metric, options);
  CtReport report = ct_from_distances(test_profile.distances, gen_profile.distances, cells);
  report.metric = metric;
  report.train_name = train.name();
  report.test_name = test.name();
  report.gen_name = gen.name();
  return report;
}

}  // namespace memguard
