#pragma once

#include "memguard/embedding_set.hpp"
#include "memguard/errors.hpp"
#include "memguard/fid.hpp"
#include "memguard/memorization_test.hpp"
#include "memguard/mlp.hpp"
#include "memguard/nn_distance.hpp"
#include "memguard/toy_data.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace memguard::gan {

struct TrainerConfig {
  double tau = 0.0;
  Metric metric = Metric::euclidean;
  std::size_t batch_size = 64;
  std::size_t total_steps = 20000;
  AdamConfig adam{};
  std::size_t d_steps_per_g = 5;
  std::size_t max_rejection_retries = 100;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1000;
  std::size_t eval_samples = 8192;
  // When false the generator batch is drawn straight from q(z); the rest of
  // the loop, including RNG consumption, is unchanged.
  bool use_rejection = true;
  // Worker threads for NN search; 0 picks automatically. Results do not
  // depend on it.
  std::size_t nn_threads = 0;

  void validate() const;
};

struct MetricLogEntry {
  std::uint64_t step = 0;
  double fid = 0.0;
  double ct = 0.0;
  double mean_nn_distance = 0.0;
  // Fraction of unrejected generator samples with NN distance <= tau.
  double rejection_rate = 0.0;
  // Fallbacks in generator updates since the previous entry.
  std::uint64_t fallback_count = 0;
};

struct RejectionCounters {
  std::uint64_t generator_samples = 0;
  std::uint64_t fallbacks = 0;
  std::uint64_t retries = 0;
  // Samples used in a generator update with d <= tau that were not fallbacks.
  std::uint64_t violations = 0;
};

struct TrainerState {
  TrainerConfig config;
  std::uint64_t step = 0;
  MlpParams generator;
  MlpParams discriminator;
  AdamState generator_opt;
  AdamState discriminator_opt;
  std::vector<MetricLogEntry> log;
  std::mt19937_64 rng;
  std::normal_distribution<double> normal{0.0, 1.0};
  RejectionCounters counters;
  std::uint64_t fallbacks_since_log = 0;
};

class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, std::shared_ptr<const TrainerState> last_good)
      : NumericalError(what), last_good_(std::move(last_good)) {}
  const TrainerState& last_good_state() const { return *last_good_; }

 private:
  std::shared_ptr<const TrainerState> last_good_;
};

using GeneratorMap = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

struct RejectionOptions {
  double tau = 0.0;
  Metric metric = Metric::euclidean;
  std::size_t max_retries = 100;
  std::size_t batch_size = 64;
  std::size_t latent_dim = 2;
  bool record_candidates = false;
  std::size_t nn_threads = 0;
};

struct RejectionBatch {
  Eigen::MatrixXd z;  // latent_dim x batch
  Eigen::MatrixXd x;  // output_dim x batch
  std::vector<double> distances;
  std::vector<bool> is_fallback;
  std::size_t retries_used = 0;
  std::size_t fallback_count = 0;
  // Every candidate distance seen per sample, when requested.
  std::vector<std::vector<double>> candidate_distances;
};

/// Draws a generator batch in which every sample has NN distance to `train`
/// strictly above tau. Latents are drawn column by column; samples still
/// pending after a round are redrawn together in the next round, so with no
/// rejections the RNG use equals one plain draw of the batch. After
/// 1 + max_retries failed draws a sample falls back to its largest-distance
/// candidate.
RejectionBatch rejection_sample(const GeneratorMap& generator, const EmbeddingSet& train,
                                const RejectionOptions& options, std::mt19937_64& rng,
                                std::normal_distribution<double>& normal);

Eigen::MatrixXd draw_latents(std::size_t latent_dim, std::size_t n, std::mt19937_64& rng,
                             std::normal_distribution<double>& normal);

TrainerState init_state(const TrainerConfig& config);

/// Runs outer steps until state.step == config.total_steps. Each step makes
/// d_steps_per_g discriminator updates on unrejected fakes, then one
/// generator update on a rejection-sampled batch. Metric log entries are
/// evaluated without rejection, using an RNG stream separate from training.
void run_training(TrainerState& state, const ToyDataset& data);

TrainerState train(const TrainerConfig& config, const ToyDataset& data);

struct EvalResult {
  FidReport fid;
  CtReport ct;
  DistanceProfile gen_profile;
  DistanceProfile test_profile;
  double rejection_rate = 0.0;
};

/// Scores a set of generated points against the dataset: FID versus test,
/// C_T with cells given by the nearest mixture component (8 k-means cells
/// for two_moons), and both NN distance profiles.
EvalResult evaluate_points(const EmbeddingSet& gen, const ToyDataset& data, Metric metric, double tau = 0.0,
                           const SearchOptions& search = {});

EvalResult evaluate(const TrainerState& state, const ToyDataset& data, std::size_t n_samples, std::uint64_t eval_seed);

// Samples the generator without rejection.
EmbeddingSet sample_generator(const MlpParams& generator, std::size_t n, std::mt19937_64& rng, std::string name = "gen");

std::string metric_log_csv(const std::vector<MetricLogEntry>& log);

std::string encode_checkpoint(const TrainerState& state);

struct Checkpoint {
  std::uint64_t step = 0;
  MlpParams generator;
  MlpParams discriminator;
  AdamState generator_opt;
  AdamState discriminator_opt;
  std::string rng_state;
};

Checkpoint decode_checkpoint(const std::string& bytes);

}  // namespace memguard::gan
