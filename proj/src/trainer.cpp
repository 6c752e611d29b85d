#include "memguard/trainer.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace memguard::gan {

namespace {

RowMatrixF to_rows(const Eigen::MatrixXd& columns) { return columns.transpose().cast<float>(); }

std::uint64_t eval_seed_for(const TrainerConfig& config, std::uint64_t step) {
  return derive_seed(config.seed, 1000 + step);
}

void append_log_entry(TrainerState& state, const ToyDataset& data) {
  const EvalResult r = evaluate(state, data, state.config.eval_samples, eval_seed_for(state.config, state.step));
  MetricLogEntry e;
  e.step = state.step;
  e.fid = r.fid.fid;
  e.ct = r.ct.ct;
  e.mean_nn_distance = r.gen_profile.summary().mean;
  e.rejection_rate = r.rejection_rate;
  e.fallback_count = state.fallbacks_since_log;
  state.fallbacks_since_log = 0;
  state.log.push_back(e);
}

// Binary helpers for the checkpoint container.
void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::string& out, std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }

template <typename Derived>
void put_array(std::string& out, const Eigen::PlainObjectBase<Derived>& a) {
  put_u32(out, static_cast<std::uint32_t>(a.rows()));
  put_u32(out, static_cast<std::uint32_t>(a.cols()));
  out.append(reinterpret_cast<const char*>(a.data()), static_cast<std::size_t>(a.size()) * sizeof(double));
}

void put_params(std::string& out, const MlpParams& p) {
  put_u32(out, static_cast<std::uint32_t>(p.layers.size()));
  for (const auto& l : p.layers) {
    put_array(out, l.weight);
    put_array(out, l.bias);
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("truncated checkpoint", bytes_.size());
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }
  template <typename M>
  M array() {
    const std::uint32_t rows = u32();
    const std::uint32_t cols = u32();
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    need(n * sizeof(double));
    M m(rows, cols);
    if constexpr (M::ColsAtCompileTime == 1) {
      if (cols != 1) throw FormatError("bias array must have one column", pos_);
      m.resize(rows);
    }
    std::memcpy(m.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return m;
  }
  MlpParams params() {
    MlpParams p;
    const std::uint32_t n_layers = u32();
    if (n_layers > 64) throw FormatError("implausible layer count", pos_ - 4);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
      DenseLayer l;
      l.weight = array<Eigen::MatrixXd>();
      l.bias = array<Eigen::VectorXd>();
      p.layers.push_back(std::move(l));
    }
    return p;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

constexpr char kCheckpointMagic[4] = {'M', 'G', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void TrainerConfig::validate() const {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw UsageError("tau must be a finite value >= 0");
  if (metric == Metric::cosine && tau >= 2.0) throw UsageError("tau must be below 2 under the cosine metric");
  if (batch_size < 1) throw UsageError("batch size must be positive");
  if (d_steps_per_g < 1) throw UsageError("discriminator steps per generator step must be positive");
  if (eval_every < 1) throw UsageError("eval interval must be positive");
  if (eval_samples < 2) throw UsageError("evaluation needs at least two samples");
  if (!(adam.lr > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw UsageError("invalid Adam hyperparameters");
  }
}

Eigen::MatrixXd draw_latents(std::size_t latent_dim, std::size_t n, std::mt19937_64& rng,
                             std::normal_distribution<double>& normal) {
  Eigen::MatrixXd z(static_cast<Eigen::Index>(latent_dim), static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < z.cols(); ++c)
    for (Eigen::Index r = 0; r < z.rows(); ++r) z(r, c) = normal(rng);
  return z;
}

RejectionBatch rejection_sample(const GeneratorMap& generator, const EmbeddingSet& train,
                                const RejectionOptions& options, std::mt19937_64& rng,
                                std::normal_distribution<double>& normal) {
  if (!(options.tau >= 0.0)) throw UsageError("tau must be >= 0");
  if (options.batch_size < 1) throw UsageError("batch size must be positive");
  const auto batch = static_cast<Eigen::Index>(options.batch_size);
  const auto latent = static_cast<Eigen::Index>(options.latent_dim);

  RejectionBatch out;
  out.z.resize(latent, batch);
  out.distances.assign(options.batch_size, -1.0);
  out.is_fallback.assign(options.batch_size, false);
  if (options.record_candidates) out.candidate_distances.resize(options.batch_size);

  std::vector<Eigen::Index> pending(options.batch_size);
  for (Eigen::Index i = 0; i < batch; ++i) pending[static_cast<std::size_t>(i)] = i;
  std::vector<std::size_t> attempts(options.batch_size, 0);
  // Best (largest distance) candidate per sample, for the fallback.
  Eigen::MatrixXd best_z(latent, batch);
  Eigen::MatrixXd best_x;
  std::size_t draws = 0;

  while (!pending.empty()) {
    const Eigen::MatrixXd z = draw_latents(options.latent_dim, pending.size(), rng, normal);
    const Eigen::MatrixXd x = generator(z);
    if (best_x.size() == 0) {
      best_x.resize(x.rows(), batch);
      out.x.resize(x.rows(), batch);
    }
    const NeighborList nn = nn_search(to_rows(x), train.vectors(), options.metric, false, SearchOptions{options.nn_threads});
    draws += pending.size();

    std::vector<Eigen::Index> still_pending;
    for (std::size_t p = 0; p < pending.size(); ++p) {
      const Eigen::Index i = pending[p];
      const auto col = static_cast<Eigen::Index>(p);
      const double d = nn.distances[p];
      const auto si = static_cast<std::size_t>(i);
      attempts[si]++;
      if (options.record_candidates) out.candidate_distances[si].push_back(d);
      if (d > options.tau) {
        out.z.col(i) = z.col(col);
        out.x.col(i) = x.col(col);
        out.distances[si] = d;
        continue;
      }
      if (d > out.distances[si]) {
        out.distances[si] = d;
        best_z.col(i) = z.col(col);
        best_x.col(i) = x.col(col);
      }
      if (attempts[si] > options.max_retries) {
        out.z.col(i) = best_z.col(i);
        out.x.col(i) = best_x.col(i);
        out.is_fallback[si] = true;
        out.fallback_count++;
      } else {
        still_pending.push_back(i);
      }
    }
    pending = std::move(still_pending);
  }
  out.retries_used = draws - options.batch_size;
  return out;
}

TrainerState init_state(const TrainerConfig& config) {
  config.validate();
  TrainerState state;
  state.config = config;
  state.rng.seed(derive_seed(config.seed, 3));
  state.generator = make_generator(state.rng);
  state.discriminator = make_discriminator(state.rng);
  state.generator_opt = AdamState::for_params(state.generator);
  state.discriminator_opt = AdamState::for_params(state.discriminator);
  return state;
}

void run_training(TrainerState& state, const ToyDataset& data) {
  const TrainerConfig& config = state.config;
  config.validate();
  if (data.train.dims() != state.generator.output_dim()) throw UsageError("dataset dimension does not match the generator");
  if (state.log.empty()) append_log_entry(state, data);

  const EmbeddingSet& train = data.train;
  const auto batch = static_cast<Eigen::Index>(config.batch_size);
  std::uniform_int_distribution<std::size_t> pick_row(0, train.rows() - 1);
  const MlpParams& gen_ref = state.generator;
  const GeneratorMap generator = [&gen_ref](const Eigen::MatrixXd& z) { return forward(gen_ref, z); };
  const RejectionOptions rejection{config.tau, config.metric, config.max_rejection_retries, config.batch_size,
                                   state.generator.input_dim(), false, config.nn_threads};

  Eigen::MatrixXd real(static_cast<Eigen::Index>(train.dims()), batch);
  MlpParams d_grad, g_grad;
  while (state.step < config.total_steps) {
    auto last_good = std::make_shared<const TrainerState>(state);

    for (std::size_t k = 0; k < config.d_steps_per_g; ++k) {
      for (Eigen::Index c = 0; c < batch; ++c) {
        const auto r = train.row(pick_row(state.rng));
        for (Eigen::Index j = 0; j < real.rows(); ++j) real(j, c) = r[static_cast<std::size_t>(j)];
      }
      const Eigen::MatrixXd z = draw_latents(state.generator.input_dim(), config.batch_size, state.rng, state.normal);
      const Eigen::MatrixXd fake = forward(state.generator, z);
      const double d_loss = discriminator_loss(state.discriminator, real, fake, &d_grad);
      if (!std::isfinite(d_loss)) throw TrainingDiverged("non-finite discriminator loss", last_good);
      adam_step(state.discriminator, d_grad, state.discriminator_opt, config.adam);
    }

    Eigen::MatrixXd z;
    if (config.use_rejection) {
      RejectionBatch rb = rejection_sample(generator, train, rejection, state.rng, state.normal);
      for (std::size_t i = 0; i < config.batch_size; ++i) {
        if (!rb.is_fallback[i] && !(rb.distances[i] > config.tau)) state.counters.violations++;
      }
      state.counters.fallbacks += rb.fallback_count;
      state.counters.retries += rb.retries_used;
      state.fallbacks_since_log += rb.fallback_count;
      z = std::move(rb.z);
    } else {
      z = draw_latents(state.generator.input_dim(), config.batch_size, state.rng, state.normal);
    }
    state.counters.generator_samples += config.batch_size;
    const double g_loss = generator_loss(state.generator, state.discriminator, z, &g_grad);
    if (!std::isfinite(g_loss)) throw TrainingDiverged("non-finite generator loss", last_good);
    adam_step(state.generator, g_grad, state.generator_opt, config.adam);

    if (!state.generator.all_finite() || !state.discriminator.all_finite()) {
      throw TrainingDiverged("non-finite parameters at step " + std::to_string(state.step + 1), last_good);
    }
    state.step++;
    if (state.step % config.eval_every == 0 || state.step == config.total_steps) append_log_entry(state, data);
  }
}

TrainerState train(const TrainerConfig& config, const ToyDataset& data) {
  TrainerState state = init_state(config);
  run_training(state, data);
  return state;
}

EmbeddingSet sample_generator(const MlpParams& generator, std::size_t n, std::mt19937_64& rng, std::string name) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::MatrixXd z = draw_latents(generator.input_dim(), n, rng, normal);
  const Eigen::MatrixXd x = forward(generator, z);
  if (!x.allFinite()) throw NumericalError("generator produced non-finite samples");
  return EmbeddingSet(std::move(name), to_rows(x));
}

EvalResult evaluate_points(const EmbeddingSet& gen, const ToyDataset& data, Metric metric, double tau,
                           const SearchOptions& search) {
  EvalResult r;
  r.fid = fid(gen, data.test);
  r.test_profile = nn_distance(data.test, data.train, metric, search);
  r.gen_profile = nn_distance(gen, data.train, metric, search);

  CellPartition cells;
  if (data.kind == DatasetKind::two_moons) {
    cells = partition(data.test, gen, KMeans{8, derive_seed(data.seed, 4)});
  } else {
    // Both sides use the same nearest-component rule so cells are comparable.
    cells = partition(label_by_nearest_component(data.test, data.kind), label_by_nearest_component(gen, data.kind),
                      ByLabel{});
  }
  r.ct = ct_from_distances(r.test_profile.distances, r.gen_profile.distances, cells);
  r.ct.metric = metric;
  r.ct.train_name = data.train.name();
  r.ct.test_name = data.test.name();
  r.ct.gen_name = gen.name();

  std::size_t below = 0;
  for (double d : r.gen_profile.distances) below += d <= tau ? 1 : 0;
  r.rejection_rate = static_cast<double>(below) / static_cast<double>(r.gen_profile.size());
  return r;
}

EvalResult evaluate(const TrainerState& state, const ToyDataset& data, std::size_t n_samples, std::uint64_t eval_seed) {
  if (n_samples < 2) throw UsageError("evaluation needs at least two samples");
  std::mt19937_64 rng(eval_seed);
  const EmbeddingSet gen = sample_generator(state.generator, n_samples, rng);
  return evaluate_points(gen, data, state.config.metric, state.config.tau, SearchOptions{state.config.nn_threads});
}

std::string metric_log_csv(const std::vector<MetricLogEntry>& log) {
  std::string out = "step,fid,ct,mean_nn_dist,rejection_rate,fallback_count\n";
  char buf[256];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%llu,%.10g,%.10g,%.10g,%.10g,%llu\n", static_cast<unsigned long long>(e.step),
                  e.fid, e.ct, e.mean_nn_distance, e.rejection_rate, static_cast<unsigned long long>(e.fallback_count));
    out += buf;
  }
  return out;
}

std::string encode_checkpoint(const TrainerState& state) {
  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, state.step);
  put_params(out, state.generator);
  put_params(out, state.discriminator);
  put_params(out, state.generator_opt.m);
  put_params(out, state.generator_opt.v);
  put_u64(out, state.generator_opt.t);
  put_params(out, state.discriminator_opt.m);
  put_params(out, state.discriminator_opt.v);
  put_u64(out, state.discriminator_opt.t);
  std::ostringstream rng_text;
  rng_text << state.rng << ' ' << state.normal;
  const std::string rng_state = rng_text.str();
  put_u32(out, static_cast<std::uint32_t>(rng_state.size()));
  out += rng_state;
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.str(4) != std::string(kCheckpointMagic, 4)) throw FormatError("bad checkpoint magic", 0);
  if (in.u32() != kCheckpointVersion) throw FormatError("unsupported checkpoint version", 4);
  Checkpoint c;
  c.step = in.u64();
  c.generator = in.params();
  c.discriminator = in.params();
  c.generator_opt.m = in.params();
  c.generator_opt.v = in.params();
  c.generator_opt.t = in.u64();
  c.discriminator_opt.m = in.params();
  c.discriminator_opt.v = in.params();
  c.discriminator_opt.t = in.u64();
  c.rng_state = in.str(in.u32());
  if (in.pos() != bytes.size()) throw FormatError("trailing bytes after checkpoint", in.pos());
  return c;
}

}  // namespace memguard::gan
