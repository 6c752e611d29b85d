#include "memguard/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace memguard;
using namespace memguard::gan;

namespace {

EmbeddingSet points(std::initializer_list<std::pair<float, float>> xy) {
  RowMatrixF m(static_cast<Eigen::Index>(xy.size()), 2);
  Eigen::Index i = 0;
  for (auto [x, y] : xy) {
    m(i, 0) = x;
    m(i, 1) = y;
    ++i;
  }
  return EmbeddingSet("train", m);
}

// Probability that a standard 2-D normal lands within `radius` of `center`,
// by midpoint quadrature in polar coordinates around the center.
double disk_mass(double cx, double cy, double radius) {
  constexpr int kR = 600, kT = 600;
  double mass = 0.0;
  for (int i = 0; i < kR; ++i) {
    const double r = (i + 0.5) * radius / kR;
    for (int j = 0; j < kT; ++j) {
      const double t = (j + 0.5) * 2.0 * std::numbers::pi / kT;
      const double x = cx + r * std::cos(t);
      const double y = cy + r * std::sin(t);
      mass += std::exp(-0.5 * (x * x + y * y)) / (2.0 * std::numbers::pi) * r;
    }
  }
  return mass * (radius / kR) * (2.0 * std::numbers::pi / kT);
}

const GeneratorMap identity = [](const Eigen::MatrixXd& z) { return z; };

TrainerConfig short_config(std::size_t steps, double tau = 0.0) {
  TrainerConfig c;
  c.total_steps = steps;
  c.tau = tau;
  c.eval_every = 100;
  c.eval_samples = 256;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("tau = 0 accepts every first draw") {
  std::mt19937_64 rng(1);
  std::mt19937_64 g_rng(2);
  const auto gen = make_generator(g_rng);
  const auto data = make_dataset(DatasetKind::ring8, 64, 8, 0.05, 1);
  std::normal_distribution<double> normal;
  const auto b = rejection_sample([&](const Eigen::MatrixXd& z) { return forward(gen, z); }, data.train,
                                  RejectionOptions{0.0, Metric::euclidean, 100, 64, 2, false}, rng, normal);
  CHECK(b.retries_used == 0);
  CHECK(b.fallback_count == 0);
  for (double d : b.distances) CHECK(d > 0.0);

  // Same RNG use as a plain latent draw.
  std::mt19937_64 plain(1);
  std::normal_distribution<double> plain_normal;
  CHECK(draw_latents(2, 64, plain, plain_normal) == b.z);
  CHECK(plain() == rng());
}

TEST_CASE("unreachable tau falls back to the farthest candidate") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  const auto train = points({{0, 0}, {1, 1}});
  RejectionOptions opts{1e6, Metric::euclidean, 5, 32, 2, true};
  const auto b = rejection_sample(identity, train, opts, rng, normal);
  CHECK(b.fallback_count == 32);
  CHECK(b.retries_used == 32 * 5);
  for (std::size_t i = 0; i < 32; ++i) {
    CHECK(b.is_fallback[i]);
    REQUIRE(b.candidate_distances[i].size() == 6);
    const double best = *std::max_element(b.candidate_distances[i].begin(), b.candidate_distances[i].end());
    CHECK(b.distances[i] == best);
    const double dx = b.x(0, static_cast<Eigen::Index>(i));
    const double dy = b.x(1, static_cast<Eigen::Index>(i));
    const double d0 = std::hypot(static_cast<float>(dx), static_cast<float>(dy));
    CHECK(std::abs(std::min(d0, std::hypot(static_cast<float>(dx) - 1.0, static_cast<float>(dy) - 1.0)) - best) < 1e-6);
  }
}

TEST_CASE("accepted samples always exceed tau") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  const auto train = points({{0, 0}, {0.5, 0.5}, {-1, 0.3}});
  const auto b = rejection_sample(identity, train, RejectionOptions{0.8, Metric::euclidean, 50, 256, 2, false}, rng, normal);
  for (std::size_t i = 0; i < 256; ++i) CHECK((b.is_fallback[i] || b.distances[i] > 0.8));
  CHECK(b.retries_used > 0);
}

TEST_CASE("identity generator acceptance matches the Gaussian mass outside the rejection disks") {
  const auto train = points({{1.5f, 0.0f}, {-1.5f, 0.0f}, {0.0f, 2.5f}});
  // Disks of radius 1 around those centers are disjoint.
  const double rejected = disk_mass(1.5, 0.0, 1.0) + disk_mass(-1.5, 0.0, 1.0) + disk_mass(0.0, 2.5, 1.0);
  const double p_accept = 1.0 - rejected;
  constexpr std::size_t kDraws = 100000;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  const auto b = rejection_sample(identity, train, RejectionOptions{1.0, Metric::euclidean, 0, kDraws, 2, false}, rng, normal);
  const double observed = 1.0 - static_cast<double>(b.fallback_count) / kDraws;
  const double sigma = std::sqrt(p_accept * (1.0 - p_accept) / kDraws);
  CHECK(std::abs(observed - p_accept) < 3.0 * sigma);
  CHECK(p_accept < 0.9);
}

TEST_CASE("zero steps returns the initial state with a step-0 log entry") {
  const auto data = make_dataset(DatasetKind::ring8, 64, 64, 0.05, 1);
  const auto state = train(short_config(0), data);
  const auto init = init_state(short_config(0));
  REQUIRE(state.log.size() == 1);
  CHECK(state.log[0].step == 0);
  CHECK(state.step == 0);
  CHECK(encode_checkpoint(state) == encode_checkpoint(init));
}

TEST_CASE("training is deterministic and logs at the requested steps") {
  const auto data = make_dataset(DatasetKind::ring8, 64, 64, 0.05, 2);
  const auto a = train(short_config(250, 0.01), data);
  const auto b = train(short_config(250, 0.01), data);
  CHECK(metric_log_csv(a.log) == metric_log_csv(b.log));
  CHECK(encode_checkpoint(a) == encode_checkpoint(b));
  auto threaded = short_config(250, 0.01);
  threaded.nn_threads = 4;
  const auto c = train(threaded, data);
  CHECK(metric_log_csv(a.log) == metric_log_csv(c.log));
  CHECK(encode_checkpoint(a) == encode_checkpoint(c));
  REQUIRE(a.log.size() == 4);
  CHECK(a.log[1].step == 100);
  CHECK(a.log[3].step == 250);
  CHECK(a.counters.violations == 0);
  CHECK(a.counters.generator_samples == 250 * 64);
  for (const auto& e : a.log) {
    CHECK(e.rejection_rate >= 0.0);
    CHECK(e.rejection_rate <= 1.0);
  }
}

TEST_CASE("tau = 0 reproduces training without the rejection step") {
  const auto data = make_dataset(DatasetKind::grid25, 128, 64, 0.05, 3);
  auto with = short_config(200, 0.0);
  auto without = with;
  without.use_rejection = false;
  const auto a = train(with, data);
  const auto b = train(without, data);
  CHECK(a.counters.fallbacks == 0);
  CHECK(encode_checkpoint(a) == encode_checkpoint(b));
  CHECK(metric_log_csv(a.log) == metric_log_csv(b.log));
}

TEST_CASE("checkpoint round trip") {
  const auto data = make_dataset(DatasetKind::ring8, 64, 64, 0.05, 4);
  const auto state = train(short_config(20), data);
  const std::string bytes = encode_checkpoint(state);
  const auto c = decode_checkpoint(bytes);
  CHECK(c.step == 20);
  CHECK(c.generator.layers[1].weight == state.generator.layers[1].weight);
  CHECK(c.discriminator_opt.v.layers[2].bias == state.discriminator_opt.v.layers[2].bias);
  CHECK(c.generator_opt.t == 20);
  CHECK(c.discriminator_opt.t == 100);
  std::mt19937_64 restored;
  std::normal_distribution<double> restored_normal;
  std::istringstream in(c.rng_state);
  in >> restored >> restored_normal;
  CHECK(restored == state.rng);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(decode_checkpoint("XXXX" + bytes.substr(4)), FormatError);
}

TEST_CASE("divergence aborts with the last good state") {
  const auto data = make_dataset(DatasetKind::ring8, 64, 64, 0.05, 5);
  auto state = init_state(short_config(10));
  state.log.push_back({});
  state.discriminator.layers[0].weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    run_training(state, data);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.last_good_state().step == 0);
  }
}

TEST_CASE("invalid configurations") {
  auto c = short_config(10);
  c.tau = -1.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = short_config(10);
  c.metric = Metric::cosine;
  c.tau = 2.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = short_config(10);
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("evaluation with a true-distribution sampler is near the null") {
  double abs_sum = 0.0;
  double fid_sum = 0.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto data = make_dataset(DatasetKind::ring8, 256, 1024, 0.05, t);
    std::mt19937_64 rng(derive_seed(t, 55));
    const auto gen = sample_toy(DatasetKind::ring8, 1024, 0.05, rng, "oracle");
    const auto r = evaluate_points(gen, data, Metric::euclidean);
    abs_sum += std::abs(r.ct.ct);
    fid_sum += r.fid.fid;
  }
  CHECK(abs_sum / 100.0 < 0.5);
  CHECK(fid_sum / 100.0 < 0.01);
}

TEST_CASE("evaluation with a memorizing sampler") {
  const auto data = make_dataset(DatasetKind::ring8, 256, 1024, 0.05, 7);
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> pick(0, 255);
  RowMatrixF m(512, 2);
  for (Eigen::Index i = 0; i < 512; ++i) m.row(i) = data.train.vectors().row(static_cast<Eigen::Index>(pick(rng)));
  const auto r = evaluate_points(EmbeddingSet("memorized", m), data, Metric::euclidean);
  CHECK(r.gen_profile.summary().mean == 0.0);
  CHECK(r.ct.ct < -10.0);
}

TEST_CASE("two-sample evaluation is a valid degenerate report") {
  const auto data = make_dataset(DatasetKind::two_moons, 64, 64, 0.05, 9);
  const auto state = init_state(short_config(0));
  const auto r = evaluate(state, data, 2, 1);
  CHECK(r.gen_profile.size() == 2);
  CHECK(std::isfinite(r.fid.fid));
  CHECK(std::isfinite(r.ct.ct));
  CHECK_THROWS_AS(evaluate(state, data, 1, 1), UsageError);
}

TEST_CASE("metric log csv") {
  std::vector<MetricLogEntry> log{{0, 1.5, -0.25, 0.125, 0.5, 3}};
  CHECK(metric_log_csv(log) == "step,fid,ct,mean_nn_dist,rejection_rate,fallback_count\n0,1.5,-0.25,0.125,0.5,3\n");
}
