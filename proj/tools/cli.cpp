#include "cli.hpp"

#include "memguard/atomic_write.hpp"
#include "memguard/embedding_set.hpp"
#include "memguard/errors.hpp"
#include "memguard/fid.hpp"
#include "memguard/memorization_test.hpp"
#include "memguard/nn_distance.hpp"
#include "memguard/report.hpp"
#include "memguard/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>

namespace memguard::cli {

namespace fs = std::filesystem;

namespace {

struct AuditArgs {
  std::string train;
  std::string tests;
  std::string gen;
  std::string metric;
  std::string cells;
  std::string out;
  std::uint64_t seed = 0;
  bool labeled = false;
};

struct ThresholdArgs {
  std::string train;
  std::string metric;
  bool labeled = false;
};

struct HistArgs {
  std::string query;
  std::string ref;
  std::string metric;
  double bin_width = 0.01;
  std::string out;
};

struct TrainArgs {
  std::string dataset;
  std::optional<std::string> tau;
  std::optional<std::string> tau_sweep;
  std::size_t steps = 20000;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t n_train = gan::kDefaultTrainSize;
  double sigma = gan::kDefaultSigma;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = text.find(sep, start);
    parts.push_back(text.substr(start, end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return parts;
}

double parse_tau(const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !(v >= 0.0) || !std::isfinite(v)) {
    throw UsageError("invalid tau '" + text + "' (expected a finite number >= 0)");
  }
  return v;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// Input failures are usage errors: the command cannot start.
EmbeddingSet load_input(const std::string& path, bool labeled) {
  try {
    return load_embeddings(path, format_from_extension(path), LoadOptions{labeled, std::nullopt});
  } catch (const Error& e) {
    throw UsageError(std::string("cannot load input: ") + e.what());
  }
}

bool same_file(const fs::path& a, const fs::path& b) {
  std::error_code ec;
  return fs::weakly_canonical(a, ec) == fs::weakly_canonical(b, ec);
}

int cmd_audit(const AuditArgs& a, std::ostream& out) {
  const Metric metric = parse_metric(a.metric);
  const PartitionSpec spec = parse_partition_spec(a.cells, a.seed);
  const std::vector<std::string> test_paths = split(a.tests, ',');
  for (const auto& p : test_paths) {
    if (p.empty()) throw UsageError("empty path in --test list");
  }
  std::vector<std::string> inputs = test_paths;
  inputs.push_back(a.train);
  inputs.push_back(a.gen);
  for (const auto& p : inputs) {
    if (same_file(p, a.out)) throw UsageError("--out must differ from every input (" + p + ")");
  }

  const EmbeddingSet train = load_input(a.train, a.labeled);
  const EmbeddingSet gen = load_input(a.gen, a.labeled);
  std::vector<EmbeddingSet> tests;
  for (const auto& p : test_paths) tests.push_back(load_input(p, a.labeled));
  for (const auto& t : tests) {
    if (t.dims() != train.dims() || gen.dims() != train.dims()) {
      throw UsageError("all inputs must share the embedding dimension");
    }
  }

  const DistanceProfile gen_profile = nn_distance(gen, train, metric);
  nlohmann::json references = nlohmann::json::array();
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const EmbeddingSet& test = tests[i];
    const DistanceProfile test_profile = nn_distance(test, train, metric);
    CtReport ct = ct_from_distances(test_profile.distances, gen_profile.distances, partition(test, gen, spec));
    ct.metric = metric;
    ct.train_name = train.name();
    ct.test_name = test.name();
    ct.gen_name = gen.name();
    references.push_back({{"test_path", test_paths[i]},
                          {"ct_report", to_json(ct)},
                          {"fid_report", to_json(fid(gen, test))},
                          {"gen_to_train", to_json(gen_profile.summary())},
                          {"test_to_train", to_json(test_profile.summary())}});
  }
  const nlohmann::json report = {{"seed", a.seed},           {"metric", std::string(to_string(metric))},
                                 {"cells", a.cells},         {"train_path", a.train},
                                 {"gen_path", a.gen},        {"references", std::move(references)}};
  write_file_atomic(a.out, report.dump(2) + "\n");
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

int cmd_threshold(const ThresholdArgs& a, std::ostream& out) {
  const Metric metric = parse_metric(a.metric);
  const EmbeddingSet train = load_input(a.train, a.labeled);
  out << fmt("%.6f", loo_mean_distance(train, metric)) << "\n";
  return kExitOk;
}

int cmd_hist(const HistArgs& a, std::ostream& out) {
  const Metric metric = parse_metric(a.metric);
  if (same_file(a.query, a.out) || same_file(a.ref, a.out)) throw UsageError("--out must differ from the inputs");
  const EmbeddingSet query = load_input(a.query, false);
  const EmbeddingSet ref = load_input(a.ref, false);
  const DistanceProfile profile = nn_distance(query, ref, metric);
  write_file_atomic(a.out, histogram_to_csv(histogram(profile, a.bin_width)));
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

gan::MetricLogEntry train_one(const gan::TrainerConfig& config, const gan::ToyDataset& data, const fs::path& dir,
                              std::ostream& err) {
  fs::create_directories(dir);
  gan::TrainerState state;
  try {
    state = gan::train(config, data);
  } catch (const gan::TrainingDiverged& e) {
    const fs::path dump = dir / "diverged_checkpoint.bin";
    write_file_atomic(dump, gan::encode_checkpoint(e.last_good_state()));
    err << "last good state written to " << dump.string() << "\n";
    throw;
  }
  write_file_atomic(dir / "checkpoint.bin", gan::encode_checkpoint(state));
  write_file_atomic(dir / "metrics.csv", gan::metric_log_csv(state.log));
  return state.log.back();
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  if (a.tau.has_value() == a.tau_sweep.has_value()) throw UsageError("give exactly one of --tau or --tau-sweep");
  const gan::DatasetKind kind = gan::parse_dataset_kind(a.dataset);
  if (!(a.sigma > 0.0) || !std::isfinite(a.sigma)) throw UsageError("--sigma must be a positive number");

  std::vector<std::string> tau_texts = a.tau ? std::vector<std::string>{*a.tau} : split(*a.tau_sweep, ',');
  std::vector<double> taus;
  for (const auto& t : tau_texts) taus.push_back(parse_tau(t));

  gan::TrainerConfig base;
  base.total_steps = a.steps;
  base.seed = a.seed;
  for (double tau : taus) {
    auto c = base;
    c.tau = tau;
    c.validate();
  }
  const gan::ToyDataset data = gan::make_dataset(kind, a.n_train, gan::kDefaultTestSize, a.sigma, a.seed);

  std::string summary = "tau,final_fid,final_ct,final_mean_nn_dist\n";
  for (std::size_t i = 0; i < taus.size(); ++i) {
    auto config = base;
    config.tau = taus[i];
    const fs::path dir = a.tau ? fs::path(a.out_dir) : fs::path(a.out_dir) / ("tau_" + tau_texts[i]);
    const gan::MetricLogEntry last = train_one(config, data, dir, err);
    summary += fmt("%.10g", taus[i]) + "," + fmt("%.10g", last.fid) + "," + fmt("%.10g", last.ct) + "," +
               fmt("%.10g", last.mean_nn_distance) + "\n";
    err << "tau " << tau_texts[i] << ": fid " << fmt("%.6g", last.fid) << ", ct " << fmt("%.4f", last.ct) << "\n";
  }
  write_file_atomic(fs::path(a.out_dir) / "summary.csv", summary);
  out << summary;
  return kExitOk;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::usage ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Memorization audits and memorization-rejection GAN training", "memguard"};
  app.require_subcommand(1);

  AuditArgs audit_args;
  auto* audit = app.add_subcommand("audit", "Score a generated set against one or more reference test sets");
  audit->add_option("--train", audit_args.train, "Training embeddings")->required();
  audit->add_option("--test", audit_args.tests, "Reference test embeddings, comma separated")->required();
  audit->add_option("--gen", audit_args.gen, "Generated embeddings")->required();
  audit->add_option("--metric", audit_args.metric, "cosine or euclidean")->required();
  audit->add_option("--cells", audit_args.cells, "labels or kmeans:K")->required();
  audit->add_option("--out", audit_args.out, "JSON report path")->required();
  audit->add_option("--seed", audit_args.seed, "Seed for k-means initialization");
  audit->add_flag("--labeled", audit_args.labeled, "CSV inputs carry a trailing label column");

  ThresholdArgs threshold_args;
  auto* threshold = app.add_subcommand("threshold", "Print the leave-one-out mean NN distance of a training set");
  threshold->add_option("--train", threshold_args.train, "Training embeddings")->required();
  threshold->add_option("--metric", threshold_args.metric, "cosine or euclidean")->required();
  threshold->add_flag("--labeled", threshold_args.labeled, "CSV input carries a trailing label column");

  HistArgs hist_args;
  auto* hist = app.add_subcommand("hist", "Histogram of query-to-reference NN distances");
  hist->add_option("--query", hist_args.query, "Query embeddings")->required();
  hist->add_option("--ref", hist_args.ref, "Reference embeddings")->required();
  hist->add_option("--metric", hist_args.metric, "cosine or euclidean")->required();
  hist->add_option("--bin-width", hist_args.bin_width, "Bin width")->capture_default_str();
  hist->add_option("--out", hist_args.out, "CSV output path")->required();

  TrainArgs train_args;
  auto* trainc = app.add_subcommand("train", "Train a toy GAN with memorization rejection");
  trainc->add_option("--dataset", train_args.dataset, "ring8, grid25 or two_moons")->required();
  auto* tau = trainc->add_option("--tau", train_args.tau, "Rejection threshold");
  auto* sweep = trainc->add_option("--tau-sweep", train_args.tau_sweep, "Comma separated thresholds");
  tau->excludes(sweep);
  trainc->add_option("--steps", train_args.steps, "Generator updates")->capture_default_str();
  trainc->add_option("--seed", train_args.seed, "Base seed")->capture_default_str();
  trainc->add_option("--out-dir", train_args.out_dir, "Output directory")->required();
  trainc->add_option("--n-train", train_args.n_train, "Training set size")->capture_default_str();
  trainc->add_option("--sigma", train_args.sigma, "Component standard deviation")->capture_default_str();

  std::vector<const char*> argv{"memguard"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  if (audit->parsed()) return guarded(err, [&] { return cmd_audit(audit_args, out); });
  if (threshold->parsed()) return guarded(err, [&] { return cmd_threshold(threshold_args, out); });
  if (hist->parsed()) return guarded(err, [&] { return cmd_hist(hist_args, out); });
  return guarded(err, [&] { return cmd_train(train_args, out, err); });
}

}  // namespace memguard::cli
