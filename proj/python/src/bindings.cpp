#include "memguard/embedding_set.hpp"
#include "memguard/errors.hpp"
#include "memguard/fid.hpp"
#include "memguard/memorization_test.hpp"
#include "memguard/nn_distance.hpp"
#include "memguard/report.hpp"
#include "memguard/toy_data.hpp"
#include "memguard/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace memguard;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Memorization audits and memorization-rejection GAN training";

  // Library errors surface as ValueError (usage, format, validation),
  // OSError (io) or ArithmeticError (numerical).
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::io:
          PyErr_SetString(PyExc_OSError, e.what());
          return;
        case ErrorKind::numerical:
          PyErr_SetString(PyExc_ArithmeticError, e.what());
          return;
        default:
          PyErr_SetString(PyExc_ValueError, e.what());
          return;
      }
    }
  });

  py::class_<EmbeddingSet>(m, "EmbeddingSet")
      .def(py::init([](std::string name, const RowMatrixF& vectors, std::optional<std::vector<Label>> labels) {
             return EmbeddingSet(std::move(name), vectors, std::move(labels));
           }),
           py::arg("name"), py::arg("vectors"), py::arg("labels") = py::none())
      .def_property_readonly("name", &EmbeddingSet::name)
      .def_property_readonly("rows", &EmbeddingSet::rows)
      .def_property_readonly("dims", &EmbeddingSet::dims)
      .def_property_readonly("vectors", [](const EmbeddingSet& s) { return RowMatrixF(s.vectors()); })
      .def_property_readonly("labels", &EmbeddingSet::labels)
      .def("__len__", &EmbeddingSet::rows);

  m.def(
      "load_embeddings",
      [](const std::filesystem::path& path, bool labeled) {
        return load_embeddings(path, format_from_extension(path), LoadOptions{labeled, std::nullopt});
      },
      py::arg("path"), py::arg("labeled") = false);
  m.def(
      "save_embeddings",
      [](const EmbeddingSet& set, const std::filesystem::path& path) { save_embeddings(set, path, format_from_extension(path)); },
      py::arg("set"), py::arg("path"));

  m.def(
      "nn_distance",
      [](const EmbeddingSet& query, const EmbeddingSet& ref, const std::string& metric) {
        const auto p = nn_distance(query, ref, parse_metric(metric));
        return py::make_tuple(p.distances, p.nn_indices);
      },
      py::arg("query"), py::arg("reference"), py::arg("metric") = "euclidean",
      "Returns (distances, indices) of each query row's nearest reference row.");
  m.def(
      "loo_mean_distance", [](const EmbeddingSet& train, const std::string& metric) { return loo_mean_distance(train, parse_metric(metric)); },
      py::arg("train"), py::arg("metric") = "euclidean");
  m.def(
      "histogram_csv",
      [](const EmbeddingSet& query, const EmbeddingSet& ref, const std::string& metric, double bin_width) {
        return histogram_to_csv(histogram(nn_distance(query, ref, parse_metric(metric)), bin_width));
      },
      py::arg("query"), py::arg("reference"), py::arg("metric") = "euclidean", py::arg("bin_width") = 0.01);

  m.def(
      "mann_whitney_z",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = mann_whitney_z(a, b);
        return py::make_tuple(r.u, r.z);
      },
      py::arg("a"), py::arg("b"), "Returns (U, z); U counts pairs with a > b, ties as one half.");
  m.def(
      "ct_score_json",
      [](const EmbeddingSet& train, const EmbeddingSet& test, const EmbeddingSet& gen, const std::string& metric,
         const std::string& cells, std::uint64_t seed) {
        return to_json(ct_score(train, test, gen, parse_metric(metric), parse_partition_spec(cells, seed))).dump();
      },
      py::arg("train"), py::arg("test"), py::arg("gen"), py::arg("metric") = "euclidean", py::arg("cells") = "labels",
      py::arg("seed") = 0);
  m.def(
      "fid_json", [](const EmbeddingSet& a, const EmbeddingSet& b) { return to_json(fid(a, b)).dump(); }, py::arg("a"),
      py::arg("b"));

  m.def(
      "make_dataset",
      [](const std::string& kind, std::size_t n_train, std::size_t n_test, double sigma, std::uint64_t seed) {
        auto d = gan::make_dataset(gan::parse_dataset_kind(kind), n_train, n_test, sigma, seed);
        return py::make_tuple(d.train, d.test);
      },
      py::arg("kind"), py::arg("n_train") = gan::kDefaultTrainSize, py::arg("n_test") = gan::kDefaultTestSize,
      py::arg("sigma") = gan::kDefaultSigma, py::arg("seed") = 0, "Returns (train, test) embedding sets.");

  m.def(
      "train",
      [](const std::string& kind, double tau, std::size_t steps, std::uint64_t seed, std::size_t n_train, double sigma,
         std::size_t eval_every) {
        gan::TrainerConfig c;
        c.tau = tau;
        c.total_steps = steps;
        c.seed = seed;
        c.eval_every = eval_every;
        c.validate();
        const auto data = gan::make_dataset(gan::parse_dataset_kind(kind), n_train, gan::kDefaultTestSize, sigma, seed);
        gan::TrainerState state;
        {
          py::gil_scoped_release release;
          state = gan::train(c, data);
        }
        return py::make_tuple(gan::metric_log_csv(state.log), py::bytes(gan::encode_checkpoint(state)));
      },
      py::arg("dataset"), py::arg("tau"), py::arg("steps") = 20000, py::arg("seed") = 0,
      py::arg("n_train") = gan::kDefaultTrainSize, py::arg("sigma") = gan::kDefaultSigma, py::arg("eval_every") = 1000,
      "Returns (metric log CSV text, checkpoint bytes).");
}
