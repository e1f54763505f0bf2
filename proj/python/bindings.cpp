// Python bindings: datasets, training, evaluation, product-layer kernels, diagnostics.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "pnnlab/diagnostics.hpp"
#include "pnnlab/metrics.hpp"
#include "pnnlab/model.hpp"
#include "pnnlab/product_layers.hpp"
#include "pnnlab/training.hpp"

namespace py = pybind11;
using namespace pnnlab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Mat to_mat(const Array& a) {
  const auto info = a.request();
  if (info.ndim == 1) {
    const auto* p = static_cast<const double*>(info.ptr);
    return Mat(static_cast<std::size_t>(info.shape[0]), 1, std::vector<double>(p, p + info.shape[0]));
  }
  if (info.ndim != 2) throw std::invalid_argument("expected a 1-D or 2-D array");
  const auto* p = static_cast<const double*>(info.ptr);
  const auto r = static_cast<std::size_t>(info.shape[0]), c = static_cast<std::size_t>(info.shape[1]);
  return Mat(r, c, std::vector<double>(p, p + r * c));
}

py::array_t<double> to_array(const Mat& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

py::array_t<double> to_vector(const Mat& m) {
  py::array_t<double> out(static_cast<py::ssize_t>(m.size()));
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

std::vector<Mat> to_mats(const std::vector<Array>& as) {
  std::vector<Mat> out;
  out.reserve(as.size());
  for (const auto& a : as) out.push_back(to_mat(a));
  return out;
}

PredictionSet predictions(const py::array_t<int>& labels, const Array& scores) {
  const auto l = labels.unchecked<1>();
  const auto s = scores.unchecked<1>();
  if (l.shape(0) != s.shape(0)) throw std::invalid_argument("labels and scores differ in length");
  PredictionSet p;
  p.reserve(static_cast<std::size_t>(l.shape(0)));
  for (py::ssize_t i = 0; i < l.shape(0); ++i) p.push_back({l(i), s(i)});
  return p;
}

Dataset make_dataset(const std::vector<std::size_t>& cardinalities,
                     const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& categories,
                     const py::array_t<int, py::array::c_style | py::array::forcecast>& labels) {
  std::vector<Field> fields;
  for (std::size_t i = 0; i < cardinalities.size(); ++i) fields.push_back({"f" + std::to_string(i), cardinalities[i]});
  Dataset ds{FieldSchema(std::move(fields)), {}, 1.0};
  const auto c = categories.unchecked<2>();
  const auto l = labels.unchecked<1>();
  if (c.shape(0) != l.shape(0)) throw std::invalid_argument("categories and labels differ in length");
  if (static_cast<std::size_t>(c.shape(1)) != cardinalities.size()) {
    throw std::invalid_argument("categories must have one column per field");
  }
  for (py::ssize_t r = 0; r < c.shape(0); ++r) {
    SparseSample s;
    for (py::ssize_t i = 0; i < c.shape(1); ++i) s.categories.push_back(c(r, i));
    s.label = l(r);
    validate_sample(ds.schema, s);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["model"] = r.model;
  d["n"] = r.n;
  d["auc"] = r.auc;
  d["logloss"] = r.log_loss;
  d["rmse"] = r.rmse;
  d["rig"] = r.rig;
  d["base_rate"] = r.base_rate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_pnnlab, m) {
  m.doc() = "Product-based neural networks for user response prediction";

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("cardinalities"), py::arg("categories"), py::arg("labels"))
      .def("__len__", &Dataset::size)
      .def_property_readonly("cardinalities",
                             [](const Dataset& d) {
                               std::vector<std::size_t> c;
                               for (const auto& f : d.schema.fields()) c.push_back(f.cardinality);
                               return c;
                             })
      .def_property_readonly("categories",
                             [](const Dataset& d) {
                               const std::size_t n = d.schema.num_fields();
                               py::array_t<std::uint32_t> out({d.size(), n});
                               auto w = out.mutable_unchecked<2>();
                               for (std::size_t r = 0; r < d.size(); ++r)
                                 for (std::size_t i = 0; i < n; ++i) w(r, i) = d.samples[r].categories[i];
                               return out;
                             })
      .def_property_readonly("labels",
                             [](const Dataset& d) {
                               py::array_t<int> out(static_cast<py::ssize_t>(d.size()));
                               for (std::size_t r = 0; r < d.size(); ++r) out.mutable_at(r) = d.samples[r].label;
                               return out;
                             })
      .def_property_readonly("positive_rate", &Dataset::positive_rate)
      .def("split", &split_dataset, py::arg("n_first"), "First n samples and the remainder.")
      .def("downsample_negatives",
           [](const Dataset& d, double w, std::uint64_t seed) {
             Rng rng(seed);
             return downsample_negatives(d, w, rng);
           },
           py::arg("ratio"), py::arg("seed") = 0);

  m.def(
      "synth",
      [](std::size_t n_fields, std::size_t cardinality, std::size_t n_samples, double interaction,
         double additive, double bias, std::uint64_t seed) {
        SynthConfig c;
        c.n_fields = n_fields;
        c.cardinality = cardinality;
        c.n_samples = n_samples;
        c.interaction_strength = interaction;
        c.additive_strength = additive;
        c.bias = bias;
        c.seed = seed;
        SynthData d = synth_generate(c);
        py::array_t<double> p(static_cast<py::ssize_t>(d.true_probability.size()));
        std::copy(d.true_probability.begin(), d.true_probability.end(), p.mutable_data());
        return py::make_tuple(std::move(d.dataset), p);
      },
      py::arg("n_fields") = 8, py::arg("cardinality") = 10, py::arg("n_samples") = 10000,
      py::arg("interaction_strength") = 5.0, py::arg("additive_strength") = 1.0, py::arg("bias") = -1.0,
      py::arg("seed") = 0, "Planted-interaction dataset and its true click probabilities.");

  py::class_<Model>(m, "Model")
      .def_property_readonly("kind", [](const Model& x) { return std::string(to_string(x.config.kind)); })
      .def_property_readonly("parameter_count", [](const Model& x) { return parameter_count(x.params); })
      .def("predict",
           [](const Model& x, const Dataset& d) {
             py::array_t<double> out(static_cast<py::ssize_t>(d.size()));
             for (std::size_t i = 0; i < d.size(); ++i) out.mutable_at(i) = predict(x, d.samples[i]);
             return out;
           })
      .def("blocks",
           [](const Model& x) {
             py::dict d;
             for_each_block(x.params, [&](const std::string& name, const Mat& b) { d[py::str(name)] = to_array(b); });
             return d;
           })
      .def("save", [](const Model& x, const std::string& path) { write_checkpoint(path, x); })
      .def("to_string",
           [](const Model& x) {
             std::ostringstream s;
             write_checkpoint(s, x);
             return s.str();
           })
      .def_static("load", [](const std::string& path) { return read_checkpoint(path); });

  m.def(
      "train",
      [](const Dataset& train_set, const Dataset& val_set, const std::string& model, double lr,
         std::size_t batch_size, std::size_t epochs, double dropout, double l2, std::uint64_t seed,
         std::size_t patience, std::size_t embedding_order, std::size_t d1, std::size_t d2,
         std::size_t hidden_layers, std::size_t k, const std::string& activation, const std::string& fusion) {
        TrainConfig c;
        c.model.kind = parse_model_kind(model);
        c.learning_rate = lr;
        c.batch_size = batch_size;
        c.epochs = epochs;
        c.dropout_rate = dropout;
        c.l2_lambda = l2;
        c.seed = seed;
        c.patience = patience;
        c.model.embedding_order = embedding_order;
        c.model.d1 = d1;
        c.model.d2 = d2;
        c.model.hidden_layers = hidden_layers;
        c.model.k_order = k;
        c.model.activation = parse_activation(activation);
        c.model.fusion = parse_fusion(fusion);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(train_set, val_set, c);
        }
        py::list log;
        for (const auto& e : r.log.epochs) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["train_logloss"] = e.train_logloss;
          d["val_logloss"] = e.val_logloss;
          d["val_auc"] = e.val_auc;
          d["seconds"] = e.seconds;
          log.append(d);
        }
        return py::make_tuple(std::move(r.model), log, r.log.best_epoch);
      },
      py::arg("train"), py::arg("val"), py::arg("model") = "ipnn", py::arg("lr") = 0.01,
      py::arg("batch_size") = 256, py::arg("epochs") = 10, py::arg("dropout") = 0.5, py::arg("l2") = 1e-4,
      py::arg("seed") = 0, py::arg("patience") = 3, py::arg("embedding_order") = 10, py::arg("d1") = 64,
      py::arg("d2") = 32, py::arg("hidden_layers") = 3, py::arg("k") = 1, py::arg("activation") = "relu",
      py::arg("fusion") = "add", "Returns (best model, per-epoch log, best epoch).");

  m.def(
      "evaluate",
      [](const Model& model, const Dataset& d, double w) { return report_dict(evaluate(model, d, w)); },
      py::arg("model"), py::arg("data"), py::arg("downsampling_ratio") = 1.0);

  m.def("auc", [](const py::array_t<int>& l, const Array& s) { return auc(predictions(l, s)); },
        py::arg("labels"), py::arg("scores"));
  m.def("log_loss", [](const py::array_t<int>& l, const Array& s) { return mean_log_loss(predictions(l, s)); },
        py::arg("labels"), py::arg("scores"));
  m.def("rmse", [](const py::array_t<int>& l, const Array& s) { return rmse(predictions(l, s)); },
        py::arg("labels"), py::arg("scores"));
  m.def("rig", [](const py::array_t<int>& l, const Array& s) { return rig(predictions(l, s)); },
        py::arg("labels"), py::arg("scores"));
  m.def("recalibrate", &recalibrate, py::arg("p"), py::arg("w"));
  m.def(
      "paired_ttest",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const TTestResult r = paired_ttest(a, b);
        py::dict d;
        d["t"] = r.t;
        d["p_value"] = r.p_value;
        d["df"] = r.df;
        d["zero_variance"] = r.zero_variance;
        return d;
      },
      py::arg("a"), py::arg("b"));

  m.def("lz_forward", [](const Array& wz, const Array& f) { return to_vector(lz_forward(to_mat(wz), to_mat(f))); },
        py::arg("wz"), py::arg("f"));
  m.def("ipnn_lp_naive",
        [](const std::vector<Array>& wp, const Array& f) { return to_vector(ipnn_lp_naive(to_mats(wp), to_mat(f))); },
        py::arg("wp"), py::arg("f"));
  m.def("ipnn_lp_factorized",
        [](const Array& theta, const Array& f) { return to_vector(ipnn_lp_factorized(to_mat(theta), to_mat(f))); },
        py::arg("theta"), py::arg("f"));
  m.def("ipnn_lp_korder",
        [](const Array& theta, std::size_t k, const Array& f) {
          return to_vector(ipnn_lp_korder(to_mat(theta), k, to_mat(f)));
        },
        py::arg("theta"), py::arg("k"), py::arg("f"));
  m.def("opnn_lp_naive",
        [](const std::vector<Array>& wp, const Array& f) { return to_vector(opnn_lp_naive(to_mats(wp), to_mat(f))); },
        py::arg("wp"), py::arg("f"));
  m.def("opnn_lp_superposed",
        [](const std::vector<Array>& wp, const Array& f) {
          return to_vector(opnn_lp_superposed(to_mats(wp), to_mat(f)));
        },
        py::arg("wp"), py::arg("f"));

  m.def(
      "gradcheck",
      [](const std::string& model, std::size_t k, const std::string& activation, const std::string& fusion,
         std::size_t draws, std::uint64_t seed) {
        GradcheckConfig c;
        c.kind = parse_model_kind(model);
        c.k_order = k;
        c.activation = parse_activation(activation);
        c.fusion = parse_fusion(fusion);
        c.draws = draws;
        c.seed = seed;
        const GradcheckReport r = gradcheck(c);
        py::dict blocks;
        for (const auto& b : r.blocks) blocks[py::str(b.name)] = b.max_rel_error;
        return py::make_tuple(r.passed, blocks);
      },
      py::arg("model") = "ipnn", py::arg("k") = 1, py::arg("activation") = "relu", py::arg("fusion") = "add",
      py::arg("draws") = 10, py::arg("seed") = 1, "Returns (passed, {block: max relative error}).");
}
