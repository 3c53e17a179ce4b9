// Python bindings for the main operations: connectome ingestion and
// normalization, synthetic cohorts, training/evaluation, relevance reports,
// checkpoints, and the loss/activation primitives.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "brainnet/checkpoint.hpp"
#include "brainnet/connectome.hpp"
#include "brainnet/data_synth.hpp"
#include "brainnet/errors.hpp"
#include "brainnet/gradcheck.hpp"
#include "brainnet/losses.hpp"
#include "brainnet/model.hpp"
#include "brainnet/ops.hpp"
#include "brainnet/train_eval.hpp"

namespace py = pybind11;
using namespace brainnet;

namespace {

Tensor tensor_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() < 1 || arr.ndim() > 2)
    throw ShapeError("expected a 1-D or 2-D array");
  std::vector<int> shape;
  for (py::ssize_t d = 0; d < arr.ndim(); ++d)
    shape.push_back(static_cast<int>(arr.shape(d)));
  std::vector<double> data(arr.data(), arr.data() + arr.size());
  return Tensor::from(shape, std::move(data));
}

py::array_t<double> tensor_to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape;
  for (int d : t.shape()) shape.push_back(d);
  py::array_t<double> out(shape);
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

ModelConfig model_config_from_kwargs(const py::dict& kwargs) {
  ModelConfig cfg;
  for (auto item : kwargs) {
    std::string key = py::cast<std::string>(item.first);
    if (key == "n_regions") cfg.n_regions = py::cast<int>(item.second);
    else if (key == "n_classes") cfg.n_classes = py::cast<int>(item.second);
    else if (key == "experts_per_group") cfg.experts_per_group = py::cast<int>(item.second);
    else if (key == "expert_hidden") cfg.expert_hidden = py::cast<int>(item.second);
    else if (key == "model_dim") cfg.model_dim = py::cast<int>(item.second);
    else if (key == "transformer_layers") cfg.transformer_layers = py::cast<int>(item.second);
    else if (key == "gate_hidden") cfg.gate_hidden = py::cast<int>(item.second);
    else if (key == "attention_heads") cfg.attention_heads = py::cast<int>(item.second);
    else if (key == "seed") cfg.seed = py::cast<std::uint64_t>(item.second);
    else if (key == "alpha") cfg.loss_weights.alpha = py::cast<double>(item.second);
    else if (key == "beta") cfg.loss_weights.beta = py::cast<double>(item.second);
    else if (key == "gamma") cfg.loss_weights.gamma = py::cast<double>(item.second);
    else if (key == "lambda_") cfg.loss_weights.lambda = py::cast<double>(item.second);
    else if (key == "entropy_sign") cfg.loss_weights.entropy_sign = py::cast<double>(item.second);
    else if (key == "learnable") cfg.loss_weights.learnable = py::cast<bool>(item.second);
    else throw ConfigError("unknown model config key \"" + key + "\"");
  }
  return cfg;
}

py::dict metrics_to_dict(const MetricsReport& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["sensitivity"] = m.sensitivity;
  d["specificity"] = m.specificity;
  d["precision"] = m.precision;
  d["f1"] = m.f1;
  d["confusion"] = m.confusion;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Disease-specific mixture-of-experts over structural connectomes";
  m.attr("__version__") = "0.1.0";

  // exception hierarchy: base first so derived translators take precedence
  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ValueError>(m, "ValidationError", base.ptr());
  py::register_exception<SymmetryError>(m, "SymmetryError", base.ptr());
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());
  py::register_exception<SpecError>(m, "SpecError", base.ptr());
  py::register_exception<CorruptCheckpointError>(m, "CorruptCheckpointError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  // connectome
  py::class_<ConnectivityMatrix>(m, "ConnectivityMatrix")
      .def_readonly("n_regions", &ConnectivityMatrix::n_regions)
      .def_readonly("region_labels", &ConnectivityMatrix::region_labels)
      .def_property_readonly(
          "values", [](const ConnectivityMatrix& cm) { return tensor_to_numpy(cm.values); });

  py::class_<NormalizedConnectome>(m, "NormalizedConnectome")
      .def_readonly("mu", &NormalizedConnectome::mu)
      .def_readonly("sigma", &NormalizedConnectome::sigma)
      .def_readonly("region_labels", &NormalizedConnectome::region_labels)
      .def_property_readonly(
          "values", [](const NormalizedConnectome& nc) { return tensor_to_numpy(nc.values); });

  py::class_<SubNetworkBatch>(m, "SubNetworkBatch")
      .def_readonly("subject_id", &SubNetworkBatch::subject_id)
      .def_property_readonly(
          "rows", [](const SubNetworkBatch& b) { return tensor_to_numpy(b.rows); });

  m.def("make_connectivity",
        [](const py::array_t<double>& values, std::vector<std::string> labels) {
          return make_connectivity(tensor_from_numpy(values), std::move(labels));
        },
        py::arg("values"), py::arg("region_labels") = std::vector<std::string>{});
  m.def("load_matrix",
        [](const std::string& path, const std::string& format) {
          if (format != "csv" && format != "dense-text")
            throw ConfigError("format must be csv or dense-text");
          return load_matrix(path, format == "csv" ? MatrixFormat::csv
                                                   : MatrixFormat::dense_text);
        },
        py::arg("path"), py::arg("format") = "csv");
  m.def("log_normalize", &log_normalize, py::arg("sc"));
  m.def("to_subnetworks", &to_subnetworks, py::arg("nc"), py::arg("subject_id"));

  // primitives exercised directly from python
  m.def("softmax",
        [](const py::array_t<double>& x, int axis) {
          return tensor_to_numpy(softmax(nullptr, tensor_from_numpy(x), axis));
        },
        py::arg("x"), py::arg("axis") = 0);
  m.def("gelu", [](const py::array_t<double>& x) {
    return tensor_to_numpy(gelu(nullptr, tensor_from_numpy(x)));
  });
  m.def("entropy", [](const py::array_t<double>& p) {
    return entropy(nullptr, tensor_from_numpy(p)).item();
  });
  m.def("wasserstein1",
        [](const py::array_t<double>& p, const py::array_t<double>& q) {
          return wasserstein1(nullptr, tensor_from_numpy(p), tensor_from_numpy(q)).item();
        });
  m.def("attention",
        [](const py::array_t<double>& q, const py::array_t<double>& k,
           const py::array_t<double>& v, int dim) {
          return tensor_to_numpy(attention(nullptr, tensor_from_numpy(q),
                                           tensor_from_numpy(k),
                                           tensor_from_numpy(v), dim));
        });

  // synthetic cohorts
  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init<>())
      .def_readwrite("n_regions", &SynthSpec::n_regions)
      .def_readwrite("n_classes", &SynthSpec::n_classes)
      .def_readwrite("subjects_per_class", &SynthSpec::subjects_per_class)
      .def_readwrite("planted_regions", &SynthSpec::planted_regions)
      .def_readwrite("effect_size", &SynthSpec::effect_size)
      .def_readwrite("base_scale", &SynthSpec::base_scale)
      .def_readwrite("dispersion", &SynthSpec::dispersion)
      .def_readwrite("seed", &SynthSpec::seed)
      .def("resolved_planted", &SynthSpec::resolved_planted);

  py::class_<Subject>(m, "Subject")
      .def_readonly("label", &Subject::label)
      .def_readonly("subject_id", &Subject::subject_id)
      .def_readonly("matrix", &Subject::matrix);

  py::class_<Cohort>(m, "Cohort")
      .def_readonly("subjects", &Cohort::subjects)
      .def_readonly("class_names", &Cohort::class_names)
      .def_readonly("train_idx", &Cohort::train_idx)
      .def_readonly("test_idx", &Cohort::test_idx)
      .def("has_split", &Cohort::has_split);

  m.def("generate", &generate, py::arg("spec"));
  m.def("split_stratified", &split_stratified, py::arg("cohort"),
        py::arg("test_fraction"), py::arg("seed"));
  m.def("export_cohort", &export_cohort, py::arg("cohort"), py::arg("dir"));
  m.def("import_cohort", &import_cohort, py::arg("dir"));

  // model + training
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init([](const py::kwargs& kwargs) {
        return model_config_from_kwargs(kwargs);
      }))
      .def_readwrite("n_regions", &ModelConfig::n_regions)
      .def_readwrite("n_classes", &ModelConfig::n_classes)
      .def_readwrite("experts_per_group", &ModelConfig::experts_per_group)
      .def_readwrite("expert_hidden", &ModelConfig::expert_hidden)
      .def_readwrite("model_dim", &ModelConfig::model_dim)
      .def_readwrite("transformer_layers", &ModelConfig::transformer_layers)
      .def_readwrite("gate_hidden", &ModelConfig::gate_hidden)
      .def_readwrite("attention_heads", &ModelConfig::attention_heads)
      .def_readwrite("seed", &ModelConfig::seed);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("shuffle", &TrainConfig::shuffle)
      .def_readwrite("eval_every", &TrainConfig::eval_every);

  py::class_<BrainNetMoE>(m, "BrainNetMoE")
      .def_property_readonly("config",
                             [](const BrainNetMoE& model) { return model.config; })
      .def("predict",
           [](const BrainNetMoE& model, const std::vector<SubNetworkBatch>& batch) {
             return predict(model, batch);
           })
      .def("logits",
           [](const BrainNetMoE& model, const std::vector<SubNetworkBatch>& batch) {
             return tensor_to_numpy(forward(nullptr, model, batch).logits);
           })
      .def("parameter_names", [](const BrainNetMoE& model) {
        std::vector<std::string> names;
        for (auto& [name, t] : model.named_params()) names.push_back(name);
        return names;
      });

  m.def("make_model", &make_model, py::arg("config"));
  m.def("train",
        [](BrainNetMoE& model, const Cohort& cohort, const TrainConfig& cfg,
           const std::string& metrics_log) {
          TrainResult result;
          if (metrics_log.empty()) {
            result = train(model, cohort, cfg, nullptr);
          } else {
            std::ofstream log(metrics_log);
            if (!log) throw IoError("cannot write metrics log: " + metrics_log);
            result = train(model, cohort, cfg, &log);
          }
          py::list steps;
          for (const auto& s : result.steps) {
            py::dict d;
            d["epoch"] = s.epoch;
            d["step"] = s.step;
            d["cls"] = s.losses.cls;
            d["e_d"] = s.losses.expert_diversity;
            d["d_d"] = s.losses.disease_diversity;
            d["e_b"] = s.losses.expert_balance;
            d["total"] = s.losses.total;
            steps.append(d);
          }
          py::list evals;
          for (const auto& e : result.evals) {
            py::dict d;
            d["epoch"] = e.epoch;
            d["metrics"] = metrics_to_dict(e.metrics);
            evals.append(d);
          }
          py::dict out;
          out["steps"] = steps;
          out["evals"] = evals;
          return out;
        },
        py::arg("model"), py::arg("cohort"), py::arg("config"),
        py::arg("metrics_log") = std::string());
  m.def("evaluate",
        [](const BrainNetMoE& model, const Cohort& cohort, const std::string& split) {
          return metrics_to_dict(evaluate(
              model, cohort, split == "train" ? SplitKind::train : SplitKind::test));
        },
        py::arg("model"), py::arg("cohort"), py::arg("split") = "test");
  m.def("relevance_scores",
        [](const BrainNetMoE& model, const Cohort& cohort, const std::string& split,
           int top_m) {
          const std::vector<int>& idx =
              split == "train" ? cohort.train_idx : cohort.test_idx;
          if (idx.empty()) throw StateError("requested split is empty");
          RelevanceReport rep =
              relevance_scores(model, prepare_subjects(cohort, idx), top_m,
                               cohort.subjects[0].matrix.region_labels);
          py::dict d;
          d["region_labels"] = rep.region_labels;
          d["scores"] = tensor_to_numpy(rep.scores);
          py::list per_class;
          for (const auto& entries : rep.top_per_class) {
            py::list lst;
            for (const auto& e : entries)
              lst.append(py::make_tuple(e.region, e.score));
            per_class.append(lst);
          }
          d["top_per_class"] = per_class;
          py::list contrasts;
          for (const auto& c : rep.contrasts) {
            py::dict cd;
            cd["class_a"] = c.class_a;
            cd["class_b"] = c.class_b;
            py::list lst;
            for (const auto& e : c.top) lst.append(py::make_tuple(e.region, e.score));
            cd["top"] = lst;
            contrasts.append(cd);
          }
          d["contrasts"] = contrasts;
          return d;
        },
        py::arg("model"), py::arg("cohort"), py::arg("split") = "test",
        py::arg("top_m") = 3);
  m.def("prepare_subjects", &prepare_subjects, py::arg("cohort"), py::arg("idx"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
  m.def("metrics_from_confusion", [](const std::vector<std::vector<int>>& confusion) {
    return metrics_to_dict(metrics_from_confusion(confusion));
  });
}
