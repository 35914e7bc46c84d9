// Python bindings. Structured values cross the boundary as JSON text; the
// package wrapper converts them to and from Python objects.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "psytriage/pipeline.hpp"

namespace py = pybind11;
using namespace psytriage;

namespace {

py::dict metrics_dict(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  const auto m = metrics(ConfusionMatrix{tp, fp, tn, fn});
  py::dict d;
  d["accuracy"] = (m.accuracy);
  d["sensitivity"] = (m.sensitivity);
  d["specificity"] = (m.specificity);
  d["precision"] = (m.precision);
  d["f1"] = (m.f1);
  return d;
}

std::string extract_json(const std::string& record_json) {
  const auto rec = record_from_json(json::parse(record_json));
  return to_json(extract_features(rec, default_lexicon())).dump();
}

std::string prompt_from_features(const std::string& fv_json, bool reduced) {
  const auto fv = feature_vector_from_json(json::parse(fv_json));
  return build_prompt(prompt_values(fv), reduced ? reduced_prompt_template() : full_prompt_template());
}

std::string generate_json(const std::string& cfg_json) {
  json out = json::array();
  for (const auto& r : generate(generator_config_from_json(json::parse(cfg_json)))) out.push_back(to_json(r));
  return out.dump();
}

std::string run_pipeline_json(const std::string& cfg_json, const std::filesystem::path& base_dir) {
  const auto cfg = pipeline_config_from_json(json::parse(cfg_json), base_dir);
  py::gil_scoped_release release;
  return run_pipeline(cfg).manifest.dump();
}

std::string run_stage_json(const std::string& cfg_json, const std::string& name,
                           const std::filesystem::path& base_dir) {
  const auto cfg = pipeline_config_from_json(json::parse(cfg_json), base_dir);
  StageRecord r;
  {
    py::gil_scoped_release release;
    r = run_stage(cfg, name);
  }
  json outputs = json::array();
  for (const auto& p : r.outputs) outputs.push_back(p.generic_string());
  return json{{"name", r.name}, {"status", r.status}, {"message", r.message}, {"outputs", outputs}}.dump();
}

class Model {
 public:
  explicit Model(const std::string& j) : m_(TrainedModel::from_json(json::parse(j))) {}
  static Model load(const std::filesystem::path& p) { return Model(read_json_file(p).dump()); }

  std::vector<std::string> feature_names() const { return m_.feature_names(); }
  std::string kind() const { return std::string(model_name(m_.spec().kind)); }
  double score(const std::vector<double>& x) const { return m_.score(x); }
  int predict(const std::vector<double>& x) const { return m_.predict(x); }

 private:
  TrainedModel m_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Triage classifier toolkit";
  m.attr("__version__") = PSYTRIAGE_VERSION;

  // messages start with the error code name, e.g. "ZeroReference: ..."
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("relative_deviation", &relative_deviation, py::arg("x"), py::arg("reference"));
  m.def("metrics", &metrics_dict, py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));
  m.def(
      "roc_auc",
      [](const std::vector<int>& y, const std::vector<double>& s) { return roc_auc(y, s).auc; },
      py::arg("labels"), py::arg("scores"));
  m.def(
      "tokenize",
      [](const std::string& text) {
        std::vector<std::string> out;
        for (const auto& t : tokenize(text)) out.push_back(t.boundary ? "." : t.text);
        return out;
      },
      py::arg("text"));
  m.def("_extract_features", &extract_json);
  m.def("_build_prompt", &prompt_from_features, py::arg("features"), py::arg("reduced") = false);
  m.def("parse_verdict", [](const std::string& s) { return std::string(to_string(parse_verdict(s))); });
  m.def("_generate", &generate_json);
  m.def("_run_pipeline", &run_pipeline_json, py::arg("config"), py::arg("base_dir") = std::filesystem::path{});
  m.def("_run_stage", &run_stage_json, py::arg("config"), py::arg("name"),
        py::arg("base_dir") = std::filesystem::path{});
  m.def("stage_names", &pipeline_stage_names);
  m.def("sha256_file", &sha256_file);

  py::class_<Model>(m, "_Model")
      .def(py::init<const std::string&>())
      .def_static("load", &Model::load)
      .def_property_readonly("feature_names", &Model::feature_names)
      .def_property_readonly("kind", &Model::kind)
      .def("score", &Model::score)
      .def("predict", &Model::predict);
}
