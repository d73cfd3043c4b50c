// Thin JSON-in/JSON-out bindings; the artinsight package turns the strings
// into Python objects.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "artinsight/config.hpp"
#include "artinsight/eval_harness.hpp"
#include "artinsight/session_store.hpp"

namespace py = pybind11;
using namespace artinsight;

namespace {

Bytes to_bytes(const py::bytes& b) {
  std::string_view view(b);
  return Bytes(view.begin(), view.end());
}

ComparisonRun run_from(const std::string& json) { return decode<ComparisonRun>(Json::parse(json)); }

// Engine plus scorer built from a config file (or the offline mock config),
// with images held in memory.
class PyEngine {
 public:
  PyEngine(std::optional<std::string> config_path, bool mock)
      : config_(mock || !config_path ? mock_config() : load_config(*config_path)) {
    if (mock && config_path) {
      // Keep the file's non-provider settings but route everything offline.
      auto file = load_config(*config_path);
      file.providers = config_.providers;
      file.engine.default_model_id = config_.engine.default_model_id;
      file.scorer.judge_model_id = config_.scorer.judge_model_id;
      config_ = file;
    }
    register_providers(gateway_, config_.providers);
    PromptBundle bundle =
        config_.prompt_dir ? PromptBundle::load(*config_.prompt_dir) : PromptBundle::canonical();
    engine_ = std::make_unique<DescriptionEngine>(gateway_, blobs_, bundle, config_.engine);
    if (config_.scorer_bundle) {
      scorer_ = std::make_unique<RubricScorer>(gateway_, blobs_, load_exemplar_bundle(*config_.scorer_bundle),
                                               config_.scorer);
    }
  }

  std::string describe(const py::bytes& image, std::optional<std::string> model_id,
                       std::optional<std::string> transcript) {
    Bytes bytes = to_bytes(image);
    py::gil_scoped_release release;
    BlobRef ref = blobs_.put_blob(bytes, "application/octet-stream");
    return Json(engine_->analyze_artwork(ref, std::move(model_id), std::move(transcript))).dump();
  }

  std::string score(const py::bytes& image, const std::string& description,
                    std::optional<std::string> judge_model_id) {
    if (!scorer_) {
      throw Error(ErrorCode::no_exemplars, "config has no scorer exemplar bundle", "scorer.exemplar_bundle");
    }
    Bytes bytes = to_bytes(image);
    py::gil_scoped_release release;
    BlobRef ref = blobs_.put_blob(bytes, "application/octet-stream");
    return Json(scorer_->score_description(ref, description, std::move(judge_model_id))).dump();
  }

  std::string default_model_id() const { return config_.engine.default_model_id; }
  std::string prompt_revision() const { return engine_->bundle().revision; }

 private:
  AppConfig config_;
  Gateway gateway_;
  MemoryBlobStore blobs_;
  std::unique_ptr<DescriptionEngine> engine_;
  std::unique_ptr<RubricScorer> scorer_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the artinsight package";

  static py::exception<Error> error_type(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::handle(error_type.ptr())(e.what());
      instance.attr("code") = std::string(to_string(e.code()));
      instance.attr("field") = e.field();
      PyErr_SetObject(error_type.ptr(), instance.ptr());
    }
  });

  m.def("compute_total", &compute_total, py::arg("presumptive"), py::arg("reductive"),
        py::arg("detail"), py::arg("coverage"), py::arg("misc") = 0);

  m.def(
      "parse_scorecard",
      [](const std::string& raw, bool require_rationale) {
        auto parsed = parse_scorecard(raw, require_rationale);
        return Json{{"card", parsed.card}, {"warnings", parsed.warnings}}.dump();
      },
      py::arg("raw"), py::arg("require_rationale") = true);

  m.def(
      "apply_override",
      [](const std::string& card, const std::map<std::string, int>& corrections, const std::string& note) {
        return Json(apply_human_override(decode<RubricScorecard>(Json::parse(card)), corrections, note)).dump();
      },
      py::arg("card"), py::arg("corrections"), py::arg("note"));

  m.def("prompt_revision", [] { return PromptBundle::canonical().revision; });
  m.def(
      "assemble_prompt",
      [](std::optional<std::string> transcript) {
        return transcript ? assemble_prompt(PromptBundle::canonical(), std::string_view(*transcript))
                          : assemble_prompt(PromptBundle::canonical());
      },
      py::arg("transcript") = py::none());
  m.def("prompt_blocks", [] {
    const auto& b = PromptBundle::canonical();
    return std::map<std::string, std::string>{{"descriptive", b.descriptive_instructions},
                                              {"creative", b.creative_addendum},
                                              {"questions", b.questions_addendum},
                                              {"title", b.title_addendum},
                                              {"structure", b.structure_addendum}};
  });

  m.def("aggregate", [](const std::string& run) { return aggregate(run_from(run)); }, py::arg("run"));
  m.def(
      "render_report",
      [](const std::string& run, const std::string& format) {
        return render_report(run_from(run), parse_report_format(format));
      },
      py::arg("run"), py::arg("format") = "markdown");
  m.def(
      "sample_for_review",
      [](const std::string& run, std::size_t count, std::uint64_t seed) {
        return Json(sample_for_review(run_from(run), count, seed)).dump();
      },
      py::arg("run"), py::arg("count"), py::arg("seed"));
  m.def(
      "override_cell",
      [](const std::string& run, const std::string& image_id, const std::string& model_id,
         const std::map<std::string, int>& corrections, const std::string& note) {
        return Json(override_cell(run_from(run), image_id, model_id, corrections, note)).dump();
      },
      py::arg("run"), py::arg("image_id"), py::arg("model_id"), py::arg("corrections"), py::arg("note"));

  py::class_<PyEngine>(m, "Engine")
      .def(py::init<std::optional<std::string>, bool>(), py::arg("config_path") = py::none(),
           py::arg("mock") = false)
      .def("describe", &PyEngine::describe, py::arg("image"), py::arg("model_id") = py::none(),
           py::arg("transcript") = py::none())
      .def("score", &PyEngine::score, py::arg("image"), py::arg("description"),
           py::arg("judge_model_id") = py::none())
      .def_property_readonly("default_model_id", &PyEngine::default_model_id)
      .def_property_readonly("prompt_revision", &PyEngine::prompt_revision);

  py::class_<SessionStore>(m, "Store")
      .def(py::init<std::string>(), py::arg("root"))
      .def("session_count", &SessionStore::session_count)
      .def(
          "list_sessions",
          [](const SessionStore& s, std::size_t page, std::size_t page_size) {
            return Json(s.list_sessions(page, page_size)).dump();
          },
          py::arg("page") = 0, py::arg("page_size") = 50)
      .def(
          "load_session", [](const SessionStore& s, const std::string& id) { return Json(s.load_session(id)).dump(); },
          py::arg("session_id"))
      .def(
          "load_run", [](const SessionStore& s, const std::string& id) { return Json(s.load_run(id)).dump(); },
          py::arg("run_id"))
      .def("list_runs", &SessionStore::list_runs);
}
