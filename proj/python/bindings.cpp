#include <map>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tracecurate/filters.hpp"
#include "tracecurate/ngram_index.hpp"
#include "tracecurate/report.hpp"
#include "tracecurate/reviser.hpp"
#include "tracecurate/sampler.hpp"
#include "tracecurate/scorer.hpp"
#include "tracecurate/segmenter.hpp"
#include "tracecurate/stages.hpp"
#include "tracecurate/tokenizer.hpp"

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;
namespace tc = tracecurate;

namespace {

// Structured results cross the boundary as JSON text; the Python package
// decodes them.
std::string segment_json(const std::string& text, std::vector<std::string> markers,
                         bool case_sensitive, bool require_start) {
  tc::MarkerConfig c;
  if (!markers.empty()) c.markers = std::move(markers);
  c.case_sensitive = case_sensitive;
  c.require_line_or_sentence_start = require_start;
  tc::Json out = tc::Json::array();
  for (const auto& s : tc::segment(text, c)) {
    out.push_back(tc::Json{{"index", s.index},
                           {"text", s.text},
                           {"marker", s.marker},
                           {"char_span", tc::Json::array({s.span.begin, s.span.end})}});
  }
  return out.dump();
}

std::string thinking_json(const std::string& answer, const std::string& open,
                          const std::string& close) {
  const auto t = tc::extract_thinking(answer, {open, close});
  return tc::Json{{"prefix", t.prefix},
                  {"text", t.text},
                  {"final_answer", t.final_answer},
                  {"had_delimiters", t.had_delimiters}}
      .dump();
}

double quality(const std::vector<std::size_t>& tokens, const std::vector<double>& scores,
               const std::string& weighting) {
  return tc::combine_scores(tokens, scores, tc::parse_weighting(weighting));
}

std::string revise_json(const std::vector<std::string>& texts,
                        const std::vector<std::array<bool, 5>>& verdicts,
                        const std::string& final_answer,
                        const std::map<std::size_t, bool>& independent) {
  std::vector<tc::Subtrajectory> subs;
  std::size_t pos = 0;
  for (const auto& t : texts) {
    subs.push_back({subs.size(), t, "", {pos, pos + t.size()}});
    pos += t.size();
  }
  std::vector<tc::CriterionVerdicts> v;
  for (const auto& b : verdicts) v.push_back(tc::CriterionVerdicts::from_bools(b));
  const auto r = tc::revise(subs, v, final_answer, [&](std::size_t i, std::string_view) {
    auto it = independent.find(i);
    if (it == independent.end()) {
      throw tc::DataError("no independence verdict for subtrajectory " + std::to_string(i));
    }
    return it->second;
  });
  tc::Json j = r.to_json();
  j["revised_text"] = r.revised_text;
  return j.dump();
}

std::string select_json(const std::vector<std::tuple<std::string, double, int>>& rows,
                        std::size_t d, double epsilon) {
  std::vector<tc::ScoredItem> items;
  for (const auto& [id, q, n] : rows) items.push_back({id, q, n});
  const auto run = tc::select(items, d, epsilon);
  tc::Json j = run.audit_json();
  j["sampled_ids"] = run.sampled_ids;
  return j.dump();
}

double kl(const std::map<int, double>& p, const std::map<int, double>& q, double eps) {
  return tc::kl_divergence(tc::CountDistribution{p}, tc::CountDistribution{q}, eps);
}

tc::StageOptions stage_options(const std::string& config_json, bool force) {
  tc::StageOptions o;
  if (!config_json.empty()) o.config = tc::PipelineConfig::from_json(tc::Json::parse(config_json));
  o.force = force;
  return o;
}

std::string run_stage(const std::string& name, const std::string& in,
                      const std::string& out, const std::string& config_json,
                      bool force) {
  const auto o = stage_options(config_json, force);
  using Runner = tc::StageSummary (*)(const std::string&, const std::string&,
                                      const tc::StageOptions&);
  static const std::map<std::string, Runner> runners = {
      {"segment", tc::run_segment}, {"judge", tc::run_judge},
      {"revise", tc::run_revise},   {"score", tc::run_score},
      {"sample", tc::run_sample},   {"filter", tc::run_filter},
      {"decontaminate", tc::run_decontaminate}, {"report", tc::run_report},
  };
  auto it = runners.find(name);
  if (it == runners.end()) throw tc::ConfigError("unknown stage \"" + name + "\"");
  py::gil_scoped_release release;
  return it->second(in, out, o).to_json().dump();
}

std::string run_pipeline(const std::string& in, const std::string& out_dir,
                         const std::string& config_json) {
  const auto o = stage_options(config_json, false);
  py::gil_scoped_release release;
  tc::Json all = tc::Json::array();
  for (const auto& s : tc::run_pipeline(in, out_dir, o)) all.push_back(s.to_json());
  return all.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reasoning-trace curation core";

  // Translators run newest first, so the base class goes in first.
  auto error = py::register_exception<tc::Error>(m, "Error");
  py::register_exception<tc::ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<tc::DependencyError>(m, "DependencyError", error.ptr());
  py::register_exception<tc::BackendError>(m, "BackendError", error.ptr());
  py::register_exception<tc::DataError>(m, "DataError", error.ptr());

  m.def("extract_thinking", &thinking_json, py::arg("answer"),
        py::arg("open") = "<think>", py::arg("close") = "</think>");
  m.def("segment", &segment_json, py::arg("text"),
        py::arg("markers") = std::vector<std::string>{},
        py::arg("case_sensitive") = true, py::arg("require_sentence_start") = true);
  m.def("default_markers", &tc::MarkerConfig::default_markers);
  m.def("count_tokens", [](const std::string& text) { return tc::count_tokens(text); });
  m.def("quality_score", &quality, py::arg("token_counts"), py::arg("scores"),
        py::arg("weighting") = "token_weighted");
  m.def("revise", &revise_json, py::arg("texts"), py::arg("verdicts"),
        py::arg("final_answer"), py::arg("independent"));
  m.def("select", &select_json, py::arg("items"), py::arg("d"),
        py::arg("epsilon") = 1e-9);
  m.def("alpha", &tc::alpha);
  m.def("kl_divergence", &kl, py::arg("p"), py::arg("q"), py::arg("epsilon") = 1e-9);
  m.def("has_boxed_answer", [](const std::string& s) { return tc::has_boxed_answer(s); });
  m.def("extract_boxed", [](const std::string& s) { return tc::extract_boxed(s); });
  m.def("percent_change", &tc::percent_change);
  m.def("run_stage", &run_stage, py::arg("stage"), py::arg("input"), py::arg("output"),
        py::arg("config") = "", py::arg("force") = false);
  m.def("run_pipeline", &run_pipeline, py::arg("input"), py::arg("out_dir"),
        py::arg("config") = "");

  py::class_<tc::NgramIndex>(m, "NgramIndex")
      .def(py::init<std::size_t>(), py::arg("n") = 15)
      .def("add", [](tc::NgramIndex& ix, const std::string& id,
                     const std::string& q) { ix.add({id, q}); })
      .def("matches",
           [](const tc::NgramIndex& ix, const std::string& text) {
             std::vector<std::string> ids;
             for (const auto& mt : ix.matches(text)) ids.push_back(mt.benchmark_id);
             return ids;
           })
      .def_property_readonly("window_count", &tc::NgramIndex::window_count)
      .def_property_readonly("n", &tc::NgramIndex::n);

#ifdef VERSION_INFO
  m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
  m.attr("__version__") = "dev";
#endif
}
