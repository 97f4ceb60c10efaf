#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <string>
#include <vector>

#include "lamner/corpus.hpp"
#include "lamner/embedding_table.hpp"
#include "lamner/error.hpp"
#include "lamner/lexer.hpp"
#include "lamner/metrics.hpp"
#include "lamner/pipeline.hpp"
#include "lamner/synth.hpp"

namespace py = pybind11;
using namespace lamner;

namespace {

using Tokens = std::vector<std::string>;

std::vector<EvalPair> make_pairs(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references) {
  if (candidates.size() != references.size()) throw Error("candidates and references differ in length");
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (references[i].empty()) throw Error("pair " + std::to_string(i) + " has no reference");
    pairs.push_back({candidates[i], references[i]});
  }
  return pairs;
}

PipelineConfig config_from(const std::optional<std::filesystem::path>& path,
                           const std::map<std::string, std::string>& overrides) {
  PipelineConfig config;
  if (auto resolved = resolve_config_path(path)) config = load_config(*resolved);
  for (const auto& [k, v] : overrides) config.set(k, v);
  return config;
}

py::dict stage_dict(const StageRecord& s) {
  py::dict d;
  d["name"] = s.name;
  d["skipped"] = s.skipped;
  d["seconds"] = s.seconds;
  d["config_fingerprint"] = s.config_fingerprint;
  d["outputs"] = s.outputs;
  return d;
}

}  // namespace

PYBIND11_MODULE(_lamner, m) {
  m.doc() = "Code comment generation with semantic and syntactic code embeddings";
  m.attr("__version__") = std::string(kToolVersion.substr(kToolVersion.find(' ') + 1));

  // Translators run newest first, so the subclass is registered last.
  auto base = py::register_exception<Error>(m, "LamnerError", PyExc_RuntimeError);
  py::register_exception<StageError>(m, "StageError", base.ptr());

  m.def(
      "lex",
      [](const std::string& source) {
        std::vector<py::tuple> out;
        for (const auto& t : lex_and_label(source).tokens) {
          out.push_back(py::make_tuple(t.text, std::string(label_name(*t.label)), t.start, t.end));
        }
        return out;
      },
      py::arg("source"), "Lexes and labels Java source: list of (text, label, start, end).");
  m.def("label_names", [] {
    std::vector<std::string> names;
    for (auto l : all_labels()) names.emplace_back(label_name(l));
    return names;
  });
  m.def("tokenize_comment", &tokenize_comment, py::arg("comment"));
  m.def("code_tokens", &code_tokens_from_source, py::arg("code"));

  m.def(
      "bleu",
      [](const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references, int max_order) {
        return bleu(make_pairs(candidates, references), max_order);
      },
      py::arg("candidates"), py::arg("references"), py::arg("max_order") = 4);
  m.def(
      "rouge_l",
      [](const std::vector<Tokens>& c, const std::vector<std::vector<Tokens>>& r) { return rouge_l(make_pairs(c, r)); },
      py::arg("candidates"), py::arg("references"));
  m.def(
      "meteor",
      [](const std::vector<Tokens>& c, const std::vector<std::vector<Tokens>>& r) { return meteor(make_pairs(c, r)); },
      py::arg("candidates"), py::arg("references"));
  m.def(
      "cider",
      [](const std::vector<Tokens>& c, const std::vector<std::vector<Tokens>>& r) { return cider(make_pairs(c, r)); },
      py::arg("candidates"), py::arg("references"));
  m.def(
      "report",
      [](const std::vector<Tokens>& c, const std::vector<std::vector<Tokens>>& r) {
        const auto rep = report(make_pairs(c, r));
        return std::map<std::string, double>{{"bleu1", rep.bleu1},     {"bleu2", rep.bleu2},   {"bleu3", rep.bleu3},
                                             {"bleu4", rep.bleu4},     {"rouge_l", rep.rouge_l},
                                             {"meteor", rep.meteor},   {"cider", rep.cider}};
      },
      py::arg("candidates"), py::arg("references"), "The seven headline scores.");

  m.def(
      "load_table",
      [](const std::filesystem::path& path) {
        const auto table = EmbeddingTable::load(path);
        std::map<std::string, std::vector<double>> out;
        for (std::size_t i = 0; i < table.size(); ++i) {
          const auto row = table.row(i);
          out[table.tokens()[i]] = std::vector<double>(row.begin(), row.end());
        }
        return out;
      },
      py::arg("path"), "Reads a .vec table into {token: vector}.");

  m.def(
      "synthesize",
      [](std::size_t count, std::uint64_t seed) {
        std::vector<std::map<std::string, std::string>> out;
        for (const auto& s : synthesize_methods(count, seed)) {
          out.push_back({{"id", s.id}, {"code", s.code}, {"comment", s.comment}});
        }
        return out;
      },
      py::arg("count"), py::arg("seed") = 2021, "Template-generated Java methods with comments.");

  m.def("preset_names", &preset_names);
  m.def(
      "show_config",
      [](std::optional<std::filesystem::path> path, const std::map<std::string, std::string>& overrides) {
        return config_from(path, overrides).to_text();
      },
      py::arg("config") = py::none(), py::arg("overrides") = std::map<std::string, std::string>{});
  m.def(
      "run_pipeline",
      [](std::optional<std::filesystem::path> path, const std::map<std::string, std::string>& overrides, bool force) {
        const auto config = config_from(path, overrides);
        RunManifest manifest;
        {
          py::gil_scoped_release release;
          manifest = run_pipeline(config, {.force = force, .log = {}});
        }
        std::vector<py::dict> stages;
        for (const auto& s : manifest.stages) stages.push_back(stage_dict(s));
        return stages;
      },
      py::arg("config") = py::none(), py::arg("overrides") = std::map<std::string, std::string>{},
      py::arg("force") = false, "Runs every stage; returns one record per stage.");
  m.def(
      "self_test",
      [](std::size_t gradient_seeds) {
        SelfTestOptions options;
        options.gradient_seeds = gradient_seeds;
        std::vector<py::dict> out;
        for (const auto& s : self_test(options)) {
          py::dict d;
          d["name"] = s.name;
          d["checks"] = s.checks;
          d["failures"] = s.failures;
          d["passed"] = s.passed();
          d["messages"] = s.messages;
          out.push_back(d);
        }
        return out;
      },
      py::arg("gradient_seeds") = 3);
}
