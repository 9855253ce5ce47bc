#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "debias/disambiguator.hpp"
#include "debias/matcher.hpp"
#include "debias/ner.hpp"
#include "debias/textproc.hpp"
#include "debias/vocabulary.hpp"

namespace debias {

struct ResourcePaths {
  std::filesystem::path vocab;
  std::filesystem::path dicts;
  std::filesystem::path templates;

  /// The bundled data directory of this build.
  static ResourcePaths defaults();
};

/// Everything detection needs, loaded once and shared read-only between
/// workers: vocabulary, text resources, term index, one automaton per
/// language, prompt templates and the heuristic NER backend.
class Resources {
 public:
  Resources(const Resources&) = delete;
  Resources& operator=(const Resources&) = delete;

  /// Indexes every vocabulary language that has text resources.
  static std::shared_ptr<const Resources> create(VocabularyGraph graph, TextResources text,
                                                 TemplateStore templates);
  static std::shared_ptr<const Resources> load(const ResourcePaths& paths,
                                               std::vector<std::string>* warnings = nullptr);

  const VocabularyGraph& graph() const { return graph_; }
  const TextResources& text() const { return text_; }
  const TermIndex& index() const { return index_; }
  const TemplateStore& templates() const { return templates_; }
  const NerBackend& heuristic_ner() const { return *heuristic_ner_; }

  bool supports(Language lang) const { return automata_.contains(lang); }
  std::vector<Language> languages() const;
  /// Throws Error for an unsupported language.
  const MatcherAutomaton& automaton(Language lang) const;

 private:
  Resources(VocabularyGraph graph, TextResources text, TemplateStore templates);

  VocabularyGraph graph_;
  TextResources text_;
  TemplateStore templates_;
  TermIndex index_;
  std::map<Language, MatcherAutomaton> automata_;
  std::unique_ptr<NerBackend> heuristic_ner_;
};

}  // namespace debias
