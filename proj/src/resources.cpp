#include "debias/resources.hpp"

#include "debias/errors.hpp"

namespace debias {

ResourcePaths ResourcePaths::defaults() {
  const std::filesystem::path root = DEBIAS_DATA_DIR;
  return {root / "vocab" / "fixture_vocab.json", root / "dicts", root / "templates"};
}

Resources::Resources(VocabularyGraph graph, TextResources text, TemplateStore templates)
    : graph_(std::move(graph)), text_(std::move(text)), templates_(std::move(templates)) {
  std::vector<Language> langs;
  for (const auto& [lang, res] : text_.languages) langs.push_back(lang);
  index_ = build_term_index(graph_, make_label_lemmatizer(text_), langs);
  for (Language lang : langs) automata_.emplace(lang, MatcherAutomaton::compile(index_, lang));
  heuristic_ner_ = std::make_unique<HeuristicNerBackend>(text_);
}

std::shared_ptr<const Resources> Resources::create(VocabularyGraph graph, TextResources text,
                                                   TemplateStore templates) {
  return std::shared_ptr<const Resources>(
      new Resources(std::move(graph), std::move(text), std::move(templates)));
}

std::shared_ptr<const Resources> Resources::load(const ResourcePaths& paths, std::vector<std::string>* warnings) {
  auto graph = load_vocabulary_file(paths.vocab, warnings);
  auto report = validate(graph);
  if (!report.ok()) {
    const auto& v = report.violations.front();
    throw Error("vocabulary failed validation (" + std::to_string(report.violations.size()) +
                " violations), first: " + std::string(to_string(v.kind)) + " at '" + v.record_id + "': " + v.message);
  }
  if (warnings) {
    for (const auto& w : report.warnings) warnings->push_back(std::string(to_string(w.kind)) + ": " + w.message);
  }
  auto text = TextResources::load(paths.dicts);
  if (warnings) {
    for (const auto& term : graph.terms()) {
      if (!text.supports(term.language))
        warnings->push_back("term '" + term.id + "' not indexed: no text resources for its language");
    }
  }
  auto templates = TemplateStore::load(paths.templates);
  return create(std::move(graph), std::move(text), std::move(templates));
}

std::vector<Language> Resources::languages() const {
  std::vector<Language> out;
  for (const auto& [lang, a] : automata_) out.push_back(lang);
  return out;
}

const MatcherAutomaton& Resources::automaton(Language lang) const {
  auto it = automata_.find(lang);
  if (it == automata_.end()) throw Error("unsupported language '" + std::string(to_string(lang)) + "'");
  return it->second;
}

}  // namespace debias
