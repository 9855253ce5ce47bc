#include "debias/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

#include "debias/hash.hpp"
#include "debias/unicode.hpp"

namespace debias {

using nlohmann::json;

std::string_view to_string(FilterStage stage) {
  switch (stage) {
    case FilterStage::ner: return "ner";
    case FilterStage::llm: return "llm";
    case FilterStage::llm_unparseable: return "llm_unparseable";
  }
  return "ner";
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Annotation enrich(const RawMatch& m, const LemmatizedDocument& doc, const VocabularyGraph& graph,
                  LlmVerdictLabel verdict) {
  const ContentiousTerm* term = graph.find_term(m.term_id);
  const ContentiousIssue& issue = lookup_issue(graph, m.term_id);
  Annotation a;
  a.term_id = m.term_id;
  a.issue_id = issue.id;
  const std::size_t b = doc.tokens[m.first_token_index].token.byte_start;
  const std::size_t e = doc.tokens[m.last_token_index].token.byte_end;
  a.surface = doc.text.substr(b, e - b);
  a.char_start = m.char_start;
  a.char_end = m.char_end;
  a.ambiguous = term->ambiguous;
  a.via_compound = m.via_compound;
  a.llm_verdict = verdict;
  a.suggestion_note = issue.suggestion_note;
  a.suggested_terms = issue.suggested_terms;
  a.categories = issue.categories;
  return a;
}

}  // namespace

AnnotatedDocument detect(std::string_view text, const PipelineConfig& config, const Resources& resources,
                         std::string document_id) {
  if (!resources.supports(config.language))
    throw Error("unsupported language '" + std::string(to_string(config.language)) + "'");

  AnnotatedDocument out;
  out.document_id = std::move(document_id);
  out.language = config.language;
  out.text_sha256 = sha256_hex(text);
  out.characters = unicode::count_code_points(text);

  auto t0 = Clock::now();
  const LemmatizedDocument doc = preprocess(text, config.language, resources.text());
  out.timing_ms.preprocess = ms_since(t0);

  t0 = Clock::now();
  std::vector<RawMatch> matches = find_matches(doc, resources.automaton(config.language));
  out.timing_ms.match = ms_since(t0);

  if (config.ner_enabled && !matches.empty()) {
    t0 = Clock::now();
    const NerBackend& backend = config.ner_backend ? *config.ner_backend : resources.heuristic_ner();
    std::vector<EntitySpan> entities;
    try {
      entities = detect_entities(doc, backend);
    } catch (const BackendError& e) {
      throw StageError("ner", e.what());
    }
    FilterResult filtered = filter_matches(matches, entities);
    if (config.diagnostic_mode) {
      for (const auto& m : filtered.dropped)
        out.diagnostics.push_back({m.term_id, m.char_start, m.char_end, FilterStage::ner, {}});
    }
    matches = std::move(filtered.kept);
    out.timing_ms.ner = ms_since(t0);
  }

  std::vector<JudgedMatch> judged;
  const bool needs_llm = config.llm_enabled &&
                         std::any_of(matches.begin(), matches.end(), [&](const RawMatch& m) {
                           return resources.index().is_ambiguous(m.term_id);
                         });
  if (needs_llm) {
    if (!config.llm_client) throw StageError("llm", "no LLM backend configured");
    t0 = Clock::now();
    DisambiguationResult result;
    try {
      result = disambiguate(matches, doc, resources.graph(), resources.templates(), *config.llm_client,
                            config.llm_client->config().context_window);
    } catch (const BackendError& e) {
      throw StageError("llm", e.what());
    } catch (const TemplateError& e) {
      throw StageError("llm", e.what());
    }
    out.timing_ms.llm = ms_since(t0);
    if (config.diagnostic_mode) {
      for (const auto& d : result.dropped) {
        const bool unparseable = d.verdict && d.verdict->value == VerdictValue::unparseable;
        out.diagnostics.push_back({d.match.term_id, d.match.char_start, d.match.char_end,
                                   unparseable ? FilterStage::llm_unparseable : FilterStage::llm,
                                   d.verdict ? d.verdict->raw_answer : std::string()});
      }
    }
    judged = std::move(result.kept);
  } else {
    for (auto& m : matches) judged.push_back({std::move(m), std::nullopt});
  }

  for (const auto& j : judged) {
    const LlmVerdictLabel label = (j.verdict && j.verdict->value == VerdictValue::contentious)
                                      ? LlmVerdictLabel::contentious
                                      : LlmVerdictLabel::skipped;
    out.annotations.push_back(enrich(j.match, doc, resources.graph(), label));
  }
  std::stable_sort(out.annotations.begin(), out.annotations.end(), [](const Annotation& a, const Annotation& b) {
    if (a.char_start != b.char_start) return a.char_start < b.char_start;
    return a.char_end > b.char_end;
  });
  std::stable_sort(out.diagnostics.begin(), out.diagnostics.end(),
                   [](const FilteredDetection& a, const FilteredDetection& b) { return a.char_start < b.char_start; });
  return out;
}

json to_json(const AnnotatedDocument& doc, bool include_timing) {
  json annotations = json::array();
  for (const auto& a : doc.annotations) {
    annotations.push_back({{"term_id", a.term_id},
                           {"issue_id", a.issue_id},
                           {"surface", a.surface},
                           {"char_start", a.char_start},
                           {"char_end", a.char_end},
                           {"ambiguous", a.ambiguous},
                           {"via_compound", a.via_compound},
                           {"llm_verdict", a.llm_verdict == LlmVerdictLabel::contentious ? "contentious" : "skipped"},
                           {"suggestion_note", a.suggestion_note},
                           {"suggested_terms", a.suggested_terms},
                           {"categories", a.categories}});
  }
  json diagnostics = json::array();
  for (const auto& d : doc.diagnostics) {
    json rec = {{"term_id", d.term_id},
                {"char_start", d.char_start},
                {"char_end", d.char_end},
                {"filtered_by", std::string(to_string(d.filtered_by))}};
    if (d.filtered_by != FilterStage::ner) rec["raw_answer"] = d.raw_answer;
    diagnostics.push_back(std::move(rec));
  }
  json out = {{"document_id", doc.document_id},
              {"language", std::string(to_string(doc.language))},
              {"text_sha256", doc.text_sha256},
              {"annotations", std::move(annotations)},
              {"diagnostics", std::move(diagnostics)}};
  if (include_timing) {
    out["timing_ms"] = {{"preprocess", doc.timing_ms.preprocess},
                        {"match", doc.timing_ms.match},
                        {"ner", doc.timing_ms.ner},
                        {"llm", doc.timing_ms.llm}};
  }
  if (doc.error) out["error"] = *doc.error;
  return out;
}

BatchStats tally(const std::vector<AnnotatedDocument>& documents, const VocabularyGraph& graph) {
  BatchStats stats;
  std::map<std::string, std::size_t> per_term;
  for (const auto& doc : documents) {
    ++stats.documents;
    stats.characters += doc.characters;
    stats.annotations += doc.annotations.size();
    for (const auto& a : doc.annotations) {
      ++per_term[a.term_id];
      for (const auto& c : a.categories) ++stats.category_counts[c];
    }
  }
  for (const auto& [id, count] : per_term) {
    const ContentiousTerm* term = graph.find_term(id);
    stats.term_frequencies.push_back({id, term ? term->label : std::string(), count});
  }
  std::stable_sort(stats.term_frequencies.begin(), stats.term_frequencies.end(),
                   [](const TermFrequency& a, const TermFrequency& b) { return a.count > b.count; });
  return stats;
}

json to_json(const BatchStats& stats) {
  json freqs = json::array();
  for (const auto& f : stats.term_frequencies)
    freqs.push_back({{"term_id", f.term_id}, {"label", f.label}, {"count", f.count}});
  json failures = json::array();
  for (const auto& f : stats.failures)
    failures.push_back({{"document_id", f.document_id}, {"stage", f.stage}, {"message", f.message}});
  return {{"documents", stats.documents},
          {"annotations", stats.annotations},
          {"characters", stats.characters},
          {"wall_seconds", stats.wall_seconds},
          {"chars_per_second", stats.chars_per_second},
          {"term_frequencies", std::move(freqs)},
          {"category_counts", stats.category_counts},
          {"failures", std::move(failures)}};
}

BatchResult detect_batch(const std::vector<BatchDocument>& documents, const PipelineConfig& config,
                         const Resources& resources, std::size_t parallelism) {
  BatchResult result;
  result.documents.resize(documents.size());
  std::vector<std::optional<BatchFailure>> failures(documents.size());

  const auto start = Clock::now();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < documents.size(); i = next++) {
      const auto& d = documents[i];
      try {
        result.documents[i] = detect(d.text, config, resources, d.id);
      } catch (const StageError& e) {
        failures[i] = BatchFailure{d.id, e.stage(), e.what()};
      } catch (const std::exception& e) {
        failures[i] = BatchFailure{d.id, "pipeline", e.what()};
      }
      if (failures[i]) {
        AnnotatedDocument failed;
        failed.document_id = d.id;
        failed.language = config.language;
        failed.text_sha256 = sha256_hex(d.text);
        failed.characters = unicode::count_code_points(d.text);
        failed.error = failures[i]->message;
        result.documents[i] = std::move(failed);
      }
    }
  };
  {
    const std::size_t n = std::max<std::size_t>(1, std::min(parallelism, documents.size()));
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  const double wall = std::chrono::duration<double>(Clock::now() - start).count();

  result.stats = tally(result.documents, resources.graph());
  for (auto& f : failures) {
    if (f) result.stats.failures.push_back(std::move(*f));
  }
  result.stats.wall_seconds = wall;
  result.stats.chars_per_second = wall > 0 ? static_cast<double>(result.stats.characters) / wall : 0.0;
  return result;
}

}  // namespace debias
