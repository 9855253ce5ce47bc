#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "debias/disambiguator.hpp"
#include "debias/errors.hpp"
#include "debias/ner.hpp"
#include "debias/resources.hpp"

namespace debias {

struct PipelineConfig {
  Language language = Language::en;
  bool ner_enabled = true;
  bool llm_enabled = true;
  /// Null selects the heuristic recognizer bundled with the resources.
  std::shared_ptr<const NerBackend> ner_backend;
  /// Required when llm_enabled and an ambiguous term is hit.
  std::shared_ptr<LlmClient> llm_client;
  /// Keep filtered detections, with the stage that removed them.
  bool diagnostic_mode = false;
};

/// Raised by detect() when a stage fails; names the stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

enum class LlmVerdictLabel { contentious, skipped };

struct Annotation {
  std::string term_id;
  std::string issue_id;
  std::string surface;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  bool ambiguous = false;
  bool via_compound = false;
  LlmVerdictLabel llm_verdict = LlmVerdictLabel::skipped;
  std::string suggestion_note;
  std::vector<std::string> suggested_terms;
  std::vector<std::string> categories;

  bool operator==(const Annotation&) const = default;
};

enum class FilterStage { ner, llm, llm_unparseable };

std::string_view to_string(FilterStage stage);

struct FilteredDetection {
  std::string term_id;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  FilterStage filtered_by = FilterStage::ner;
  std::string raw_answer;  // LLM stages only
};

struct StageTiming {
  double preprocess = 0.0;
  double match = 0.0;
  double ner = 0.0;
  double llm = 0.0;
};

struct AnnotatedDocument {
  std::string document_id;
  std::string text_sha256;
  Language language = Language::en;
  std::size_t characters = 0;
  std::vector<Annotation> annotations;
  std::vector<FilteredDetection> diagnostics;
  StageTiming timing_ms;
  /// Set for batch documents whose detection failed.
  std::optional<std::string> error;
};

nlohmann::json to_json(const AnnotatedDocument& doc, bool include_timing = true);

/// preprocess -> match and entity recognition -> NER filter -> LLM
/// disambiguation -> enrichment with issue payloads. Throws StageError("llm")
/// on LLM backend failure; throws Error for an unsupported language.
AnnotatedDocument detect(std::string_view text, const PipelineConfig& config, const Resources& resources,
                         std::string document_id = {});

struct TermFrequency {
  std::string term_id;
  std::string label;
  std::size_t count = 0;
};

struct BatchFailure {
  std::string document_id;
  std::string stage;
  std::string message;
};

struct BatchStats {
  std::size_t documents = 0;
  std::size_t annotations = 0;
  std::size_t characters = 0;
  double wall_seconds = 0.0;
  double chars_per_second = 0.0;
  /// Sorted by count descending, then term id.
  std::vector<TermFrequency> term_frequencies;
  std::map<std::string, std::size_t> category_counts;
  std::vector<BatchFailure> failures;
};

nlohmann::json to_json(const BatchStats& stats);

struct BatchResult {
  /// In input order.
  std::vector<AnnotatedDocument> documents;
  BatchStats stats;
};

struct BatchDocument {
  std::string id;
  std::string text;
};

/// Runs detect() over the documents on `parallelism` workers. A failing
/// document is recorded and does not abort the batch.
BatchResult detect_batch(const std::vector<BatchDocument>& documents, const PipelineConfig& config,
                         const Resources& resources, std::size_t parallelism);

/// Recomputes document, annotation, term and category totals from results.
BatchStats tally(const std::vector<AnnotatedDocument>& documents, const VocabularyGraph& graph);

}  // namespace debias
