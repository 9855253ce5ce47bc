#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "debias/disambiguator.hpp"
#include "debias/pipeline.hpp"

namespace debias {

struct EvalRecord {
  std::string text;
  Language language = Language::en;
  std::string term;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  bool contentious = false;
  std::string source;
};

struct EvalReject {
  std::size_t line = 0;  // 1-based
  std::string reason;    // invalid_json, missing_field, bad_field, unsupported_language, bad_gold, span_out_of_bounds
  std::string detail;
};

struct EvalDataset {
  std::vector<EvalRecord> records;
  std::vector<EvalReject> rejects;
};

/// One JSON object per line. Blank lines are ignored and invalid lines are
/// collected as rejects. Throws Error when the file cannot be read.
EvalDataset load_eval_dataset(const std::filesystem::path& path);
EvalDataset parse_eval_dataset(std::istream& in);

struct PrecisionCounts {
  std::size_t records = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  /// Records for which no prediction matched the gold term and span.
  std::size_t unmatched_gold = 0;

  /// Null when nothing was predicted.
  std::optional<double> precision() const;
};

struct PrecisionReport {
  std::map<Language, PrecisionCounts> per_language;
  /// Pooled counts over all languages; this is the headline figure.
  PrecisionCounts micro;
  /// Unweighted mean over languages with a defined precision.
  std::optional<double> macro_precision;
};

nlohmann::json to_json(const PrecisionReport& report);

/// A predicted annotation matches a record when its term label equals the
/// record's term ignoring case and the spans overlap. A record counts once:
/// TP when gold is contentious, FP otherwise. `config.language` is replaced
/// per record.
PrecisionReport compute_precision(const EvalDataset& dataset, const PipelineConfig& config,
                                  const Resources& resources, std::size_t parallelism = 1);

/// Every regular file under `dir`, sorted by path. Throws Error when the
/// directory holds no files.
std::vector<BatchDocument> load_corpus(const std::filesystem::path& dir);

struct ThroughputReport {
  std::size_t documents = 0;
  std::size_t characters = 0;
  std::size_t warmup = 0;
  std::vector<double> run_seconds;
  std::vector<double> chars_per_second;
  double mean_chars_per_second = 0.0;
  nlohmann::json config;
};

nlohmann::json to_json(const ThroughputReport& report);

/// Warmup passes, then `runs` timed sequential passes over the corpus. The
/// LLM cache is emptied before every pass so each one pays for its calls.
/// Characters are Unicode scalar values. Throws Error on an empty corpus or
/// runs < 1.
ThroughputReport measure_throughput(const std::vector<BatchDocument>& corpus, const PipelineConfig& config,
                                    const Resources& resources, std::size_t runs = 5, std::size_t warmup = 1);

struct AblationRow {
  bool llm = false;
  bool ner = false;
  PrecisionReport precision;
  ThroughputReport throughput;
  /// Backend calls during this row's precision and throughput passes.
  std::size_t llm_calls = 0;
};

struct AblationTable {
  /// (LLM, NER): (off, off), (off, on), (on, off), (on, on).
  std::vector<AblationRow> rows;
};

nlohmann::json to_json(const AblationTable& table);
std::string render_text(const AblationTable& table);

struct AblationOptions {
  std::size_t runs = 5;
  std::size_t warmup = 1;
  std::size_t parallelism = 1;
  /// Null selects the heuristic recognizer.
  std::shared_ptr<const NerBackend> ner_backend;
};

/// Precision over the dataset and throughput over the corpus for each of
/// the four stage configurations, with `language` used for the corpus.
AblationTable run_ablation(const EvalDataset& dataset, const std::vector<BatchDocument>& corpus,
                           Language corpus_language, const Resources& resources,
                           std::shared_ptr<LlmClient> llm_client, const AblationOptions& options = {});

/// A scripted backend that answers each record's term in its own text with
/// the record's gold label.
std::shared_ptr<MockLlmBackend> gold_aligned_mock(const EvalDataset& dataset);

}  // namespace debias
