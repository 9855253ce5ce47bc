#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "debias/pipeline.hpp"

namespace debias {

struct SkippedEntry {
  std::string name;
  std::string reason;  // "directory"
};

struct ZipBatchInput {
  std::vector<BatchDocument> documents;
  std::vector<SkippedEntry> skipped;
};

/// Unpacks an uploaded archive into documents named after their entries.
/// Directory entries are skipped. Throws ZipError for a malformed archive,
/// a non-UTF-8 entry, or an uncompressed total above `max_total_bytes`.
ZipBatchInput read_zip_batch(std::string_view archive, std::uint64_t max_total_bytes);

struct ZipBatchOutput {
  std::string annotations_jsonl;
  nlohmann::json report;
  /// annotations.jsonl + report.json
  std::string archive;
};

/// One annotations.jsonl line per document, in input order; failed documents
/// carry an "error" field. The report holds the batch statistics, skipped
/// entries, and `config_snapshot` under "config".
ZipBatchOutput run_zip_batch(const ZipBatchInput& input, const PipelineConfig& config, const Resources& resources,
                             std::size_t parallelism, const nlohmann::json& config_snapshot = nlohmann::json::object());

/// Configuration fields worth recording next to results.
nlohmann::json config_snapshot(const PipelineConfig& config);

}  // namespace debias
