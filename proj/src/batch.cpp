#include "debias/batch.hpp"

#include "debias/errors.hpp"
#include "debias/unicode.hpp"
#include "debias/zip.hpp"

namespace debias {

using nlohmann::json;

ZipBatchInput read_zip_batch(std::string_view archive, std::uint64_t max_total_bytes) {
  ZipBatchInput input;
  for (auto& entry : zip::read_archive(archive, max_total_bytes)) {
    if (entry.is_directory) {
      input.skipped.push_back({entry.name, "directory"});
      continue;
    }
    if (!unicode::is_valid_utf8(entry.data)) throw ZipError("entry '" + entry.name + "' is not valid UTF-8");
    input.documents.push_back({std::move(entry.name), std::move(entry.data)});
  }
  return input;
}

json config_snapshot(const PipelineConfig& config) {
  json snap = {{"language", std::string(to_string(config.language))},
               {"ner", config.ner_enabled},
               {"llm", config.llm_enabled},
               {"diagnostics", config.diagnostic_mode}};
  if (config.llm_client) {
    const auto& c = config.llm_client->config();
    snap["llm_endpoint"] = config.llm_client->backend().endpoint();
    snap["llm_model"] = c.model;
    snap["model_family"] = c.model_family;
    snap["context_window"] = c.context_window;
  }
  return snap;
}

ZipBatchOutput run_zip_batch(const ZipBatchInput& input, const PipelineConfig& config, const Resources& resources,
                             std::size_t parallelism, const json& config_snapshot) {
  BatchResult result = detect_batch(input.documents, config, resources, parallelism);

  ZipBatchOutput out;
  for (const auto& doc : result.documents) {
    out.annotations_jsonl += to_json(doc).dump();
    out.annotations_jsonl += '\n';
  }
  out.report = to_json(result.stats);
  json skipped = json::array();
  for (const auto& s : input.skipped) skipped.push_back({{"name", s.name}, {"reason", s.reason}});
  out.report["skipped_entries"] = std::move(skipped);
  out.report["config"] = config_snapshot;

  zip::Writer writer;
  writer.add("annotations.jsonl", out.annotations_jsonl);
  writer.add("report.json", out.report.dump(2));
  out.archive = writer.finish();
  return out;
}

}  // namespace debias
