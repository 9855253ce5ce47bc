#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "debias/disambiguator.hpp"
#include "debias/resources.hpp"

namespace debias {

/// Settings shared by the CLI subcommands and the service. Resolution order,
/// lowest to highest: defaults, config file, environment, command line.
struct AppConfig {
  ResourcePaths paths = ResourcePaths::defaults();
  LlmClientConfig llm;
  /// Scripted backend used instead of HTTP when set.
  std::optional<std::filesystem::path> mock_llm;
  /// External NER endpoint; empty selects the heuristic recognizer.
  std::string ner_endpoint;
  bool ner = true;
  bool llm_enabled = true;

  std::string host = "0.0.0.0";
  int port = 8080;
  std::filesystem::path jobs_dir = "jobs";
  std::optional<std::filesystem::path> ui_dir;
  /// Cap on a single /detect text, in bytes.
  std::uint64_t max_text_bytes = 1u << 20;
  /// Cap on an uploaded archive, in bytes.
  std::uint64_t max_upload_bytes = 64u << 20;
  std::uint64_t max_uncompressed_bytes = 256u << 20;
  std::size_t parallelism = 4;
};

/// Overlays the keys present in `doc`; unknown keys throw SchemaError.
void apply_config_json(AppConfig& config, const nlohmann::json& doc);
void apply_config_file(AppConfig& config, const std::filesystem::path& path);

using EnvLookup = std::function<const char*(const char*)>;

/// DEBIAS_LLM_ENDPOINT, DEBIAS_LLM_MODEL, DEBIAS_MAX_UPLOAD_BYTES.
void apply_environment(AppConfig& config, const EnvLookup& getenv);

/// Mock when mock_llm is set, HTTP when an endpoint is configured, otherwise
/// null.
std::shared_ptr<LlmClient> make_llm_client(const AppConfig& config);

}  // namespace debias
