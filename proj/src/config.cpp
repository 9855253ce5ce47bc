#include "debias/config.hpp"

#include <charconv>
#include <set>
#include <fstream>

#include "debias/errors.hpp"

namespace debias {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& doc, const char* key, T& into) {
  if (!doc.contains(key)) return;
  try {
    into = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(key, "config", e.what());
  }
}

}  // namespace

void apply_config_json(AppConfig& config, const json& doc) {
  if (!doc.is_object()) throw SchemaError("<root>", "config", "expected an object");
  static const std::set<std::string> known = {
      "vocab", "dicts", "templates", "mock_llm", "ner_endpoint", "ner", "llm", "host", "port", "jobs_dir",
      "ui_dir", "max_text_bytes", "max_upload_bytes", "max_uncompressed_bytes", "parallelism", "llm_endpoint", "llm_model",
      "model_family", "max_tokens", "temperature", "timeout_ms", "retries", "max_in_flight", "cache",
      "context_window"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw SchemaError(key, "config", "unknown key");
  }
  std::string path;
  if (doc.contains("vocab")) read(doc, "vocab", path), config.paths.vocab = path;
  if (doc.contains("dicts")) read(doc, "dicts", path), config.paths.dicts = path;
  if (doc.contains("templates")) read(doc, "templates", path), config.paths.templates = path;
  if (doc.contains("mock_llm")) read(doc, "mock_llm", path), config.mock_llm = path;
  if (doc.contains("jobs_dir")) read(doc, "jobs_dir", path), config.jobs_dir = path;
  if (doc.contains("ui_dir")) read(doc, "ui_dir", path), config.ui_dir = path;
  read(doc, "ner_endpoint", config.ner_endpoint);
  read(doc, "ner", config.ner);
  read(doc, "llm", config.llm_enabled);
  read(doc, "host", config.host);
  read(doc, "port", config.port);
  read(doc, "max_text_bytes", config.max_text_bytes);
  read(doc, "max_upload_bytes", config.max_upload_bytes);
  read(doc, "max_uncompressed_bytes", config.max_uncompressed_bytes);
  read(doc, "parallelism", config.parallelism);
  read(doc, "llm_endpoint", config.llm.endpoint);
  read(doc, "llm_model", config.llm.model);
  read(doc, "model_family", config.llm.model_family);
  read(doc, "max_tokens", config.llm.max_tokens);
  read(doc, "temperature", config.llm.temperature);
  read(doc, "timeout_ms", config.llm.timeout_ms);
  read(doc, "retries", config.llm.retries);
  read(doc, "max_in_flight", config.llm.max_in_flight);
  read(doc, "cache", config.llm.cache);
  read(doc, "context_window", config.llm.context_window);
}

void apply_config_file(AppConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  apply_config_json(config, doc);
}

void apply_environment(AppConfig& config, const EnvLookup& getenv) {
  if (const char* v = getenv("DEBIAS_LLM_ENDPOINT"); v && *v) config.llm.endpoint = v;
  if (const char* v = getenv("DEBIAS_LLM_MODEL"); v && *v) config.llm.model = v;
  if (const char* v = getenv("DEBIAS_MAX_UPLOAD_BYTES"); v && *v) {
    std::uint64_t n = 0;
    const std::string_view s(v);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec != std::errc() || ptr != s.data() + s.size() || n == 0)
      throw SchemaError("DEBIAS_MAX_UPLOAD_BYTES", "environment", "expected a positive integer");
    config.max_upload_bytes = n;
  }
}

std::shared_ptr<LlmClient> make_llm_client(const AppConfig& config) {
  std::shared_ptr<LlmBackend> backend;
  if (config.mock_llm) {
    backend = MockLlmBackend::load(*config.mock_llm);
  } else if (!config.llm.endpoint.empty()) {
    backend = std::make_shared<HttpLlmBackend>(config.llm.endpoint, config.llm.timeout_ms);
  } else {
    return nullptr;
  }
  return std::make_shared<LlmClient>(config.llm, std::move(backend));
}

}  // namespace debias
