#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "debias/disambiguator.hpp"
#include "debias/ner.hpp"
#include "debias/resources.hpp"

namespace debias {

enum class JobState { queued, running, done, failed };

std::string_view to_string(JobState state);
std::optional<JobState> parse_job_state(std::string_view s);

/// Jobs on local disk, one directory per job id holding job.json,
/// input.zip and, once done, result.zip. Access is serialized.
class JobStore {
 public:
  explicit JobStore(std::filesystem::path root);

  /// Writes the input and a queued manifest; returns the new job id.
  std::string create(nlohmann::json manifest, std::string_view input_zip);
  std::optional<nlohmann::json> manifest(const std::string& id) const;
  std::string input(const std::string& id) const;
  std::optional<std::string> result(const std::string& id) const;

  /// Moves a job to `next`. Throws Error for a transition other than
  /// queued->running or running->{done, failed}. `result` is required for
  /// done; `error` is recorded for failed.
  nlohmann::json transition(const std::string& id, JobState next, const std::string* result = nullptr,
                            const std::string& error = {});
  /// Extra manifest fields, e.g. webhook delivery status.
  void annotate(const std::string& id, const std::string& key, nlohmann::json value);

  /// Fails jobs left running by an earlier process; their input stays on
  /// disk. Returns the ids still queued, oldest id first.
  std::vector<std::string> recover();

  static bool valid_id(std::string_view id);
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path dir(const std::string& id) const { return root_ / id; }
  void write_manifest(const std::string& id, const nlohmann::json& manifest) const;
  nlohmann::json read_manifest(const std::string& id) const;

  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

struct ServiceOptions {
  std::uint64_t max_text_bytes = 1u << 20;
  std::uint64_t max_upload_bytes = 64u << 20;
  std::uint64_t max_uncompressed_bytes = 256u << 20;
  std::size_t parallelism = 4;
  std::filesystem::path jobs_dir = "jobs";
  std::optional<std::filesystem::path> ui_dir;
  /// Stage defaults when a request does not say.
  bool ner = true;
  bool llm = true;
  std::shared_ptr<const NerBackend> ner_backend;
  std::shared_ptr<LlmClient> llm_client;
};

/// HTTP front end: /api/v1/detect, /api/v1/batch, /api/v1/jobs/{id},
/// /api/v1/jobs/{id}/result, /api/v1/vocabulary, /api/v1/vocabulary/terms,
/// /healthz and an optional static /ui/ mount. Errors are JSON objects
/// {"error": {"code", "message"}}.
class Service {
 public:
  Service(std::shared_ptr<const Resources> resources, ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds; port 0 picks a free one. Returns the port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Blocks.
  void run();
  /// Stops accepting requests and finishes the running job. Queued jobs stay
  /// queued on disk and resume on the next start.
  void stop();

  /// Blocks until no job is queued or running, or the timeout passes.
  bool wait_idle(std::chrono::milliseconds timeout);

  JobStore& jobs();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace debias
