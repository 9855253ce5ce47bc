#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "debias/language.hpp"
#include "debias/matcher.hpp"
#include "debias/textproc.hpp"
#include "debias/vocabulary.hpp"

namespace debias {

/// A prompt with {term}, {vocabulary_context} and {text} placeholders. The
/// model family selects the special-token framing.
struct PromptTemplate {
  Language language = Language::en;
  std::string model_family;
  std::string text;
};

/// Templates keyed by (language, model family).
class TemplateStore {
 public:
  /// Throws TemplateError when a placeholder is missing or unknown.
  void add(PromptTemplate tmpl);
  const PromptTemplate* find(Language lang, std::string_view model_family) const;
  const PromptTemplate& at(Language lang, std::string_view model_family) const;
  std::size_t size() const { return templates_.size(); }

  /// Loads every *.json file in `dir`. Each file holds
  /// {"templates": [{"language", "model_family", "template"}]}.
  static TemplateStore load(const std::filesystem::path& dir);

 private:
  std::map<std::pair<Language, std::string>, PromptTemplate> templates_;
};

/// Issue description and suggestion note joined by one space.
std::string vocabulary_context(const ContentiousIssue& issue);

/// Substitutes every placeholder occurrence in one pass; substituted values
/// are never rescanned. Throws TemplateError on a language mismatch, an
/// unknown placeholder, or a missing required one.
std::string build_prompt(std::string_view term_label, std::string_view vocabulary_context,
                         std::string_view text, Language lang, const PromptTemplate& tmpl);

enum class VerdictValue { contentious, not_contentious, unparseable };

std::string_view to_string(VerdictValue v);

struct Verdict {
  VerdictValue value = VerdictValue::unparseable;
  std::string raw_answer;
  double latency_ms = 0.0;
  int requests = 0;
};

/// First word of the answer against per-language yes/no tokens, ignoring
/// case, punctuation and diacritics.
VerdictValue parse_answer(std::string_view raw, Language lang);

struct LlmClientConfig {
  std::string endpoint;
  std::string model;
  std::string model_family = "llama3";
  int max_tokens = 8;
  double temperature = 0.0;
  int timeout_ms = 30000;
  /// Extra attempts after a network failure or timeout.
  int retries = 1;
  int max_in_flight = 4;
  bool cache = true;
  /// Tokens of context on each side of a match.
  std::size_t context_window = 64;
};

struct CompletionRequest {
  std::string prompt;
  int n_predict = 8;
  double temperature = 0.0;
  std::string model;
  // Not sent over the wire; lets scripted backends key on the query.
  std::string term;
  std::string excerpt;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  /// Returns the raw completion text. Throws BackendError.
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual bool reachable() = 0;
  virtual std::string endpoint() const = 0;
};

/// Completion over HTTP: POST {"prompt", "n_predict", "temperature"} ->
/// {"content"}.
class HttpLlmBackend final : public LlmBackend {
 public:
  HttpLlmBackend(std::string endpoint, int timeout_ms);
  std::string complete(const CompletionRequest& request) override;
  bool reachable() override;
  std::string endpoint() const override { return endpoint_; }

 private:
  std::string endpoint_;
  int timeout_ms_;
};

/// Scriptable in-process backend. Answers come from, in order: queued
/// answers, the first rule whose term and excerpt substring match, the
/// default answer.
class MockLlmBackend final : public LlmBackend {
 public:
  struct Rule {
    std::string term;      // empty matches any term; case-insensitive
    std::string contains;  // empty matches any excerpt
    std::string answer;
  };

  MockLlmBackend() = default;

  /// {"default": "...", "latency_ms": 0, "unreachable": false,
  ///  "rules": [{"term", "contains", "answer"}]}
  static std::shared_ptr<MockLlmBackend> from_json(const nlohmann::json& script);
  static std::shared_ptr<MockLlmBackend> load(const std::filesystem::path& path);

  void add_rule(Rule rule);
  void queue_answers(std::vector<std::string> answers);
  void set_default_answer(std::string answer);
  void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }
  void set_unreachable(bool unreachable) { unreachable_ = unreachable; }

  std::string complete(const CompletionRequest& request) override;
  bool reachable() override { return !unreachable_; }
  std::string endpoint() const override { return "mock://llm"; }

  std::size_t calls() const { return calls_.load(); }
  void reset_calls() { calls_ = 0; }
  /// Prompts received, in arrival order.
  std::vector<std::string> prompts() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Rule> rules_;
  std::deque<std::string> queued_;
  std::string default_answer_ = "no";
  std::chrono::milliseconds latency_{0};
  std::atomic<bool> unreachable_{false};
  std::atomic<std::size_t> calls_{0};
  std::vector<std::string> prompts_;
};

/// Issues classification requests with bounded concurrency, retries and a
/// verdict cache shared across threads.
class LlmClient {
 public:
  LlmClient(LlmClientConfig config, std::shared_ptr<LlmBackend> backend);

  const LlmClientConfig& config() const { return config_; }
  LlmBackend& backend() const { return *backend_; }

  /// One completion; on an unparseable answer, one more with the identical
  /// prompt. Throws BackendError once network retries are exhausted.
  Verdict classify(const std::string& prompt, Language lang, const std::string& term = {},
                   const std::string& excerpt = {});

  /// classify() behind the cache, keyed by (term id, excerpt).
  Verdict classify_cached(const std::string& term_id, const std::string& excerpt, const std::string& prompt,
                          Language lang, const std::string& term_label);

  void clear_cache();
  std::size_t cache_size() const;

 private:
  std::string complete_with_retries(const CompletionRequest& request);

  LlmClientConfig config_;
  std::shared_ptr<LlmBackend> backend_;
  std::counting_semaphore<1024> in_flight_;
  mutable std::mutex cache_mutex_;
  std::unordered_map<std::string, std::shared_future<Verdict>> cache_;
};

/// A match that went through the LLM stage (or skipped it).
struct JudgedMatch {
  RawMatch match;
  std::optional<Verdict> verdict;  // empty for non-ambiguous terms
};

struct DisambiguationResult {
  std::vector<JudgedMatch> kept;
  std::vector<JudgedMatch> dropped;
};

/// Excerpt of ±window tokens around the match, sliced from the original text.
std::string context_excerpt(const LemmatizedDocument& doc, const RawMatch& match, std::size_t window);

/// Matches of non-ambiguous terms pass through without an LLM call.
/// Ambiguous ones are kept only on a "contentious" verdict; unparseable
/// verdicts are dropped. Backend failures propagate.
DisambiguationResult disambiguate(const std::vector<RawMatch>& matches, const LemmatizedDocument& doc,
                                  const VocabularyGraph& graph, const TemplateStore& templates,
                                  LlmClient& client, std::size_t context_window);

}  // namespace debias
