#include "debias/disambiguator.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <thread>

#include <httplib.h>

#include "debias/errors.hpp"
#include "debias/unicode.hpp"
#include "http_util.hpp"

namespace debias {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Templates

namespace {

constexpr std::string_view kTerm = "term";
constexpr std::string_view kContext = "vocabulary_context";
constexpr std::string_view kText = "text";

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Walks `tmpl`, calling on_literal for plain text and on_placeholder for
// every {name}. Braces not enclosing [a-z_]+ are literal.
template <typename Literal, typename Placeholder>
void walk_template(std::string_view tmpl, Literal&& on_literal, Placeholder&& on_placeholder) {
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      on_literal(tmpl.substr(pos));
      return;
    }
    std::size_t close = open + 1;
    while (close < tmpl.size() && is_placeholder_char(tmpl[close])) ++close;
    if (close < tmpl.size() && tmpl[close] == '}' && close > open + 1) {
      on_literal(tmpl.substr(pos, open - pos));
      on_placeholder(tmpl.substr(open + 1, close - open - 1));
      pos = close + 1;
    } else {
      on_literal(tmpl.substr(pos, open + 1 - pos));
      pos = open + 1;
    }
  }
}

void check_template(const PromptTemplate& tmpl) {
  std::map<std::string, int, std::less<>> seen;
  walk_template(tmpl.text, [](std::string_view) {}, [&](std::string_view name) {
    if (name != kTerm && name != kContext && name != kText)
      throw TemplateError("template " + std::string(to_string(tmpl.language)) + "/" + tmpl.model_family +
                          " has unknown placeholder {" + std::string(name) + "}");
    ++seen[std::string(name)];
  });
  for (std::string_view required : {kTerm, kContext, kText}) {
    if (!seen.contains(required))
      throw TemplateError("template " + std::string(to_string(tmpl.language)) + "/" + tmpl.model_family +
                          " lacks placeholder {" + std::string(required) + "}");
  }
}

}  // namespace

void TemplateStore::add(PromptTemplate tmpl) {
  check_template(tmpl);
  auto key = std::make_pair(tmpl.language, tmpl.model_family);
  templates_[std::move(key)] = std::move(tmpl);
}

const PromptTemplate* TemplateStore::find(Language lang, std::string_view model_family) const {
  auto it = templates_.find(std::make_pair(lang, std::string(model_family)));
  return it == templates_.end() ? nullptr : &it->second;
}

const PromptTemplate& TemplateStore::at(Language lang, std::string_view model_family) const {
  const PromptTemplate* t = find(lang, model_family);
  if (!t)
    throw TemplateError("no prompt template for " + std::string(to_string(lang)) + "/" + std::string(model_family));
  return *t;
}

TemplateStore TemplateStore::load(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("template directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  TemplateStore store;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw TemplateError(file.filename().string() + ": " + e.what());
    }
    for (const auto& rec : doc.at("templates")) {
      const std::string code = rec.at("language").get<std::string>();
      auto lang = parse_language(code);
      if (!lang) throw TemplateError(file.filename().string() + ": unsupported language '" + code + "'");
      store.add({*lang, rec.at("model_family").get<std::string>(), rec.at("template").get<std::string>()});
    }
  }
  return store;
}

std::string vocabulary_context(const ContentiousIssue& issue) {
  if (issue.suggestion_note.empty()) return issue.description;
  return issue.description + " " + issue.suggestion_note;
}

std::string build_prompt(std::string_view term_label, std::string_view vocabulary_context,
                         std::string_view text, Language lang, const PromptTemplate& tmpl) {
  if (tmpl.language != lang)
    throw TemplateError("template language " + std::string(to_string(tmpl.language)) +
                        " does not match text language " + std::string(to_string(lang)));
  check_template(tmpl);
  std::string out;
  out.reserve(tmpl.text.size() + text.size() + vocabulary_context.size() + 4 * term_label.size());
  walk_template(
      tmpl.text, [&](std::string_view lit) { out.append(lit); },
      [&](std::string_view name) {
        if (name == kTerm) out.append(term_label);
        else if (name == kContext) out.append(vocabulary_context);
        else out.append(text);
      });
  return out;
}

// ---------------------------------------------------------------------------
// Answers

std::string_view to_string(VerdictValue v) {
  switch (v) {
    case VerdictValue::contentious: return "contentious";
    case VerdictValue::not_contentious: return "not_contentious";
    case VerdictValue::unparseable: return "unparseable";
  }
  return "unparseable";
}

namespace {

struct AnswerTokens {
  std::vector<std::string_view> yes;
  std::vector<std::string_view> no;
};

const AnswerTokens& answer_tokens(Language lang) {
  static const AnswerTokens en{{"yes"}, {"no"}};
  static const AnswerTokens it{{"si"}, {"no", "non"}};
  static const AnswerTokens de{{"ja"}, {"nein"}};
  static const AnswerTokens nl{{"ja"}, {"nee"}};
  static const AnswerTokens fr{{"oui"}, {"no", "non"}};
  switch (lang) {
    case Language::en: return en;
    case Language::it: return it;
    case Language::de: return de;
    case Language::nl: return nl;
    case Language::fr: return fr;
  }
  return en;
}

}  // namespace

VerdictValue parse_answer(std::string_view raw, Language lang) {
  const std::string folded = unicode::strip_diacritics(unicode::to_lower(raw));
  // First run of letters after any leading whitespace or punctuation.
  std::size_t pos = 0;
  std::string word;
  while (pos < folded.size()) {
    const std::size_t at = pos;
    const char32_t cp = unicode::next_code_point(folded, pos);
    if (unicode::is_letter(cp)) {
      pos = at;
      break;
    }
  }
  while (pos < folded.size()) {
    const std::size_t at = pos;
    const char32_t cp = unicode::next_code_point(folded, pos);
    if (!unicode::is_letter(cp)) break;
    word.append(folded, at, pos - at);
  }
  if (word.empty()) return VerdictValue::unparseable;
  const auto& tokens = answer_tokens(lang);
  if (std::find(tokens.yes.begin(), tokens.yes.end(), word) != tokens.yes.end()) return VerdictValue::contentious;
  if (std::find(tokens.no.begin(), tokens.no.end(), word) != tokens.no.end()) return VerdictValue::not_contentious;
  return VerdictValue::unparseable;
}

// ---------------------------------------------------------------------------
// Backends

HttpLlmBackend::HttpLlmBackend(std::string endpoint, int timeout_ms)
    : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

std::string HttpLlmBackend::complete(const CompletionRequest& request) {
  const auto url = detail::parse_url(endpoint_);
  json body = {{"prompt", request.prompt}, {"n_predict", request.n_predict}, {"temperature", request.temperature}};
  if (!request.model.empty()) body["model"] = request.model;

  httplib::Client client(url.origin);
  const auto timeout = std::chrono::milliseconds(timeout_ms_);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  auto res = client.Post(url.path, body.dump(), "application/json");
  if (!res) throw BackendError(endpoint_, httplib::to_string(res.error()));
  if (res->status != 200) throw BackendError(endpoint_, "HTTP status " + std::to_string(res->status));
  try {
    return json::parse(res->body).at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(endpoint_, std::string("malformed response: ") + e.what());
  }
}

bool HttpLlmBackend::reachable() {
  try {
    const auto url = detail::parse_url(endpoint_);
    httplib::Client client(url.origin);
    client.set_connection_timeout(std::chrono::milliseconds(std::min(timeout_ms_, 2000)));
    client.set_read_timeout(std::chrono::milliseconds(std::min(timeout_ms_, 2000)));
    // Any HTTP answer means the server is up.
    return static_cast<bool>(client.Get("/health"));
  } catch (const Error&) {
    return false;
  }
}

std::shared_ptr<MockLlmBackend> MockLlmBackend::from_json(const json& script) {
  auto mock = std::make_shared<MockLlmBackend>();
  if (auto it = script.find("default"); it != script.end()) mock->set_default_answer(it->get<std::string>());
  if (auto it = script.find("latency_ms"); it != script.end())
    mock->set_latency(std::chrono::milliseconds(it->get<int>()));
  if (auto it = script.find("unreachable"); it != script.end()) mock->set_unreachable(it->get<bool>());
  if (auto it = script.find("rules"); it != script.end()) {
    for (const auto& r : *it) {
      mock->add_rule({r.value("term", ""), r.value("contains", ""), r.at("answer").get<std::string>()});
    }
  }
  return mock;
}

std::shared_ptr<MockLlmBackend> MockLlmBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open mock LLM script " + path.string());
  return from_json(json::parse(in));
}

void MockLlmBackend::add_rule(Rule rule) {
  std::lock_guard lock(mutex_);
  rule.term = unicode::to_lower(rule.term);
  rules_.push_back(std::move(rule));
}

void MockLlmBackend::queue_answers(std::vector<std::string> answers) {
  std::lock_guard lock(mutex_);
  for (auto& a : answers) queued_.push_back(std::move(a));
}

void MockLlmBackend::set_default_answer(std::string answer) {
  std::lock_guard lock(mutex_);
  default_answer_ = std::move(answer);
}

std::string MockLlmBackend::complete(const CompletionRequest& request) {
  ++calls_;
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
  if (unreachable_) throw BackendError(endpoint(), "mock backend set unreachable");
  std::lock_guard lock(mutex_);
  prompts_.push_back(request.prompt);
  if (!queued_.empty()) {
    std::string answer = std::move(queued_.front());
    queued_.pop_front();
    return answer;
  }
  const std::string term = unicode::to_lower(request.term);
  for (const auto& rule : rules_) {
    if (!rule.term.empty() && rule.term != term) continue;
    if (!rule.contains.empty() && request.excerpt.find(rule.contains) == std::string::npos) continue;
    return rule.answer;
  }
  return default_answer_;
}

std::vector<std::string> MockLlmBackend::prompts() const {
  std::lock_guard lock(mutex_);
  return prompts_;
}

// ---------------------------------------------------------------------------
// Client

LlmClient::LlmClient(LlmClientConfig config, std::shared_ptr<LlmBackend> backend)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      in_flight_(std::clamp(config_.max_in_flight, 1, 1024)) {
  if (config_.timeout_ms <= 0) throw Error("LLM timeout_ms must be positive");
  if (config_.retries < 0) throw Error("LLM retries must be non-negative");
  if (!backend_) throw Error("LLM client needs a backend");
}

std::string LlmClient::complete_with_retries(const CompletionRequest& request) {
  for (int attempt = 0;; ++attempt) {
    in_flight_.acquire();
    try {
      std::string answer = backend_->complete(request);
      in_flight_.release();
      return answer;
    } catch (const BackendError&) {
      in_flight_.release();
      if (attempt >= config_.retries) throw;
    } catch (...) {
      in_flight_.release();
      throw;
    }
  }
}

Verdict LlmClient::classify(const std::string& prompt, Language lang, const std::string& term,
                            const std::string& excerpt) {
  CompletionRequest request;
  request.prompt = prompt;
  request.n_predict = config_.max_tokens;
  request.temperature = config_.temperature;
  request.model = config_.model;
  request.term = term;
  request.excerpt = excerpt;

  const auto start = std::chrono::steady_clock::now();
  Verdict verdict;
  for (int round = 0; round < 2; ++round) {
    verdict.raw_answer = complete_with_retries(request);
    ++verdict.requests;
    verdict.value = parse_answer(verdict.raw_answer, lang);
    if (verdict.value != VerdictValue::unparseable) break;
  }
  verdict.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return verdict;
}

Verdict LlmClient::classify_cached(const std::string& term_id, const std::string& excerpt,
                                   const std::string& prompt, Language lang, const std::string& term_label) {
  if (!config_.cache) return classify(prompt, lang, term_label, excerpt);

  const std::string key = term_id + '\x1f' + std::to_string(std::hash<std::string>{}(excerpt)) + '\x1f' + excerpt;
  std::promise<Verdict> promise;
  {
    std::unique_lock lock(cache_mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      auto pending = it->second;
      lock.unlock();
      return pending.get();
    }
    cache_.emplace(key, promise.get_future().share());
  }
  try {
    Verdict v = classify(prompt, lang, term_label, excerpt);
    promise.set_value(v);
    return v;
  } catch (...) {
    // Failures are not cached; waiters see the error, later calls retry.
    promise.set_exception(std::current_exception());
    std::lock_guard lock(cache_mutex_);
    cache_.erase(key);
    throw;
  }
}

void LlmClient::clear_cache() {
  std::lock_guard lock(cache_mutex_);
  cache_.clear();
}

std::size_t LlmClient::cache_size() const {
  std::lock_guard lock(cache_mutex_);
  return cache_.size();
}

// ---------------------------------------------------------------------------
// Disambiguation

std::string context_excerpt(const LemmatizedDocument& doc, const RawMatch& match, std::size_t window) {
  if (doc.tokens.empty()) return doc.text;
  const std::size_t first = match.first_token_index > window ? match.first_token_index - window : 0;
  const std::size_t last = std::min(doc.tokens.size() - 1, match.last_token_index + window);
  const std::size_t b = doc.tokens[first].token.byte_start;
  const std::size_t e = doc.tokens[last].token.byte_end;
  return doc.text.substr(b, e - b);
}

DisambiguationResult disambiguate(const std::vector<RawMatch>& matches, const LemmatizedDocument& doc,
                                  const VocabularyGraph& graph, const TemplateStore& templates,
                                  LlmClient& client, std::size_t context_window) {
  DisambiguationResult result;
  for (const auto& m : matches) {
    const ContentiousTerm* term = graph.find_term(m.term_id);
    if (!term) throw NotFoundError("match refers to unknown term '" + m.term_id + "'");
    if (!term->ambiguous) {
      result.kept.push_back({m, std::nullopt});
      continue;
    }
    const ContentiousIssue& issue = lookup_issue(graph, m.term_id);
    const PromptTemplate& tmpl = templates.at(doc.language, client.config().model_family);
    const std::string excerpt = context_excerpt(doc, m, context_window);
    const std::string prompt = build_prompt(term->label, vocabulary_context(issue), excerpt, doc.language, tmpl);
    Verdict verdict = client.classify_cached(m.term_id, excerpt, prompt, doc.language, term->label);
    const bool keep = verdict.value == VerdictValue::contentious;
    (keep ? result.kept : result.dropped).push_back({m, std::move(verdict)});
  }
  return result;
}

}  // namespace debias
