#include "debias/service.hpp"

#include <openssl/rand.h>

#include <algorithm>
#include <charconv>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "debias/batch.hpp"
#include "debias/errors.hpp"
#include "debias/pipeline.hpp"
#include "debias/unicode.hpp"
#include "http_util.hpp"

namespace debias {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "queued";
}

std::optional<JobState> parse_job_state(std::string_view s) {
  for (JobState st : {JobState::queued, JobState::running, JobState::done, JobState::failed}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

namespace {

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

std::string random_id() {
  unsigned char bytes[16];
  if (RAND_bytes(bytes, sizeof bytes) != 1) throw Error("random source unavailable");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id;
  for (unsigned char b : bytes) {
    id.push_back(kHex[b >> 4]);
    id.push_back(kHex[b & 0xf]);
  }
  return id;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const fs::path& path, std::string_view data) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
  }
  fs::rename(tmp, path);
}

}  // namespace

// ---------------------------------------------------------------------------
// JobStore

JobStore::JobStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

bool JobStore::valid_id(std::string_view id) {
  return id.size() == 32 &&
         std::all_of(id.begin(), id.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

void JobStore::write_manifest(const std::string& id, const json& manifest) const {
  spill(dir(id) / "job.json", manifest.dump(2));
}

json JobStore::read_manifest(const std::string& id) const { return json::parse(slurp(dir(id) / "job.json")); }

std::string JobStore::create(json manifest, std::string_view input_zip) {
  std::lock_guard lock(mutex_);
  std::string id;
  do {
    id = random_id();
  } while (fs::exists(dir(id)));
  fs::create_directories(dir(id));
  spill(dir(id) / "input.zip", input_zip);
  manifest["job_id"] = id;
  manifest["state"] = "queued";
  manifest["submitted_at"] = now_iso8601();
  manifest["completed_at"] = nullptr;
  manifest["result"] = nullptr;
  write_manifest(id, manifest);
  return id;
}

std::optional<json> JobStore::manifest(const std::string& id) const {
  if (!valid_id(id)) return std::nullopt;
  std::lock_guard lock(mutex_);
  if (!fs::exists(dir(id) / "job.json")) return std::nullopt;
  return read_manifest(id);
}

std::string JobStore::input(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return slurp(dir(id) / "input.zip");
}

std::optional<std::string> JobStore::result(const std::string& id) const {
  if (!valid_id(id)) return std::nullopt;
  std::lock_guard lock(mutex_);
  const fs::path p = dir(id) / "result.zip";
  if (!fs::exists(p)) return std::nullopt;
  return slurp(p);
}

json JobStore::transition(const std::string& id, JobState next, const std::string* result, const std::string& error) {
  std::lock_guard lock(mutex_);
  json m = read_manifest(id);
  const auto current = parse_job_state(m.at("state").get<std::string>());
  const bool allowed = (current == JobState::queued && next == JobState::running) ||
                       (current == JobState::running && (next == JobState::done || next == JobState::failed));
  if (!allowed) {
    throw Error("job " + id + ": illegal transition " + m.at("state").get<std::string>() + " -> " +
                std::string(to_string(next)));
  }
  m["state"] = std::string(to_string(next));
  if (next == JobState::running) m["started_at"] = now_iso8601();
  if (next == JobState::done) {
    if (!result) throw Error("job " + id + ": done without a result");
    spill(dir(id) / "result.zip", *result);
    m["result"] = "/api/v1/jobs/" + id + "/result";
  }
  if (next == JobState::failed) m["error"] = error;
  if (next == JobState::done || next == JobState::failed) m["completed_at"] = now_iso8601();
  write_manifest(id, m);
  return m;
}

void JobStore::annotate(const std::string& id, const std::string& key, json value) {
  std::lock_guard lock(mutex_);
  json m = read_manifest(id);
  m[key] = std::move(value);
  write_manifest(id, m);
}

std::vector<std::string> JobStore::recover() {
  std::vector<std::string> queued;
  std::vector<std::string> interrupted;
  {
    std::lock_guard lock(mutex_);
    for (const auto& entry : fs::directory_iterator(root_)) {
      const std::string id = entry.path().filename().string();
      if (!valid_id(id) || !fs::exists(entry.path() / "job.json")) continue;
      const json m = read_manifest(id);
      const std::string state = m.value("state", "");
      if (state == "queued") queued.push_back(id);
      if (state == "running") interrupted.push_back(id);
    }
  }
  for (const auto& id : interrupted)
    transition(id, JobState::failed, nullptr, "interrupted by a service restart; resubmit the input");
  std::sort(queued.begin(), queued.end());
  return queued;
}

// ---------------------------------------------------------------------------
// Service

struct Service::Impl {
  std::shared_ptr<const Resources> resources;
  ServiceOptions options;
  JobStore store;
  httplib::Server server;

  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::string> queue;
  std::size_t running = 0;
  bool stopping = false;
  std::thread worker;

  Impl(std::shared_ptr<const Resources> r, ServiceOptions o)
      : resources(std::move(r)), options(std::move(o)), store(options.jobs_dir) {}

  void routes();
  void work();
  void process(const std::string& id);
  void enqueue(const std::string& id);
  void notify_webhook(const std::string& id, const json& manifest);

  PipelineConfig pipeline_config(Language lang, bool ner, bool llm) const {
    PipelineConfig c;
    c.language = lang;
    c.ner_enabled = ner;
    c.llm_enabled = llm;
    c.ner_backend = options.ner_backend;
    c.llm_client = options.llm_client;
    return c;
  }
};

namespace {

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(), "application/json");
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

/// "true"/"false"/"1"/"0"; nullopt for anything else.
std::optional<bool> parse_flag(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  return std::nullopt;
}

std::optional<std::size_t> parse_positive(const std::string& s) {
  std::size_t n = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
  if (ec != std::errc() || ptr != s.data() + s.size() || n == 0) return std::nullopt;
  return n;
}

json term_json(const ContentiousTerm& term, const VocabularyGraph& graph) {
  json out = {{"id", term.id},
              {"label", term.label},
              {"language", std::string(to_string(term.language))},
              {"ambiguous", term.ambiguous}};
  if (const ContentiousIssue* issue = graph.find_issue(term.issue_id)) {
    out["issue"] = {{"id", issue->id},
                    {"description", issue->description},
                    {"suggestion_note", issue->suggestion_note},
                    {"suggested_terms", issue->suggested_terms},
                    {"categories", issue->categories}};
  }
  return out;
}

}  // namespace

void Service::Impl::routes() {
  server.set_payload_max_length(std::max(options.max_upload_bytes, options.max_text_bytes) * 2 + (64u << 10));

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    if (res.status == 413) {
      send_error(res, 400, "payload_too_large", "request body exceeds the configured limit");
    } else if (res.status == 404) {
      send_error(res, 404, "not_found", "no such endpoint");
    } else {
      send_error(res, res.status, "http_error", httplib::status_message(res.status));
    }
    return httplib::Server::HandlerResponse::Handled;
  });

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    send_error(res, 500, "internal_error", message);
  });

  server.Post("/api/v1/detect", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return send_error(res, 422, "malformed_body", e.what());
    }
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string() || !body.contains("language") ||
        !body["language"].is_string()) {
      return send_error(res, 422, "malformed_body", "expected {\"text\": string, \"language\": string}");
    }
    bool ner = options.ner;
    bool llm = options.llm;
    bool diagnostics = false;
    if (body.contains("options")) {
      const json& o = body["options"];
      if (!o.is_object()) return send_error(res, 422, "malformed_body", "options must be an object");
      for (auto [key, target] : {std::pair{"ner", &ner}, std::pair{"llm", &llm}, std::pair{"diagnostics", &diagnostics}}) {
        if (!o.contains(key)) continue;
        if (!o[key].is_boolean()) return send_error(res, 422, "malformed_body", std::string(key) + " must be a boolean");
        *target = o[key].get<bool>();
      }
    }
    std::string id;
    if (body.contains("id")) {
      if (!body["id"].is_string()) return send_error(res, 422, "malformed_body", "id must be a string");
      id = body["id"].get<std::string>();
    }
    const std::string language = body["language"].get<std::string>();
    const auto lang = parse_language(language);
    if (!lang || !resources->supports(*lang))
      return send_error(res, 400, "unsupported_language", "language '" + language + "' is not supported");
    const std::string& text = body["text"].get_ref<const std::string&>();
    if (text.size() > options.max_text_bytes) {
      return send_error(res, 400, "text_too_large",
                        "text exceeds " + std::to_string(options.max_text_bytes) + " bytes");
    }

    PipelineConfig config = pipeline_config(*lang, ner, llm);
    config.diagnostic_mode = diagnostics;
    try {
      send_json(res, 200, to_json(detect(text, config, *resources, id)));
    } catch (const StageError& e) {
      send_error(res, 502, e.stage() == "llm" ? "llm_backend_failure" : "ner_backend_failure", e.what());
    }
  });

  server.Post("/api/v1/batch", [this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("language")) return send_error(res, 400, "missing_language", "query parameter 'language' is required");
    const std::string language = req.get_param_value("language");
    const auto lang = parse_language(language);
    if (!lang || !resources->supports(*lang))
      return send_error(res, 400, "unsupported_language", "language '" + language + "' is not supported");
    bool ner = options.ner;
    bool llm = options.llm;
    for (auto [key, target] : {std::pair{"ner", &ner}, std::pair{"llm", &llm}}) {
      if (!req.has_param(key)) continue;
      const auto v = parse_flag(req.get_param_value(key));
      if (!v) return send_error(res, 400, "bad_option", std::string(key) + " must be true or false");
      *target = *v;
    }
    std::string webhook;
    if (req.has_param("webhook")) {
      webhook = req.get_param_value("webhook");
      try {
        detail::parse_url(webhook);
      } catch (const BackendError& e) {
        return send_error(res, 400, "bad_webhook", e.what());
      }
    }

    std::string archive;
    if (req.is_multipart_form_data()) {
      if (req.has_file("file")) {
        archive = req.get_file_value("file").content;
      } else if (!req.files.empty()) {
        archive = req.files.begin()->second.content;
      }
    } else {
      archive = req.body;
    }
    if (archive.empty()) return send_error(res, 400, "missing_file", "upload a ZIP archive in the 'file' field");
    if (archive.size() > options.max_upload_bytes) {
      return send_error(res, 400, "upload_too_large",
                        "archive exceeds " + std::to_string(options.max_upload_bytes) + " bytes");
    }

    ZipBatchInput input;
    try {
      input = read_zip_batch(archive, options.max_uncompressed_bytes);
    } catch (const ZipError& e) {
      return send_error(res, 400, "malformed_zip", e.what());
    }

    json files = json::array();
    for (const auto& d : input.documents) files.push_back({{"name", d.id}, {"size", d.text.size()}});
    json skipped = json::array();
    for (const auto& s : input.skipped) skipped.push_back({{"name", s.name}, {"reason", s.reason}});
    json manifest = {{"input", {{"files", std::move(files)}, {"skipped", std::move(skipped)}}},
                     {"config", config_snapshot(pipeline_config(*lang, ner, llm))}};
    if (!webhook.empty()) manifest["webhook"] = webhook;

    const std::string id = store.create(std::move(manifest), archive);
    enqueue(id);
    send_json(res, 202, {{"job_id", id}, {"state", "queued"}, {"status_url", "/api/v1/jobs/" + id}});
  });

  server.Get("/api/v1/jobs/:id", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    auto m = store.manifest(id);
    if (!m) return send_error(res, 404, "job_not_found", "no job '" + id + "'");
    send_json(res, 200, *m);
  });

  server.Get("/api/v1/jobs/:id/result", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    auto m = store.manifest(id);
    if (!m) return send_error(res, 404, "job_not_found", "no job '" + id + "'");
    const std::string state = m->value("state", "");
    if (state != "done") return send_error(res, 409, "job_not_done", "job is " + state);
    auto result = store.result(id);
    if (!result) return send_error(res, 500, "result_missing", "result archive is missing");
    res.status = 200;
    res.set_header("Content-Disposition", "attachment; filename=\"" + id + ".zip\"");
    res.set_content(std::move(*result), "application/zip");
  });

  server.Get("/api/v1/vocabulary", [this](const httplib::Request&, httplib::Response& res) {
    json langs = json::array();
    for (Language l : resources->languages()) langs.push_back(std::string(to_string(l)));
    send_json(res, 200,
              {{"format_version", resources->graph().format_version()},
               {"languages", std::move(langs)},
               {"stats", to_json(stats(resources->graph()))}});
  });

  server.Get("/api/v1/vocabulary/terms", [this](const httplib::Request& req, httplib::Response& res) {
    std::size_t page = 1;
    std::size_t page_size = 20;
    if (req.has_param("page")) {
      auto v = parse_positive(req.get_param_value("page"));
      if (!v) return send_error(res, 400, "bad_pagination", "page must be a positive integer");
      page = *v;
    }
    if (req.has_param("page_size")) {
      auto v = parse_positive(req.get_param_value("page_size"));
      if (!v || *v > 100) return send_error(res, 400, "bad_pagination", "page_size must be in 1..100");
      page_size = *v;
    }
    std::optional<Language> lang;
    if (req.has_param("language")) {
      const std::string language = req.get_param_value("language");
      lang = parse_language(language);
      if (!lang) return send_error(res, 400, "unsupported_language", "language '" + language + "' is not supported");
    }
    const std::string query = unicode::to_lower(req.get_param_value("query"));

    const auto& graph = resources->graph();
    std::vector<std::pair<std::string, const ContentiousTerm*>> hits;
    for (const auto& term : graph.terms()) {
      if (lang && term.language != *lang) continue;
      std::string folded = unicode::to_lower(term.label);
      if (!query.empty() && folded.find(query) == std::string::npos) continue;
      hits.emplace_back(std::move(folded), &term);
    }
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second->id < b.second->id;
    });
    json terms = json::array();
    const std::size_t begin = (page - 1) * page_size;
    for (std::size_t i = begin; i < hits.size() && i < begin + page_size; ++i)
      terms.push_back(term_json(*hits[i].second, graph));
    send_json(res, 200, {{"page", page}, {"page_size", page_size}, {"total", hits.size()}, {"terms", std::move(terms)}});
  });

  server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    const bool llm_reachable = options.llm_client && options.llm_client->backend().reachable();
    send_json(res, 200,
              {{"status", "ok"},
               {"vocabulary_loaded", !resources->graph().terms().empty()},
               {"llm_reachable", llm_reachable}});
  });

  if (options.ui_dir && fs::is_directory(*options.ui_dir)) server.set_mount_point("/ui", options.ui_dir->string());
}

void Service::Impl::enqueue(const std::string& id) {
  {
    std::lock_guard lock(mutex);
    queue.push_back(id);
  }
  cv.notify_all();
}

void Service::Impl::work() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(mutex);
      cv.wait(lock, [&] { return stopping || !queue.empty(); });
      // Queued jobs stay queued on disk and are picked up after a restart.
      if (stopping) return;
      id = std::move(queue.front());
      queue.pop_front();
      ++running;
    }
    process(id);
    {
      std::lock_guard lock(mutex);
      --running;
    }
    cv.notify_all();
  }
}

void Service::Impl::process(const std::string& id) {
  json manifest;
  try {
    manifest = store.transition(id, JobState::running);
    const json& cfg = manifest.at("config");
    const auto lang = parse_language(cfg.at("language").get<std::string>());
    if (!lang) throw Error("unsupported language in job config");
    const PipelineConfig config = pipeline_config(*lang, cfg.at("ner").get<bool>(), cfg.at("llm").get<bool>());
    const ZipBatchInput input = read_zip_batch(store.input(id), options.max_uncompressed_bytes);
    const ZipBatchOutput out = run_zip_batch(input, config, *resources, options.parallelism, cfg);
    store.annotate(id, "report", out.report);
    manifest = store.transition(id, JobState::done, &out.archive);
  } catch (const std::exception& e) {
    try {
      manifest = store.transition(id, JobState::failed, nullptr, e.what());
    } catch (const std::exception& e2) {
      std::cerr << "job " << id << ": " << e2.what() << '\n';
      return;
    }
  }
  if (manifest.contains("webhook")) notify_webhook(id, manifest);
}

void Service::Impl::notify_webhook(const std::string& id, const json& manifest) {
  json status;
  try {
    const auto url = detail::parse_url(manifest.at("webhook").get<std::string>());
    httplib::Client client(url.origin);
    client.set_connection_timeout(std::chrono::seconds(5));
    client.set_read_timeout(std::chrono::seconds(5));
    const json payload = {{"job_id", id}, {"state", manifest.at("state")}, {"status_url", "/api/v1/jobs/" + id}};
    auto r = client.Post(url.path, payload.dump(), "application/json");
    if (r) {
      status = {{"delivered", r->status >= 200 && r->status < 300}, {"status", r->status}};
    } else {
      status = {{"delivered", false}, {"error", httplib::to_string(r.error())}};
    }
  } catch (const std::exception& e) {
    status = {{"delivered", false}, {"error", e.what()}};
  }
  store.annotate(id, "webhook_delivery", std::move(status));
}

Service::Service(std::shared_ptr<const Resources> resources, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(resources), std::move(options))) {
  impl_->routes();
  for (const auto& id : impl_->store.recover()) impl_->queue.push_back(id);
  impl_->worker = std::thread([this] { impl_->work(); });
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
  impl_->server.stop();
  {
    std::lock_guard lock(impl_->mutex);
    impl_->stopping = true;
  }
  impl_->cv.notify_all();
  if (impl_->worker.joinable()) impl_->worker.join();
}

bool Service::wait_idle(std::chrono::milliseconds timeout) {
  std::unique_lock lock(impl_->mutex);
  return impl_->cv.wait_for(lock, timeout, [&] { return impl_->queue.empty() && impl_->running == 0; });
}

JobStore& Service::jobs() { return impl_->store; }

}  // namespace debias
