#include <gtest/gtest.h>

#include <httplib.h>

#include <filesystem>
#include <thread>

#include "debias/errors.hpp"
#include "debias/service.hpp"
#include "debias/zip.hpp"
#include "fixtures.hpp"

using namespace debias;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("debias_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

class Running {
 public:
  explicit Running(ServiceOptions options) : service_(debias::testing::bundled(), std::move(options)) {
    port_ = service_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { service_.run(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(std::chrono::seconds(20));
    for (int i = 0; i < 200 && !client_->Get("/healthz"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ~Running() {
    service_.stop();
    thread_.join();
  }
  httplib::Client& http() { return *client_; }
  Service& service() { return service_; }
  int port() const { return port_; }

 private:
  Service service_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

ServiceOptions options(const std::string& name, std::shared_ptr<MockLlmBackend> mock = nullptr) {
  ServiceOptions o;
  o.jobs_dir = temp_dir(name);
  o.parallelism = 2;
  if (!mock) mock = MockLlmBackend::load(debias::testing::test_data("mock_llm.json"));
  o.llm_client = std::make_shared<LlmClient>(LlmClientConfig{}, mock);
  return o;
}

json body_of(const httplib::Result& r) { return json::parse(r->body); }

std::string error_code(const httplib::Result& r) { return body_of(r).at("error").at("code"); }

std::string sample_zip() {
  zip::Writer w;
  w.add("a.txt", "a history of the Third World");
  w.add("b.txt", "caucasian applicants only. a human race. a horse race.");
  w.add("c.txt", "Fotografie von Mischlingskindern");
  w.add("d.txt", "nothing to see");
  return w.finish();
}

json wait_for_job(Running& s, const std::string& id) {
  EXPECT_TRUE(s.service().wait_idle(std::chrono::seconds(30)));
  auto r = s.http().Get("/api/v1/jobs/" + id);
  EXPECT_EQ(r->status, 200);
  return body_of(r);
}

void strip_timing(json& j) { j.erase("timing_ms"); }

}  // namespace

TEST(ServiceDetect, MatchesGoldenResponse) {
  Running s(options("golden"));
  auto r = s.http().Post("/api/v1/detect",
                         R"({"id": "g1", "language": "en", "text": "The caucasian applicant read about the Third World."})",
                         "application/json");
  ASSERT_EQ(r->status, 200);
  json got = body_of(r);
  strip_timing(got);
  json expected = json::parse(debias::testing::read_file(debias::testing::test_data("golden/detect_en.json")));
  EXPECT_EQ(got, expected) << got.dump(2);
}

TEST(ServiceDetect, InputErrors) {
  Running s(options("detect_err"));
  EXPECT_EQ(s.http().Post("/api/v1/detect", "{not json", "application/json")->status, 422);
  auto r = s.http().Post("/api/v1/detect", R"({"text": 3, "language": "en"})", "application/json");
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(error_code(r), "malformed_body");
  r = s.http().Post("/api/v1/detect", R"({"text": "x", "language": "en", "options": {"ner": "yes"}})",
                    "application/json");
  EXPECT_EQ(r->status, 422);
  r = s.http().Post("/api/v1/detect", R"({"text": "x", "language": "es"})", "application/json");
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(error_code(r), "unsupported_language");
  EXPECT_EQ(s.http().Get("/api/v1/nothing")->status, 404);
}

TEST(ServiceDetect, TextLimit) {
  auto o = options("detect_limit");
  o.max_text_bytes = 16;
  Running s(std::move(o));
  auto r = s.http().Post("/api/v1/detect", json{{"text", std::string(17, 'a')}, {"language", "en"}}.dump(),
                         "application/json");
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(error_code(r), "text_too_large");
}

TEST(ServiceDetect, BackendFailureIs502) {
  auto mock = std::make_shared<MockLlmBackend>();
  mock->set_unreachable(true);
  Running s(options("detect_502", mock));
  auto r = s.http().Post("/api/v1/detect", R"({"text": "a horse race", "language": "en"})", "application/json");
  EXPECT_EQ(r->status, 502);
  EXPECT_EQ(error_code(r), "llm_backend_failure");
  r = s.http().Post("/api/v1/detect", R"({"text": "a horse race", "language": "en", "options": {"llm": false}})",
                    "application/json");
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(body_of(r).at("annotations").size(), 1u);
}

TEST(ServiceDetect, DiagnosticsOption) {
  Running s(options("detect_diag"));
  auto r = s.http().Post("/api/v1/detect",
                         R"({"text": "Anna Sordo visited Rome", "language": "it", "options": {"diagnostics": true}})",
                         "application/json");
  ASSERT_EQ(r->status, 200);
  const json j = body_of(r);
  EXPECT_TRUE(j.at("annotations").empty());
  ASSERT_EQ(j.at("diagnostics").size(), 1u);
  EXPECT_EQ(j.at("diagnostics")[0].at("filtered_by"), "ner");
}

TEST(ServiceBatch, LifecycleAndReportRecount) {
  Running s(options("batch"));
  httplib::MultipartFormDataItems items = {{"file", sample_zip(), "docs.zip", "application/zip"}};
  auto r = s.http().Post("/api/v1/batch?language=en", items);
  ASSERT_EQ(r->status, 202) << r->body;
  const std::string id = body_of(r).at("job_id");
  EXPECT_TRUE(JobStore::valid_id(id));
  EXPECT_EQ(body_of(r).at("status_url"), "/api/v1/jobs/" + id);

  const json job = wait_for_job(s, id);
  EXPECT_EQ(job.at("state"), "done");
  EXPECT_EQ(job.at("input").at("files").size(), 4u);

  auto result = s.http().Get("/api/v1/jobs/" + id + "/result");
  ASSERT_EQ(result->status, 200);
  EXPECT_EQ(result->get_header_value("Content-Type"), "application/zip");
  const auto entries = zip::read_archive(result->body);
  ASSERT_EQ(entries.size(), 2u);

  // Recount the report from the annotation lines.
  std::size_t docs = 0, annotations = 0;
  std::map<std::string, std::size_t> per_term;
  std::istringstream lines(entries[0].data);
  for (std::string line; std::getline(lines, line);) {
    const json doc = json::parse(line);
    ++docs;
    for (const auto& a : doc.at("annotations")) {
      ++annotations;
      ++per_term[a.at("term_id").get<std::string>()];
    }
  }
  const json report = json::parse(entries[1].data);
  EXPECT_EQ(report.at("documents"), docs);
  EXPECT_EQ(report.at("annotations"), annotations);
  std::map<std::string, std::size_t> reported;
  for (const auto& f : report.at("term_frequencies")) reported[f.at("term_id")] = f.at("count");
  EXPECT_EQ(reported, per_term);
  EXPECT_EQ(job.at("report").at("annotations"), annotations);
  // a.txt: Third World; b.txt: caucasian (yes), race (human, yes), race (horse, no); c.txt: Mischling.
  EXPECT_EQ(annotations, 4u);
}

TEST(ServiceBatch, RawBodyUpload) {
  Running s(options("batch_raw"));
  auto r = s.http().Post("/api/v1/batch?language=de&llm=false", sample_zip(), "application/zip");
  ASSERT_EQ(r->status, 202);
  const json job = wait_for_job(s, body_of(r).at("job_id"));
  EXPECT_EQ(job.at("state"), "done");
  EXPECT_EQ(job.at("config").at("llm"), false);
}

TEST(ServiceBatch, Rejections) {
  auto o = options("batch_err");
  o.max_upload_bytes = 4096;
  Running s(std::move(o));
  const std::string zip = sample_zip();
  EXPECT_EQ(error_code(s.http().Post("/api/v1/batch", zip, "application/zip")), "missing_language");
  EXPECT_EQ(error_code(s.http().Post("/api/v1/batch?language=xx", zip, "application/zip")), "unsupported_language");
  EXPECT_EQ(error_code(s.http().Post("/api/v1/batch?language=en&ner=maybe", zip, "application/zip")), "bad_option");
  EXPECT_EQ(error_code(s.http().Post("/api/v1/batch?language=en&webhook=nope", zip, "application/zip")), "bad_webhook");
  EXPECT_EQ(error_code(s.http().Post("/api/v1/batch?language=en", "", "application/zip")), "missing_file");
  EXPECT_EQ(error_code(s.http().Post("/api/v1/batch?language=en", "garbage", "application/zip")), "malformed_zip");
  auto big = s.http().Post("/api/v1/batch?language=en", std::string(5000, 'x'), "application/zip");
  EXPECT_EQ(big->status, 400);
}

TEST(ServiceJobs, UnknownAndNotDone) {
  Running s(options("jobs"));
  auto r = s.http().Get("/api/v1/jobs/0123456789abcdef0123456789abcdef");
  EXPECT_EQ(r->status, 404);
  EXPECT_EQ(error_code(r), "job_not_found");
  EXPECT_EQ(s.http().Get("/api/v1/jobs/..%2F..%2Fetc")->status, 404);
  const std::string id = s.service().jobs().create(json{{"config", {{"language", "en"}}}}, "zip");
  // Never enqueued with the worker, so it stays queued.
  r = s.http().Get("/api/v1/jobs/" + id + "/result");
  EXPECT_EQ(r->status, 409);
  EXPECT_EQ(error_code(r), "job_not_done");
}

TEST(ServiceJobs, WebhookNotified) {
  httplib::Server hook;
  std::mutex m;
  std::vector<json> received;
  hook.Post("/hook", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(m);
    received.push_back(json::parse(req.body));
    res.status = 204;
  });
  const int hook_port = hook.bind_to_any_port("127.0.0.1");
  std::thread t([&] { hook.listen_after_bind(); });
  hook.wait_until_ready();
  {
    Running s(options("webhook"));
    const std::string url = "http://127.0.0.1:" + std::to_string(hook_port) + "/hook";
    auto r = s.http().Post("/api/v1/batch?language=en&webhook=" + httplib::detail::encode_url(url), sample_zip(),
                           "application/zip");
    ASSERT_EQ(r->status, 202);
    const std::string id = body_of(r).at("job_id");
    const json job = wait_for_job(s, id);
    EXPECT_EQ(job.at("webhook_delivery").at("delivered"), true);
    std::lock_guard lock(m);
    ASSERT_EQ(received.size(), 1u);
    EXPECT_EQ(received[0].at("job_id"), id);
    EXPECT_EQ(received[0].at("state"), "done");
  }
  hook.stop();
  t.join();
}

TEST(JobStoreTest, TransitionsAndRecovery) {
  const fs::path root = temp_dir("store");
  JobStore store(root);
  const std::string a = store.create(json::object(), "A");
  const std::string b = store.create(json::object(), "B");
  EXPECT_EQ(store.input(a), "A");
  EXPECT_THROW(store.transition(a, JobState::done), Error);
  store.transition(a, JobState::running);
  EXPECT_THROW(store.transition(a, JobState::queued), Error);

  JobStore reopened(root);
  const auto queued = reopened.recover();
  EXPECT_EQ(queued, std::vector<std::string>{b});
  EXPECT_EQ(reopened.manifest(a)->at("state"), "failed");
  EXPECT_EQ(reopened.manifest(b)->at("state"), "queued");

  reopened.transition(b, JobState::running);
  const std::string out = "result";
  reopened.transition(b, JobState::done, &out);
  EXPECT_EQ(reopened.result(b), "result");
  EXPECT_EQ(reopened.manifest(b)->at("result"), "/api/v1/jobs/" + b + "/result");
  EXPECT_FALSE(reopened.manifest("ffffffffffffffffffffffffffffffff").has_value());
  EXPECT_FALSE(JobStore::valid_id("../x"));
}

TEST(ServiceJobs, QueuedJobResumesAfterRestart) {
  auto o = options("restart");
  const fs::path jobs = o.jobs_dir;
  std::string id;
  {
    JobStore store(jobs);
    id = store.create(json{{"config", {{"language", "en"}, {"ner", true}, {"llm", false}}},
                           {"input", json::object()}},
                      sample_zip());
  }
  Running s(std::move(o));
  const json job = wait_for_job(s, id);
  EXPECT_EQ(job.at("state"), "done");
}

TEST(ServiceVocabulary, MetadataAndTermSearch) {
  Running s(options("vocab"));
  auto r = s.http().Get("/api/v1/vocabulary");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(body_of(r).at("stats").at("total_terms"), 12);

  r = s.http().Get("/api/v1/vocabulary/terms?query=cauc");
  ASSERT_EQ(r->status, 200);
  json j = body_of(r);
  EXPECT_EQ(j.at("total"), 1);
  ASSERT_EQ(j.at("terms").size(), 1u);
  EXPECT_EQ(j.at("terms")[0].at("id"), "term:0001");
  EXPECT_EQ(j.at("terms")[0].at("issue").at("suggested_terms")[0], "White");

  r = s.http().Get("/api/v1/vocabulary/terms?language=en&page=2&page_size=2");
  j = body_of(r);
  EXPECT_EQ(j.at("total"), 5);
  ASSERT_EQ(j.at("terms").size(), 2u);
  EXPECT_EQ(j.at("terms")[0].at("label"), "race");
  EXPECT_EQ(j.at("terms")[1].at("label"), "savage");

  EXPECT_EQ(error_code(s.http().Get("/api/v1/vocabulary/terms?page_size=101")), "bad_pagination");
  EXPECT_EQ(error_code(s.http().Get("/api/v1/vocabulary/terms?page=0")), "bad_pagination");
  EXPECT_EQ(error_code(s.http().Get("/api/v1/vocabulary/terms?language=zz")), "unsupported_language");
}

TEST(ServiceHealth, ReportsBackend) {
  {
    Running s(options("health"));
    const json j = body_of(s.http().Get("/healthz"));
    EXPECT_EQ(j.at("status"), "ok");
    EXPECT_EQ(j.at("vocabulary_loaded"), true);
    EXPECT_EQ(j.at("llm_reachable"), true);
  }
  auto mock = std::make_shared<MockLlmBackend>();
  mock->set_unreachable(true);
  Running s(options("health_down", mock));
  EXPECT_EQ(body_of(s.http().Get("/healthz")).at("llm_reachable"), false);
}

TEST(ServiceUi, StaticMount) {
  auto o = options("ui");
  const fs::path ui = temp_dir("ui_root");
  {
    std::ofstream(ui / "index.html") << "<!doctype html><title>ui</title>";
  }
  o.ui_dir = ui;
  Running s(std::move(o));
  auto r = s.http().Get("/ui/index.html");
  ASSERT_EQ(r->status, 200);
  EXPECT_NE(r->body.find("<title>ui</title>"), std::string::npos);
}
