#include <gtest/gtest.h>

#include <map>

#include "debias/config.hpp"
#include "debias/errors.hpp"
#include "fixtures.hpp"

using namespace debias;
using nlohmann::json;

namespace {

EnvLookup env(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const char* key) -> const char* {
    auto it = vars.find(key);
    return it == vars.end() ? nullptr : it->second.c_str();
  };
}

}  // namespace

TEST(AppConfigTest, Defaults) {
  AppConfig c;
  EXPECT_EQ(c.port, 8080);
  EXPECT_TRUE(c.ner);
  EXPECT_EQ(c.max_upload_bytes, 64u << 20);
  EXPECT_EQ(c.llm.model_family, "llama3");
  EXPECT_FALSE(c.mock_llm.has_value());
}

TEST(AppConfigTest, JsonOverlay) {
  AppConfig c;
  apply_config_json(c, json::parse(R"({"port": 9000, "ner": false, "llm_endpoint": "http://x:1/completion",
                                       "retries": 3, "context_window": 16, "jobs_dir": "/tmp/j"})"));
  EXPECT_EQ(c.port, 9000);
  EXPECT_FALSE(c.ner);
  EXPECT_EQ(c.llm.endpoint, "http://x:1/completion");
  EXPECT_EQ(c.llm.retries, 3);
  EXPECT_EQ(c.llm.context_window, 16u);
  EXPECT_EQ(c.jobs_dir, "/tmp/j");
  EXPECT_EQ(c.host, "0.0.0.0");
}

TEST(AppConfigTest, UnknownOrMistypedKeys) {
  AppConfig c;
  EXPECT_THROW(apply_config_json(c, json::parse(R"({"prot": 1})")), SchemaError);
  EXPECT_THROW(apply_config_json(c, json::parse(R"({"port": "high"})")), SchemaError);
  EXPECT_THROW(apply_config_json(c, json::parse(R"([1])")), SchemaError);
}

TEST(AppConfigTest, EnvironmentOverridesFile) {
  AppConfig c;
  apply_config_json(c, json::parse(R"({"llm_endpoint": "http://file", "max_upload_bytes": 10})"));
  apply_environment(c, env({{"DEBIAS_LLM_ENDPOINT", "http://env"}, {"DEBIAS_MAX_UPLOAD_BYTES", "2048"}}));
  EXPECT_EQ(c.llm.endpoint, "http://env");
  EXPECT_EQ(c.max_upload_bytes, 2048u);
  apply_environment(c, env({}));
  EXPECT_EQ(c.llm.endpoint, "http://env");
}

TEST(AppConfigTest, BadUploadLimit) {
  AppConfig c;
  EXPECT_THROW(apply_environment(c, env({{"DEBIAS_MAX_UPLOAD_BYTES", "12MB"}})), SchemaError);
  EXPECT_THROW(apply_environment(c, env({{"DEBIAS_MAX_UPLOAD_BYTES", "0"}})), SchemaError);
}

TEST(AppConfigTest, MissingFile) {
  AppConfig c;
  EXPECT_THROW(apply_config_file(c, "/nonexistent/config.json"), Error);
}

TEST(AppConfigTest, LlmClientSelection) {
  AppConfig c;
  EXPECT_EQ(make_llm_client(c), nullptr);
  c.llm.endpoint = "http://127.0.0.1:1/completion";
  auto http = make_llm_client(c);
  ASSERT_NE(http, nullptr);
  EXPECT_EQ(http->backend().endpoint(), c.llm.endpoint);
  c.mock_llm = debias::testing::test_data("mock_llm.json");
  auto mock = make_llm_client(c);
  ASSERT_NE(mock, nullptr);
  EXPECT_EQ(mock->backend().endpoint(), "mock://llm");
}
