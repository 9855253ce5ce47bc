#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "debias/errors.hpp"
#include "debias/evalharness.hpp"
#include "fixtures.hpp"

using namespace debias;
using nlohmann::json;

namespace {

const Resources& res() { return *debias::testing::bundled(); }

EvalDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_eval_dataset(in);
}

EvalDataset gold() { return load_eval_dataset(debias::testing::test_data("ablation_gold.jsonl")); }

// Expected precision per stage setting, derived only from the source tags of
// the fixture: the NER stage removes entity confounders, the LLM stage
// removes ambiguous negatives, everything else is detected.
double expected_precision(const EvalDataset& d, bool llm, bool ner) {
  std::size_t tp = 0, fp = 0;
  for (const auto& r : d.records) {
    if (ner && r.source == "entity_confounder") continue;
    if (llm && r.source == "ambig_false") continue;
    (r.contentious ? tp : fp) += 1;
  }
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

}  // namespace

TEST(EvalDataset, Rejects) {
  const auto d = parse(
      "{\"text\": \"the Third World\", \"language\": \"en\", \"term\": \"Third World\", \"char_start\": 4, "
      "\"char_end\": 15, \"gold\": \"contentious\"}\n"
      "\n"
      "not json\n"
      "{\"text\": \"x\", \"language\": \"en\", \"term\": \"x\", \"char_start\": 0, \"char_end\": 1}\n"
      "{\"text\": \"x\", \"language\": \"es\", \"term\": \"x\", \"char_start\": 0, \"char_end\": 1, \"gold\": \"contentious\"}\n"
      "{\"text\": \"x\", \"language\": \"en\", \"term\": \"x\", \"char_start\": 0, \"char_end\": 1, \"gold\": \"maybe\"}\n"
      "{\"text\": \"xé\", \"language\": \"en\", \"term\": \"x\", \"char_start\": 1, \"char_end\": 3, \"gold\": \"contentious\"}\n"
      "{\"text\": \"x\", \"language\": \"en\", \"term\": \"x\", \"char_start\": -1, \"char_end\": 1, \"gold\": \"contentious\"}\n");
  ASSERT_EQ(d.records.size(), 1u);
  EXPECT_EQ(d.records[0].char_end, 15u);
  ASSERT_EQ(d.rejects.size(), 6u);
  EXPECT_EQ(d.rejects[0].line, 3u);
  EXPECT_EQ(d.rejects[0].reason, "invalid_json");
  EXPECT_EQ(d.rejects[1].reason, "missing_field");
  EXPECT_EQ(d.rejects[2].reason, "unsupported_language");
  EXPECT_EQ(d.rejects[3].reason, "bad_gold");
  EXPECT_EQ(d.rejects[4].reason, "span_out_of_bounds");
  EXPECT_EQ(d.rejects[5].reason, "bad_field");
}

TEST(EvalDataset, FixtureLoadsCleanly) {
  const auto d = gold();
  EXPECT_EQ(d.records.size(), 100u);
  EXPECT_TRUE(d.rejects.empty());
  EXPECT_THROW(load_eval_dataset("/nonexistent.jsonl"), Error);
}

TEST(Precision, CountsOncePerRecord) {
  const auto d = parse(
      "{\"text\": \"the Third World and the Third World\", \"language\": \"en\", \"term\": \"third world\", "
      "\"char_start\": 4, \"char_end\": 15, \"gold\": \"contentious\"}\n"
      "{\"text\": \"a savage attack\", \"language\": \"en\", \"term\": \"savage\", \"char_start\": 2, \"char_end\": 8, "
      "\"gold\": \"not_contentious\"}\n"
      "{\"text\": \"nothing here\", \"language\": \"en\", \"term\": \"savage\", \"char_start\": 0, \"char_end\": 7, "
      "\"gold\": \"contentious\"}\n"
      "{\"text\": \"a savage attack\", \"language\": \"en\", \"term\": \"Third World\", \"char_start\": 2, \"char_end\": 8, "
      "\"gold\": \"not_contentious\"}\n");
  PipelineConfig c;
  c.llm_enabled = false;
  const auto report = compute_precision(d, c, res());
  EXPECT_EQ(report.micro.records, 4u);
  EXPECT_EQ(report.micro.true_positives, 1u);
  EXPECT_EQ(report.micro.false_positives, 1u);
  EXPECT_EQ(report.micro.unmatched_gold, 2u);
  EXPECT_DOUBLE_EQ(*report.micro.precision(), 0.5);
  const json j = to_json(report);
  EXPECT_EQ(j.at("per_language").at("en").at("true_positives"), 1);
  EXPECT_DOUBLE_EQ(j.at("macro_precision").get<double>(), 0.5);
}

TEST(Precision, UndefinedWhenNothingPredicted) {
  const auto d = parse(
      "{\"text\": \"nothing\", \"language\": \"en\", \"term\": \"race\", \"char_start\": 0, \"char_end\": 7, "
      "\"gold\": \"contentious\"}\n");
  PipelineConfig c;
  c.llm_enabled = false;
  const auto report = compute_precision(d, c, res());
  EXPECT_FALSE(report.micro.precision().has_value());
  EXPECT_TRUE(to_json(report).at("micro").at("precision").is_null());
  EXPECT_FALSE(report.macro_precision.has_value());
}

TEST(Precision, ParallelismIndependent) {
  const auto d = gold();
  PipelineConfig c;
  c.llm_client = std::make_shared<LlmClient>(LlmClientConfig{}, gold_aligned_mock(d));
  const auto one = compute_precision(d, c, res(), 1);
  const auto four = compute_precision(d, c, res(), 4);
  EXPECT_EQ(to_json(one), to_json(four));
}

TEST(Ablation, FixturePrecisionMatchesSourceTags) {
  const auto d = gold();
  const std::vector<BatchDocument> corpus = {{"a", "the Third World and a human race"}, {"b", "nothing"}};
  auto mock = gold_aligned_mock(d);
  mock->set_default_answer("yes");
  auto client = std::make_shared<LlmClient>(LlmClientConfig{}, mock);
  AblationOptions o;
  o.runs = 1;
  o.warmup = 0;
  const auto table = run_ablation(d, corpus, Language::en, res(), client, o);
  ASSERT_EQ(table.rows.size(), 4u);
  const std::vector<std::pair<bool, bool>> order = {{false, false}, {false, true}, {true, false}, {true, true}};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& row = table.rows[i];
    EXPECT_EQ(row.llm, order[i].first);
    EXPECT_EQ(row.ner, order[i].second);
    ASSERT_TRUE(row.precision.micro.precision().has_value());
    EXPECT_NEAR(*row.precision.micro.precision(), expected_precision(d, row.llm, row.ner), 1e-12) << i;
    EXPECT_EQ(row.llm_calls > 0, row.llm) << i;
  }
  EXPECT_NEAR(*table.rows[0].precision.micro.precision(), 0.70, 1e-12);
  EXPECT_NEAR(*table.rows[3].precision.micro.precision(), 0.875, 1e-12);
  const std::string text = render_text(table);
  EXPECT_NE(text.find("0.88"), std::string::npos);
  EXPECT_EQ(to_json(table).at("rows").size(), 4u);
}

TEST(Throughput, Report) {
  const std::vector<BatchDocument> corpus = {{"a", "héllo the Third World"}, {"b", "über"}};
  PipelineConfig c;
  c.llm_enabled = false;
  const auto r = measure_throughput(corpus, c, res(), 3, 1);
  EXPECT_EQ(r.documents, 2u);
  EXPECT_EQ(r.characters, 25u);
  EXPECT_EQ(r.run_seconds.size(), 3u);
  EXPECT_GT(r.mean_chars_per_second, 0.0);
  EXPECT_EQ(to_json(r).at("runs"), 3);
  EXPECT_THROW(measure_throughput({}, c, res()), Error);
  EXPECT_THROW(measure_throughput(corpus, c, res(), 0), Error);
}

TEST(Throughput, CacheClearedBetweenPasses) {
  auto mock = std::make_shared<MockLlmBackend>();
  mock->set_default_answer("yes");
  PipelineConfig c;
  c.llm_client = std::make_shared<LlmClient>(LlmClientConfig{}, mock);
  measure_throughput({{"a", "a horse race"}}, c, res(), 4, 1);
  EXPECT_EQ(mock->calls(), 5u);
}

TEST(Corpus, LoadSortedRecursive) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("debias_corpus_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir / "sub");
  std::ofstream(dir / "b.txt") << "B";
  std::ofstream(dir / "sub" / "a.txt") << "A";
  std::ofstream(dir / "a.txt") << "first";
  const auto corpus = load_corpus(dir);
  ASSERT_EQ(corpus.size(), 3u);
  EXPECT_EQ(corpus[0].id, "a.txt");
  EXPECT_EQ(corpus[1].id, "b.txt");
  EXPECT_EQ(corpus[2].id, "sub/a.txt");
  fs::create_directories(dir / "empty");
  EXPECT_THROW(load_corpus(dir / "empty"), Error);
}
