#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "debias/errors.hpp"
#include "debias/ner.hpp"
#include "fixtures.hpp"

using namespace debias;

namespace {

const Resources& res() { return *debias::testing::bundled(); }

std::vector<std::pair<std::size_t, std::size_t>> spans(std::string_view text, Language lang) {
  const auto doc = preprocess(text, lang, res().text());
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& e : detect_entities(doc, res().heuristic_ner())) out.emplace_back(e.char_start, e.char_end);
  return out;
}

RawMatch raw(std::size_t start, std::size_t end) {
  RawMatch m;
  m.term_id = "t";
  m.char_start = start;
  m.char_end = end;
  return m;
}

EntitySpan entity(std::size_t start, std::size_t end) {
  return {start, end, EntityKind::person, EntitySource::external};
}

/// Serves a canned NER reply on a free local port.
class FakeNerServer {
 public:
  explicit FakeNerServer(std::string reply, int status = 200) {
    server_.Post("/ner", [reply, status](const httplib::Request&, httplib::Response& res) {
      res.status = status;
      res.set_content(reply, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeNerServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/ner"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(HeuristicNer, NoCapitals) { EXPECT_TRUE(spans("anna went home", Language::en).empty()); }

TEST(HeuristicNer, NameAndPlace) {
  using P = std::pair<std::size_t, std::size_t>;
  EXPECT_EQ(spans("Anna Sordo visited Rome", Language::it), (std::vector<P>{{0, 10}, {19, 23}}));
}

TEST(HeuristicNer, SentenceInitialDictionaryWordIsNotAnEntity) {
  EXPECT_TRUE(spans("Sordo era presente.", Language::it).empty());
}

TEST(HeuristicNer, SentenceInitialAfterPunctuationAndQuotes) {
  // "Caucasian" opens the second sentence (after a quote); "Rome" does not.
  using P = std::pair<std::size_t, std::size_t>;
  EXPECT_EQ(spans("a map. \"Caucasian carpets from Rome", Language::en), (std::vector<P>{{31, 35}}));
}

TEST(HeuristicNer, TitleCasedDictionaryPhraseIsNotAnEntity) {
  EXPECT_TRUE(spans("aid to the Third World", Language::en).empty());
}

TEST(HeuristicNer, Deterministic) {
  const std::string text = "Marco Sordo wrote to Milano about the Caucasian rug";
  EXPECT_EQ(spans(text, Language::it), spans(text, Language::it));
}

TEST(FilterMatches, MatchInsideEntityDropped) {
  const auto result = filter_matches({raw(5, 10)}, {entity(0, 10)});
  EXPECT_TRUE(result.kept.empty());
  ASSERT_EQ(result.dropped.size(), 1u);
}

TEST(FilterMatches, NoEntitiesKeepsEverything) {
  const std::vector<RawMatch> matches = {raw(0, 3), raw(4, 9)};
  const auto result = filter_matches(matches, {});
  EXPECT_EQ(result.kept, matches);
  EXPECT_TRUE(result.dropped.empty());
}

TEST(FilterMatches, AdjacentEntityKeepsMatch) {
  const auto result = filter_matches({raw(10, 15)}, {entity(0, 10), entity(15, 20)});
  EXPECT_EQ(result.kept.size(), 1u);
}

TEST(FilterMatches, PartialOverlapDrops) {
  const auto result = filter_matches({raw(8, 15)}, {entity(0, 9)});
  EXPECT_TRUE(result.kept.empty());
}

TEST(FilterMatches, SordoSurnameScenario) {
  const auto doc = preprocess("Anna Sordo visited Rome", Language::it, res().text());
  const auto matches = find_matches(doc, res().automaton(Language::it));
  ASSERT_EQ(matches.size(), 1u);
  const auto result = filter_matches(matches, detect_entities(doc, res().heuristic_ner()));
  EXPECT_TRUE(result.kept.empty());
  EXPECT_EQ(result.dropped.size(), 1u);
}

TEST(DetectEntities, OverlappingSpansMerge) {
  class Fixed final : public NerBackend {
   public:
    std::vector<EntitySpan> detect(const LemmatizedDocument&) const override {
      return {entity(5, 9), entity(0, 6), entity(12, 14)};
    }
  };
  const auto doc = preprocess("aaaa bbbb cc dd", Language::en, res().text());
  const auto merged = detect_entities(doc, Fixed());
  ASSERT_EQ(merged.size(), 2u);
  EXPECT_EQ(merged[0].char_start, 0u);
  EXPECT_EQ(merged[0].char_end, 9u);
}

TEST(HttpNer, ParsesEntities) {
  FakeNerServer server(R"({"entities": [{"start": 0, "end": 10, "kind": "PER"}]})");
  const HttpNerBackend backend(server.url(), 2000);
  const auto doc = preprocess("Anna Sordo visited Rome", Language::it, res().text());
  const auto found = backend.detect(doc);
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].kind, EntityKind::person);
  EXPECT_EQ(found[0].source, EntitySource::external);
}

TEST(HttpNer, SpanOutsideTextIsABackendError) {
  FakeNerServer server(R"({"entities": [{"start": 0, "end": 99}]})");
  const HttpNerBackend backend(server.url(), 2000);
  const auto doc = preprocess("short", Language::en, res().text());
  EXPECT_THROW(backend.detect(doc), BackendError);
}

TEST(HttpNer, UnreachableIsABackendErrorNamingEndpoint) {
  const HttpNerBackend backend("http://127.0.0.1:1/ner", 500);
  const auto doc = preprocess("text", Language::en, res().text());
  try {
    backend.detect(doc);
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("127.0.0.1:1"), std::string::npos);
  }
}
