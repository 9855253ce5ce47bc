#include "debias/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "debias/batch.hpp"
#include "debias/errors.hpp"
#include "debias/unicode.hpp"

namespace debias {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Dataset

namespace {

std::optional<EvalReject> parse_record(const std::string& line, EvalRecord& out) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    return EvalReject{0, "invalid_json", e.what()};
  }
  if (!doc.is_object()) return EvalReject{0, "invalid_json", "expected an object"};
  for (const char* key : {"text", "language", "term", "char_start", "char_end", "gold"}) {
    if (!doc.contains(key)) return EvalReject{0, "missing_field", key};
  }
  const auto& text = doc["text"];
  const auto& term = doc["term"];
  const auto& start = doc["char_start"];
  const auto& end = doc["char_end"];
  if (!text.is_string()) return EvalReject{0, "bad_field", "text"};
  if (!term.is_string() || term.get_ref<const std::string&>().empty()) return EvalReject{0, "bad_field", "term"};
  if (!start.is_number_unsigned()) return EvalReject{0, "bad_field", "char_start"};
  if (!end.is_number_unsigned()) return EvalReject{0, "bad_field", "char_end"};
  if (!doc["language"].is_string()) return EvalReject{0, "bad_field", "language"};

  const auto lang = parse_language(doc["language"].get<std::string>());
  if (!lang) return EvalReject{0, "unsupported_language", doc["language"].get<std::string>()};
  const std::string gold = doc["gold"].is_string() ? doc["gold"].get<std::string>() : std::string();
  if (gold != "contentious" && gold != "not_contentious") return EvalReject{0, "bad_gold", doc["gold"].dump()};

  out.text = text.get<std::string>();
  if (!unicode::is_valid_utf8(out.text)) return EvalReject{0, "bad_field", "text is not valid UTF-8"};
  out.language = *lang;
  out.term = term.get<std::string>();
  out.char_start = start.get<std::size_t>();
  out.char_end = end.get<std::size_t>();
  out.contentious = gold == "contentious";
  out.source = doc.value("source", "");
  const std::size_t length = unicode::count_code_points(out.text);
  if (out.char_start >= out.char_end || out.char_end > length) {
    return EvalReject{0, "span_out_of_bounds",
                      "[" + std::to_string(out.char_start) + ", " + std::to_string(out.char_end) +
                          ") against length " + std::to_string(length)};
  }
  return std::nullopt;
}

}  // namespace

EvalDataset parse_eval_dataset(std::istream& in) {
  EvalDataset dataset;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    EvalRecord record;
    if (auto reject = parse_record(line, record)) {
      reject->line = number;
      dataset.rejects.push_back(std::move(*reject));
    } else {
      dataset.records.push_back(std::move(record));
    }
  }
  return dataset;
}

EvalDataset load_eval_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read eval dataset '" + path.string() + "'");
  return parse_eval_dataset(in);
}

// ---------------------------------------------------------------------------
// Precision

std::optional<double> PrecisionCounts::precision() const {
  const std::size_t predicted = true_positives + false_positives;
  if (predicted == 0) return std::nullopt;
  return static_cast<double>(true_positives) / static_cast<double>(predicted);
}

namespace {

json counts_json(const PrecisionCounts& c) {
  const auto p = c.precision();
  return {{"records", c.records},
          {"true_positives", c.true_positives},
          {"false_positives", c.false_positives},
          {"unmatched_gold", c.unmatched_gold},
          {"precision", p ? json(*p) : json(nullptr)}};
}

void add(PrecisionCounts& into, const PrecisionCounts& c) {
  into.records += c.records;
  into.true_positives += c.true_positives;
  into.false_positives += c.false_positives;
  into.unmatched_gold += c.unmatched_gold;
}

}  // namespace

json to_json(const PrecisionReport& report) {
  json langs = json::object();
  for (const auto& [lang, c] : report.per_language) langs[std::string(to_string(lang))] = counts_json(c);
  return {{"per_language", std::move(langs)},
          {"micro", counts_json(report.micro)},
          {"macro_precision", report.macro_precision ? json(*report.macro_precision) : json(nullptr)}};
}

PrecisionReport compute_precision(const EvalDataset& dataset, const PipelineConfig& config,
                                  const Resources& resources, std::size_t parallelism) {
  // 0 = unmatched, 1 = TP, 2 = FP
  std::vector<int> outcome(dataset.records.size(), 0);
  std::vector<std::exception_ptr> errors(dataset.records.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.records.size(); i = next++) {
      const EvalRecord& r = dataset.records[i];
      try {
        PipelineConfig c = config;
        c.language = r.language;
        c.diagnostic_mode = false;
        const AnnotatedDocument doc = detect(r.text, c, resources);
        const std::string gold_term = unicode::to_lower(r.term);
        for (const auto& a : doc.annotations) {
          const ContentiousTerm* term = resources.graph().find_term(a.term_id);
          if (!term || unicode::to_lower(term->label) != gold_term) continue;
          if (a.char_start < r.char_end && r.char_start < a.char_end) {
            outcome[i] = r.contentious ? 1 : 2;
            break;
          }
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    const std::size_t n = std::max<std::size_t>(1, std::min(parallelism, dataset.records.size()));
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  PrecisionReport report;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    PrecisionCounts& c = report.per_language[dataset.records[i].language];
    ++c.records;
    if (outcome[i] == 1) ++c.true_positives;
    else if (outcome[i] == 2) ++c.false_positives;
    else ++c.unmatched_gold;
  }
  double sum = 0.0;
  std::size_t defined = 0;
  for (const auto& [lang, c] : report.per_language) {
    add(report.micro, c);
    if (auto p = c.precision()) {
      sum += *p;
      ++defined;
    }
  }
  if (defined > 0) report.macro_precision = sum / static_cast<double>(defined);
  return report;
}

// ---------------------------------------------------------------------------
// Throughput

std::vector<BatchDocument> load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("corpus directory '" + dir.string() + "' not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  if (files.empty()) throw Error("corpus directory '" + dir.string() + "' is empty");
  std::sort(files.begin(), files.end());
  std::vector<BatchDocument> corpus;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    corpus.push_back({std::filesystem::relative(f, dir).generic_string(), ss.str()});
  }
  return corpus;
}

json to_json(const ThroughputReport& report) {
  return {{"documents", report.documents},
          {"characters", report.characters},
          {"warmup", report.warmup},
          {"runs", report.chars_per_second.size()},
          {"run_seconds", report.run_seconds},
          {"chars_per_second", report.chars_per_second},
          {"mean_chars_per_second", report.mean_chars_per_second},
          {"config", report.config}};
}

ThroughputReport measure_throughput(const std::vector<BatchDocument>& corpus, const PipelineConfig& config,
                                    const Resources& resources, std::size_t runs, std::size_t warmup) {
  if (corpus.empty()) throw Error("throughput corpus is empty");
  if (runs < 1) throw Error("throughput needs at least one run");

  ThroughputReport report;
  report.documents = corpus.size();
  for (const auto& d : corpus) report.characters += unicode::count_code_points(d.text);
  report.warmup = warmup;
  report.config = config_snapshot(config);

  PipelineConfig c = config;
  c.diagnostic_mode = false;
  auto pass = [&] {
    if (c.llm_client) c.llm_client->clear_cache();
    const auto start = std::chrono::steady_clock::now();
    for (const auto& d : corpus) detect(d.text, c, resources, d.id);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  for (std::size_t i = 0; i < warmup; ++i) pass();
  for (std::size_t i = 0; i < runs; ++i) {
    const double seconds = pass();
    report.run_seconds.push_back(seconds);
    report.chars_per_second.push_back(seconds > 0 ? static_cast<double>(report.characters) / seconds : 0.0);
  }
  report.mean_chars_per_second =
      std::accumulate(report.chars_per_second.begin(), report.chars_per_second.end(), 0.0) /
      static_cast<double>(report.chars_per_second.size());
  return report;
}

// ---------------------------------------------------------------------------
// Ablation

namespace {

std::size_t backend_calls(const std::shared_ptr<LlmClient>& client) {
  if (!client) return 0;
  if (auto* mock = dynamic_cast<MockLlmBackend*>(&client->backend())) return mock->calls();
  return 0;
}

std::string format_precision(const std::optional<double>& p) {
  if (!p) return "n/a";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << *p;
  return ss.str();
}

}  // namespace

json to_json(const AblationTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    const auto p = r.precision.micro.precision();
    rows.push_back({{"llm", r.llm},
                    {"ner", r.ner},
                    {"precision", p ? json(*p) : json(nullptr)},
                    {"throughput", r.throughput.mean_chars_per_second},
                    {"llm_calls", r.llm_calls},
                    {"precision_report", to_json(r.precision)},
                    {"throughput_report", to_json(r.throughput)}});
  }
  return {{"rows", std::move(rows)}};
}

std::string render_text(const AblationTable& table) {
  std::ostringstream out;
  out << std::left << std::setw(6) << "LLM" << std::setw(6) << "NER" << std::right << std::setw(11) << "Precision"
      << std::setw(14) << "Throughput" << '\n';
  out << std::string(37, '-') << '\n';
  for (const auto& r : table.rows) {
    out << std::left << std::setw(6) << (r.llm ? "on" : "off") << std::setw(6) << (r.ner ? "on" : "off")
        << std::right << std::setw(11) << format_precision(r.precision.micro.precision()) << std::setw(14)
        << static_cast<long long>(r.throughput.mean_chars_per_second + 0.5) << '\n';
  }
  return out.str();
}

AblationTable run_ablation(const EvalDataset& dataset, const std::vector<BatchDocument>& corpus,
                           Language corpus_language, const Resources& resources,
                           std::shared_ptr<LlmClient> llm_client, const AblationOptions& options) {
  AblationTable table;
  for (const bool llm : {false, true}) {
    for (const bool ner : {false, true}) {
      PipelineConfig config;
      config.language = corpus_language;
      config.ner_enabled = ner;
      config.llm_enabled = llm;
      config.ner_backend = options.ner_backend;
      config.llm_client = llm_client;

      AblationRow row;
      row.llm = llm;
      row.ner = ner;
      const std::size_t calls_before = backend_calls(llm_client);
      if (llm_client) llm_client->clear_cache();
      row.precision = compute_precision(dataset, config, resources, options.parallelism);
      row.throughput = measure_throughput(corpus, config, resources, options.runs, options.warmup);
      row.llm_calls = backend_calls(llm_client) - calls_before;
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

std::shared_ptr<MockLlmBackend> gold_aligned_mock(const EvalDataset& dataset) {
  static const std::map<Language, std::pair<std::string, std::string>> answers = {
      {Language::en, {"yes", "no"}}, {Language::de, {"ja", "nein"}}, {Language::nl, {"ja", "nee"}},
      {Language::fr, {"oui", "non"}}, {Language::it, {"sì", "no"}}};
  auto mock = std::make_shared<MockLlmBackend>();
  for (const auto& r : dataset.records) {
    const auto& [yes, no] = answers.at(r.language);
    mock->add_rule({r.term, r.text, r.contentious ? yes : no});
  }
  return mock;
}

}  // namespace debias
