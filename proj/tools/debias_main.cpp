// Command-line front end: serve, detect, batch, eval, bench, ablation, vocab.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "debias/batch.hpp"
#include "debias/config.hpp"
#include "debias/errors.hpp"
#include "debias/evalharness.hpp"
#include "debias/pipeline.hpp"
#include "debias/service.hpp"
#include "debias/vocabulary.hpp"
#include "debias/zip.hpp"

namespace {

using namespace debias;
using nlohmann::json;

struct CommonOptions {
  std::string config_file;
  std::string vocab;
  std::string dicts;
  std::string templates;
  std::string mock_llm;
  std::string llm_endpoint;
  std::string llm_model;
  std::string model_family;
  std::string ner_endpoint;
  bool no_ner = false;
  bool no_llm = false;
  std::size_t parallelism = 0;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config_file, "JSON config file");
  app->add_option("--vocab", o.vocab, "vocabulary JSON");
  app->add_option("--dicts", o.dicts, "dictionary directory");
  app->add_option("--templates", o.templates, "prompt template directory");
  app->add_option("--mock-llm", o.mock_llm, "scripted LLM backend (JSON) instead of HTTP");
  app->add_option("--llm-endpoint", o.llm_endpoint, "completion endpoint URL");
  app->add_option("--llm-model", o.llm_model, "model name sent with each request");
  app->add_option("--model-family", o.model_family, "prompt template family (llama3, mixtral)");
  app->add_option("--ner-endpoint", o.ner_endpoint, "external NER endpoint URL");
  app->add_flag("--no-ner", o.no_ner, "disable the NER filter");
  app->add_flag("--no-llm", o.no_llm, "disable LLM disambiguation");
  app->add_option("--parallelism", o.parallelism, "worker threads");
}

AppConfig resolve(const CommonOptions& o) {
  AppConfig config;
  if (!o.config_file.empty()) apply_config_file(config, o.config_file);
  apply_environment(config, [](const char* name) { return std::getenv(name); });
  if (!o.vocab.empty()) config.paths.vocab = o.vocab;
  if (!o.dicts.empty()) config.paths.dicts = o.dicts;
  if (!o.templates.empty()) config.paths.templates = o.templates;
  if (!o.mock_llm.empty()) config.mock_llm = o.mock_llm;
  if (!o.llm_endpoint.empty()) config.llm.endpoint = o.llm_endpoint;
  if (!o.llm_model.empty()) config.llm.model = o.llm_model;
  if (!o.model_family.empty()) config.llm.model_family = o.model_family;
  if (!o.ner_endpoint.empty()) config.ner_endpoint = o.ner_endpoint;
  if (o.no_ner) config.ner = false;
  if (o.no_llm) config.llm_enabled = false;
  if (o.parallelism > 0) config.parallelism = o.parallelism;
  return config;
}

std::shared_ptr<const Resources> load_resources(const AppConfig& config) {
  std::vector<std::string> warnings;
  auto resources = Resources::load(config.paths, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return resources;
}

PipelineConfig pipeline_config(const AppConfig& app, Language lang) {
  PipelineConfig c;
  c.language = lang;
  c.ner_enabled = app.ner;
  c.llm_enabled = app.llm_enabled;
  if (!app.ner_endpoint.empty()) c.ner_backend = std::make_shared<HttpNerBackend>(app.ner_endpoint);
  c.llm_client = make_llm_client(app);
  return c;
}

Language language_or_die(const std::string& s) {
  auto lang = parse_language(s);
  if (!lang) throw Error("unsupported language '" + s + "'");
  return *lang;
}

std::string read_input(const std::string& path) {
  std::ostringstream ss;
  if (path == "-") {
    ss << std::cin.rdbuf();
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path + "'");
    ss << in.rdbuf();
  }
  return ss.str();
}

void write_output(const std::string& path, std::string_view data) {
  if (path == "-") {
    std::cout << data;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << data;
}

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contentious term detection for cultural-heritage metadata"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  add_common(serve, common);
  std::string host;
  int port = 0;
  std::string jobs_dir, ui_dir;
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port");
  serve->add_option("--jobs-dir", jobs_dir, "batch job storage");
  serve->add_option("--ui-dir", ui_dir, "static UI assets served under /ui/");

  auto* detect_cmd = app.add_subcommand("detect", "annotate one text");
  add_common(detect_cmd, common);
  std::string lang_name = "en", input = "-", output = "-", doc_id;
  bool diagnostics = false;
  detect_cmd->add_option("--lang", lang_name, "text language")->required();
  detect_cmd->add_option("--input", input, "text file or -");
  detect_cmd->add_option("--output", output, "JSON output file or -");
  detect_cmd->add_option("--id", doc_id, "document id");
  detect_cmd->add_flag("--diagnostics", diagnostics, "include filtered detections");

  auto* batch_cmd = app.add_subcommand("batch", "annotate a ZIP of text files");
  add_common(batch_cmd, common);
  std::string zip_in, zip_out;
  batch_cmd->add_option("--zip", zip_in, "input archive")->required();
  batch_cmd->add_option("--lang", lang_name, "text language")->required();
  batch_cmd->add_option("--out", zip_out, "result archive")->required();

  auto* eval_cmd = app.add_subcommand("eval", "precision against a gold JSONL dataset");
  add_common(eval_cmd, common);
  std::string dataset_path;
  eval_cmd->add_option("--dataset", dataset_path, "gold JSONL")->required();

  auto* bench_cmd = app.add_subcommand("bench", "throughput over a corpus directory");
  add_common(bench_cmd, common);
  std::string corpus_dir;
  std::size_t runs = 5, warmup = 1;
  bench_cmd->add_option("--corpus", corpus_dir, "directory of text files")->required();
  bench_cmd->add_option("--lang", lang_name, "corpus language");
  bench_cmd->add_option("--runs", runs, "timed runs")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--warmup", warmup, "untimed warmup runs");

  auto* ablation_cmd = app.add_subcommand("ablation", "precision and throughput for each NER/LLM setting");
  add_common(ablation_cmd, common);
  std::string json_out;
  ablation_cmd->add_option("--dataset", dataset_path, "gold JSONL")->required();
  ablation_cmd->add_option("--corpus", corpus_dir, "directory of text files")->required();
  ablation_cmd->add_option("--lang", lang_name, "corpus language");
  ablation_cmd->add_option("--runs", runs, "timed runs")->check(CLI::PositiveNumber);
  ablation_cmd->add_option("--warmup", warmup, "untimed warmup runs");
  ablation_cmd->add_option("--json", json_out, "also write the table as JSON");

  auto* vocab_cmd = app.add_subcommand("vocab", "validate a vocabulary and print statistics");
  add_common(vocab_cmd, common);

  CLI11_PARSE(app, argc, argv);

  try {
    const AppConfig config = resolve(common);

    if (*vocab_cmd) {
      std::vector<std::string> warnings;
      const VocabularyGraph graph = load_vocabulary_file(config.paths.vocab, &warnings);
      const ValidationReport report = validate(graph);
      json out = {{"stats", to_json(stats(graph))}, {"violations", json::array()}, {"warnings", warnings}};
      for (const auto& v : report.violations)
        out["violations"].push_back({{"kind", std::string(to_string(v.kind))}, {"id", v.record_id}, {"detail", v.message}});
      for (const auto& w : report.warnings) out["warnings"].push_back(w.message);
      std::cout << out.dump(2) << '\n';
      return report.ok() ? 0 : 1;
    }

    const auto resources = load_resources(config);

    if (*serve) {
      AppConfig sc = config;
      if (!host.empty()) sc.host = host;
      if (port != 0) sc.port = port;
      if (!jobs_dir.empty()) sc.jobs_dir = jobs_dir;
      if (!ui_dir.empty()) sc.ui_dir = ui_dir;
      ServiceOptions options;
      options.max_text_bytes = sc.max_text_bytes;
      options.max_upload_bytes = sc.max_upload_bytes;
      options.max_uncompressed_bytes = sc.max_uncompressed_bytes;
      options.parallelism = sc.parallelism;
      options.jobs_dir = sc.jobs_dir;
      options.ui_dir = sc.ui_dir;
      options.ner = sc.ner;
      options.llm = sc.llm_enabled;
      if (!sc.ner_endpoint.empty()) options.ner_backend = std::make_shared<HttpNerBackend>(sc.ner_endpoint);
      options.llm_client = make_llm_client(sc);
      Service service(resources, options);
      const int bound = service.bind(sc.host, sc.port);
      if (bound < 0) throw Error("cannot bind " + sc.host + ":" + std::to_string(sc.port));
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << sc.host << ':' << bound << '\n';
      service.run();
      g_service = nullptr;
      return 0;
    }

    if (*detect_cmd) {
      PipelineConfig pc = pipeline_config(config, language_or_die(lang_name));
      pc.diagnostic_mode = diagnostics;
      const AnnotatedDocument doc = detect(read_input(input), pc, *resources, doc_id);
      write_output(output, to_json(doc).dump(2) + "\n");
      return 0;
    }

    if (*batch_cmd) {
      const PipelineConfig pc = pipeline_config(config, language_or_die(lang_name));
      const ZipBatchInput in = read_zip_batch(read_input(zip_in), config.max_uncompressed_bytes);
      const ZipBatchOutput out = run_zip_batch(in, pc, *resources, config.parallelism, config_snapshot(pc));
      write_output(zip_out, out.archive);
      std::cerr << out.report["documents"] << " documents, " << out.report["annotations"] << " annotations\n";
      return out.report["failures"].empty() ? 0 : 2;
    }

    if (*eval_cmd) {
      const EvalDataset dataset = load_eval_dataset(dataset_path);
      for (const auto& r : dataset.rejects)
        std::cerr << "line " << r.line << ": rejected (" << r.reason << ") " << r.detail << '\n';
      PipelineConfig pc = pipeline_config(config, Language::en);
      const PrecisionReport report = compute_precision(dataset, pc, *resources, config.parallelism);
      std::cout << to_json(report).dump(2) << '\n';
      return 0;
    }

    if (*bench_cmd) {
      const PipelineConfig pc = pipeline_config(config, language_or_die(lang_name));
      const ThroughputReport report = measure_throughput(load_corpus(corpus_dir), pc, *resources, runs, warmup);
      std::cout << to_json(report).dump(2) << '\n';
      return 0;
    }

    if (*ablation_cmd) {
      const EvalDataset dataset = load_eval_dataset(dataset_path);
      const PipelineConfig pc = pipeline_config(config, language_or_die(lang_name));
      if (!pc.llm_client) throw Error("ablation needs an LLM backend (--mock-llm or --llm-endpoint)");
      AblationOptions options;
      options.runs = runs;
      options.warmup = warmup;
      options.parallelism = config.parallelism;
      options.ner_backend = pc.ner_backend;
      const AblationTable table = run_ablation(dataset, load_corpus(corpus_dir), pc.language, *resources,
                                               pc.llm_client, options);
      std::cout << render_text(table);
      if (!json_out.empty()) write_output(json_out, to_json(table).dump(2) + "\n");
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
